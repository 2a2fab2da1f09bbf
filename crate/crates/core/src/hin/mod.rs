//! Heterogeneous information network construction from record-oriented
//! social data.
//!
//! Three node types (texts, users, entities) and five edge types:
//! user-text / text-user (authorship), text-entity / entity-text (mention),
//! and user-user (co-mention of at least one common entity). Every adjacency
//! matrix is row-normalized so downstream chain products aggregate neighbor
//! features as convex combinations; rows with no neighbors stay all-zero.

mod embed;
mod record;
mod synthetic;
mod text;

pub use embed::{EmbedderKind, EmbedderSpec, TextEmbedder, EMBED_DIM};
pub use record::{load_corpus, num_classes, write_corpus, RawRecord};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use text::{preprocess_text, STOP_WORDS};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// The three node types of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeType {
    Text,
    User,
    Entity,
}

impl NodeType {
    pub fn code(self) -> char {
        match self {
            NodeType::Text => 'T',
            NodeType::User => 'U',
            NodeType::Entity => 'E',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'T' => Some(NodeType::Text),
            'U' => Some(NodeType::User),
            'E' => Some(NodeType::Entity),
            _ => None,
        }
    }
}

/// The five valid ordered node-type pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    UserText,
    TextUser,
    TextEntity,
    EntityText,
    UserUser,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::UserText,
        EdgeType::TextUser,
        EdgeType::TextEntity,
        EdgeType::EntityText,
        EdgeType::UserUser,
    ];

    pub fn endpoints(self) -> (NodeType, NodeType) {
        match self {
            EdgeType::UserText => (NodeType::User, NodeType::Text),
            EdgeType::TextUser => (NodeType::Text, NodeType::User),
            EdgeType::TextEntity => (NodeType::Text, NodeType::Entity),
            EdgeType::EntityText => (NodeType::Entity, NodeType::Text),
            EdgeType::UserUser => (NodeType::User, NodeType::User),
        }
    }

    /// The edge type between two node types, if the schema has one.
    pub fn between(src: NodeType, dst: NodeType) -> Option<EdgeType> {
        EdgeType::ALL
            .into_iter()
            .find(|e| e.endpoints() == (src, dst))
    }
}

/// Immutable typed graph: per-type features and per-edge-type row-normalized
/// sparse adjacency.
#[derive(Clone, Debug)]
pub struct HeteroGraph {
    features: BTreeMap<NodeType, Mat>,
    adjacency: BTreeMap<EdgeType, CsrMatrix>,
    entity_vocab: Vec<String>,
    user_ids: Vec<u64>,
}

impl HeteroGraph {
    /// Assemble a graph from parts, validating shapes and row normalization.
    /// Adjacency values are normalized here, so callers may pass raw weights.
    pub fn from_parts(
        features: BTreeMap<NodeType, Mat>,
        adjacency: BTreeMap<EdgeType, CsrMatrix>,
        entity_vocab: Vec<String>,
        user_ids: Vec<u64>,
    ) -> Result<Self> {
        for node_type in [NodeType::Text, NodeType::User, NodeType::Entity] {
            if !features.contains_key(&node_type) {
                return Err(Error::Dimension(format!(
                    "missing feature matrix for {node_type:?}"
                )));
            }
        }
        let mut normalized = BTreeMap::new();
        for edge_type in EdgeType::ALL {
            let adj = adjacency.get(&edge_type).ok_or_else(|| {
                Error::Dimension(format!("missing adjacency for {edge_type:?}"))
            })?;
            let (src, dst) = edge_type.endpoints();
            let (want_rows, want_cols) =
                (features[&src].rows(), features[&dst].rows());
            if adj.rows() != want_rows || adj.cols() != want_cols {
                return Err(Error::Dimension(format!(
                    "{edge_type:?} adjacency is {}x{}, want {want_rows}x{want_cols}",
                    adj.rows(),
                    adj.cols()
                )));
            }
            normalized.insert(edge_type, adj.row_normalized());
        }
        Ok(Self {
            features,
            adjacency: normalized,
            entity_vocab,
            user_ids,
        })
    }

    pub fn node_count(&self, node_type: NodeType) -> usize {
        self.features[&node_type].rows()
    }

    pub fn features(&self, node_type: NodeType) -> &Mat {
        &self.features[&node_type]
    }

    pub fn adjacency(&self, edge_type: EdgeType) -> &CsrMatrix {
        &self.adjacency[&edge_type]
    }

    pub fn entity_vocab(&self) -> &[String] {
        &self.entity_vocab
    }

    pub fn entity_index(&self, entity: &str) -> Option<usize> {
        self.entity_vocab.iter().position(|e| e == entity)
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    /// Input feature width per node type (102 / 102 / vocabulary size).
    pub fn feature_dim(&self, node_type: NodeType) -> usize {
        self.features[&node_type].cols()
    }
}

/// First-appearance index over the distinct users and entities of a corpus.
struct CorpusIndex {
    user_ids: Vec<u64>,
    user_index: HashMap<u64, usize>,
    entity_vocab: Vec<String>,
    entity_index: HashMap<String, usize>,
}

fn index_corpus(records: &[RawRecord]) -> CorpusIndex {
    let mut user_ids = Vec::new();
    let mut user_index = HashMap::new();
    let mut entity_vocab = Vec::new();
    let mut entity_index = HashMap::new();
    for record in records {
        user_index.entry(record.user_id).or_insert_with(|| {
            user_ids.push(record.user_id);
            user_ids.len() - 1
        });
        for entity in &record.entities {
            if !entity_index.contains_key(entity) {
                entity_index.insert(entity.clone(), entity_vocab.len());
                entity_vocab.push(entity.clone());
            }
        }
    }
    CorpusIndex {
        user_ids,
        user_index,
        entity_vocab,
        entity_index,
    }
}

const SECONDS_PER_WEEK: i64 = 7 * 86_400;

/// Two-component temporal encoding: min-max normalized epoch time over the
/// corpus (0 by convention when all timestamps coincide) and the fraction of
/// the week elapsed, in [0, 1). The week anchor is the epoch's.
fn temporal_encoding(ts: i64, min_ts: i64, max_ts: i64) -> (f64, f64) {
    let span = (max_ts - min_ts) as f64;
    let minmax = if span > 0.0 {
        (ts - min_ts) as f64 / span
    } else {
        0.0
    };
    let week_fraction = ts.rem_euclid(SECONDS_PER_WEEK) as f64 / SECONDS_PER_WEEK as f64;
    (minmax, week_fraction)
}

/// Two-component location encoding: (lat/90, lon/180), zeros when absent.
fn location_encoding(location: Option<(f64, f64)>) -> (f64, f64) {
    match location {
        Some((lat, lon)) => (lat / 90.0, lon / 180.0),
        None => (0.0, 0.0),
    }
}

/// Raw node feature matrices for texts, users, and entities.
///
/// Text rows are the 100-d text embedding plus the 2-d temporal encoding.
/// User rows are the 100-d embedding of the stop-word-filtered union of the
/// user's tokens plus the 2-d location encoding (mean over the user's
/// geotagged records, zeros when none). Entity rows are one-hot over the
/// entity vocabulary.
pub fn build_node_features(
    records: &[RawRecord],
    embedder_spec: &EmbedderSpec,
) -> Result<(Mat, Mat, Mat)> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    let embedder = embedder_spec.build()?;
    let index = index_corpus(records);
    let dim = embedder.dimension();

    let min_ts = records.iter().map(|r| r.timestamp).min().unwrap();
    let max_ts = records.iter().map(|r| r.timestamp).max().unwrap();

    let mut f_text = Mat::zeros(records.len(), dim + 2);
    let mut user_tokens: Vec<BTreeSet<String>> = vec![BTreeSet::new(); index.user_ids.len()];
    let mut user_locations: Vec<Vec<(f64, f64)>> = vec![Vec::new(); index.user_ids.len()];

    for (i, record) in records.iter().enumerate() {
        let tokens = preprocess_text(&record.text);
        let embedding = embedder.embed(&tokens);
        let (minmax, week) = temporal_encoding(record.timestamp, min_ts, max_ts);
        let row = f_text.row_mut(i);
        row[..dim].copy_from_slice(&embedding);
        row[dim] = minmax;
        row[dim + 1] = week;

        let u = index.user_index[&record.user_id];
        user_tokens[u].extend(tokens);
        if let Some(loc) = record.location {
            user_locations[u].push(loc);
        }
    }

    let mut f_user = Mat::zeros(index.user_ids.len(), dim + 2);
    for u in 0..index.user_ids.len() {
        let tokens: Vec<String> = user_tokens[u].iter().cloned().collect();
        let embedding = embedder.embed(&tokens);
        let locs = &user_locations[u];
        let mean_loc = if locs.is_empty() {
            None
        } else {
            let n = locs.len() as f64;
            Some((
                locs.iter().map(|l| l.0).sum::<f64>() / n,
                locs.iter().map(|l| l.1).sum::<f64>() / n,
            ))
        };
        let (lat, lon) = location_encoding(mean_loc);
        let row = f_user.row_mut(u);
        row[..dim].copy_from_slice(&embedding);
        row[dim] = lat;
        row[dim + 1] = lon;
    }

    let n = index.entity_vocab.len();
    let mut f_entity = Mat::zeros(n, n);
    for e in 0..n {
        f_entity.set(e, e, 1.0);
    }

    Ok((f_text, f_user, f_entity))
}

/// Build the full graph from a corpus. Pure in (records, embedder spec).
pub fn build_graph(records: &[RawRecord], embedder_spec: &EmbedderSpec) -> Result<HeteroGraph> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    let (f_text, f_user, f_entity) = build_node_features(records, embedder_spec)?;
    let index = index_corpus(records);
    let num_texts = records.len();
    let num_users = index.user_ids.len();
    let num_entities = index.entity_vocab.len();

    // Authorship: user -> text, with text -> user as the transposed pattern.
    let mut user_text = Vec::with_capacity(num_texts);
    for (t, record) in records.iter().enumerate() {
        let u = index.user_index[&record.user_id];
        user_text.push((u, t, 1.0));
    }
    let a_user_text = CsrMatrix::from_triplets(num_users, num_texts, &user_text);
    let a_text_user = a_user_text.transpose();

    // Mention: text -> entity (deduplicated per record), entity -> text transposed.
    let mut text_entity = Vec::new();
    let mut entity_users: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_entities];
    for (t, record) in records.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for entity in &record.entities {
            let e = index.entity_index[entity];
            if seen.insert(e) {
                text_entity.push((t, e, 1.0));
                entity_users[e].insert(index.user_index[&record.user_id]);
            }
        }
    }
    let a_text_entity = CsrMatrix::from_triplets(num_texts, num_entities, &text_entity);
    let a_entity_text = a_text_entity.transpose();

    // Co-mention: symmetric user-user edges for users sharing an entity.
    let mut user_user_pairs = BTreeSet::new();
    for users in &entity_users {
        let users: Vec<usize> = users.iter().copied().collect();
        for (i, &a) in users.iter().enumerate() {
            for &b in &users[i + 1..] {
                user_user_pairs.insert((a, b));
                user_user_pairs.insert((b, a));
            }
        }
    }
    let user_user: Vec<(usize, usize, f64)> = user_user_pairs
        .into_iter()
        .map(|(a, b)| (a, b, 1.0))
        .collect();
    let a_user_user = CsrMatrix::from_triplets(num_users, num_users, &user_user);

    let mut features = BTreeMap::new();
    features.insert(NodeType::Text, f_text);
    features.insert(NodeType::User, f_user);
    features.insert(NodeType::Entity, f_entity);

    let mut adjacency = BTreeMap::new();
    adjacency.insert(EdgeType::UserText, a_user_text);
    adjacency.insert(EdgeType::TextUser, a_text_user);
    adjacency.insert(EdgeType::TextEntity, a_text_entity);
    adjacency.insert(EdgeType::EntityText, a_entity_text);
    adjacency.insert(EdgeType::UserUser, a_user_user);

    HeteroGraph::from_parts(features, adjacency, index.entity_vocab, index.user_ids)
}
