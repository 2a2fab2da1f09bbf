//! The outer training loop: alternate backbone optimization on sampled path
//! subsets with frozen-model importance evaluation and importance updates,
//! then final top-K selection and test evaluation.
//!
//! The two phases are strictly exclusive: the importance vector is read-only
//! while the backbone trains, and the backbone is frozen (eval mode, no
//! parameter or buffer writes) while paths are being scored.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::backbone::{BackboneModel, FeatureDims, ModelConfig};
use crate::error::{Error, Result};
use crate::hin::{build_graph, num_classes, EmbedderSpec, NodeType, RawRecord};
use crate::importance::{evaluate_path, ImportanceVector, NormMode};
use crate::metapath::{construct_all, MetaPathCatalog, MetaPathFeatureSet};
use crate::metrics::{macro_f1, micro_f1};
use crate::sampling::{SamplerState, SamplerStrategy};
use crate::seeding::{derive_seed, derive_seed_indexed};

/// Everything a full run needs. Defaults are the reference configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub max_hops: usize,
    /// Paths sampled per inner epoch (k).
    pub sample_k: usize,
    /// Paths selected at the end (top-K).
    pub top_k: usize,
    /// Inner epochs per backbone phase (N).
    pub inner_epochs: usize,
    /// Hard cap on outer iterations.
    pub outer_budget: usize,
    /// Convergence: importance L1 change below this ...
    pub convergence_tol: f64,
    /// ... for this many consecutive outer iterations.
    pub convergence_window: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub strategy: SamplerStrategy,
    pub epsilon0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub norm_mode: NormMode,
    /// Score every path each cycle instead of only the sampled ones.
    pub evaluate_all: bool,
    pub model: ModelConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let inner_epochs = 10;
        Self {
            max_hops: 5,
            sample_k: 10,
            top_k: 10,
            inner_epochs,
            outer_budget: model.epochs.div_ceil(inner_epochs),
            convergence_tol: 1e-4,
            convergence_window: 5,
            train_frac: 0.7,
            val_frac: 0.1,
            test_frac: 0.2,
            strategy: SamplerStrategy::MultinomialEpsilonGreedy,
            epsilon0: 0.5,
            beta: 0.99,
            gamma: 0.5,
            norm_mode: NormMode::L1,
            evaluate_all: false,
            model,
            seed: 666,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if self.train_frac <= 0.0 || self.val_frac <= 0.0 || self.test_frac <= 0.0 {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        if self.sample_k == 0 || self.top_k == 0 {
            return Err(Error::Config("k and top_k must be >= 1".into()));
        }
        if self.inner_epochs == 0 || self.outer_budget == 0 {
            return Err(Error::Config("inner_epochs and outer_budget must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon0) {
            return Err(Error::Config(format!(
                "epsilon0 must be in [0, 1], got {}",
                self.epsilon0
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) || self.beta == 0.0 {
            return Err(Error::Config(format!(
                "beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Disjoint, exhaustive index sets over a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder apportionment of `n` into three parts.
fn apportion(n: usize, fractions: (f64, f64, f64)) -> (usize, usize, usize) {
    let ideals = [
        fractions.0 * n as f64,
        fractions.1 * n as f64,
        fractions.2 * n as f64,
    ];
    let mut counts = [0usize; 3];
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    let mut used = 0usize;
    for (i, ideal) in ideals.iter().enumerate() {
        counts[i] = ideal.floor() as usize;
        used += counts[i];
        remainders.push((i, ideal - ideal.floor()));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (i, _) in remainders.into_iter().take(n - used) {
        counts[i] += 1;
    }
    (counts[0], counts[1], counts[2])
}

/// Stratified split: global sizes follow the fractions exactly (largest
/// remainder over the whole corpus), stratification distributes them across
/// classes as proportionally as the class sizes permit. A class that ends up
/// with no training members produces a warning on stderr, not an error.
pub fn split(labels: &[u32], fractions: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty corpus".into()));
    }
    let n = labels.len();
    let (global_train, global_val, _) = apportion(n, fractions);

    let mut per_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        per_class.entry(label).or_default().push(i);
    }
    let class_ids: Vec<u32> = per_class.keys().copied().collect();
    let sizes: Vec<usize> = class_ids.iter().map(|c| per_class[c].len()).collect();

    // Per-class allocation toward a global target by largest remainder,
    // capped by each class's remaining capacity.
    let allocate = |target: usize, capacity: &[usize]| -> Vec<usize> {
        let total: usize = capacity.iter().sum();
        let mut counts: Vec<usize> = capacity
            .iter()
            .map(|&cap| ((target as f64) * (cap as f64) / (total as f64)).floor() as usize)
            .collect();
        for (count, &cap) in counts.iter_mut().zip(capacity) {
            *count = (*count).min(cap);
        }
        let mut remainders: Vec<(usize, f64)> = capacity
            .iter()
            .enumerate()
            .map(|(i, &cap)| {
                let ideal = (target as f64) * (cap as f64) / (total as f64);
                (i, ideal - ideal.floor())
            })
            .collect();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut deficit = target - counts.iter().sum::<usize>().min(target);
        // First pass by remainder, then round-robin if capacity blocked.
        while deficit > 0 {
            let mut progressed = false;
            for &(i, _) in &remainders {
                if deficit == 0 {
                    break;
                }
                if counts[i] < capacity[i] {
                    counts[i] += 1;
                    deficit -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        counts
    };

    let train_alloc = allocate(global_train, &sizes);
    let capacity_after: Vec<usize> = sizes
        .iter()
        .zip(&train_alloc)
        .map(|(&s, &t)| s - t)
        .collect();
    let val_alloc = allocate(global_val, &capacity_after);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (ci, class) in class_ids.iter().enumerate() {
        let mut indices = per_class[class].clone();
        indices.shuffle(&mut rng);
        let t = train_alloc[ci];
        let v = val_alloc[ci];
        if t == 0 {
            eprintln!("warning: class {class} has no training members after split");
        }
        result.train.extend(&indices[..t]);
        result.val.extend(&indices[t..t + v]);
        result.test.extend(&indices[t + v..]);
    }
    result.train.sort_unstable();
    result.val.sort_unstable();
    result.test.sort_unstable();
    Ok(result)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub construct_secs: f64,
    pub backbone_secs: f64,
    pub importance_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterIterationLog {
    pub iteration: u64,
    pub mean_train_loss: f64,
    pub val_micro: f64,
    pub val_macro: f64,
    pub mu_l1_change: f64,
}

/// Outcome of a full run: the trained model, the final importance state,
/// everything needed to evaluate and ablate without re-running.
#[derive(Clone, Debug)]
pub struct TrainResult {
    pub model: BackboneModel,
    pub importance: ImportanceVector,
    pub catalog: MetaPathCatalog,
    pub features: MetaPathFeatureSet,
    pub split: SplitIndices,
    pub labels: Vec<u32>,
    pub num_classes: usize,
    /// Importance snapshot per outer iteration, including the initial state.
    pub trajectory: Vec<(u64, Vec<f64>)>,
    pub iteration_log: Vec<OuterIterationLog>,
    /// Top-K (canonical name, weight), descending.
    pub ranked: Vec<(String, f64)>,
    pub test_micro: f64,
    pub test_macro: f64,
    pub outer_iterations: u64,
    pub timings: PhaseTimings,
}

impl TrainResult {
    /// Per-iteration metrics CSV. Timing is deliberately excluded so two runs
    /// with the same seed produce byte-identical files.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("iteration,mean_train_loss,val_micro_f1,val_macro_f1,mu_l1_change\n");
        for row in &self.iteration_log {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                row.iteration, row.mean_train_loss, row.val_micro, row.val_macro, row.mu_l1_change
            ));
        }
        out
    }

    /// Importance trajectory CSV: one row per (iteration, path).
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("iteration,canonical_name,weight\n");
        for (iteration, weights) in &self.trajectory {
            for (m, weight) in weights.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{:.6}\n",
                    iteration,
                    self.catalog.get(m).canonical_name(),
                    weight
                ));
            }
        }
        out
    }

    /// Ranked-paths file: canonical name and weight, tab-separated.
    pub fn ranked_tsv(&self) -> String {
        let mut out = String::new();
        for (name, weight) in &self.ranked {
            out.push_str(&format!("{name}\t{weight:.6}\n"));
        }
        out
    }
}

struct Pipeline {
    catalog: MetaPathCatalog,
    features: MetaPathFeatureSet,
    labels: Vec<u32>,
    classes: usize,
    split: SplitIndices,
    dims: FeatureDims,
    construct_secs: f64,
}

fn prepare(config: &RunConfig, records: &[RawRecord]) -> Result<Pipeline> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    let start = Instant::now();
    let embedder = EmbedderSpec::hashing(derive_seed(config.seed, "embedder"));
    let graph = build_graph(records, &embedder)?;
    let catalog = MetaPathCatalog::enumerate(config.max_hops);
    let m = catalog.len();
    if config.sample_k > m {
        return Err(Error::Config(format!(
            "k = {} exceeds the {} paths available at {} hops",
            config.sample_k, m, config.max_hops
        )));
    }
    if config.top_k > m {
        return Err(Error::Config(format!(
            "top_k = {} exceeds the {} paths available",
            config.top_k, m
        )));
    }
    let features = construct_all(&graph, &catalog)?;
    let construct_secs = start.elapsed().as_secs_f64();

    let labels: Vec<u32> = records.iter().map(|r| r.label).collect();
    let classes = num_classes(records);
    if classes < 2 {
        return Err(Error::Config("corpus has fewer than two classes".into()));
    }
    let split = split(
        &labels,
        (config.train_frac, config.val_frac, config.test_frac),
        derive_seed(config.seed, "split"),
    )?;
    for (name, part) in [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ] {
        if part.is_empty() {
            return Err(Error::Config(format!(
                "{name} split is empty; corpus too small for the fractions"
            )));
        }
    }
    let dims = FeatureDims {
        text: graph.feature_dim(NodeType::Text),
        user: graph.feature_dim(NodeType::User),
        entity: graph.feature_dim(NodeType::Entity),
    };
    Ok(Pipeline {
        catalog,
        features,
        labels,
        classes,
        split,
        dims,
        construct_secs,
    })
}

/// Full run from a corpus: build, enumerate, construct, then alternate
/// backbone training and importance updates until the budget or the
/// convergence window is hit, and evaluate the top-K selection on test.
pub fn run(config: &RunConfig, records: &[RawRecord]) -> Result<TrainResult> {
    let pipeline = prepare(config, records)?;
    let mut model_config = config.model.clone();
    model_config.seed = derive_seed(config.seed, "model");
    let model = BackboneModel::new(&model_config, pipeline.dims, pipeline.classes)?;
    let importance = ImportanceVector::init(pipeline.catalog.len(), config.gamma, config.norm_mode)?;
    let sampler = SamplerState::new(
        config.strategy,
        config.epsilon0,
        config.beta,
        derive_seed(config.seed, "sampler"),
    );
    run_loop(config, pipeline, model, importance, sampler)
}

/// Continue a run from a restored model and importance vector at iteration
/// `importance.t`. The sampler resumes its schedule at that iteration on a
/// freshly derived stream.
pub fn resume(
    config: &RunConfig,
    records: &[RawRecord],
    model: BackboneModel,
    importance: ImportanceVector,
) -> Result<TrainResult> {
    let pipeline = prepare(config, records)?;
    if importance.len() != pipeline.catalog.len() {
        return Err(Error::Config(format!(
            "importance vector has {} entries but the catalog has {} paths",
            importance.len(),
            pipeline.catalog.len()
        )));
    }
    let mut sampler = SamplerState::new(
        config.strategy,
        config.epsilon0,
        config.beta,
        derive_seed_indexed(config.seed, "sampler-resume", importance.t),
    );
    for _ in 0..importance.t {
        sampler.advance();
    }
    run_loop(config, pipeline, model, importance, sampler)
}

/// Rebuild an evaluable result from a restored model and importance vector:
/// features and splits are reconstructed deterministically from the config,
/// the ranking and test metrics are recomputed, and no training happens.
pub fn restore_result(
    config: &RunConfig,
    records: &[RawRecord],
    mut model: BackboneModel,
    importance: ImportanceVector,
) -> Result<TrainResult> {
    let pipeline = prepare(config, records)?;
    if importance.len() != pipeline.catalog.len() {
        return Err(Error::Config(format!(
            "importance vector has {} entries but the catalog has {} paths",
            importance.len(),
            pipeline.catalog.len()
        )));
    }
    model.set_train(false);
    let top_mask = importance.top_k(config.top_k)?;
    let ranked: Vec<(String, f64)> = top_mask
        .iter()
        .map(|&i| (pipeline.catalog.get(i).canonical_name(), importance.get(i)))
        .collect();
    let test_pred = model.predict(
        &pipeline.features,
        importance.weights(),
        &top_mask,
        &pipeline.split.test,
    )?;
    let test_gold: Vec<u32> = pipeline.split.test.iter().map(|&i| pipeline.labels[i]).collect();
    let test_micro = micro_f1(&test_pred, &test_gold)?;
    let test_macro = macro_f1(&test_pred, &test_gold, pipeline.classes)?;
    Ok(TrainResult {
        model,
        trajectory: vec![(importance.t, importance.weights().to_vec())],
        importance,
        catalog: pipeline.catalog,
        features: pipeline.features,
        split: pipeline.split,
        labels: pipeline.labels,
        num_classes: pipeline.classes,
        iteration_log: Vec::new(),
        ranked,
        test_micro,
        test_macro,
        outer_iterations: 0,
        timings: PhaseTimings {
            construct_secs: pipeline.construct_secs,
            ..Default::default()
        },
    })
}

fn run_loop(
    config: &RunConfig,
    pipeline: Pipeline,
    mut model: BackboneModel,
    mut importance: ImportanceVector,
    mut sampler: SamplerState,
) -> Result<TrainResult> {
    let Pipeline {
        catalog,
        features,
        labels,
        classes,
        split,
        construct_secs,
        ..
    } = pipeline;
    let m = catalog.len();
    let mut timings = PhaseTimings {
        construct_secs,
        ..Default::default()
    };
    let mut batch_rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(
        config.seed,
        "batches",
        importance.t,
    ));
    let batch_size = config.model.batch_size.max(1);

    let mut trajectory = vec![(importance.t, importance.weights().to_vec())];
    let mut iteration_log = Vec::new();
    let mut converged_streak = 0usize;
    let start_t = importance.t;

    for outer in (start_t + 1)..=(config.outer_budget as u64) {
        // Backbone phase: the importance vector is frozen.
        let phase = Instant::now();
        model.set_train(true);
        let mut sampled_union: BTreeSet<usize> = BTreeSet::new();
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for epoch in 0..config.inner_epochs {
            let mask = sampler.sample_k(importance.weights(), config.sample_k)?;
            sampled_union.extend(mask.iter().copied());
            let mut order = split.train.clone();
            order.shuffle(&mut batch_rng);
            for batch in order.chunks(batch_size) {
                let loss = model
                    .train_step(&features, importance.weights(), &mask, batch, &labels)
                    .map_err(|e| match e {
                        Error::NonFiniteLoss(msg) => Error::NonFiniteLoss(format!(
                            "outer iteration {outer}, inner epoch {epoch}: {msg}"
                        )),
                        other => other,
                    })?;
                loss_sum += loss;
                loss_count += 1;
            }
        }
        timings.backbone_secs += phase.elapsed().as_secs_f64();

        // Importance phase: the model is frozen in eval mode.
        let phase = Instant::now();
        model.set_train(false);
        let eval_set: Vec<usize> = if config.evaluate_all {
            (0..m).collect()
        } else {
            sampled_union.iter().copied().collect()
        };
        let scores: Result<Vec<(usize, f64)>> = eval_set
            .par_iter()
            .map(|&path| {
                evaluate_path(&importance, &model, &features, path, &split.val, &labels)
                    .map(|acc| (path, acc))
            })
            .collect();
        let immediate: BTreeMap<usize, f64> = scores?.into_iter().collect();
        let previous = importance.weights().to_vec();
        importance.update(&immediate)?;
        importance.normalize();
        let mu_l1_change: f64 = importance
            .weights()
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .sum();
        sampler.advance();
        timings.importance_secs += phase.elapsed().as_secs_f64();

        let top_mask = importance.top_k(config.top_k)?;
        let val_pred = model.predict(&features, importance.weights(), &top_mask, &split.val)?;
        let val_gold: Vec<u32> = split.val.iter().map(|&i| labels[i]).collect();
        let log = OuterIterationLog {
            iteration: importance.t,
            mean_train_loss: loss_sum / loss_count as f64,
            val_micro: micro_f1(&val_pred, &val_gold)?,
            val_macro: macro_f1(&val_pred, &val_gold, classes)?,
            mu_l1_change,
        };
        trajectory.push((importance.t, importance.weights().to_vec()));
        iteration_log.push(log);

        if mu_l1_change < config.convergence_tol {
            converged_streak += 1;
        } else {
            converged_streak = 0;
        }
        if converged_streak >= config.convergence_window {
            break;
        }
    }

    // Final selection and test evaluation with the trained model, no retraining.
    model.set_train(false);
    let top_mask = importance.top_k(config.top_k)?;
    let ranked: Vec<(String, f64)> = top_mask
        .iter()
        .map(|&i| (catalog.get(i).canonical_name(), importance.get(i)))
        .collect();
    let test_pred = model.predict(&features, importance.weights(), &top_mask, &split.test)?;
    let test_gold: Vec<u32> = split.test.iter().map(|&i| labels[i]).collect();
    let test_micro = micro_f1(&test_pred, &test_gold)?;
    let test_macro = macro_f1(&test_pred, &test_gold, classes)?;

    Ok(TrainResult {
        model,
        importance,
        catalog,
        features,
        split,
        labels,
        num_classes: classes,
        outer_iterations: trajectory.len() as u64 - 1,
        trajectory,
        iteration_log,
        ranked,
        test_micro,
        test_macro,
        timings,
    })
}

/// Leave-out ablation: drop the `level` highest-ranked paths from the
/// selected top-K mask and re-evaluate on the validation split.
pub fn ablate(result: &TrainResult, level: usize) -> Result<(f64, f64)> {
    let top_k = result.ranked.len();
    if level >= top_k {
        return Err(Error::InvalidArgument(format!(
            "ablation level {level} must be below top_k = {top_k}"
        )));
    }
    let top_mask = result.importance.top_k(top_k)?;
    let mask: Vec<usize> = top_mask[level..].to_vec();
    let pred = result.model.predict(
        &result.features,
        result.importance.weights(),
        &mask,
        &result.split.val,
    )?;
    let gold: Vec<u32> = result.split.val.iter().map(|&i| result.labels[i]).collect();
    Ok((
        micro_f1(&pred, &gold)?,
        macro_f1(&pred, &gold, result.num_classes)?,
    ))
}

/// One row of the hop-scaling table.
#[derive(Clone, Debug)]
pub struct HopBenchRow {
    pub hops: usize,
    pub num_paths: usize,
    pub iterations_per_sec: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// Run the pipeline at each hop bound and report outer-loop throughput
/// (feature construction is amortized once and excluded) plus test metrics.
pub fn hop_scaling_bench(
    records: &[RawRecord],
    hops_list: &[usize],
    base_config: &RunConfig,
) -> Result<Vec<HopBenchRow>> {
    if hops_list.is_empty() {
        return Err(Error::InvalidArgument("empty hops list".into()));
    }
    let mut rows = Vec::with_capacity(hops_list.len());
    for &hops in hops_list {
        let config = RunConfig {
            max_hops: hops,
            ..base_config.clone()
        };
        let result = run(&config, records)?;
        let loop_secs = result.timings.backbone_secs + result.timings.importance_secs;
        rows.push(HopBenchRow {
            hops,
            num_paths: result.catalog.len(),
            iterations_per_sec: result.outer_iterations as f64 / loop_secs.max(1e-9),
            micro_f1: result.test_micro,
            macro_f1: result.test_macro,
        });
    }
    Ok(rows)
}

pub fn hop_bench_csv(rows: &[HopBenchRow]) -> String {
    let mut out = String::from("hops,num_paths,iterations_per_sec,micro_f1,macro_f1\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{:.3},{:.6},{:.6}\n",
            row.hops, row.num_paths, row.iterations_per_sec, row.micro_f1, row.macro_f1
        ));
    }
    out
}
