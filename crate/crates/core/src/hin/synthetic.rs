//! Deterministic synthetic corpus generator with planted relational signal.
//!
//! The generator plants class signal in the graph structure, not in the
//! words: text tokens are drawn from a neutral shared vocabulary, so the raw
//! text features carry no label information by construction. Signal paths
//! containing an Entity hop turn on class-clustered entity assignment;
//! signal paths containing a User hop turn on class-clustered authorship.
//! At `noise_level` each assignment is redrawn uniformly, so 1.0 severs the
//! label from every relation and 0.0 gives pure signal (each entity occurs
//! in exactly one class).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hin::{NodeType, RawRecord};
use crate::metapath::MetaPath;

/// Parameters for one synthetic corpus.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub texts_per_class: usize,
    pub num_users: usize,
    pub num_entities: usize,
    pub signal_paths: Vec<MetaPath>,
    pub noise_level: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn entity_signal(&self) -> bool {
        self.signal_paths
            .iter()
            .any(|p| p.nodes().contains(&NodeType::Entity))
    }

    fn user_signal(&self) -> bool {
        self.signal_paths
            .iter()
            .any(|p| p.nodes().contains(&NodeType::User))
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::UnsatisfiableSpec(format!(
                "num_classes must be >= 2, got {}",
                self.num_classes
            )));
        }
        if self.texts_per_class == 0 {
            return Err(Error::UnsatisfiableSpec("texts_per_class must be > 0".into()));
        }
        if self.num_users == 0 || self.num_entities == 0 {
            return Err(Error::UnsatisfiableSpec(
                "need at least one user and one entity".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(Error::UnsatisfiableSpec(format!(
                "noise_level must be in [0, 1], got {}",
                self.noise_level
            )));
        }
        if self.entity_signal() && self.num_entities < self.num_classes {
            return Err(Error::UnsatisfiableSpec(format!(
                "entity signal requested but num_entities ({}) < num_classes ({})",
                self.num_entities, self.num_classes
            )));
        }
        if self.user_signal() && self.num_users < self.num_classes {
            return Err(Error::UnsatisfiableSpec(format!(
                "user signal requested but num_users ({}) < num_classes ({})",
                self.num_users, self.num_classes
            )));
        }
        Ok(())
    }
}

/// Class-neutral word pool for text bodies.
const NEUTRAL_WORDS: &[&str] = &[
    "morning", "report", "street", "water", "people", "photo", "video", "city", "team",
    "game", "music", "coffee", "train", "weather", "news", "phone", "market", "school",
    "friend", "family", "travel", "night", "weekend", "project", "garden", "river",
    "mountain", "beach", "dinner", "lunch", "book", "movie", "story", "crowd", "building",
    "road", "park", "light", "rain", "snow", "wind", "summer", "winter", "spring",
    "autumn", "festival", "meeting", "picture",
];

const BASE_TIMESTAMP: i64 = 1_700_000_000;

/// Generate a corpus. Returns the records (class-major, ids sequential) and
/// the planted paths echoed back for acceptance harnesses.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Vec<RawRecord>, Vec<MetaPath>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let entity_signal = spec.entity_signal();
    let user_signal = spec.user_signal();
    // Round-robin cluster assignment keeps clusters balanced.
    let entity_class = |e: usize| e % spec.num_classes;
    let user_class = |u: usize| u % spec.num_classes;

    let entity_names: Vec<String> = (0..spec.num_entities)
        .map(|e| format!("e{e:03}"))
        .collect();

    let mut records = Vec::with_capacity(spec.num_classes * spec.texts_per_class);
    for class in 0..spec.num_classes {
        for i in 0..spec.texts_per_class {
            let id = (class * spec.texts_per_class + i) as u64;

            let token_count = rng.random_range(5..=12);
            let mut words = Vec::with_capacity(token_count);
            for _ in 0..token_count {
                words.push(NEUTRAL_WORDS[rng.random_range(0..NEUTRAL_WORDS.len())]);
            }
            let text = words.join(" ");

            let user_id = if user_signal && rng.random::<f64>() >= spec.noise_level {
                // A user from this class's pool.
                let pool: Vec<usize> = (0..spec.num_users)
                    .filter(|&u| user_class(u) == class)
                    .collect();
                pool[rng.random_range(0..pool.len())] as u64
            } else {
                rng.random_range(0..spec.num_users) as u64
            };

            let entity_count = rng.random_range(2.min(spec.num_entities)..=4.min(spec.num_entities));
            let mut entities: Vec<String> = Vec::new();
            for _ in 0..entity_count {
                let e = if entity_signal && rng.random::<f64>() >= spec.noise_level {
                    let pool: Vec<usize> = (0..spec.num_entities)
                        .filter(|&e| entity_class(e) == class)
                        .collect();
                    pool[rng.random_range(0..pool.len())]
                } else {
                    rng.random_range(0..spec.num_entities)
                };
                let name = &entity_names[e];
                if !entities.iter().any(|x| x == name) {
                    entities.push(name.clone());
                }
            }

            let timestamp = BASE_TIMESTAMP + rng.random_range(0..14 * 86_400);
            let location = if rng.random::<f64>() < 0.5 {
                Some((
                    rng.random::<f64>() * 180.0 - 90.0,
                    rng.random::<f64>() * 360.0 - 180.0,
                ))
            } else {
                None
            };

            records.push(RawRecord {
                id,
                text,
                user_id,
                entities,
                timestamp,
                location,
                label: class as u32,
            });
        }
    }

    Ok((records, spec.signal_paths.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_independence;

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 3,
            texts_per_class: 60,
            num_users: 30,
            num_entities: 12,
            signal_paths: vec![MetaPath::parse("TE").unwrap()],
            noise_level: 0.0,
            seed: 5,
        }
    }

    #[test]
    fn same_seed_identical_records() {
        let spec = base_spec();
        let (a, _) = generate_synthetic(&spec).unwrap();
        let (b, _) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_signal_entities_are_class_exclusive() {
        let (records, _) = generate_synthetic(&base_spec()).unwrap();
        let mut entity_classes: std::collections::HashMap<&str, std::collections::HashSet<u32>> =
            std::collections::HashMap::new();
        for r in &records {
            for e in &r.entities {
                entity_classes.entry(e).or_default().insert(r.label);
            }
        }
        for (entity, classes) in entity_classes {
            assert_eq!(classes.len(), 1, "entity {entity} spans classes {classes:?}");
        }
    }

    #[test]
    fn full_noise_label_independent_of_entities() {
        // Deterministic generator: these ten seeds are frozen along with the
        // expectation that none of them shows entity/class dependence.
        for seed in 0..10 {
            let spec = SyntheticSpec {
                noise_level: 1.0,
                seed,
                texts_per_class: 100,
                ..base_spec()
            };
            let (records, _) = generate_synthetic(&spec).unwrap();
            let mut table =
                vec![vec![0.0; spec.num_classes]; spec.num_entities];
            for r in &records {
                for e in &r.entities {
                    let idx: usize = e[1..].parse().unwrap();
                    table[idx][r.label as usize] += 1.0;
                }
            }
            let (_, p) = chi_square_independence(&table);
            assert!(p > 0.01, "seed {seed}: p = {p}");
        }
    }

    #[test]
    fn cardinality_and_labels() {
        let spec = base_spec();
        let (records, truth) = generate_synthetic(&spec).unwrap();
        assert_eq!(records.len(), spec.num_classes * spec.texts_per_class);
        for class in 0..spec.num_classes {
            let count = records.iter().filter(|r| r.label == class as u32).count();
            assert_eq!(count, spec.texts_per_class);
        }
        assert_eq!(truth.len(), 1);
        assert_eq!(truth[0].canonical_name(), "TE");
    }

    #[test]
    fn unsatisfiable_specs_rejected() {
        let mut spec = base_spec();
        spec.num_entities = 2; // fewer entities than classes with entity signal
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::UnsatisfiableSpec(_))
        ));

        let mut spec = base_spec();
        spec.num_classes = 1;
        assert!(generate_synthetic(&spec).is_err());
    }
}
