//! Shared fixtures for the benchmark targets.

use hinsample::{
    build_graph, generate_synthetic, EmbedderSpec, HeteroGraph, MetaPath, RawRecord,
    SyntheticSpec,
};

/// Desk-scale corpus with entity-clustered class signal.
pub fn bench_corpus(texts_per_class: usize, seed: u64) -> Vec<RawRecord> {
    let spec = SyntheticSpec {
        num_classes: 4,
        texts_per_class,
        num_users: 100,
        num_entities: 32,
        signal_paths: vec![MetaPath::parse("TE").unwrap()],
        noise_level: 0.1,
        seed,
    };
    generate_synthetic(&spec).unwrap().0
}

pub fn bench_graph(texts_per_class: usize, seed: u64) -> HeteroGraph {
    let records = bench_corpus(texts_per_class, seed);
    build_graph(&records, &EmbedderSpec::hashing(seed)).unwrap()
}
