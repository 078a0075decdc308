//! Criterion benchmarks for the scheme's hot paths. See `benches/`.
