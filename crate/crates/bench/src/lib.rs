//! Benchmarks for the estimation and design hot paths; see `benches/`.
