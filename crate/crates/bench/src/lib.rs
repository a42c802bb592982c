//! Benchmarks for the qtel simulator live under `benches/`.
