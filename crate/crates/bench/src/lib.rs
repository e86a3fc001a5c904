//! Criterion benchmarks for the simulation and analysis hot paths; see `benches/`.
