//! Criterion benchmarks for the solver pipeline; see `benches/`.
