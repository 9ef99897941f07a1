//! Criterion benchmarks for the uwqa kernels live in `benches/`.
