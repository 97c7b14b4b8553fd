//! Criterion benchmarks for the sampler kernels live in `benches/`.
