//! Criterion benchmarks for the qwsearch kernels; see `benches/`.
