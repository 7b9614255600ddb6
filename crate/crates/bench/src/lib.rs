//! Criterion benchmarks for the phonemix pipeline live in `benches/`.
