//! Criterion benchmarks for assess-core live under `benches/`.
