//! Criterion benchmarks for `polycert-core`; see `benches/core.rs`.
