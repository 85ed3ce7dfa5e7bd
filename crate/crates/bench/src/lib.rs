//! Benchmarks for the analytic pipeline live in `benches/`.
