//! Criterion benchmarks for the coded matrix multiplication crates.
