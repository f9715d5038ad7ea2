//! Criterion benchmarks for the imagination and navigation pipeline; run
//! them with `cargo bench -p semnav-bench`.
