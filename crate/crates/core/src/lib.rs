//! Bonsai fuzzing: grow a small, coverage-complete, mostly valid test
//! corpus by running coverage-guided bounded grammar fuzzers over a lattice
//! of size bounds, smallest first.

pub mod cli;
pub mod experiment;
pub mod fuzzer;
pub mod grammar;
pub mod grammars;
pub mod lattice;
pub mod metrics;
pub mod reducer;
pub mod sampler;
pub mod targets;
