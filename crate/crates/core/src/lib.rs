pub mod engine;
pub mod perfstats;
pub mod rewrite;
pub mod signature;
pub mod simulator;
pub mod sql;
pub mod values;
pub mod workload;
