//! Retrieval and answer generation over a trace store.

pub mod generator;
pub mod intent;
pub mod pipeline;
pub mod ranger;
pub mod sieve;
