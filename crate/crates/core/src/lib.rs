//! Eviction-annotated LLC traces: storage, simulation, ingestion and statistics.
//!
//! * [`store`] / [`persist`]: keyed bundles of [`record::AccessRecord`]s with
//!   a metadata summary and description, saved as one directory per bundle.
//! * [`simulator`]: set-associative replay under LRU, Belady, random,
//!   bypass-LRU and a scored stub, producing fully annotated records.
//! * [`ingest`]: trace text files and symbol sidecars.
//! * [`stats`]: per-PC statistics, set hotness, bypass candidates and policy ranking.

pub mod filter;
pub mod fixtures;
pub mod hex;
pub mod ingest;
pub mod key;
pub mod persist;
pub mod record;
pub mod simulator;
pub mod stats;
pub mod store;

pub use filter::{slice, QueryFilters};
pub use hex::{Address, Pc};
pub use key::{KeyError, TraceKey};
pub use record::{AccessRecord, MissType, Outcome};
pub use store::{TraceBundle, TraceStore};
