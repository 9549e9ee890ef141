pub mod cli;
pub mod compliance;
pub mod datestamp;
pub mod diagnostics;
pub mod freshfinds;
pub mod metrics;
pub mod mock;
pub mod oai;
pub mod quality;
pub mod registry;
