pub mod analysis;
pub mod anon;
pub mod connector;
pub mod dp;
pub mod ela;
pub mod error;
pub mod fixtures;
pub mod group_privacy;
pub mod guidance;
pub mod knowledge;
pub mod metadata;
pub mod model;
pub mod repo;
pub mod rng;
pub mod roles;
pub mod server;
pub mod stats;
pub mod timing;
pub mod xes;

pub use error::{Error, ParamError, Result};
