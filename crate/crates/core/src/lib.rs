//! Event-camera (DVS) data handling, the spatio-temporal background-activity
//! filter, a desk-scale spiking network with surrogate-gradient training, a
//! gradient attack on frames of events, and the filter-parameter defense
//! search evaluated under three threat models.

pub mod attack;
pub mod dataset;
pub mod defense;
pub mod error;
pub mod events;
pub mod filter;
pub mod seed;
pub mod snn;

pub use error::{Error, Result};
