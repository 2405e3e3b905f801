//! Adaptive R-peak detection for wearable-class ECG, with a duty-cycle
//! energy simulator of a heterogeneous (controller + compute cluster)
//! platform.
//!
//! The detection stack pairs a lightweight hysteresis detector with a
//! robust slope-based detector: the lightweight stage runs on every
//! analysis window, an RR-ratio error check flags windows where it likely
//! failed, and only those windows are handed to the heavier detector. The
//! energy module integrates published power-state constants over the
//! resulting activity timeline, so the energy/accuracy trade-off of the
//! adaptive scheme can be reproduced and stress-tested at desk scale.

pub mod bayeslope;
pub mod config;
pub mod corpus;
pub mod energy;
pub mod errdet;
pub mod eval;
pub mod hysteresis;
pub mod pipeline;
pub mod preprocess;
pub mod signal;
