//! Estimating the packet delivery ratio of a large LoRaWAN deployment from a
//! small, load-equivalent experiment.
//!
//! - [`airtime`]: LoRa time on air.
//! - [`scaling`]: channel load, analytic success bounds, experiment sizing.
//! - [`simulator`]: seeded discrete-event collision simulation.
//! - [`netserver`]: mock network server (store, wire protocol, TCP server and client).
//! - [`controller`]: experiment orchestration and counter-gap PDR accounting.
//! - [`analysis`]: SF7/SF8 mix bounds, experiment-to-real mix scaling, PDR aggregation.

pub mod airtime;
pub mod analysis;
pub mod controller;
pub mod eui;
pub mod netserver;
pub mod scaling;
pub mod simulator;

pub use eui::DevEui;
