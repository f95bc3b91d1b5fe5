//! Simulation and analysis of key distribution by probabilistic
//! teleportation over partially entangled channels.
//!
//! Layers, bottom up: [`quantum`] (dense state vectors), [`gbs`]
//! (generalized Bell basis and teleportation), [`protocol`] (parties,
//! broadcast log, sifting), [`adversary`] (eavesdropper hooks) and
//! [`analysis`] (exact oracle, Monte Carlo, scans and reports).

pub mod adversary;
pub mod analysis;
pub mod gbs;
pub mod protocol;
pub mod quantum;
pub mod rng;
