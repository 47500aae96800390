//! Stochastic and mean-field SCIR epidemics on two-layer networks, with
//! threshold analysis and activation-rate optimization.

pub mod linalg;
pub mod netgen;
pub mod params;
pub mod threshold;
pub mod meanfield;
pub mod ode;
pub mod gillespie;
pub mod seeds;
pub mod qmatrix;
pub mod sgp;
pub mod harness;
