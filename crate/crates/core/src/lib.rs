//! Power and phase control for two-user uplink NOMA with QAM inputs.
//!
//! - [`farey`]: punched Farey sequences in exact arithmetic.
//! - [`design`]: minimum-distance evaluation and the closed-form optimal
//!   weighting coefficients, plus the TDMA comparison.
//! - [`rate`]: optimal and high-rate rate splits under a sum-rate constraint.
//! - [`sim`]: Monte Carlo BER simulation against TDMA, FDMA and CR-NOMA.

pub mod design;
pub mod farey;
pub mod rate;
pub mod sim;

pub use design::{design_weights, Channel, ConstellationPair, DesignError, DesignResult, PowerBudget, Regime};
pub use farey::{FareyError, Fraction, PunchedFarey};
pub use rate::{RateAllocation, RateError, RateProblem};
pub use sim::{simulate_ber, BerCurve, Scheme, SimConfig, SimError};
