//! Verification harness built on top of the integrator.

pub mod bounds;
pub mod energy;
pub mod martingale;
pub mod moments;
pub mod studies;

pub use bounds::{gronwall_bounds, BoundInputs, GronwallBounds};
pub use energy::{energy_residual, EnergyOptions};
pub use martingale::{generator_apply, martingale_test, mphi_series, MartingaleReport, PhiShape, TestFunctionPhi};
pub use moments::{estimate_moments, MomentReport, MomentSample};
