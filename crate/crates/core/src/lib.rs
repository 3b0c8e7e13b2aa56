pub mod analysis;
pub mod error;
pub mod integrator;
pub mod noise;
pub mod nonlinearity;
pub mod quadrature;
pub mod realization;
pub mod regime;
pub mod seeding;
pub mod spectral;
pub mod stats;
