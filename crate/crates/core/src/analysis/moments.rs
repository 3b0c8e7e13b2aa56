//! Monte Carlo estimates of the left-hand sides of the a priori bounds.

use serde::Serialize;

use crate::analysis::bounds::GronwallBounds;
use crate::error::{Error, Result};
use crate::integrator::PathRecord;
use crate::stats::Estimate;

pub const MIN_MOMENT_PATHS: usize = 100;

/// The per-path functionals a moment report needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSample {
    pub sup_h_sq: f64,
    pub sup_h_cubed: f64,
    pub dissipation: f64,
    pub weighted_dissipation: f64,
    /// `(|u(t)|², ∫₀ᵗ ‖u‖²)` on the sample grid.
    pub running: Vec<(f64, f64)>,
}

impl MomentSample {
    pub fn from_record(rec: &PathRecord) -> Self {
        Self {
            sup_h_sq: rec.sup_h_sq,
            sup_h_cubed: rec.sup_h_cubed,
            dissipation: rec.dissipation,
            weighted_dissipation: rec.weighted_dissipation,
            running: rec.samples.iter().map(|s| (s.h_norm_sq, s.dissipation)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub estimate: Estimate,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn new(estimate: Estimate, bound: f64) -> Self {
        Self {
            estimate,
            bound,
            pass: estimate.upper(3.0) <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub paths: usize,
    pub blow_ups: usize,
    pub sup_h_sq: Estimate,
    /// `ν E∫₀ᵀ ‖u‖²`.
    pub dissipation: Estimate,
    pub sup_h_cubed: Estimate,
    /// `E∫₀ᵀ |u| ‖u‖²`.
    pub weighted_dissipation: Estimate,
    pub bounds: GronwallBounds,
    /// `max_t (E|u(t)|² + ν E∫₀ᵗ‖u‖²)` against `C₁`, checked at the worst time.
    pub energy_at_time: Check,
    /// `E sup|u|² + ν E∫‖u‖²` against `C₂`.
    pub energy_sup: Check,
    /// `E sup|u|³ + 2ν E∫|u|‖u‖²` against `C₃`.
    pub cubic_sup: Option<Check>,
}

impl MomentReport {
    pub fn pass(&self) -> bool {
        self.blow_ups == 0 && self.energy_at_time.pass && self.energy_sup.pass && self.cubic_sup.is_none_or(|c| c.pass)
    }
}

/// `outcomes` holds one entry per path; blow-ups are counted separately
/// and fail the report.
pub fn estimate_moments(outcomes: &[Result<MomentSample>], nu: f64, bounds: GronwallBounds) -> Result<MomentReport> {
    let blow_ups = outcomes.iter().filter(|o| matches!(o, Err(Error::BlowUp { .. }))).count();
    if let Some(Err(e)) = outcomes.iter().find(|o| matches!(o, Err(e) if !matches!(e, Error::BlowUp { .. }))) {
        return Err(e.clone());
    }
    let ok: Vec<&MomentSample> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    if outcomes.len() < MIN_MOMENT_PATHS {
        return Err(Error::InsufficientSamples {
            need: MIN_MOMENT_PATHS,
            got: outcomes.len(),
        });
    }
    let col = |f: &dyn Fn(&MomentSample) -> f64| -> Vec<f64> { ok.iter().map(|s| f(s)).collect() };
    let sup2 = col(&|s| s.sup_h_sq);
    let diss = col(&|s| nu * s.dissipation);
    let sup3 = col(&|s| s.sup_h_cubed);
    let wdiss = col(&|s| s.weighted_dissipation);

    let grid = ok.first().map_or(0, |s| s.running.len());
    if ok.iter().any(|s| s.running.len() != grid) {
        return Err(Error::CouplingMismatch("paths do not share a sample grid".into()));
    }
    let mut worst: Option<Estimate> = None;
    for j in 0..grid {
        let e = Estimate::from_samples(&col(&|s| s.running[j].0 + nu * s.running[j].1));
        if worst.is_none_or(|w| e.upper(3.0) > w.upper(3.0)) {
            worst = Some(e);
        }
    }
    let combined2: Vec<f64> = sup2.iter().zip(&diss).map(|(a, b)| a + b).collect();
    let combined3: Vec<f64> = sup3.iter().zip(&wdiss).map(|(a, b)| a + 2.0 * nu * b).collect();
    Ok(MomentReport {
        paths: outcomes.len(),
        blow_ups,
        sup_h_sq: Estimate::from_samples(&sup2),
        dissipation: Estimate::from_samples(&diss),
        sup_h_cubed: Estimate::from_samples(&sup3),
        weighted_dissipation: Estimate::from_samples(&wdiss),
        bounds,
        energy_at_time: Check::new(worst.unwrap_or(Estimate::from_samples(&[0.0])), bounds.c1),
        energy_sup: Check::new(Estimate::from_samples(&combined2), bounds.c2),
        cubic_sup: bounds.c3.map(|c3| Check::new(Estimate::from_samples(&combined3), c3)),
    })
}
