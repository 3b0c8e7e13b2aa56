//! Discrete defect of the Itô energy balance
//! `|u(t)|² = |u₀|² + ∫(−2ν‖u‖² + 2⟨f,u⟩ + ‖σ‖²_{L_Q} + ∫|G|²ν) ds
//!           + 2∫⟨u, σ dW⟩ + ∫∫(|u⁻ + G|² − |u⁻|²) Ñ(dz, ds)`.

use crate::error::{Error, Result};
use crate::integrator::{PathRecord, Simulator, SolverState};
use crate::realization::NoiseRealization;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyOptions {
    /// Also book `−2⟨B_{k_ε}(u), u⟩` (identically zero) in the balance.
    pub include_transport: bool,
}

/// Deterministic part of the integrand at one state.
fn rate(sim: &Simulator, s: &SolverState, opts: EnergyOptions) -> Result<f64> {
    let u = &s.u;
    let models = &sim.models;
    let mut g = -2.0 * sim.config.nu * u.v_norm_sq() + 2.0 * sim.forcing(s.t).h_inner(u)?;
    if opts.include_transport {
        g += 2.0 * sim.transport(u).h_inner(u)?;
    }
    g += models.diffusion.lq_norm_sq(s.t, u, s.regime)?;
    // ∫|G|²ν minus the compensator of the jump sum, which leaves the
    // compensator drift −2⟨u, ∫Gν⟩.
    g -= 2.0 * models.jump.compensator_mean(s.t, u, s.regime)?.h_inner(u)?;
    Ok(g)
}

/// Residual at every knot of the record.
pub fn energy_residual(
    record: &PathRecord,
    realization: &NoiseRealization,
    sim: &Simulator,
    opts: EnergyOptions,
) -> Result<Vec<(f64, f64)>> {
    let knots = record
        .knots
        .as_ref()
        .ok_or_else(|| Error::RecordTooCoarse("energy residual needs every knot (enable keep_knots)".into()))?;
    let Some(first) = knots.first() else {
        return Ok(Vec::new());
    };
    let e0 = first.right.u.h_norm_sq();
    let mut balance = 0.0;
    let mut out = Vec::with_capacity(knots.len());
    out.push((first.t, 0.0));
    let mut g_prev = rate(sim, &first.right, opts)?;
    for pair in knots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        if dt > 0.0 {
            let g_left = rate(sim, &b.left, opts)?;
            balance += 0.5 * dt * (g_prev + g_left);
            let dw = realization.increment(a.wiener, b.wiener);
            let sdw = sim.models.diffusion.apply(a.t, &a.right.u, a.right.regime, &dw)?;
            balance += 2.0 * a.right.u.h_inner(&sdw)?;
        }
        balance += b.right.u.h_norm_sq() - b.left.u.h_norm_sq();
        g_prev = rate(sim, &b.right, opts)?;
        out.push((b.t, b.right.u.h_norm_sq() - e0 - balance));
    }
    Ok(out)
}
