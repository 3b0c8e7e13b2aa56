//! Coupled-noise studies: continuity in the initial data, the ε → 0
//! Cauchy sequence, and dt / Galerkin refinement with the increment proxy.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{PathRecord, SimConfig, Simulator};
use crate::stats::{order_fit, Estimate};

/// Run every simulator on the same realization for each path.
pub fn coupled_ensemble<T, F>(sims: &[Simulator], paths: u64, reduce: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[PathRecord]) -> Result<T> + Sync,
{
    let first = sims
        .first()
        .ok_or_else(|| Error::param("levels", "need at least one configuration"))?;
    for s in &sims[1..] {
        crate::integrator::check_coupling(&first.config, &s.config)?;
    }
    (0..paths)
        .into_par_iter()
        .map(|p| {
            let r = first.realization(p)?;
            let recs = sims.iter().map(|s| s.integrate_path(p, &r)).collect::<Result<Vec<_>>>()?;
            reduce(&recs)
        })
        .collect()
}

/// `∫₀ᵀ |u_a − u_b|² dt` by trapezoid on the shared sample grid.
pub fn l2_distance_sq(a: &PathRecord, b: &PathRecord) -> Result<f64> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::CouplingMismatch("sample grids differ".into()));
    }
    let d: Vec<(f64, f64)> = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x.t, x.coeffs.iter().zip(&y.coeffs).map(|(p, q)| (p - q).norm_sqr()).sum()))
        .collect();
    Ok(d.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub delta: f64,
    /// `Ê sup_t e^{−ρ̂(t)} |w(t)|²`.
    pub functional: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    /// Ratio of consecutive functionals (larger δ over smaller δ).
    pub ratios: Vec<f64>,
    pub monotone: bool,
}

/// Pairs `(u₀, u₀ + δ e_entry)` driven by shared noise, weighted by
/// `e^{−ρ̂(t)}` with `ρ̂(t) = (1/4ν) ∫₀ᵗ ‖u_A‖²`.
pub fn continuity_study(base: &Simulator, entry: usize, deltas: &[f64], paths: u64) -> Result<ContinuityReport> {
    let mut sims = vec![base.clone()];
    for &d in deltas {
        let cfg = SimConfig {
            perturbation: Some((entry, d)),
            ..base.config.clone()
        };
        sims.push(Simulator::new(cfg, base.models.clone())?);
    }
    let nu = base.config.nu;
    let per_path = coupled_ensemble(&sims, paths, |recs| {
        let a = &recs[0];
        recs[1..]
            .iter()
            .map(|b| {
                Ok(a.samples
                    .iter()
                    .zip(&b.samples)
                    .map(|(x, y)| {
                        let w: f64 = x.coeffs.iter().zip(&y.coeffs).map(|(p, q)| (p - q).norm_sqr()).sum();
                        (-x.dissipation / (4.0 * nu)).exp() * w
                    })
                    .fold(0.0, f64::max))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows: Vec<ContinuityRow> = deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| ContinuityRow {
            delta,
            functional: Estimate::from_samples(&per_path.iter().map(|v| v[j]).collect::<Vec<_>>()),
        })
        .collect();
    let means: Vec<f64> = rows.iter().map(|r| r.functional.mean).collect();
    Ok(ContinuityReport {
        ratios: means.windows(2).map(|w| w[0] / w[1]).collect(),
        monotone: strictly_decreasing(&means),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub coarse: f64,
    pub fine: f64,
    /// `Ê ∫₀ᵀ |u_coarse − u_fine|²`.
    pub distance_sq: Estimate,
    /// Square root of the mean.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub rows: Vec<DistanceRow>,
    pub decreasing: bool,
    /// Fitted order of `distance` against the coarse level (dt axis only).
    pub order: Option<f64>,
}

fn distance_table(sims: &[Simulator], levels: &[f64], paths: u64) -> Result<Vec<DistanceRow>> {
    let per_path = coupled_ensemble(sims, paths, |recs| {
        recs.windows(2).map(|w| l2_distance_sq(&w[0], &w[1])).collect::<Result<Vec<f64>>>()
    })?;
    Ok(levels
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let est = Estimate::from_samples(&per_path.iter().map(|v| v[j]).collect::<Vec<_>>());
            DistanceRow {
                coarse: w[0],
                fine: w[1],
                distance: est.mean.sqrt(),
                distance_sq: est,
            }
        })
        .collect())
}

/// `D(ε) = (Ê ∫|u^ε − u^{ε'}|²)^{1/2}` over consecutive levels with
/// mollified initial data `k_ε u₀`.
pub fn eps_cauchy_study(base: &Simulator, levels: &[f64], paths: u64) -> Result<DistanceReport> {
    if levels.len() < 2 {
        return Err(Error::param("eps_levels", "need at least two levels"));
    }
    let sims = levels
        .iter()
        .map(|&eps| {
            let cfg = SimConfig {
                epsilon: eps,
                mollify_initial: true,
                ..base.config.clone()
            };
            Simulator::new(cfg, base.models.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = distance_table(&sims, levels, paths)?;
    Ok(DistanceReport {
        decreasing: strictly_decreasing(&rows.iter().map(|r| r.distance).collect::<Vec<_>>()),
        rows,
        order: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineAxis {
    Dt,
    Galerkin,
}

/// Coupled distances between consecutive refinement levels. For the dt
/// axis every level shares the master grid at the finest step.
pub fn refinement_study(base: &Simulator, axis: RefineAxis, levels: &[f64], paths: u64) -> Result<DistanceReport> {
    if levels.len() < 2 {
        return Err(Error::param("levels", "need at least two levels"));
    }
    let finest = levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let sims = levels
        .iter()
        .map(|&lv| {
            let cfg = match axis {
                RefineAxis::Dt => SimConfig {
                    dt: lv,
                    master_dt: Some(finest),
                    ..base.config.clone()
                },
                RefineAxis::Galerkin => SimConfig {
                    galerkin_n: Some(lv as usize),
                    ..base.config.clone()
                },
            };
            Simulator::new(cfg, base.models.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = distance_table(&sims, levels, paths)?;
    let order = (axis == RefineAxis::Dt && rows.len() >= 2 && rows.iter().all(|r| r.distance > 0.0)).then(|| {
        order_fit(
            &rows.iter().map(|r| r.coarse).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.distance).collect::<Vec<_>>(),
        )
    });
    Ok(DistanceReport {
        decreasing: strictly_decreasing(&rows.iter().map(|r| r.distance).collect::<Vec<_>>()),
        rows,
        order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementRow {
    pub delta: f64,
    /// `Ê |u(T₀ + δ) − u(T₀)|²`.
    pub increment: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementReport {
    pub t0: f64,
    pub rows: Vec<IncrementRow>,
    pub decreasing: bool,
}

/// Tightness proxy on the sample grid; every `T₀ + δ` must be a sample time.
pub fn increment_proxy(base: &Simulator, t0: f64, deltas: &[f64], paths: u64) -> Result<IncrementReport> {
    let find = |rec: &PathRecord, t: f64| -> Result<usize> {
        rec.samples
            .iter()
            .position(|s| (s.t - t).abs() < 1e-9)
            .ok_or_else(|| Error::RecordTooCoarse(format!("no sample at t = {t}")))
    };
    let per_path = crate::integrator::run_ensemble(base, paths, |rec, _| {
        let i0 = find(&rec, t0)?;
        deltas
            .iter()
            .map(|&d| {
                let i1 = find(&rec, t0 + d)?;
                Ok(rec.samples[i1]
                    .coeffs
                    .iter()
                    .zip(&rec.samples[i0].coeffs)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum())
            })
            .collect::<Result<Vec<f64>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows: Vec<IncrementRow> = deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| IncrementRow {
            delta,
            increment: Estimate::from_samples(&per_path.iter().map(|v| v[j]).collect::<Vec<_>>()),
        })
        .collect();
    Ok(IncrementReport {
        t0,
        decreasing: strictly_decreasing(&rows.iter().map(|r| r.increment.mean).collect::<Vec<_>>()),
        rows,
    })
}
