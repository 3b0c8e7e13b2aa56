//! The generator `𝓛F` for `F(t,u,i) = φ(⟨u,ρ⟩, i)`, the process
//! `M^φ(t) = F(u(t), r(t)) − F(u₀, r₀) − ∫₀ᵗ 𝓛F ds`, and the conditioned
//! increment test `E[(M^φ(t) − M^φ(s)) Π ψ_j] = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{PathRecord, Simulator, SolverState};
use crate::quadrature::{gauss_hermite_normal, Rule};
use crate::spectral::SpectralField;
use crate::stats::Estimate;

pub const HERMITE_NODES: usize = 21;
pub const MIN_MARTINGALE_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiShape {
    /// `(1 − (x/R)²)⁴` on `|x| < R`.
    Bump,
    /// `x (1 − (x/R)²)⁴` on `|x| < R`.
    LinearBump,
    /// `1` everywhere (only the per-state weight matters).
    Constant,
}

/// `φ(x, i) = w_i · shape(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunctionPhi {
    pub shape: PhiShape,
    pub radius: f64,
    pub weights: Vec<f64>,
}

impl TestFunctionPhi {
    pub fn bump(radius: f64, weights: Vec<f64>) -> Self {
        Self {
            shape: PhiShape::Bump,
            radius,
            weights,
        }
    }

    /// `(φ, φ', φ'')` at `(x, i)`.
    pub fn jet(&self, x: f64, i: usize) -> (f64, f64, f64) {
        let w = self.weights[i];
        if self.shape == PhiShape::Constant {
            return (w, 0.0, 0.0);
        }
        let r = self.radius;
        let y = x / r;
        if y.abs() >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let s = 1.0 - y * y;
        let b = s.powi(4);
        let b1 = -8.0 * y * s.powi(3) / r;
        let b2 = (-8.0 * s.powi(3) + 48.0 * y * y * s * s) / (r * r);
        match self.shape {
            PhiShape::Bump => (w * b, w * b1, w * b2),
            PhiShape::LinearBump => (w * x * b, w * (b + x * b1), w * (2.0 * b1 + x * b2)),
            PhiShape::Constant => unreachable!(),
        }
    }

    pub fn value(&self, x: f64, i: usize) -> f64 {
        self.jet(x, i).0
    }
}

/// Evaluates `𝓛F` with a fixed Hermite rule.
pub struct Generator<'a> {
    sim: &'a Simulator,
    phi: &'a TestFunctionPhi,
    rho: &'a SpectralField,
    /// Viscosity used in the drift pairing (overridable for negative controls).
    nu: f64,
    rule: Rule,
    /// `⟨A u, ρ⟩ = ⟨u, Aρ⟩`.
    a_rho: SpectralField,
}

impl<'a> Generator<'a> {
    pub fn new(sim: &'a Simulator, phi: &'a TestFunctionPhi, rho: &'a SpectralField, nu_override: Option<f64>) -> Result<Self> {
        if phi.weights.len() != sim.models.states() {
            return Err(Error::param("phi.weights", "need one weight per regime state"));
        }
        let rule = gauss_hermite_normal(HERMITE_NODES);
        if !rule.weights.iter().all(|w| w.is_finite()) {
            return Err(Error::Quadrature("Hermite rule construction failed".into()));
        }
        Ok(Self {
            sim,
            phi,
            rho,
            nu: nu_override.unwrap_or(sim.config.nu),
            rule,
            a_rho: rho.stokes_apply(),
        })
    }

    pub fn apply(&self, s: &SolverState) -> Result<f64> {
        let models = &self.sim.models;
        let u = &s.u;
        let i = s.regime;
        let x = u.h_inner(self.rho)?;
        let (f0, f1, f2) = self.phi.jet(x, i);

        let mut out = 0.0;
        if f1 != 0.0 || f2 != 0.0 {
            let drift =
                -self.nu * u.h_inner(&self.a_rho)? + self.sim.transport(u).h_inner(self.rho)? + self.sim.forcing(s.t).h_inner(self.rho)?;
            out += f1 * drift;
            out += 0.5 * f2 * models.diffusion.paired_variance(u, i, self.rho)?;
        }
        for j in 0..models.states() {
            let g = models.gamma.rate(i, j);
            if g != 0.0 {
                out += g * self.phi.value(x, j);
            }
        }
        let lambda = models.jump.rate;
        if lambda > 0.0 {
            let beta = models.jump.paired_slope(u, i, self.rho)?;
            if beta != 0.0 {
                out += lambda * self.rule.expect(|z| self.phi.value(x + z * beta, i) - f0 - f1 * z * beta);
            }
        }
        Ok(out)
    }
}

/// `𝓛F` at one state.
pub fn generator_apply(
    phi: &TestFunctionPhi,
    rho: &SpectralField,
    state: &SolverState,
    sim: &Simulator,
    nu_override: Option<f64>,
) -> Result<f64> {
    Generator::new(sim, phi, rho, nu_override)?.apply(state)
}

/// `M^φ` at every knot, integrating `𝓛F` by trapezoid with left limits at
/// the right end of each cell.
pub fn mphi_series(
    phi: &TestFunctionPhi,
    rho: &SpectralField,
    record: &PathRecord,
    sim: &Simulator,
    nu_override: Option<f64>,
) -> Result<Vec<(f64, f64)>> {
    let knots = record
        .knots
        .as_ref()
        .ok_or_else(|| Error::RecordTooCoarse("the martingale functional needs every knot (enable keep_knots)".into()))?;
    let gen = Generator::new(sim, phi, rho, nu_override)?;
    let Some(first) = knots.first() else {
        return Ok(Vec::new());
    };
    let f = |s: &SolverState| -> Result<f64> { Ok(phi.value(s.u.h_inner(rho)?, s.regime)) };
    let f0 = f(&first.right)?;
    let mut integral = 0.0;
    let mut lf_prev = gen.apply(&first.right)?;
    let mut out = Vec::with_capacity(knots.len());
    out.push((first.t, 0.0));
    for pair in knots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let lf_left = gen.apply(&b.left)?;
        integral += 0.5 * (b.t - a.t) * (lf_prev + lf_left);
        lf_prev = if b.left == b.right { lf_left } else { gen.apply(&b.right)? };
        out.push((b.t, f(&b.right)? - f0 - integral));
    }
    Ok(out)
}

/// Value of a knot series at a grid time (the right value there).
pub fn series_at(series: &[(f64, f64)], t: f64) -> Result<f64> {
    let n = series.partition_point(|(s, _)| *s <= t + 1e-12);
    if n == 0 {
        return Err(Error::RecordTooCoarse(format!("no knot at or before t = {t}")));
    }
    Ok(series[n - 1].1)
}

/// Bounded `ℱ_s`-measurable weights, evaluated at `s/2` and `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiFamily {
    /// `Π_j min(|u(s_j)|², cap)`.
    ClippedEnergy { cap: f64 },
    /// `Π_j 1{r(s_j) = state}`.
    RegimeIndicator { state: usize },
    /// `ψ ≡ 1`.
    One,
}

impl PsiFamily {
    pub fn label(&self) -> String {
        match *self {
            PsiFamily::ClippedEnergy { cap } => format!("clipped_energy(cap={cap})"),
            PsiFamily::RegimeIndicator { state } => format!("regime_indicator(state={state})"),
            PsiFamily::One => "one".into(),
        }
    }

    pub fn eval(&self, record: &PathRecord, s: f64) -> Result<f64> {
        let mut prod = 1.0;
        for sj in [0.5 * s, s] {
            let sample = record
                .samples
                .iter()
                .find(|x| (x.t - sj).abs() < 1e-9)
                .ok_or_else(|| Error::RecordTooCoarse(format!("no sample at t = {sj}")))?;
            prod *= match *self {
                PsiFamily::ClippedEnergy { cap } => sample.h_norm_sq.min(cap),
                PsiFamily::RegimeIndicator { state } => f64::from(u8::from(sample.regime == state)),
                PsiFamily::One => 1.0,
            };
        }
        Ok(prod)
    }
}

/// Per-path inputs of the test: `(M(t) − M(s))·ψ` for every pair × family.
#[derive(Debug, Clone, PartialEq)]
pub struct PathObservation {
    /// Indexed `[family][pair]`.
    pub weighted_increments: Vec<Vec<f64>>,
}

pub fn observe(
    phi: &TestFunctionPhi,
    rho: &SpectralField,
    record: &PathRecord,
    sim: &Simulator,
    pairs: &[(f64, f64)],
    families: &[PsiFamily],
    nu_override: Option<f64>,
) -> Result<PathObservation> {
    let series = mphi_series(phi, rho, record, sim, nu_override)?;
    let increments = pairs
        .iter()
        .map(|&(s, t)| Ok(series_at(&series, t)? - series_at(&series, s)?))
        .collect::<Result<Vec<_>>>()?;
    let weighted_increments = families
        .iter()
        .map(|fam| {
            pairs
                .iter()
                .zip(&increments)
                .map(|(&(s, _), d)| Ok(d * fam.eval(record, s)?))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathObservation { weighted_increments })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Sample variance numerically zero: no statistical content.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleEntry {
    pub s: f64,
    pub t: f64,
    pub family: String,
    pub statistic: f64,
    pub se: f64,
    pub z: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub paths: usize,
    pub entries: Vec<MartingaleEntry>,
}

impl MartingaleReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.verdict != Verdict::Fail)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().filter(|e| e.z.is_finite()).fold(0.0, |m, e| m.max(e.z.abs()))
    }
}

pub fn martingale_test(observations: &[PathObservation], pairs: &[(f64, f64)], families: &[PsiFamily]) -> Result<MartingaleReport> {
    if observations.len() < MIN_MARTINGALE_PATHS {
        return Err(Error::InsufficientSamples {
            need: MIN_MARTINGALE_PATHS,
            got: observations.len(),
        });
    }
    let mut entries = Vec::new();
    for (f, fam) in families.iter().enumerate() {
        for (p, &(s, t)) in pairs.iter().enumerate() {
            let xs: Vec<f64> = observations.iter().map(|o| o.weighted_increments[f][p]).collect();
            let est = Estimate::from_samples(&xs);
            let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let degenerate = est.se <= 1e-12 * scale || est.se == 0.0;
            let z = if degenerate { 0.0 } else { est.mean / est.se };
            let verdict = if degenerate {
                Verdict::Inconclusive
            } else if z.abs() <= 3.0 {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            entries.push(MartingaleEntry {
                s,
                t,
                family: fam.label(),
                statistic: est.mean,
                se: est.se,
                z,
                verdict,
            });
        }
    }
    Ok(MartingaleReport {
        paths: observations.len(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{Forcing, InitialCondition, Models, SimConfig};
    use crate::noise::{CovarianceSpectrum, DiffusionModel, JumpModel};
    use crate::regime::GeneratorMatrix;
    use crate::spectral::build_modes;
    use crate::stats::order_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(dt: f64) -> SimConfig {
        SimConfig {
            k_max: 1,
            dt,
            forcing: Forcing::Constant { entry: 0, amplitude: 1.0 },
            initial: InitialCondition::Sphere {
                radius: 0.8,
                exponent: 1.0,
            },
            sample_interval: 0.05,
            keep_knots: true,
            ..SimConfig::default()
        }
    }

    fn noisy_models(modes: &std::sync::Arc<crate::spectral::ModeSet>) -> Models {
        let spec = CovarianceSpectrum::power_law(modes, 1.0, 2.0).unwrap();
        Models::new(
            GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap(),
            DiffusionModel::uniform(vec![1.0, 0.5], 1.0, 0.2, spec).unwrap(),
            JumpModel::new(2.0, vec![0.3, 0.5], SpectralField::unit(modes, 0), 0.1).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for shape in [PhiShape::Bump, PhiShape::LinearBump] {
            let phi = TestFunctionPhi {
                shape,
                radius: 2.0,
                weights: vec![1.5],
            };
            for k in -30..30 {
                let x = k as f64 * 0.07;
                let h = 1e-5;
                let (_, d1, d2) = phi.jet(x, 0);
                let fd1 = (phi.value(x + h, 0) - phi.value(x - h, 0)) / (2.0 * h);
                let fd2 = (phi.value(x + h, 0) - 2.0 * phi.value(x, 0) + phi.value(x - h, 0)) / (h * h);
                assert!((d1 - fd1).abs() < 1e-7, "{shape:?} {x}");
                assert!((d2 - fd2).abs() < 1e-4, "{shape:?} {x}");
            }
            assert_eq!(phi.jet(2.0, 0), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn constant_phi_keeps_only_the_chain_term() {
        let modes = build_modes(1).unwrap();
        let sim = Simulator::new(config(1e-2), noisy_models(&modes)).unwrap();
        let phi = TestFunctionPhi {
            shape: PhiShape::Constant,
            radius: 1.0,
            weights: vec![2.0, 5.0],
        };
        let rho = SpectralField::unit(&modes, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random(&modes, &mut rng, 1.0);
        let v0 = generator_apply(
            &phi,
            &rho,
            &SolverState {
                t: 0.0,
                u: u.clone(),
                regime: 0,
            },
            &sim,
            None,
        )
        .unwrap();
        assert!((v0 - (-2.0 + 5.0)).abs() < 1e-14);
        let v1 = generator_apply(&phi, &rho, &SolverState { t: 0.0, u, regime: 1 }, &sim, None).unwrap();
        assert!((v1 - (4.0 - 10.0)).abs() < 1e-14);
    }

    #[test]
    fn quiet_generator_is_the_drift_pairing() {
        let modes = build_modes(1).unwrap();
        let sim = Simulator::new(config(1e-2), Models::silent(&modes, 2)).unwrap();
        let phi = TestFunctionPhi::bump(3.0, vec![1.0, 0.5]);
        let rho = SpectralField::unit(&modes, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = SpectralField::random(&modes, &mut rng, 0.5);
        let st = SolverState {
            t: 0.3,
            u: u.clone(),
            regime: 1,
        };
        let x = u.h_inner(&rho).unwrap();
        let drift = sim.drift(0.3, &u, 1).unwrap().h_inner(&rho).unwrap();
        let direct = phi.jet(x, 1).1 * drift;
        assert!((generator_apply(&phi, &rho, &st, &sim, None).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn jump_bracket_vanishes_to_second_order() {
        // φ = x·bump has φ'' = 0 at x = 0, so the bracket is O(β³).
        let modes = build_modes(1).unwrap();
        let mut models = Models::silent(&modes, 1);
        models.jump = JumpModel::new(1.0, vec![1e-3], SpectralField::unit(&modes, 0), 0.0).unwrap();
        let sim = Simulator::new(config(1e-2), models).unwrap();
        let phi = TestFunctionPhi {
            shape: PhiShape::LinearBump,
            radius: 4.0,
            weights: vec![1.0],
        };
        let rho = SpectralField::unit(&modes, 0);
        let st = SolverState {
            t: 0.0,
            u: SpectralField::zeros(&modes),
            regime: 0,
        };
        let with = generator_apply(&phi, &rho, &st, &sim, None).unwrap();
        let mut silent = sim.clone();
        silent.models.jump = JumpModel::off(1, &modes);
        let without = generator_apply(&phi, &rho, &st, &silent, None).unwrap();
        assert!((with - without).abs() < 1e-12);
    }

    #[test]
    fn hermite_bracket_agrees_with_monte_carlo() {
        let phi = TestFunctionPhi::bump(2.0, vec![1.0]);
        let (x, beta) = (0.4, 0.6);
        let (f0, f1, _) = phi.jet(x, 0);
        let rule = gauss_hermite_normal(HERMITE_NODES);
        let quad = rule.expect(|z| phi.value(x + z * beta, 0) - f0 - f1 * z * beta);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                phi.value(x + z * beta, 0) - f0 - f1 * z * beta
            })
            .collect();
        let mc = Estimate::from_samples(&xs);
        assert!((quad - mc.mean).abs() < 4.0 * mc.se, "{quad} vs {mc:?}");
    }

    #[test]
    fn mphi_starts_at_zero_and_is_zero_for_constant_phi() {
        let modes = build_modes(1).unwrap();
        let sim = Simulator::new(config(1e-2), Models::silent(&modes, 2)).unwrap();
        let rec = sim.run_path(0).unwrap();
        let rho = SpectralField::unit(&modes, 0);
        let phi = TestFunctionPhi {
            shape: PhiShape::Constant,
            radius: 1.0,
            weights: vec![1.0, 3.0],
        };
        let m = mphi_series(&phi, &rho, &rec, &sim, None).unwrap();
        assert!(m.iter().all(|(_, v)| *v == 0.0));
        let bump = mphi_series(&TestFunctionPhi::bump(3.0, vec![1.0, 1.0]), &rho, &rec, &sim, None).unwrap();
        assert_eq!(bump[0].1, 0.0);
    }

    #[test]
    fn deterministic_mphi_is_first_order_in_dt() {
        let modes = build_modes(1).unwrap();
        let rho = SpectralField::unit(&modes, 0);
        let phi = TestFunctionPhi::bump(3.0, vec![1.0, 1.0]);
        let dts = [5e-3, 2.5e-3, 1.25e-3];
        let errs: Vec<f64> = dts
            .iter()
            .map(|&dt| {
                let sim = Simulator::new(config(dt), Models::silent(&modes, 2)).unwrap();
                let rec = sim.run_path(0).unwrap();
                mphi_series(&phi, &rho, &rec, &sim, None)
                    .unwrap()
                    .iter()
                    .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
            })
            .collect();
        assert!(order_fit(&dts, &errs) >= 0.9, "{errs:?}");
    }

    #[test]
    fn chain_only_dynamics_pass_the_test() {
        // Transport, forcing and noise off: M^φ is the pure chain martingale
        // up to the Stokes drift, which φ' ⟨−νAu, ρ⟩ accounts for.
        let modes = build_modes(1).unwrap();
        let mut models = Models::silent(&modes, 2);
        models.gamma = GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap();
        let cfg = SimConfig {
            nonlinear: false,
            forcing: Forcing::Zero,
            dt: 1e-2,
            ..config(1e-2)
        };
        let sim = Simulator::new(cfg, models).unwrap();
        let rho = SpectralField::unit(&modes, 0);
        let phi = TestFunctionPhi::bump(3.0, vec![1.0, 0.2]);
        let pairs = [(0.2, 0.5), (0.5, 1.0)];
        let fams = [PsiFamily::One, PsiFamily::RegimeIndicator { state: 0 }];
        let obs: Vec<PathObservation> = (0..1000)
            .map(|p| observe(&phi, &rho, &sim.run_path(p).unwrap(), &sim, &pairs, &fams, None).unwrap())
            .collect();
        let rep = martingale_test(&obs, &pairs, &fams).unwrap();
        assert!(rep.pass(), "{rep:#?}");
    }

    #[test]
    fn degenerate_variance_is_inconclusive() {
        let obs = vec![
            PathObservation {
                weighted_increments: vec![vec![1e-4]]
            };
            MIN_MARTINGALE_PATHS
        ];
        let rep = martingale_test(&obs, &[(0.0, 1.0)], &[PsiFamily::One]).unwrap();
        assert_eq!(rep.entries[0].verdict, Verdict::Inconclusive);
        assert!(rep.pass());
    }
}
