//! Event-adapted semi-implicit stepping of the Galerkin system.
//!
//! Between events the scheme is
//! `u⁺ = (I + ν h A)⁻¹ [u + h(−B_{k_ε}(u) + f(t) − ∫G ν) + σ(t,u,i) ΔW]`.
//! Jump and switch times are inserted into the base grid exactly; at such a
//! knot the switch is applied first, then the jump (evaluated at the left
//! limit `(u(t−), r(t−))`), then stepping resumes.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{DiffusionModel, JumpModel};
use crate::nonlinearity::{b_mollified_apply, MollifierTable};
use crate::realization::{EventKind, NoiseRealization, RealizationSpec, WienerRef};
use crate::regime::GeneratorMatrix;
use crate::seeding::{path_seed, stream_rng, Stream};
use crate::spectral::{build_modes, ModeSet, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    Zero,
    /// Real amplitude on one basis entry.
    Constant {
        entry: usize,
        amplitude: f64,
    },
    /// `amplitude · sin(frequency · t)` on one basis entry.
    Sinusoidal {
        entry: usize,
        amplitude: f64,
        frequency: f64,
    },
}

impl Forcing {
    fn entry(&self) -> Option<usize> {
        match *self {
            Forcing::Zero => None,
            Forcing::Constant { entry, .. } | Forcing::Sinusoidal { entry, .. } => Some(entry),
        }
    }

    fn value(&self, t: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::Constant { amplitude, .. } => amplitude,
            Forcing::Sinusoidal { amplitude, frequency, .. } => amplitude * (frequency * t).sin(),
        }
    }

    pub fn eval(&self, modes: &Arc<ModeSet>, t: f64) -> SpectralField {
        let mut f = SpectralField::zeros(modes);
        if let Some(e) = self.entry() {
            f.coeffs_mut()[e] = Complex64::new(self.value(t), 0.0);
        }
        f
    }

    /// `∫₀ᵀ ‖f‖^p_{V'} dt` in closed form, `p = 2, 3`.
    pub fn dual_norm_integral(&self, modes: &ModeSet, horizon: f64, p: u32) -> f64 {
        let Some(e) = self.entry() else { return 0.0 };
        let scale = 1.0 / modes.eigenvalue(e).sqrt();
        match *self {
            Forcing::Zero => 0.0,
            Forcing::Constant { amplitude, .. } => (amplitude.abs() * scale).powi(p as i32) * horizon,
            Forcing::Sinusoidal { amplitude, frequency, .. } => {
                let c = (amplitude.abs() * scale).powi(p as i32);
                if frequency == 0.0 {
                    return 0.0;
                }
                let w = frequency.abs();
                let x = w * horizon;
                let base = match p {
                    2 => 0.5 * x - 0.25 * (2.0 * x).sin(),
                    3 => {
                        let halves = (x / PI).floor();
                        let r = x - halves * PI;
                        halves * 4.0 / 3.0 + 2.0 / 3.0 - r.cos() + r.cos().powi(3) / 3.0
                    }
                    _ => panic!("unsupported forcing moment {p}"),
                };
                c * base / w
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    /// Real amplitude on one basis entry.
    Mode {
        entry: usize,
        amplitude: f64,
    },
    /// Seeded random direction with `E|c_ℓ|² ∝ ℓ^{-exponent}`, rescaled to
    /// `|u₀| = radius` exactly.
    Sphere {
        radius: f64,
        exponent: f64,
    },
}

impl InitialCondition {
    pub fn sample<R: Rng + ?Sized>(&self, modes: &Arc<ModeSet>, n: usize, rng: &mut R) -> SpectralField {
        let mut u = SpectralField::zeros(modes);
        match *self {
            InitialCondition::Zero => {}
            InitialCondition::Mode { entry, amplitude } => {
                u.coeffs_mut()[entry] = Complex64::new(amplitude, 0.0);
            }
            InitialCondition::Sphere { radius, exponent } => {
                for (l, c) in u.coeffs_mut().iter_mut().take(n).enumerate() {
                    let s = ((l + 1) as f64).powf(-0.5 * exponent);
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *c = Complex64::new(s * re, s * im);
                }
                let norm = u.h_norm();
                if norm > 0.0 {
                    u = u.scaled(radius / norm);
                }
            }
        }
        u
    }

    /// Exact `E|u₀|^p`.
    pub fn moment(&self, p: u32) -> f64 {
        match *self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Mode { amplitude, .. } => amplitude.abs().powi(p as i32),
            InitialCondition::Sphere { radius, .. } => radius.abs().powi(p as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nu: f64,
    pub epsilon: f64,
    pub k_max: usize,
    /// Galerkin level; `None` keeps every stored entry.
    pub galerkin_n: Option<usize>,
    pub dt: f64,
    pub horizon: f64,
    /// Noise master step; defaults to `dt`.
    pub master_dt: Option<f64>,
    pub forcing: Forcing,
    pub initial: InitialCondition,
    /// `(entry, δ)` added to `u₀` after sampling.
    pub perturbation: Option<(usize, f64)>,
    /// Replace `u₀` by `k_ε u₀`.
    pub mollify_initial: bool,
    /// Switch the transport term off (Stokes plus noise only).
    pub nonlinear: bool,
    pub sample_interval: f64,
    /// Retain every knot (needed by the energy and martingale analyses).
    pub keep_knots: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            epsilon: 0.1,
            k_max: 2,
            galerkin_n: None,
            dt: 1e-3,
            horizon: 1.0,
            master_dt: None,
            forcing: Forcing::Constant { entry: 0, amplitude: 1.0 },
            initial: InitialCondition::Sphere {
                radius: 1.0,
                exponent: 2.0,
            },
            perturbation: None,
            mollify_initial: false,
            nonlinear: true,
            sample_interval: 0.01,
            keep_knots: false,
            seed: 20240607,
        }
    }
}

fn whole_multiple(x: f64, unit: f64) -> Option<usize> {
    let r = x / unit;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * r.max(1.0) && n >= 1.0).then_some(n as usize)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::param("viscosity", "viscosity must be positive"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be finite and nonnegative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "time step must be positive"));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::param("horizon", "horizon must be at least one time step"));
        }
        if whole_multiple(self.horizon, self.dt).is_none() {
            return Err(Error::param("dt", "time step must divide the horizon"));
        }
        if let Some(m) = self.master_dt {
            if !(m > 0.0) || whole_multiple(self.dt, m).is_none() || whole_multiple(self.horizon, m).is_none() {
                return Err(Error::param("master_dt", "must divide both dt and the horizon"));
            }
        }
        if whole_multiple(self.sample_interval, self.dt).is_none() || whole_multiple(self.horizon, self.sample_interval).is_none() {
            return Err(Error::param("sample_interval", "must be a multiple of dt dividing the horizon"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        whole_multiple(self.horizon, self.dt).expect("validated")
    }
}

/// Regime chain plus the coefficient families.
#[derive(Debug, Clone)]
pub struct Models {
    pub gamma: GeneratorMatrix,
    pub diffusion: DiffusionModel,
    pub jump: JumpModel,
    pub initial_regime: usize,
}

impl Models {
    pub fn new(gamma: GeneratorMatrix, diffusion: DiffusionModel, jump: JumpModel, initial_regime: usize) -> Result<Self> {
        let m = gamma.states();
        if diffusion.states() != m || jump.states() != m {
            return Err(Error::param(
                "states",
                format!(
                    "generator has {m} states but diffusion/jump parameters cover {}/{}",
                    diffusion.states(),
                    jump.states()
                ),
            ));
        }
        gamma.check_state(initial_regime)?;
        Ok(Self {
            gamma,
            diffusion,
            jump,
            initial_regime,
        })
    }

    /// No noise, frozen chain.
    pub fn silent(modes: &Arc<ModeSet>, states: usize) -> Self {
        Self {
            gamma: GeneratorMatrix::frozen(states),
            diffusion: DiffusionModel::off(states, modes),
            jump: JumpModel::off(states, modes),
            initial_regime: 0,
        }
    }

    pub fn states(&self) -> usize {
        self.gamma.states()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub u: SpectralField,
    pub regime: usize,
}

/// Everything precomputed for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: SimConfig,
    pub models: Models,
    modes: Arc<ModeSet>,
    mollifier: MollifierTable,
    n: usize,
}

impl Simulator {
    pub fn new(config: SimConfig, models: Models) -> Result<Self> {
        config.validate()?;
        let modes = build_modes(config.k_max)?;
        let n = config.galerkin_n.unwrap_or(modes.dimension());
        if n == 0 || n > modes.dimension() {
            return Err(Error::ProjectionOutOfRange { n, dim: modes.dimension() });
        }
        if models.diffusion.spectrum.len() != modes.dimension() || models.jump.direction.coeffs().len() != modes.dimension() {
            return Err(Error::ModeMismatch {
                left: modes.dimension(),
                right: models.diffusion.spectrum.len(),
            });
        }
        let check_entry = |name: &'static str, e: Option<usize>| match e {
            Some(e) if e >= modes.dimension() => Err(Error::param(name, format!("entry {e} outside {} modes", modes.dimension()))),
            _ => Ok(()),
        };
        check_entry("forcing.entry", config.forcing.entry())?;
        check_entry(
            "initial.entry",
            match config.initial {
                InitialCondition::Mode { entry, .. } => Some(entry),
                _ => None,
            },
        )?;
        check_entry("perturbation.entry", config.perturbation.map(|p| p.0))?;
        let mollifier = MollifierTable::new(&modes, config.epsilon)?;
        Ok(Self {
            config,
            models,
            modes,
            mollifier,
            n,
        })
    }

    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn mollifier(&self) -> &MollifierTable {
        &self.mollifier
    }

    pub fn galerkin_n(&self) -> usize {
        self.n
    }

    pub fn master_dt(&self) -> f64 {
        self.config.master_dt.unwrap_or(self.config.dt)
    }

    pub fn realization(&self, path: u64) -> Result<NoiseRealization> {
        let spec = RealizationSpec {
            horizon: self.config.horizon,
            cells: whole_multiple(self.config.horizon, self.master_dt()).expect("validated"),
            initial_regime: self.models.initial_regime,
            jump_rate: self.models.jump.rate,
        };
        NoiseRealization::generate(
            path_seed(self.config.seed, path),
            spec,
            &self.models.diffusion.spectrum,
            &self.models.gamma,
        )
    }

    pub fn initial_state(&self, realization: &NoiseRealization) -> Result<SolverState> {
        let mut rng = stream_rng(realization.path_seed, Stream::Initial);
        let mut u = self.config.initial.sample(&self.modes, self.n, &mut rng);
        if let Some((entry, delta)) = self.config.perturbation {
            u.coeffs_mut()[entry] += Complex64::new(delta, 0.0);
        }
        if self.config.mollify_initial {
            u = self.mollifier.apply(&u);
        }
        u.project_in_place(self.n)?;
        Ok(SolverState {
            t: 0.0,
            u,
            regime: realization.chain().initial,
        })
    }

    /// `−B_{k_ε}(u)` (or zero with transport off), projected.
    pub fn transport(&self, u: &SpectralField) -> SpectralField {
        if !self.config.nonlinear {
            return SpectralField::zeros(&self.modes);
        }
        let mut b = b_mollified_apply(&self.mollifier, u).scaled(-1.0);
        b.project_in_place(self.n).expect("validated level");
        b
    }

    /// Drift `−νAu − B_{k_ε}(u) + f(t) − ∫G ν` (projected).
    pub fn drift(&self, t: f64, u: &SpectralField, regime: usize) -> Result<SpectralField> {
        let mut d = self.transport(u);
        d.axpy(-self.config.nu, &u.stokes_apply())?;
        d.axpy(1.0, &self.forcing(t))?;
        d.axpy(-1.0, &self.models.jump.compensator_mean(t, u, regime)?)?;
        d.project_in_place(self.n)?;
        Ok(d)
    }

    pub fn forcing(&self, t: f64) -> SpectralField {
        let mut f = self.config.forcing.eval(&self.modes, t);
        f.project_in_place(self.n).expect("validated level");
        f
    }

    pub fn step_between_events(&self, state: &SolverState, dt_eff: f64, dw: &[Complex64]) -> Result<SolverState> {
        let t = state.t;
        let u = &state.u;
        let mut rhs = u.clone();
        let mut explicit = self.transport(u);
        explicit.axpy(1.0, &self.forcing(t))?;
        explicit.axpy(-1.0, &self.models.jump.compensator_mean(t, u, state.regime)?)?;
        rhs.axpy(dt_eff, &explicit)?;
        rhs.axpy(1.0, &self.models.diffusion.apply(t, u, state.regime, dw)?)?;
        let nu = self.config.nu;
        for (l, c) in rhs.coeffs_mut().iter_mut().enumerate() {
            *c /= 1.0 + nu * self.modes.eigenvalue(l) * dt_eff;
        }
        rhs.project_in_place(self.n)?;
        Ok(SolverState {
            t: t + dt_eff,
            u: rhs,
            regime: state.regime,
        })
    }

    pub fn apply_jump(&self, state: &SolverState, mark: f64) -> Result<SolverState> {
        let mut g = self.models.jump.eval(state.t, &state.u, state.regime, mark)?;
        g.project_in_place(self.n)?;
        Ok(SolverState {
            t: state.t,
            u: state.u.add(&g)?,
            regime: state.regime,
        })
    }

    pub fn apply_switch(&self, state: &SolverState, to: usize) -> Result<SolverState> {
        self.models.gamma.check_state(to)?;
        Ok(SolverState {
            t: state.t,
            u: state.u.clone(),
            regime: to,
        })
    }

    pub fn integrate_path(&self, path: u64, realization: &NoiseRealization) -> Result<PathRecord> {
        integrate(self, path, realization)
    }

    /// Build the realization for `path` and integrate it.
    pub fn run_path(&self, path: u64) -> Result<PathRecord> {
        let r = self.realization(path)?;
        self.integrate_path(path, &r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub h_norm_sq: f64,
    pub v_norm_sq: f64,
    pub h_norm_cubed: f64,
    pub regime: usize,
    pub jumps_so_far: usize,
    /// `∫₀ᵗ ‖u‖² ds` by trapezoid over knots.
    pub dissipation: f64,
    #[serde(skip)]
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoggedEvent {
    Switch {
        t: f64,
        from: usize,
        to: usize,
    },
    Jump {
        t: f64,
        mark: f64,
        h_norm_sq_before: f64,
        h_norm_sq_after: f64,
    },
}

/// One node of the event-adapted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub wiener: WienerRef,
    /// Left limit `(u(t−), r(t−))`; equal to the right value away from events.
    pub left: SolverState,
    pub right: SolverState,
    pub jump_mark: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub path: u64,
    pub samples: Vec<Sample>,
    pub events: Vec<LoggedEvent>,
    pub final_state: SolverState,
    pub sup_h_sq: f64,
    pub sup_h_cubed: f64,
    /// `∫₀ᵀ ‖u‖² dt`.
    pub dissipation: f64,
    /// `∫₀ᵀ |u| ‖u‖² dt`.
    pub weighted_dissipation: f64,
    pub knots: Option<Vec<Knot>>,
}

impl PathRecord {
    pub fn sample_times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn jump_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, LoggedEvent::Jump { .. })).count()
    }
}

enum KnotKind {
    Node(usize),
    Event(usize),
}

fn integrate(sim: &Simulator, path: u64, realization: &NoiseRealization) -> Result<PathRecord> {
    let cfg = &sim.config;
    if (realization.spec.horizon - cfg.horizon).abs() > 1e-12 * cfg.horizon {
        return Err(Error::CouplingMismatch(
            "realization horizon differs from the configured horizon".into(),
        ));
    }
    let stride = realization.stride_for(cfg.dt)?;
    let steps = realization.cells() / stride;
    let sample_every = whole_multiple(cfg.sample_interval, cfg.dt).expect("validated");
    let h = realization.master_dt();

    // Merge base nodes and events into one sweep order.
    let events = realization.events();
    let mut order = Vec::with_capacity(steps + 1 + events.len());
    let mut e = 0;
    for k in 0..=steps {
        let t = (k * stride) as f64 * h;
        while e < events.len() && events[e].time < t {
            order.push(KnotKind::Event(e));
            e += 1;
        }
        order.push(KnotKind::Node(k));
    }

    let mut state = sim.initial_state(realization)?;
    let mut wref = WienerRef::Node(0);
    let mut samples = Vec::with_capacity(steps / sample_every + 1);
    let mut logged = Vec::new();
    let mut knots = cfg.keep_knots.then(|| Vec::with_capacity(order.len()));
    let mut jumps = 0usize;
    let mut dissipation = 0.0;
    let mut weighted = 0.0;
    let (mut sup2, mut sup3) = (0.0f64, 0.0f64);
    // Values of ‖u‖² and |u|‖u‖² at the right end of the last knot.
    let mut prev = (0.0, 0.0);

    let mut track = |u: &SpectralField| {
        let h2 = u.h_norm_sq();
        sup2 = sup2.max(h2);
        sup3 = sup3.max(h2 * h2.sqrt());
    };

    for (idx, kind) in order.iter().enumerate() {
        let (t, here) = match *kind {
            KnotKind::Node(k) => ((k * stride) as f64 * h, WienerRef::Node(k * stride)),
            KnotKind::Event(e) => (events[e].time, WienerRef::Event(e)),
        };
        let left = if idx == 0 {
            state.clone()
        } else {
            let dt_eff = t - state.t;
            let stepped = if dt_eff > 0.0 {
                let dw = realization.increment(wref, here);
                sim.step_between_events(&state, dt_eff, &dw)?
            } else {
                SolverState { t, ..state.clone() }
            };
            if !stepped.u.is_finite() {
                return Err(Error::BlowUp { t, path });
            }
            let v2 = stepped.u.v_norm_sq();
            let cur = (v2, stepped.u.h_norm() * v2);
            dissipation += 0.5 * dt_eff * (prev.0 + cur.0);
            weighted += 0.5 * dt_eff * (prev.1 + cur.1);
            stepped
        };
        track(&left.u);
        let mut right = SolverState { t, ..left.clone() };
        let mut mark = None;
        if let KnotKind::Event(e) = *kind {
            match events[e].kind {
                EventKind::Switch { to } => {
                    logged.push(LoggedEvent::Switch { t, from: right.regime, to });
                    right = sim.apply_switch(&right, to)?;
                }
                EventKind::Jump { mark: z } => {
                    // Evaluate G at the pre-event state, regime included.
                    let pre = SolverState {
                        regime: left.regime,
                        ..right.clone()
                    };
                    let jumped = sim.apply_jump(&pre, z)?;
                    if !jumped.u.is_finite() {
                        return Err(Error::BlowUp { t, path });
                    }
                    logged.push(LoggedEvent::Jump {
                        t,
                        mark: z,
                        h_norm_sq_before: right.u.h_norm_sq(),
                        h_norm_sq_after: jumped.u.h_norm_sq(),
                    });
                    right.u = jumped.u;
                    jumps += 1;
                    mark = Some(z);
                }
            }
            track(&right.u);
        }
        let v2 = right.u.v_norm_sq();
        prev = (v2, right.u.h_norm() * v2);
        if let KnotKind::Node(k) = *kind {
            if k % sample_every == 0 || k == steps {
                let h2 = right.u.h_norm_sq();
                samples.push(Sample {
                    t,
                    h_norm_sq: h2,
                    v_norm_sq: v2,
                    h_norm_cubed: h2 * h2.sqrt(),
                    regime: right.regime,
                    jumps_so_far: jumps,
                    dissipation,
                    coeffs: right.u.coeffs().to_vec(),
                });
            }
        }
        if let Some(k) = knots.as_mut() {
            k.push(Knot {
                t,
                wiener: here,
                left: left.clone(),
                right: right.clone(),
                jump_mark: mark,
            });
        }
        state = right;
        wref = here;
    }

    Ok(PathRecord {
        path,
        samples,
        events: logged,
        final_state: state,
        sup_h_sq: sup2,
        sup_h_cubed: sup3,
        dissipation,
        weighted_dissipation: weighted,
        knots,
    })
}

/// Run `paths` independent paths in parallel and map each record through
/// `reduce`; results come back in path order regardless of scheduling.
pub fn run_ensemble<T, F>(sim: &Simulator, paths: u64, reduce: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(PathRecord, &NoiseRealization) -> Result<T> + Sync,
{
    (0..paths)
        .into_par_iter()
        .map(|p| {
            let r = sim.realization(p)?;
            let rec = sim.integrate_path(p, &r)?;
            reduce(rec, &r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRecord {
    pub a: PathRecord,
    pub b: PathRecord,
    /// `(t, w(t))` with `w = u_A − u_B` on the shared sample grid.
    pub difference: Vec<(f64, SpectralField)>,
}

impl CoupledRecord {
    /// `∫₀ᵀ |w|² dt` by trapezoid on the sample grid.
    pub fn l2_distance_sq(&self) -> f64 {
        self.difference
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.h_norm_sq() + w[1].1.h_norm_sq()))
            .sum()
    }
}

/// Fail unless the configurations agree outside `{u₀, ε, n, dt}`.
pub fn check_coupling(a: &SimConfig, b: &SimConfig) -> Result<()> {
    let mut masked = b.clone();
    masked.initial = a.initial;
    masked.perturbation = a.perturbation;
    masked.mollify_initial = a.mollify_initial;
    masked.epsilon = a.epsilon;
    masked.galerkin_n = a.galerkin_n;
    masked.dt = a.dt;
    if masked != *a {
        return Err(Error::CouplingMismatch(
            "coupled configurations may differ only in the initial data, epsilon, the Galerkin level, and dt".into(),
        ));
    }
    Ok(())
}

/// Two runs driven by one realization. Each run consumes the master
/// increments aggregated to its own step.
pub fn integrate_coupled(a: &Simulator, b: &Simulator, path: u64, realization: &NoiseRealization) -> Result<CoupledRecord> {
    check_coupling(&a.config, &b.config)?;
    let ra = a.integrate_path(path, realization)?;
    let rb = b.integrate_path(path, realization)?;
    if ra.samples.len() != rb.samples.len() {
        return Err(Error::CouplingMismatch("sample grids differ".into()));
    }
    let modes = a.modes();
    let difference = ra
        .samples
        .iter()
        .zip(&rb.samples)
        .map(|(x, y)| {
            let coeffs = x.coeffs.iter().zip(&y.coeffs).map(|(p, q)| p - q).collect();
            Ok((x.t, SpectralField::from_coeffs(modes, coeffs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoupledRecord { a: ra, b: rb, difference })
}
