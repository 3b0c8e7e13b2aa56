//! TOML run configuration. Every key has a default; unknown keys are rejected.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use snswitch::analysis::{PhiShape, TestFunctionPhi};
use snswitch::error::Error as CoreError;
use snswitch::integrator::{Forcing, InitialCondition, Models, SimConfig, Simulator};
use snswitch::noise::{CovarianceSpectrum, DiffusionModel, JumpModel};
use snswitch::regime::GeneratorMatrix;
use snswitch::spectral::{build_modes, SpectralField};

/// A validation failure tied to a dotted config key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
    /// 1-based line of the offending key in the source, when known.
    pub line: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
            line: None,
        }
    }

    /// Rewrites a library error under `section`, keeping a parameter name
    /// when the library reports one.
    fn from_core(section: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { name, reason } => {
                let leaf = name.rsplit('.').next().unwrap_or(name);
                let key = match leaf {
                    "viscosity" => "simulation.viscosity".to_string(),
                    "entry" => format!("{}.entry", name.split('.').next().unwrap_or(section)),
                    _ => format!("{section}.{leaf}"),
                };
                Self::new(key, reason)
            }
            other => Self::new(section, other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    Zero,
    Constant,
    Sinusoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Zero,
    Mode,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Simulation {
    pub viscosity: f64,
    pub epsilon: f64,
    pub k_max: usize,
    pub galerkin_n: Option<usize>,
    pub dt: f64,
    pub horizon: f64,
    pub master_dt: Option<f64>,
    pub sample_interval: f64,
    pub transport: bool,
}

impl Default for Simulation {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            viscosity: d.nu,
            epsilon: d.epsilon,
            k_max: d.k_max,
            galerkin_n: None,
            dt: d.dt,
            horizon: d.horizon,
            master_dt: None,
            sample_interval: d.sample_interval,
            transport: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSection {
    pub kind: ForcingKind,
    pub entry: usize,
    pub amplitude: f64,
    pub frequency: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            kind: ForcingKind::Constant,
            entry: 0,
            amplitude: 1.0,
            frequency: TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub radius: f64,
    pub exponent: f64,
    pub entry: usize,
    pub amplitude: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Sphere,
            radius: 1.0,
            exponent: 2.0,
            entry: 0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub generator: Vec<Vec<f64>>,
    pub initial_state: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            generator: vec![vec![-1.0, 1.0], vec![2.0, -2.0]],
            initial_state: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Covariance eigenvalues `q_ℓ = q_amplitude · ℓ^{-q_exponent}`.
    pub q_amplitude: f64,
    pub q_exponent: f64,
    /// Per-regime scale `s_i`.
    pub amplitudes: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            q_amplitude: 1.0,
            q_exponent: 2.0,
            amplitudes: vec![1.0, 0.5],
            a: 1.0,
            b: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JumpSection {
    pub rate: f64,
    /// Per-regime gain `g_i`.
    pub gains: Vec<f64>,
    pub direction_entry: usize,
    pub coupling: f64,
}

impl Default for JumpSection {
    fn default() -> Self {
        Self {
            rate: 2.0,
            gains: vec![0.3, 0.5],
            direction_entry: 1,
            coupling: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateStudy {
    pub paths: u64,
}

impl Default for SimulateStudy {
    fn default() -> Self {
        Self { paths: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsStudy {
    pub paths: u64,
    pub k_max: Option<usize>,
}

impl Default for MomentsStudy {
    fn default() -> Self {
        Self { paths: 1000, k_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyStudy {
    pub paths: u64,
    pub k_max: Option<usize>,
    /// Noise-off runs at `dt, dt/2, …` for the order fit.
    pub refinements: usize,
    pub order_threshold: f64,
}

impl Default for EnergyStudy {
    fn default() -> Self {
        Self {
            paths: 1000,
            k_max: None,
            refinements: 3,
            order_threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MartingaleStudy {
    pub paths: u64,
    pub k_max: Option<usize>,
    pub phi_radius: f64,
    pub phi_weights: Vec<f64>,
    pub rho_entry: usize,
    pub pairs: Vec<[f64; 2]>,
    pub clip_cap: f64,
    pub regime_state: usize,
    pub negative_control: bool,
}

impl Default for MartingaleStudy {
    fn default() -> Self {
        Self {
            paths: 10_000,
            k_max: Some(1),
            phi_radius: 3.0,
            phi_weights: vec![1.0, 0.5],
            rho_entry: 0,
            pairs: vec![[0.2, 0.5], [0.3, 0.8], [0.5, 1.0]],
            clip_cap: 4.0,
            regime_state: 0,
            negative_control: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityStudy {
    pub paths: u64,
    pub k_max: Option<usize>,
    pub entry: usize,
    pub deltas: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for ContinuityStudy {
    fn default() -> Self {
        Self {
            paths: 1000,
            k_max: None,
            entry: 0,
            deltas: vec![0.1, 0.05, 0.025, 0.0125],
            ratio_min: 2.0,
            ratio_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsStudy {
    pub paths: u64,
    pub k_max: Option<usize>,
    pub levels: Vec<f64>,
}

impl Default for EpsStudy {
    fn default() -> Self {
        Self {
            paths: 200,
            k_max: None,
            levels: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineStudy {
    pub paths: u64,
    pub k_max: Option<usize>,
    /// Deterministic coupled runs; consecutive levels are compared.
    pub dt_levels: Vec<f64>,
    pub order_threshold: f64,
    /// Optional Galerkin levels compared under shared noise (reported only).
    pub galerkin_levels: Vec<usize>,
    pub t0: f64,
    pub deltas: Vec<f64>,
}

impl Default for RefineStudy {
    fn default() -> Self {
        Self {
            paths: 1000,
            k_max: None,
            dt_levels: vec![2e-3, 1e-3, 5e-4, 2.5e-4],
            order_threshold: 0.9,
            galerkin_levels: Vec::new(),
            t0: 0.5,
            deltas: vec![0.16, 0.08, 0.04, 0.02],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainStudy {
    pub paths: u64,
    pub horizon: f64,
    pub p_threshold: f64,
}

impl Default for ChainStudy {
    fn default() -> Self {
        Self {
            paths: 10_000,
            horizon: 10.0,
            p_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditStudy {
    pub samples: u64,
    pub k_max: Option<usize>,
    pub radius: f64,
    pub slack: f64,
}

impl Default for AuditStudy {
    fn default() -> Self {
        Self {
            samples: 10_000,
            k_max: None,
            radius: 5.0,
            slack: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub simulation: Simulation,
    pub forcing: ForcingSection,
    pub initial: InitialSection,
    pub chain: ChainSection,
    pub noise: NoiseSection,
    pub jumps: JumpSection,
    pub simulate: SimulateStudy,
    pub moments: MomentsStudy,
    pub energy: EnergyStudy,
    pub martingale: MartingaleStudy,
    pub continuity: ContinuityStudy,
    pub eps_study: EpsStudy,
    pub refine: RefineStudy,
    pub chain_test: ChainStudy,
    pub audit: AuditStudy,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: SimConfig::default().seed,
            simulation: Simulation::default(),
            forcing: ForcingSection::default(),
            initial: InitialSection::default(),
            chain: ChainSection::default(),
            noise: NoiseSection::default(),
            jumps: JumpSection::default(),
            simulate: SimulateStudy::default(),
            moments: MomentsStudy::default(),
            energy: EnergyStudy::default(),
            martingale: MartingaleStudy::default(),
            continuity: ContinuityStudy::default(),
            eps_study: EpsStudy::default(),
            refine: RefineStudy::default(),
            chain_test: ChainStudy::default(),
            audit: AuditStudy::default(),
        }
    }
}

/// Parses and validates TOML text.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let cfg: Config = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError {
            key: String::from("<document>"),
            message: e.message().to_string(),
            line,
        }
    })?;
    cfg.validate().map_err(|mut e| {
        e.line = locate(text, &e.key);
        e
    })?;
    Ok(cfg)
}

/// Line of `key = ...` inside the table named by the key prefix.
fn locate(text: &str, dotted: &str) -> Option<usize> {
    let (section, leaf) = match dotted.rsplit_once('.') {
        Some((s, l)) => (s, l),
        None => ("", dotted),
    };
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == dotted {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == leaf {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn positive(key: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(key, "must be positive and finite"))
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sim = &self.simulation;
        if !(sim.viscosity > 0.0 && sim.viscosity.is_finite()) {
            return Err(ConfigError::new("simulation.viscosity", "viscosity must be positive"));
        }
        if sim.k_max == 0 || sim.k_max > 6 {
            return Err(ConfigError::new("simulation.k_max", "k_max must lie in 1..=6"));
        }
        let states = self.chain.generator.len();
        GeneratorMatrix::new(self.chain.generator.clone()).map_err(|e| ConfigError::new("chain.generator", e.to_string()))?;
        if self.chain.initial_state >= states {
            return Err(ConfigError::new(
                "chain.initial_state",
                format!("state {} outside a {states}-state chain", self.chain.initial_state),
            ));
        }
        if self.noise.amplitudes.len() != states {
            return Err(ConfigError::new(
                "noise.amplitudes",
                format!("need one amplitude per regime ({states})"),
            ));
        }
        if self.jumps.gains.len() != states {
            return Err(ConfigError::new("jumps.gains", format!("need one gain per regime ({states})")));
        }
        if !(self.jumps.rate >= 0.0 && self.jumps.rate.is_finite()) {
            return Err(ConfigError::new("jumps.rate", "rate must be finite and nonnegative"));
        }
        for (key, k) in [
            ("moments.k_max", self.moments.k_max),
            ("energy.k_max", self.energy.k_max),
            ("martingale.k_max", self.martingale.k_max),
            ("continuity.k_max", self.continuity.k_max),
            ("eps_study.k_max", self.eps_study.k_max),
            ("refine.k_max", self.refine.k_max),
            ("audit.k_max", self.audit.k_max),
        ] {
            if let Some(k) = k {
                if k == 0 || k > 6 {
                    return Err(ConfigError::new(key, "k_max must lie in 1..=6"));
                }
                self.simulator(Some(k), false)?;
            }
        }
        self.simulator(None, false)?;

        let m = &self.martingale;
        positive("martingale.phi_radius", m.phi_radius)?;
        if m.phi_weights.len() != states {
            return Err(ConfigError::new(
                "martingale.phi_weights",
                format!("need one weight per regime ({states})"),
            ));
        }
        if m.regime_state >= states {
            return Err(ConfigError::new("martingale.regime_state", "unknown regime"));
        }
        if m.pairs.iter().any(|&[s, t]| !(0.0 < s && s < t && t <= sim.horizon)) {
            return Err(ConfigError::new("martingale.pairs", "each pair needs 0 < s < t <= horizon"));
        }
        positive("martingale.clip_cap", m.clip_cap)?;
        for (key, xs) in [
            ("continuity.deltas", &self.continuity.deltas),
            ("eps_study.levels", &self.eps_study.levels),
            ("refine.dt_levels", &self.refine.dt_levels),
            ("refine.deltas", &self.refine.deltas),
        ] {
            if xs.len() < 2 || xs.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(ConfigError::new(key, "need at least two positive levels"));
            }
        }
        positive("chain_test.horizon", self.chain_test.horizon)?;
        positive("audit.radius", self.audit.radius)?;
        if !(self.audit.slack >= 0.0) {
            return Err(ConfigError::new("audit.slack", "slack must be nonnegative"));
        }
        Ok(())
    }

    /// Canonical text: every key written out, fixed order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn sim_config(&self, k_max: Option<usize>, keep_knots: bool) -> SimConfig {
        let s = &self.simulation;
        let forcing = match self.forcing.kind {
            ForcingKind::Zero => Forcing::Zero,
            ForcingKind::Constant => Forcing::Constant {
                entry: self.forcing.entry,
                amplitude: self.forcing.amplitude,
            },
            ForcingKind::Sinusoidal => Forcing::Sinusoidal {
                entry: self.forcing.entry,
                amplitude: self.forcing.amplitude,
                frequency: self.forcing.frequency,
            },
        };
        let initial = match self.initial.kind {
            InitialKind::Zero => InitialCondition::Zero,
            InitialKind::Mode => InitialCondition::Mode {
                entry: self.initial.entry,
                amplitude: self.initial.amplitude,
            },
            InitialKind::Sphere => InitialCondition::Sphere {
                radius: self.initial.radius,
                exponent: self.initial.exponent,
            },
        };
        SimConfig {
            nu: s.viscosity,
            epsilon: s.epsilon,
            k_max: k_max.unwrap_or(s.k_max),
            // A study-level k_max resets the projection to the full basis.
            galerkin_n: if k_max.is_some() { None } else { s.galerkin_n },
            dt: s.dt,
            horizon: s.horizon,
            master_dt: s.master_dt,
            forcing,
            initial,
            perturbation: None,
            mollify_initial: false,
            nonlinear: s.transport,
            sample_interval: s.sample_interval,
            keep_knots,
            seed: self.seed,
        }
    }

    pub fn models(&self, k_max: usize) -> Result<Models, ConfigError> {
        let modes = build_modes(k_max).map_err(|e| ConfigError::from_core("simulation", e))?;
        let gamma = GeneratorMatrix::new(self.chain.generator.clone()).map_err(|e| ConfigError::new("chain.generator", e.to_string()))?;
        let n = &self.noise;
        let spectrum =
            CovarianceSpectrum::power_law(&modes, n.q_amplitude, n.q_exponent).map_err(|e| ConfigError::from_core("noise", e))?;
        let diffusion =
            DiffusionModel::uniform(n.amplitudes.clone(), n.a, n.b, spectrum).map_err(|e| ConfigError::from_core("noise", e))?;
        let j = &self.jumps;
        if j.direction_entry >= modes.dimension() {
            return Err(ConfigError::new(
                "jumps.direction_entry",
                format!("entry outside {} modes", modes.dimension()),
            ));
        }
        let jump = JumpModel::new(j.rate, j.gains.clone(), SpectralField::unit(&modes, j.direction_entry), j.coupling)
            .map_err(|e| ConfigError::from_core("jumps", e))?;
        Models::new(gamma, diffusion, jump, self.chain.initial_state).map_err(|e| ConfigError::from_core("chain", e))
    }

    /// Simulator for the configured models, optionally at another `k_max`.
    pub fn simulator(&self, k_max: Option<usize>, keep_knots: bool) -> Result<Simulator, ConfigError> {
        let cfg = self.sim_config(k_max, keep_knots);
        let models = self.models(cfg.k_max)?;
        Simulator::new(cfg, models).map_err(|e| ConfigError::from_core("simulation", e))
    }

    /// Same configuration with noise off and the chain frozen.
    pub fn silent_simulator(&self, k_max: Option<usize>, keep_knots: bool) -> Result<Simulator, ConfigError> {
        let cfg = self.sim_config(k_max, keep_knots);
        let modes = build_modes(cfg.k_max).map_err(|e| ConfigError::from_core("simulation", e))?;
        let models = Models::silent(&modes, self.chain.generator.len());
        Simulator::new(cfg, models).map_err(|e| ConfigError::from_core("simulation", e))
    }

    pub fn phi(&self) -> TestFunctionPhi {
        TestFunctionPhi {
            shape: PhiShape::Bump,
            radius: self.martingale.phi_radius,
            weights: self.martingale.phi_weights.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, Config::default());
        let sim = cfg.simulator(None, false).unwrap();
        assert_eq!(sim.config.k_max, 2);
        assert_eq!(sim.models.states(), 2);
    }

    #[test]
    fn canonical_round_trip() {
        let mut cfg = Config::default();
        cfg.seed = 7;
        cfg.simulation.galerkin_n = Some(40);
        cfg.simulation.master_dt = Some(5e-4);
        cfg.forcing.kind = ForcingKind::Sinusoidal;
        cfg.noise.b = 0.1 + 0.2;
        let text = cfg.canonical();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn negative_viscosity_names_the_key() {
        let err = parse_config("seed = 1\n[simulation]\nviscosity = -1.0\n").unwrap_err();
        assert_eq!(err.key, "simulation.viscosity");
        assert!(err.message.contains("viscosity must be positive"));
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn unknown_key_is_rejected_with_a_line() {
        let err = parse_config("[noise]\nq_amplitude = 1.0\nsigma = 2.0\n").unwrap_err();
        assert!(err.message.contains("sigma"), "{err}");
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn negative_rate_is_rejected() {
        let err = parse_config("[chain]\ngenerator = [[-1.0, 1.0], [-2.0, 2.0]]\n").unwrap_err();
        assert_eq!(err.key, "chain.generator");
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn regime_count_mismatch_is_caught() {
        let err = parse_config("[chain]\ngenerator = [[-1.0, 0.5, 0.5], [1.0, -1.0, 0.0], [1.0, 0.0, -1.0]]\n").unwrap_err();
        assert_eq!(err.key, "noise.amplitudes");
    }

    #[test]
    fn forcing_entry_outside_basis() {
        let err = parse_config("[simulation]\nk_max = 1\n[forcing]\nentry = 26\n").unwrap_err();
        assert_eq!(err.key, "forcing.entry", "{err}");
    }

    #[test]
    fn hash_changes_with_content() {
        let a = Config::default();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
