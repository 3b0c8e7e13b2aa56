//! Coefficient families for the Wiener and jump parts.
//!
//! Every complex coefficient `c_ℓ` carries two real degrees of freedom
//! `r = (ℓ, re)` and `r = (ℓ, im)`. The Wiener process drives each with an
//! independent `N(0, q_ℓ dt / 2)` increment, so `E|dW_ℓ|² = q_ℓ dt` and
//! `E|W(t)|² = t·tr Q`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{ModeSet, SpectralField};

/// `E|z|^p` for a standard Gaussian mark, `p = 0..=3`.
pub fn gaussian_abs_moment(p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => (2.0 / PI).sqrt(),
        2 => 1.0,
        3 => 2.0 * (2.0 / PI).sqrt(),
        _ => panic!("moment order {p} not tabulated"),
    }
}

/// Smallest `H` with `(α + β x)^p ≤ H (1 + x^p)` for all `x ≥ 0`, by Hölder.
pub fn affine_power_constant(alpha: f64, beta: f64, p: u32) -> f64 {
    let (alpha, beta) = (alpha.abs(), beta.abs());
    if p == 1 {
        return alpha.max(beta);
    }
    let e = p as f64 / (p as f64 - 1.0);
    (alpha.powf(e) + beta.powf(e)).powi(p as i32 - 1)
}

/// Eigenvalues of `Q` in the spectral basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceSpectrum {
    q: Vec<f64>,
}

impl CovarianceSpectrum {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some(bad) = q.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::param(
                "covariance",
                format!("eigenvalue {bad} is not a finite nonnegative number"),
            ));
        }
        Ok(Self { q })
    }

    /// `q_ℓ = amplitude · ℓ^{-exponent}` with `ℓ = 1, 2, ...` in mode order.
    pub fn power_law(modes: &ModeSet, amplitude: f64, exponent: f64) -> Result<Self> {
        Self::new((1..=modes.dimension()).map(|l| amplitude * (l as f64).powf(-exponent)).collect())
    }

    pub fn zero(modes: &ModeSet) -> Self {
        Self {
            q: vec![0.0; modes.dimension()],
        }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn trace(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// Independent increments with `E|dW_ℓ|² = q_ℓ dt`.
pub fn sample_wiener_increment<R: Rng + ?Sized>(spectrum: &CovarianceSpectrum, dt: f64, rng: &mut R) -> Vec<Complex64> {
    spectrum
        .q
        .iter()
        .map(|&q| {
            let s = (0.5 * q * dt).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// `σ(t, u, i)` acting on real component `x_r` of `u` by the multiplier
/// `s_i (a_ℓ + b_ℓ x_r)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionModel {
    pub amplitudes: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub spectrum: CovarianceSpectrum,
}

impl DiffusionModel {
    pub fn new(amplitudes: Vec<f64>, a: Vec<f64>, b: Vec<f64>, spectrum: CovarianceSpectrum) -> Result<Self> {
        if a.len() != spectrum.len() || b.len() != spectrum.len() {
            return Err(Error::param(
                "diffusion",
                format!("profiles have {} / {} entries for {} modes", a.len(), b.len(), spectrum.len()),
            ));
        }
        if amplitudes.is_empty() {
            return Err(Error::param("diffusion.amplitudes", "need one amplitude per regime state"));
        }
        if amplitudes.iter().chain(&a).chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::param("diffusion", "non-finite coefficient"));
        }
        Ok(Self {
            amplitudes,
            a,
            b,
            spectrum,
        })
    }

    /// Constant profiles `a_ℓ = a`, `b_ℓ = b`.
    pub fn uniform(amplitudes: Vec<f64>, a: f64, b: f64, spectrum: CovarianceSpectrum) -> Result<Self> {
        let n = spectrum.len();
        Self::new(amplitudes, vec![a; n], vec![b; n], spectrum)
    }

    pub fn off(states: usize, modes: &ModeSet) -> Self {
        let n = modes.dimension();
        Self {
            amplitudes: vec![0.0; states],
            a: vec![0.0; n],
            b: vec![0.0; n],
            spectrum: CovarianceSpectrum::zero(modes),
        }
    }

    pub fn states(&self) -> usize {
        self.amplitudes.len()
    }

    fn amplitude(&self, i: usize) -> Result<f64> {
        self.amplitudes.get(i).copied().ok_or(Error::UnknownState {
            state: i,
            count: self.amplitudes.len(),
        })
    }

    /// Multipliers `(μ_re, μ_im)` for every mode.
    fn multipliers<'a>(&'a self, u: &'a SpectralField, s: f64) -> impl Iterator<Item = (f64, f64)> + 'a {
        u.coeffs()
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(move |(c, (a, b))| (s * (a + b * c.re), s * (a + b * c.im)))
    }

    pub fn apply(&self, _t: f64, u: &SpectralField, i: usize, dw: &[Complex64]) -> Result<SpectralField> {
        let s = self.amplitude(i)?;
        if dw.len() != u.coeffs().len() {
            return Err(Error::ModeMismatch {
                left: u.coeffs().len(),
                right: dw.len(),
            });
        }
        let coeffs = self
            .multipliers(u, s)
            .zip(dw)
            .map(|((mr, mi), w)| Complex64::new(mr * w.re, mi * w.im))
            .collect();
        SpectralField::from_coeffs(u.mode_set(), coeffs)
    }

    /// `‖σ(t,u,i)‖²_{L_Q} = Σ_r (q_ℓ / 2) μ_r²`.
    pub fn lq_norm_sq(&self, _t: f64, u: &SpectralField, i: usize) -> Result<f64> {
        let s = self.amplitude(i)?;
        Ok(self
            .multipliers(u, s)
            .zip(&self.spectrum.q)
            .map(|((mr, mi), q)| 0.5 * q * (mr * mr + mi * mi))
            .sum())
    }

    pub fn lq_norm(&self, t: f64, u: &SpectralField, i: usize) -> Result<f64> {
        Ok(self.lq_norm_sq(t, u, i)?.sqrt())
    }

    /// `Σ_r (q_ℓ / 2) (μ_r ρ_r)²`: quadratic variation rate of `⟨u, ρ⟩`.
    pub fn paired_variance(&self, u: &SpectralField, i: usize, rho: &SpectralField) -> Result<f64> {
        let s = self.amplitude(i)?;
        Ok(self
            .multipliers(u, s)
            .zip(&self.spectrum.q)
            .zip(rho.coeffs())
            .map(|(((mr, mi), q), r)| 0.5 * q * ((mr * r.re).powi(2) + (mi * r.im).powi(2)))
            .sum())
    }

    fn max_amplitude(&self) -> f64 {
        self.amplitudes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// `A = Σ q_ℓ a_ℓ²` and `B = max_ℓ q_ℓ b_ℓ²`.
    fn profile_sums(&self) -> (f64, f64) {
        let q = &self.spectrum.q;
        let a = q.iter().zip(&self.a).map(|(q, a)| q * a * a).sum();
        let b = q.iter().zip(&self.b).fold(0.0f64, |m, (q, b)| m.max(q * b * b));
        (a, b)
    }

    /// Growth constant in `‖σ‖^p ≤ K (1 + |u|^p)`, using
    /// `‖σ‖ ≤ s (√A + √(B/2) |u|)`.
    pub fn growth_constant(&self, p: u32) -> f64 {
        let (a, b) = self.profile_sums();
        self.max_amplitude().powi(p as i32) * affine_power_constant(a.sqrt(), (0.5 * b).sqrt(), p)
    }

    /// Lipschitz constant in `‖σ(u) − σ(v)‖² ≤ L |u − v|²`.
    pub fn lipschitz_constant(&self) -> f64 {
        let (_, b) = self.profile_sums();
        self.max_amplitude().powi(2) * 0.5 * b
    }
}

/// `G(t, u, i, z) = g_i z (ζ + c u)` with standard Gaussian marks at rate λ.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel {
    pub rate: f64,
    pub gains: Vec<f64>,
    pub direction: SpectralField,
    pub coupling: f64,
}

impl JumpModel {
    /// `direction` is normalized to unit `H` norm.
    pub fn new(rate: f64, gains: Vec<f64>, direction: SpectralField, coupling: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::param("jumps.rate", "must be finite and nonnegative"));
        }
        if gains.is_empty() || gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::param("jumps.gains", "need one finite gain per regime state"));
        }
        if !coupling.is_finite() {
            return Err(Error::param("jumps.coupling", "must be finite"));
        }
        let norm = direction.h_norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::param("jumps.direction", "must be a nonzero field"));
        }
        Ok(Self {
            rate,
            gains,
            direction: direction.scaled(1.0 / norm),
            coupling,
        })
    }

    pub fn off(states: usize, modes: &std::sync::Arc<ModeSet>) -> Self {
        Self {
            rate: 0.0,
            gains: vec![0.0; states],
            direction: SpectralField::unit(modes, 0),
            coupling: 0.0,
        }
    }

    pub fn states(&self) -> usize {
        self.gains.len()
    }

    fn gain(&self, i: usize) -> Result<f64> {
        self.gains.get(i).copied().ok_or(Error::UnknownState {
            state: i,
            count: self.gains.len(),
        })
    }

    /// `ζ + c u`.
    fn shape(&self, u: &SpectralField) -> Result<SpectralField> {
        let mut out = self.direction.clone();
        out.axpy(self.coupling, u)?;
        Ok(out)
    }

    pub fn eval(&self, _t: f64, u: &SpectralField, i: usize, z: f64) -> Result<SpectralField> {
        let g = self.gain(i)?;
        Ok(self.shape(u)?.scaled(g * z))
    }

    /// `∫ |G|^p ν₁(dz) = λ |g_i|^p E|z|^p |ζ + c u|^p`.
    pub fn moment(&self, _t: f64, u: &SpectralField, i: usize, p: u32) -> Result<f64> {
        let g = self.gain(i)?;
        Ok(self.rate * g.abs().powi(p as i32) * gaussian_abs_moment(p) * self.shape(u)?.h_norm().powi(p as i32))
    }

    /// `∫ G ν₁(dz)`, zero for centered marks.
    pub fn compensator_mean(&self, _t: f64, u: &SpectralField, i: usize) -> Result<SpectralField> {
        self.gain(i)?;
        Ok(SpectralField::zeros(u.mode_set()))
    }

    /// `⟨G(t,u,i,z), ρ⟩ = z · β` for the returned `β`.
    pub fn paired_slope(&self, u: &SpectralField, i: usize, rho: &SpectralField) -> Result<f64> {
        Ok(self.gain(i)? * self.shape(u)?.h_inner(rho)?)
    }

    fn max_gain(&self) -> f64 {
        self.gains.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Growth constant in `∫|G|^p ν ≤ K (1 + |u|^p)`.
    pub fn growth_constant(&self, p: u32) -> f64 {
        self.rate * self.max_gain().powi(p as i32) * gaussian_abs_moment(p) * affine_power_constant(1.0, self.coupling, p)
    }

    /// `∫|G(u) − G(v)|² ν = λ g_i² c² |u − v|²`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.rate * self.max_gain().powi(2) * self.coupling * self.coupling
    }
}

/// Closed-form constants of the built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisConstants {
    /// Diffusion growth, max over `p = 2, 3`.
    pub diffusion_growth: f64,
    pub diffusion_lipschitz: f64,
    /// Jump growth, max over `p = 1, 2, 3`.
    pub jump_growth: f64,
    pub jump_lipschitz: f64,
}

impl HypothesisConstants {
    pub fn of(diffusion: &DiffusionModel, jump: &JumpModel) -> Self {
        Self {
            diffusion_growth: [2, 3].iter().map(|&p| diffusion.growth_constant(p)).fold(0.0, f64::max),
            diffusion_lipschitz: diffusion.lipschitz_constant(),
            jump_growth: [1, 2, 3].iter().map(|&p| jump.growth_constant(p)).fold(0.0, f64::max),
            jump_lipschitz: jump.lipschitz_constant(),
        }
    }

    /// A single `K` valid for every growth condition.
    pub fn k(&self) -> f64 {
        self.diffusion_growth.max(self.jump_growth)
    }

    /// A single `L` valid for both Lipschitz conditions.
    pub fn l(&self) -> f64 {
        self.diffusion_lipschitz.max(self.jump_lipschitz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditLine {
    pub empirical: f64,
    pub closed_form: f64,
    pub pass: bool,
}

impl AuditLine {
    fn new(empirical: f64, closed_form: f64, slack: f64) -> Self {
        Self {
            empirical,
            closed_form,
            pass: empirical <= closed_form * (1.0 + slack) + f64::MIN_POSITIVE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditReport {
    pub samples: usize,
    pub skipped_pairs: usize,
    pub radius: f64,
    pub diffusion_growth: AuditLine,
    pub diffusion_lipschitz: AuditLine,
    pub jump_growth: AuditLine,
    pub jump_lipschitz: AuditLine,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        [
            self.diffusion_growth,
            self.diffusion_lipschitz,
            self.jump_growth,
            self.jump_lipschitz,
        ]
        .iter()
        .all(|l| l.pass)
    }
}

pub const MIN_AUDIT_SAMPLES: usize = 1000;

/// Random field with `h_norm` uniform on `[0, radius]`.
fn random_in_ball<R: Rng + ?Sized>(modes: &std::sync::Arc<ModeSet>, radius: f64, rng: &mut R) -> SpectralField {
    let dir = SpectralField::random(modes, rng, 1.0);
    let n = dir.h_norm();
    let r = radius * rng.gen::<f64>();
    if n > 0.0 {
        dir.scaled(r / n)
    } else {
        dir
    }
}

/// Empirical suprema of the four growth/Lipschitz ratios over random
/// `(u, v, i)`, compared against the closed-form constants with
/// relative `slack`.
pub fn hypotheses_audit<R: Rng + ?Sized>(
    diffusion: &DiffusionModel,
    jump: &JumpModel,
    modes: &std::sync::Arc<ModeSet>,
    sample_count: usize,
    radius: f64,
    slack: f64,
    rng: &mut R,
) -> Result<AuditReport> {
    if sample_count < MIN_AUDIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            need: MIN_AUDIT_SAMPLES,
            got: sample_count,
        });
    }
    let states = diffusion.states().min(jump.states());
    let mut sup = [0.0f64; 4];
    let mut skipped = 0;
    for _ in 0..sample_count {
        let u = random_in_ball(modes, radius, rng);
        let v = random_in_ball(modes, radius, rng);
        let i = rng.gen_range(0..states);
        let t = rng.gen::<f64>();
        let hu = u.h_norm();
        let s2 = diffusion.lq_norm_sq(t, &u, i)?;
        for p in [2, 3] {
            sup[0] = sup[0].max(s2.powf(p as f64 / 2.0) / (1.0 + hu.powi(p)));
        }
        for p in [1, 2, 3] {
            sup[2] = sup[2].max(jump.moment(t, &u, i, p)? / (1.0 + hu.powi(p as i32)));
        }
        let d = u.sub(&v)?.h_norm_sq();
        if d < 1e-24 {
            skipped += 1;
            continue;
        }
        // σ is affine in u, so σ(u) − σ(v) is σ applied to (u − v) with a ≡ 0.
        let ds: f64 = {
            let s = diffusion.amplitudes[i];
            u.coeffs()
                .iter()
                .zip(v.coeffs())
                .zip(diffusion.b.iter().zip(&diffusion.spectrum.q))
                .map(|((x, y), (b, q))| 0.5 * q * (s * b).powi(2) * ((x.re - y.re).powi(2) + (x.im - y.im).powi(2)))
                .sum()
        };
        sup[1] = sup[1].max(ds / d);
        let g = jump.gains[i];
        let dg = jump.rate * g * g * (jump.coupling * jump.coupling) * d;
        sup[3] = sup[3].max(dg / d);
    }
    let c = HypothesisConstants::of(diffusion, jump);
    Ok(AuditReport {
        samples: sample_count,
        skipped_pairs: skipped,
        radius,
        diffusion_growth: AuditLine::new(sup[0], c.diffusion_growth, slack),
        diffusion_lipschitz: AuditLine::new(sup[1], c.diffusion_lipschitz, slack),
        jump_growth: AuditLine::new(sup[2], c.jump_growth, slack),
        jump_lipschitz: AuditLine::new(sup[3], c.jump_lipschitz, slack),
    })
}
