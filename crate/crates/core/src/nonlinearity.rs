//! Trilinear form `b(u, v, w) = ∫ (u·∇)v · w`, the induced bilinear operator
//! `B`, and its mollified variant with the advecting field smoothed by the
//! standard bump mollifier acting as a radial Fourier multiplier.
//!
//! Convolutions are exact sums over the stored triads `p + q = k`, so the
//! identities `b(u, v, v) = 0` and `b(u, v, w) = -b(u, w, v)` hold to
//! rounding for every truncated divergence-free field.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::quadrature::Adaptive;
use crate::spectral::{norm_sq, FullIndex, ModeSet, SpectralField, Wavevector};

/// Absolute tolerance of the radial transform quadrature.
pub const MOLLIFIER_TOLERANCE: f64 = 1e-10;

fn bump_profile(s: f64) -> f64 {
    if s < 1.0 {
        (1.0 / (s * s - 1.0)).exp()
    } else {
        0.0
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `4π ∫₀¹ exp(1/(s²-1)) s² ds`, the reciprocal of the bump's normalizing constant.
fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let f = |s: f64| bump_profile(s) * s * s;
        4.0 * PI
            * Adaptive::default()
                .integrate(0.0, 1.0, MOLLIFIER_TOLERANCE * 1e-2, &f)
                .expect("bump mass quadrature converges")
    })
}

/// Fourier transform `η̂(r)` of the unit-mass bump at radial wavenumber `r`.
pub fn bump_transform(r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(1.0);
    }
    let f = |s: f64| bump_profile(s) * s * s * sinc(r * s);
    let integral = Adaptive::default().integrate(0.0, 1.0, MOLLIFIER_TOLERANCE / (4.0 * PI), &f)?;
    Ok(4.0 * PI * integral / bump_mass())
}

/// `m_ε(k) = η̂(ε|k|)`; exactly 1 when `ε = 0`.
pub fn mollifier_multiplier(epsilon: f64, k: Wavevector) -> Result<f64> {
    if epsilon == 0.0 {
        return Ok(1.0);
    }
    bump_transform(epsilon * (norm_sq(k) as f64).sqrt())
}

/// Per-wave multiplier values for one mode set.
#[derive(Debug, Clone)]
pub struct MollifierTable {
    epsilon: f64,
    per_wave: Vec<f64>,
}

impl MollifierTable {
    pub fn new(modes: &ModeSet, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(crate::error::Error::param("epsilon", "must be finite and nonnegative"));
        }
        let mut cache: HashMap<i32, f64> = HashMap::new();
        let mut per_wave = Vec::with_capacity(modes.wave_count());
        for &k in modes.waves() {
            let key = norm_sq(k);
            let m = match cache.get(&key) {
                Some(&m) => m,
                None => {
                    let m = mollifier_multiplier(epsilon, k)?;
                    cache.insert(key, m);
                    m
                }
            };
            per_wave.push(m);
        }
        Ok(Self { epsilon, per_wave })
    }

    /// Mollification switched off (`m ≡ 1`).
    pub fn off(modes: &ModeSet) -> Self {
        Self {
            epsilon: 0.0,
            per_wave: vec![1.0; modes.wave_count()],
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn multiplier(&self, wave: usize) -> f64 {
        self.per_wave[wave]
    }

    /// `k_ε u`.
    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let mut out = u.clone();
        for (l, c) in out.coeffs_mut().iter_mut().enumerate() {
            *c *= self.per_wave[l / 2];
        }
        out
    }
}

fn velocities(u: &SpectralField) -> Vec<[Complex64; 3]> {
    (0..u.mode_set().wave_count())
        .map(|w| u.velocity(FullIndex { wave: w, conj: false }))
        .collect()
}

fn fetch(table: &[[Complex64; 3]], idx: FullIndex) -> [Complex64; 3] {
    let v = table[idx.wave];
    if idx.conj {
        [v[0].conj(), v[1].conj(), v[2].conj()]
    } else {
        v
    }
}

/// `Σ_{p+q=k} i (û(p)·q) v̂(q)` for every canonical `k`.
fn convolution(u: &SpectralField, v: &SpectralField) -> Vec<[Complex64; 3]> {
    let modes = u.mode_set();
    let uu = velocities(u);
    let vv = if std::ptr::eq(u, v) { uu.clone() } else { velocities(v) };
    let mut out = vec![[Complex64::new(0.0, 0.0); 3]; modes.wave_count()];
    for (a, acc) in out.iter_mut().enumerate() {
        for t in modes.triads_for(a) {
            let up = fetch(&uu, t.p);
            let adv = up[0] * t.qvec[0] + up[1] * t.qvec[1] + up[2] * t.qvec[2];
            let factor = Complex64::new(-adv.im, adv.re);
            let vq = fetch(&vv, t.q);
            for d in 0..3 {
                acc[d] += factor * vq[d];
            }
        }
    }
    out
}

/// Leray projection onto the polarization basis, in coefficient storage.
fn project_to_field(modes: &std::sync::Arc<ModeSet>, conv: &[[Complex64; 3]]) -> SpectralField {
    let mut out = SpectralField::zeros(modes);
    let coeffs = out.coeffs_mut();
    for (a, c) in conv.iter().enumerate() {
        for p in 0..2 {
            let e = modes.polarization(a, p);
            coeffs[2 * a + p] = (c[0] * e[0] + c[1] * e[1] + c[2] * e[2]) * SQRT_2;
        }
    }
    out
}

/// `b(u, v, w)`.
pub fn b_form(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    u.check_same(v)?;
    u.check_same(w)?;
    let conv = convolution(u, v);
    let mut s = 0.0;
    for (a, c) in conv.iter().enumerate() {
        let wv = w.velocity(FullIndex { wave: a, conj: false });
        for d in 0..3 {
            s += (c[d] * wv[d].conj()).re;
        }
    }
    Ok(2.0 * s)
}

/// `B(u, v)`, satisfying `⟨B(u, v), w⟩ = b(u, v, w)` on the stored span.
pub fn b_apply(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_same(v)?;
    Ok(project_to_field(u.mode_set(), &convolution(u, v)))
}

/// `B_{k_ε}(u) = B(k_ε u, u)`: only the advecting slot is mollified.
pub fn b_mollified_apply(table: &MollifierTable, u: &SpectralField) -> SpectralField {
    let smoothed = table.apply(u);
    project_to_field(u.mode_set(), &convolution(&smoothed, u))
}

/// Largest observed `|b(k_ε u, v, u)| / (‖u‖ |u| ‖v‖)` over random pairs.
pub fn mollified_form_constant<R: Rng + ?Sized>(
    table: &MollifierTable,
    modes: &std::sync::Arc<ModeSet>,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = SpectralField::random(modes, rng, 1.0);
        let v = SpectralField::random(modes, rng, 1.0);
        let value = b_form(&table.apply(&u), &v, &u)?;
        let scale = u.v_norm() * u.h_norm() * v.v_norm();
        if scale > 0.0 {
            worst = worst.max(value.abs() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_modes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_epsilon_is_identity_multiplier() {
        assert_eq!(mollifier_multiplier(0.0, [3, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn multiplier_bounded_by_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let eps: f64 = rng.gen_range(0.0..2.0);
            let k = [rng.gen_range(-4..=4), rng.gen_range(-4..=4), rng.gen_range(-4..=4)];
            let m = mollifier_multiplier(eps, k).unwrap();
            assert!(m.abs() <= 1.0 + 1e-12, "m = {m} at eps = {eps}, k = {k:?}");
        }
    }

    /// Independent oracle: cartesian midpoint quadrature of
    /// `∫ η(x) cos(k·x) dx / ∫ η(x) dx` over `[-1, 1]³`. The bump is flat to
    /// all orders at the sphere, so the midpoint rule converges fast.
    fn cartesian_transform(kvec: [f64; 3], points: usize) -> f64 {
        let h = 2.0 / points as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..points {
            let x = -1.0 + (i as f64 + 0.5) * h;
            for j in 0..points {
                let y = -1.0 + (j as f64 + 0.5) * h;
                for l in 0..points {
                    let z = -1.0 + (l as f64 + 0.5) * h;
                    let eta = bump_profile((x * x + y * y + z * z).sqrt());
                    if eta > 0.0 {
                        num += eta * (kvec[0] * x + kvec[1] * y + kvec[2] * z).cos();
                        den += eta;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn radial_transform_matches_cartesian_quadrature_at_unit_argument() {
        // eps |k| = 1 along an oblique direction.
        let k = [1, 2, 2];
        let eps = 1.0 / 3.0;
        let m = mollifier_multiplier(eps, k).unwrap();
        let oracle = cartesian_transform([eps, 2.0 * eps, 2.0 * eps], 120);
        assert!((m - oracle).abs() < 1e-6, "radial {m} vs cartesian {oracle}");
    }

    #[test]
    fn identities_of_the_trilinear_form() {
        let modes = build_modes(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u = SpectralField::random(&modes, &mut rng, 1.0);
            let v = SpectralField::random(&modes, &mut rng, 1.0);
            let w = SpectralField::random(&modes, &mut rng, 1.0);
            let scale = u.v_norm() * v.v_norm() * w.v_norm();
            assert!(b_form(&u, &v, &v).unwrap().abs() <= 1e-12 * scale);
            let s = b_form(&u, &v, &w).unwrap() + b_form(&u, &w, &v).unwrap();
            assert!(s.abs() <= 1e-12 * scale);
            let pairing = b_apply(&u, &v).unwrap().h_inner(&w).unwrap();
            assert!((pairing - b_form(&u, &v, &w).unwrap()).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn plane_wave_self_advection_vanishes() {
        let modes = build_modes(2).unwrap();
        let mut u = SpectralField::zeros(&modes);
        let e = modes.entry_of([1, 1, 0], 0).unwrap();
        u.coeffs_mut()[e] = Complex64::new(0.4, 0.9);
        u.coeffs_mut()[e + 1] = Complex64::new(-1.2, 0.3);
        let b = b_apply(&u, &u).unwrap();
        assert!(b.h_norm() < 1e-15);
        let zero = SpectralField::zeros(&modes);
        assert_eq!(b_apply(&zero, &u).unwrap().h_norm(), 0.0);
    }

    #[test]
    fn mollified_operator_reduces_to_plain_at_zero_epsilon() {
        let modes = build_modes(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = SpectralField::random(&modes, &mut rng, 1.0);
        let table = MollifierTable::new(&modes, 0.0).unwrap();
        assert_eq!(b_mollified_apply(&table, &u), b_apply(&u, &u).unwrap());
        let table = MollifierTable::new(&modes, 0.3).unwrap();
        let e = b_mollified_apply(&table, &u).h_inner(&u).unwrap();
        assert!(e.abs() <= 1e-12 * u.v_norm().powi(3));
    }

    #[test]
    fn two_mode_triple_matches_grid_quadrature() {
        let modes = build_modes(1).unwrap();
        let mut u = SpectralField::zeros(&modes);
        u.coeffs_mut()[modes.entry_of([1, 0, 0], 0).unwrap()] = Complex64::new(1.0, 0.5);
        u.coeffs_mut()[modes.entry_of([0, 1, 0], 1).unwrap()] = Complex64::new(-0.3, 0.8);
        let mut v = SpectralField::zeros(&modes);
        v.coeffs_mut()[modes.entry_of([0, 1, 1], 0).unwrap()] = Complex64::new(0.7, -0.2);
        v.coeffs_mut()[modes.entry_of([1, 0, 0], 1).unwrap()] = Complex64::new(0.1, 0.6);
        let mut w = SpectralField::zeros(&modes);
        w.coeffs_mut()[modes.entry_of([1, 1, 1], 0).unwrap()] = Complex64::new(0.5, 0.5);
        w.coeffs_mut()[modes.entry_of([1, -1, 0], 1).unwrap()] = Complex64::new(-0.9, 0.2);
        w.coeffs_mut()[modes.entry_of([1, 1, 0], 0).unwrap()] = Complex64::new(0.4, 0.0);

        // Products of three trigonometric polynomials of degree 1 per axis
        // are exactly integrated on 4 points per axis.
        let grid = 4;
        let pu = u.to_physical(grid).unwrap();
        let gv = v.gradient_physical(grid).unwrap();
        let pw = w.to_physical(grid).unwrap();
        let mut quad = 0.0;
        for idx in 0..pu.values.len() {
            for i in 0..3 {
                for j in 0..3 {
                    quad += pu.values[idx][i] * gv[idx][i][j] * pw.values[idx][j];
                }
            }
        }
        quad /= pu.values.len() as f64;
        let spectral = b_form(&u, &v, &w).unwrap();
        assert!(spectral.abs() > 1e-3);
        assert!((spectral - quad).abs() < 1e-10, "{spectral} vs {quad}");
    }
}
