//! Truncated divergence-free Fourier representation on the periodic torus
//! `[0, 2π)³`.
//!
//! A field is stored as one complex coefficient per entry `(k, p)` where `k`
//! runs over canonical wavevectors (first nonzero component positive) with
//! `|k|_∞ ≤ k_max` and `p ∈ {0, 1}` indexes a real orthonormal polarization
//! basis of the plane orthogonal to `k`. The conjugate wavevector `-k` carries
//! the conjugate coefficient, so physical fields are real.
//!
//! Normalization: with `c` the coefficient of entry `(k, p)`, the physical
//! field is `u(x) = √2 Σ Re(c e^{ik·x}) e_p(k)`. All integrals use the
//! normalized torus measure `dx / (2π)³`, so a single unit coefficient has
//! unit H-norm and `|u|² = Σ |c|²` (Parseval).

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Wavevector = [i32; 3];

/// Reference to a member of the full (non-canonical) wavevector set: the
/// canonical wave index plus whether the member is `-k` (conjugate storage).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullIndex {
    pub wave: usize,
    pub conj: bool,
}

/// One term `p + q = k` of a convolution sum restricted to the stored modes.
#[derive(Debug, Clone)]
pub(crate) struct Triad {
    pub p: FullIndex,
    pub q: FullIndex,
    pub qvec: [f64; 3],
}

#[derive(Debug)]
pub struct ModeSet {
    k_max: usize,
    waves: Vec<Wavevector>,
    polarizations: Vec<[[f64; 3]; 2]>,
    lookup: Vec<Option<FullIndex>>,
    triads: Vec<Triad>,
    triad_offsets: Vec<usize>,
}

pub fn is_canonical(k: Wavevector) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

pub fn norm_sq(k: Wavevector) -> i32 {
    k.iter().map(|c| c * c).sum()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn polarization_pair(k: Wavevector) -> [[f64; 3]; 2] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    // Reference axis: the coordinate direction along which k is smallest,
    // which is never parallel to k.
    let mut axis = 0;
    for j in 1..3 {
        if k[j].abs() < k[axis].abs() {
            axis = j;
        }
    }
    let mut reference = [0.0; 3];
    reference[axis] = 1.0;
    let e1 = normalized(cross(kf, reference));
    let e2 = normalized(cross(normalized(kf), e1));
    [e1, e2]
}

/// Enumerates the canonical wavevectors with `|k|_∞ ≤ k_max`, ordered by
/// `(|k|², k)`, with two polarizations each.
pub fn build_modes(k_max: usize) -> Result<Arc<ModeSet>> {
    if k_max == 0 {
        return Err(Error::EmptyBasis);
    }
    let km = k_max as i32;
    let mut waves = Vec::new();
    for x in -km..=km {
        for y in -km..=km {
            for z in -km..=km {
                let k = [x, y, z];
                if is_canonical(k) {
                    waves.push(k);
                }
            }
        }
    }
    waves.sort_by_key(|&k| (norm_sq(k), k));

    let side = 2 * k_max + 1;
    let mut lookup = vec![None; side * side * side];
    let cube_index = |k: Wavevector| -> usize {
        let s = side as i32;
        (((k[0] + km) * s + (k[1] + km)) * s + (k[2] + km)) as usize
    };
    for (w, &k) in waves.iter().enumerate() {
        lookup[cube_index(k)] = Some(FullIndex { wave: w, conj: false });
        lookup[cube_index([-k[0], -k[1], -k[2]])] = Some(FullIndex { wave: w, conj: true });
    }

    let polarizations = waves.iter().map(|&k| polarization_pair(k)).collect();

    let in_cube = |k: Wavevector| k.iter().all(|c| c.abs() <= km);
    let mut triads = Vec::new();
    let mut triad_offsets = Vec::with_capacity(waves.len() + 1);
    for &k in &waves {
        triad_offsets.push(triads.len());
        for &pw in &waves {
            for sign in [1, -1] {
                let p = [sign * pw[0], sign * pw[1], sign * pw[2]];
                let q = [k[0] - p[0], k[1] - p[1], k[2] - p[2]];
                if q == [0, 0, 0] || !in_cube(q) {
                    continue;
                }
                let (Some(pi), Some(qi)) = (lookup[cube_index(p)], lookup[cube_index(q)]) else {
                    continue;
                };
                triads.push(Triad {
                    p: pi,
                    q: qi,
                    qvec: [q[0] as f64, q[1] as f64, q[2] as f64],
                });
            }
        }
    }
    triad_offsets.push(triads.len());

    Ok(Arc::new(ModeSet {
        k_max,
        waves,
        polarizations,
        lookup,
        triads,
        triad_offsets,
    }))
}

impl ModeSet {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of stored `(k, p)` entries; Galerkin levels run over `1..=dimension()`.
    pub fn dimension(&self) -> usize {
        2 * self.waves.len()
    }

    pub fn wave_count(&self) -> usize {
        self.waves.len()
    }

    pub fn waves(&self) -> &[Wavevector] {
        &self.waves
    }

    pub fn wavevector(&self, wave: usize) -> Wavevector {
        self.waves[wave]
    }

    pub fn polarization(&self, wave: usize, p: usize) -> [f64; 3] {
        self.polarizations[wave][p]
    }

    /// `(k, p)` of an entry index.
    pub fn entry(&self, entry: usize) -> (Wavevector, usize) {
        (self.waves[entry / 2], entry % 2)
    }

    /// Stokes eigenvalue `|k|²` of an entry.
    pub fn eigenvalue(&self, entry: usize) -> f64 {
        norm_sq(self.waves[entry / 2]) as f64
    }

    pub fn entry_of(&self, k: Wavevector, p: usize) -> Option<usize> {
        let w = self.locate(k)?;
        (!w.conj && p < 2).then_some(2 * w.wave + p)
    }

    pub fn locate(&self, k: Wavevector) -> Option<FullIndex> {
        let km = self.k_max as i32;
        if k.iter().any(|c| c.abs() > km) {
            return None;
        }
        let s = (2 * self.k_max + 1) as i32;
        self.lookup[(((k[0] + km) * s + (k[1] + km)) * s + (k[2] + km)) as usize]
    }

    pub(crate) fn triads_for(&self, wave: usize) -> &[Triad] {
        &self.triads[self.triad_offsets[wave]..self.triad_offsets[wave + 1]]
    }

    pub fn triad_count(&self) -> usize {
        self.triads.len()
    }
}

/// Divergence-free, zero-mean real velocity field in coefficient form.
#[derive(Debug, Clone)]
pub struct SpectralField {
    modes: Arc<ModeSet>,
    coeffs: Vec<Complex64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.modes.k_max == other.modes.k_max && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(modes: &Arc<ModeSet>) -> Self {
        Self {
            modes: Arc::clone(modes),
            coeffs: vec![Complex64::new(0.0, 0.0); modes.dimension()],
        }
    }

    pub fn from_coeffs(modes: &Arc<ModeSet>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != modes.dimension() {
            return Err(Error::param(
                "coefficients",
                format!("expected {} entries, got {}", modes.dimension(), coeffs.len()),
            ));
        }
        Ok(Self {
            modes: Arc::clone(modes),
            coeffs,
        })
    }

    /// Unit coefficient on a single entry.
    pub fn unit(modes: &Arc<ModeSet>, entry: usize) -> Self {
        let mut f = Self::zeros(modes);
        f.coeffs[entry] = Complex64::new(1.0, 0.0);
        f
    }

    /// Independent complex Gaussian coefficients with `E|c|² = amplitude²`.
    pub fn random<R: Rng + ?Sized>(modes: &Arc<ModeSet>, rng: &mut R, amplitude: f64) -> Self {
        let s = amplitude / SQRT_2;
        let coeffs = (0..modes.dimension())
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect();
        Self {
            modes: Arc::clone(modes),
            coeffs,
        }
    }

    pub fn mode_set(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.modes, &other.modes) || self.modes.k_max == other.modes.k_max {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                left: self.modes.k_max,
                right: other.modes.k_max,
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            modes: Arc::clone(&self.modes),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Stokes operator: multiplies entry `(k, p)` by `|k|²`.
    pub fn stokes_apply(&self) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(l, c)| c * self.modes.eigenvalue(l)).collect();
        Self {
            modes: Arc::clone(&self.modes),
            coeffs,
        }
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    pub fn v_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| self.modes.eigenvalue(l) * c.norm_sqr())
            .sum()
    }

    pub fn v_norm(&self) -> f64 {
        self.v_norm_sq().sqrt()
    }

    /// `‖u‖²_{V'} = Σ |c|² / |k|²`.
    pub fn dual_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(l, c)| c.norm_sqr() / self.modes.eigenvalue(l))
            .sum()
    }

    pub fn h_inner(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.re * b.re + a.im * b.im).sum())
    }

    /// Galerkin projection onto the first `n` entries.
    pub fn project(&self, n: usize) -> Result<Self> {
        let mut out = self.clone();
        out.project_in_place(n)?;
        Ok(out)
    }

    pub fn project_in_place(&mut self, n: usize) -> Result<()> {
        let dim = self.modes.dimension();
        if n == 0 || n > dim {
            return Err(Error::ProjectionOutOfRange { n, dim });
        }
        for c in &mut self.coeffs[n..] {
            *c = Complex64::new(0.0, 0.0);
        }
        Ok(())
    }

    /// Complex velocity vector `û(k)` of a member of the full wavevector set,
    /// in the `u(x) = Σ_{k ∈ ±} û(k) e^{ik·x}` convention.
    pub fn velocity(&self, idx: FullIndex) -> [Complex64; 3] {
        let w = idx.wave;
        let c0 = self.coeffs[2 * w] / SQRT_2;
        let c1 = self.coeffs[2 * w + 1] / SQRT_2;
        let e = &self.modes.polarizations[w];
        let mut v = [Complex64::new(0.0, 0.0); 3];
        for (d, vd) in v.iter_mut().enumerate() {
            *vd = c0 * e[0][d] + c1 * e[1][d];
            if idx.conj {
                *vd = vd.conj();
            }
        }
        v
    }

    /// Pointwise samples on a uniform `grid³` lattice of the torus.
    pub fn to_physical(&self, grid: usize) -> Result<PhysicalField> {
        let phases = self.phase_table(grid)?;
        let mut values = vec![[0.0; 3]; grid * grid * grid];
        for (w, &k) in self.modes.waves.iter().enumerate() {
            let amp = self.velocity(FullIndex { wave: w, conj: false });
            for (idx, v) in values.iter_mut().enumerate() {
                let ph = phases.at(k, idx);
                for d in 0..3 {
                    v[d] += 2.0 * (amp[d] * ph).re;
                }
            }
        }
        Ok(PhysicalField { grid, values })
    }

    /// Pointwise velocity gradient `∂_i u_j` on the same lattice.
    pub fn gradient_physical(&self, grid: usize) -> Result<Vec<[[f64; 3]; 3]>> {
        let phases = self.phase_table(grid)?;
        let mut values = vec![[[0.0; 3]; 3]; grid * grid * grid];
        for (w, &k) in self.modes.waves.iter().enumerate() {
            let amp = self.velocity(FullIndex { wave: w, conj: false });
            for (idx, g) in values.iter_mut().enumerate() {
                let ph = phases.at(k, idx);
                for i in 0..3 {
                    let ik = Complex64::new(0.0, k[i] as f64);
                    for j in 0..3 {
                        g[i][j] += 2.0 * (ik * amp[j] * ph).re;
                    }
                }
            }
        }
        Ok(values)
    }

    fn phase_table(&self, grid: usize) -> Result<PhaseTable> {
        let k_max = self.modes.k_max;
        if grid < 2 * k_max + 1 {
            return Err(Error::Aliasing { grid, k_max });
        }
        Ok(PhaseTable::new(grid, k_max))
    }
}

/// `e^{i k_d x_d}` per axis, so a plane wave at a lattice point is a product
/// of three table lookups.
struct PhaseTable {
    grid: usize,
    k_max: i32,
    table: Vec<Complex64>,
}

impl PhaseTable {
    fn new(grid: usize, k_max: usize) -> Self {
        let km = k_max as i32;
        let mut table = Vec::with_capacity((2 * k_max + 1) * grid);
        for kc in -km..=km {
            for j in 0..grid {
                let x = 2.0 * std::f64::consts::PI * j as f64 / grid as f64;
                table.push(Complex64::from_polar(1.0, kc as f64 * x));
            }
        }
        Self { grid, k_max: km, table }
    }

    fn at(&self, k: Wavevector, idx: usize) -> Complex64 {
        let g = self.grid;
        let (ix, iy, iz) = (idx / (g * g), (idx / g) % g, idx % g);
        let row = |c: i32| (c + self.k_max) as usize * g;
        self.table[row(k[0]) + ix] * self.table[row(k[1]) + iy] * self.table[row(k[2]) + iz]
    }
}

/// Real 3-vector samples; lattice index is `(ix * grid + iy) * grid + iz`.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub grid: usize,
    pub values: Vec<[f64; 3]>,
}

impl PhysicalField {
    pub fn point(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        self.values[(ix * self.grid + iy) * self.grid + iz]
    }

    /// Lattice coordinates of a flat index.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let g = self.grid;
        let h = 2.0 * std::f64::consts::PI / g as f64;
        [(idx / (g * g)) as f64 * h, ((idx / g) % g) as f64 * h, (idx % g) as f64 * h]
    }

    /// Normalized-measure quadrature of `u · v`.
    pub fn mean_dot(&self, other: &PhysicalField) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
            .sum();
        s / self.values.len() as f64
    }
}
