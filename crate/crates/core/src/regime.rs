//! Finite-state continuous-time Markov chain driving the regime switches.
//!
//! States are stored 0-based; reports print them 1-based.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    rates: Vec<Vec<f64>>,
}

impl GeneratorMatrix {
    /// Validates a full matrix: square, nonnegative off-diagonal, zero row sums.
    pub fn new(rates: Vec<Vec<f64>>) -> Result<Self> {
        let m = rates.len();
        if m == 0 {
            return Err(Error::InvalidGenerator("no states".into()));
        }
        for (i, row) in rates.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidGenerator(format!(
                    "row {} has {} entries, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            let mut off = 0.0;
            for (j, &g) in row.iter().enumerate() {
                if !g.is_finite() {
                    return Err(Error::InvalidGenerator(format!("entry ({}, {}) is not finite", i + 1, j + 1)));
                }
                if i != j {
                    if g < 0.0 {
                        return Err(Error::InvalidGenerator(format!(
                            "negative off-diagonal entry gamma[{}][{}] = {g}",
                            i + 1,
                            j + 1
                        )));
                    }
                    off += g;
                }
            }
            if (row[i] + off).abs() > ROW_SUM_TOLERANCE * off.max(1.0) {
                return Err(Error::InvalidGenerator(format!(
                    "row {} sums to {} instead of 0",
                    i + 1,
                    row[i] + off
                )));
            }
        }
        Ok(Self { rates })
    }

    /// Builds from off-diagonal rates; the diagonal is filled in.
    pub fn from_off_diagonal(mut rates: Vec<Vec<f64>>) -> Result<Self> {
        for i in 0..rates.len() {
            if i < rates[i].len() {
                rates[i][i] = 0.0;
                let off: f64 = rates[i].iter().sum();
                rates[i][i] = -off;
            }
        }
        Self::new(rates)
    }

    /// The chain that never leaves its initial state.
    pub fn frozen(states: usize) -> Self {
        Self {
            rates: vec![vec![0.0; states]; states],
        }
    }

    pub fn states(&self) -> usize {
        self.rates.len()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rates
    }

    /// Total exit rate `-γ_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.rates[i][i]
    }

    pub fn check_state(&self, i: usize) -> Result<()> {
        if i < self.states() {
            Ok(())
        } else {
            Err(Error::UnknownState {
                state: i,
                count: self.states(),
            })
        }
    }

    /// Stationary law from `πΓ = 0`, `Σπ = 1` by Gaussian elimination.
    /// Only meaningful for irreducible chains.
    pub fn stationary(&self) -> Vec<f64> {
        let m = self.states();
        // Transposed system with the last equation replaced by normalization.
        let mut a = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for j in 0..m {
                a[i][j] = self.rates[j][i];
            }
        }
        for j in 0..m {
            a[m - 1][j] = 1.0;
        }
        a[m - 1][m] = 1.0;
        for col in 0..m {
            let pivot = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap_or(col);
            a.swap(col, pivot);
            let p = a[col][col];
            if p.abs() < 1e-300 {
                continue;
            }
            for c in col..=m {
                a[col][c] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r][col];
                    for c in col..=m {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..m).map(|i| a[i][m]).collect()
    }
}

/// `Δ_ij` packed consecutively from 0 in row-major order (`Δ_12, Δ_13, …, Δ_21, …`).
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTable {
    states: usize,
    intervals: Vec<Interval>,
    total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub from: usize,
    pub to: usize,
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn contains(&self, y: f64) -> bool {
        self.start <= y && y < self.end
    }
}

pub fn build_interval_table(gamma: &GeneratorMatrix) -> IntervalTable {
    let m = gamma.states();
    let mut intervals = Vec::new();
    let mut cursor = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let g = gamma.rate(i, j);
            if g > 0.0 {
                intervals.push(Interval {
                    from: i,
                    to: j,
                    start: cursor,
                    end: cursor + g,
                });
                cursor += g;
            }
        }
    }
    IntervalTable {
        states: m,
        intervals,
        total: cursor,
    }
}

impl IntervalTable {
    /// Total length `Λ = Σ_{i≠j} γ_ij`.
    pub fn total_length(&self) -> f64 {
        self.total
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// `h(i, y)`: displacement `j - i` when `y ∈ Δ_ij`, else 0. Only row-`i`
    /// intervals are consulted.
    pub fn h_eval(&self, i: usize, y: f64) -> i64 {
        self.intervals
            .iter()
            .find(|iv| iv.from == i && iv.contains(y))
            .map_or(0, |iv| iv.to as i64 - i as i64)
    }
}

/// Right-continuous piecewise-constant path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    pub initial: usize,
    /// `(time, new state)`, strictly increasing times in `(0, horizon]`.
    pub switches: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl ChainPath {
    pub fn constant(initial: usize, horizon: f64) -> Self {
        Self {
            initial,
            switches: Vec::new(),
            horizon,
        }
    }

    /// `r(t)` (right limit).
    pub fn state_at(&self, t: f64) -> usize {
        let n = self.switches.partition_point(|&(s, _)| s <= t);
        if n == 0 {
            self.initial
        } else {
            self.switches[n - 1].1
        }
    }

    /// `r(t-)`.
    pub fn state_before(&self, t: f64) -> usize {
        let n = self.switches.partition_point(|&(s, _)| s < t);
        if n == 0 {
            self.initial
        } else {
            self.switches[n - 1].1
        }
    }

    /// `(state, entry time, exit time, completed)` for every sojourn.
    pub fn sojourns(&self) -> Vec<(usize, f64, f64, bool)> {
        let mut out = Vec::with_capacity(self.switches.len() + 1);
        let mut state = self.initial;
        let mut start = 0.0;
        for &(t, next) in &self.switches {
            out.push((state, start, t, true));
            state = next;
            start = t;
        }
        out.push((state, start, self.horizon, false));
        out
    }
}

pub fn simulate_chain_gillespie<R: Rng + ?Sized>(gamma: &GeneratorMatrix, r0: usize, horizon: f64, rng: &mut R) -> Result<ChainPath> {
    gamma.check_state(r0)?;
    let mut path = ChainPath::constant(r0, horizon);
    let mut state = r0;
    let mut t = 0.0;
    loop {
        let rate = gamma.exit_rate(state);
        if rate <= 0.0 {
            return Ok(path);
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t > horizon {
            return Ok(path);
        }
        let mut target = rng.gen::<f64>() * rate;
        let mut next = state;
        for j in 0..gamma.states() {
            if j == state {
                continue;
            }
            let g = gamma.rate(state, j);
            if g <= 0.0 {
                continue;
            }
            next = j;
            if target < g {
                break;
            }
            target -= g;
        }
        path.switches.push((t, next));
        state = next;
    }
}

/// Drives the chain with a unit-rate Poisson point process on
/// `[0, horizon] × [0, Λ)` and applies `h` at every point.
pub fn simulate_chain_prm<R: Rng + ?Sized>(table: &IntervalTable, r0: usize, horizon: f64, rng: &mut R) -> Result<ChainPath> {
    if r0 >= table.states() {
        return Err(Error::UnknownState {
            state: r0,
            count: table.states(),
        });
    }
    let mut path = ChainPath::constant(r0, horizon);
    let lambda = table.total_length();
    if lambda <= 0.0 {
        return Ok(path);
    }
    let clock = Exp::new(lambda).expect("positive intensity");
    let mut state = r0;
    let mut t = 0.0;
    loop {
        t += clock.sample(rng);
        if t > horizon {
            return Ok(path);
        }
        let y = rng.gen::<f64>() * lambda;
        let jump = table.h_eval(state, y);
        if jump != 0 {
            state = (state as i64 + jump) as usize;
            path.switches.push((t, state));
        }
    }
}

/// Maximum-likelihood generator estimate with Poisson standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratorEstimate {
    /// `None` where the source state was never occupied.
    pub rates: Vec<Vec<Option<f64>>>,
    pub standard_errors: Vec<Vec<Option<f64>>>,
    pub transitions: Vec<Vec<u64>>,
    pub occupation: Vec<f64>,
}

pub const MIN_GENERATOR_PATHS: usize = 100;

pub fn empirical_generator(paths: &[ChainPath], states: usize) -> Result<GeneratorEstimate> {
    if paths.len() < MIN_GENERATOR_PATHS {
        return Err(Error::InsufficientSamples {
            need: MIN_GENERATOR_PATHS,
            got: paths.len(),
        });
    }
    let mut transitions = vec![vec![0u64; states]; states];
    let mut occupation = vec![0.0; states];
    for path in paths {
        for (state, start, end, _) in path.sojourns() {
            occupation[state] += end - start;
        }
        let mut prev = path.initial;
        for &(_, next) in &path.switches {
            transitions[prev][next] += 1;
            prev = next;
        }
    }
    let mut rates = vec![vec![None; states]; states];
    let mut standard_errors = vec![vec![None; states]; states];
    for i in 0..states {
        if occupation[i] <= 0.0 {
            continue;
        }
        let mut exit = 0.0;
        for j in 0..states {
            if i == j {
                continue;
            }
            let n = transitions[i][j] as f64;
            rates[i][j] = Some(n / occupation[i]);
            standard_errors[i][j] = Some(n.sqrt() / occupation[i]);
            exit += n;
        }
        rates[i][i] = Some(-exit / occupation[i]);
        standard_errors[i][i] = Some(exit.sqrt() / occupation[i]);
    }
    Ok(GeneratorEstimate {
        rates,
        standard_errors,
        transitions,
        occupation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> GeneratorMatrix {
        GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap()
    }

    #[test]
    fn rows_sum_to_zero() {
        let g = GeneratorMatrix::from_off_diagonal(vec![vec![0.0, 0.3, 1.7], vec![0.1, 0.0, 0.2], vec![5.0, 0.0, 0.0]]).unwrap();
        for row in g.rows() {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn negative_off_diagonal_is_rejected() {
        let err = GeneratorMatrix::new(vec![vec![1.0, -1.0], vec![2.0, -2.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidGenerator(msg) if msg.contains("negative")));
    }

    #[test]
    fn two_state_interval_layout() {
        let table = build_interval_table(&two_state());
        let iv = table.intervals();
        assert_eq!(iv.len(), 2);
        assert_eq!((iv[0].from, iv[0].to, iv[0].start, iv[0].end), (0, 1, 0.0, 1.0));
        assert_eq!((iv[1].from, iv[1].to, iv[1].start, iv[1].end), (1, 0, 1.0, 3.0));
        assert_eq!(table.total_length(), 3.0);
    }

    #[test]
    fn frozen_chain_has_empty_table() {
        let table = build_interval_table(&GeneratorMatrix::frozen(3));
        assert!(table.intervals().is_empty());
        assert_eq!(table.total_length(), 0.0);
    }

    #[test]
    fn three_state_unit_rates_cover_six_unit_intervals() {
        let g = GeneratorMatrix::from_off_diagonal(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let table = build_interval_table(&g);
        let expected = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
        for (n, (iv, &(i, j))) in table.intervals().iter().zip(&expected).enumerate() {
            assert_eq!((iv.from, iv.to), (i, j));
            assert_eq!((iv.start, iv.end), (n as f64, n as f64 + 1.0));
        }
        assert_eq!(table.total_length(), 6.0);
    }

    #[test]
    fn h_function_values() {
        let table = build_interval_table(&two_state());
        assert_eq!(table.h_eval(0, 0.5), 1);
        assert_eq!(table.h_eval(1, 0.5), 0);
        assert_eq!(table.h_eval(1, 2.0), -1);
        for y in [-0.1, 3.0, 7.5] {
            assert_eq!(table.h_eval(0, y), 0);
            assert_eq!(table.h_eval(1, y), 0);
        }
    }

    #[test]
    fn zero_generator_gives_constant_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = GeneratorMatrix::frozen(2);
        let a = simulate_chain_gillespie(&g, 1, 5.0, &mut rng).unwrap();
        let b = simulate_chain_prm(&build_interval_table(&g), 1, 5.0, &mut rng).unwrap();
        assert_eq!(a, ChainPath::constant(1, 5.0));
        assert_eq!(b, ChainPath::constant(1, 5.0));
        let est = empirical_generator(&vec![a; 100], 2).unwrap();
        assert_eq!(est.rates[1][0], Some(0.0));
        assert_eq!(est.rates[0][1], None);
    }

    #[test]
    fn stationary_law_of_two_state_chain() {
        let pi = two_state().stationary();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn paths_are_right_continuous_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = two_state();
        let table = build_interval_table(&g);
        for _ in 0..50 {
            for path in [
                simulate_chain_gillespie(&g, 0, 10.0, &mut rng).unwrap(),
                simulate_chain_prm(&table, 0, 10.0, &mut rng).unwrap(),
            ] {
                let mut prev_t = 0.0;
                let mut prev_s = path.initial;
                for &(t, s) in &path.switches {
                    assert!(t > prev_t && t <= 10.0);
                    assert!(s < 2 && s != prev_s);
                    assert_eq!(path.state_at(t), s);
                    assert_eq!(path.state_before(t), prev_s);
                    prev_t = t;
                    prev_s = s;
                }
            }
        }
    }

    #[test]
    fn too_few_paths_is_an_error() {
        let err = empirical_generator(&[ChainPath::constant(0, 1.0)], 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { .. }));
    }
}
