//! One path's worth of driving noise: cumulative Wiener values on a master
//! grid, the jump events, the chain path, and Brownian-bridge values at
//! every event time.
//!
//! Bridge values are drawn cell by cell from their own generators and
//! conditioned only on master-grid values, so every coarser time grid sees
//! the same underlying path.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::{sample_wiener_increment, CovarianceSpectrum};
use crate::regime::{build_interval_table, simulate_chain_prm, ChainPath, GeneratorMatrix};
use crate::seeding::{indexed_rng, stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Switch { to: usize },
    Jump { mark: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Where a Wiener value lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WienerRef {
    Node(usize),
    Event(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSpec {
    pub horizon: f64,
    pub cells: usize,
    pub initial_regime: usize,
    pub jump_rate: f64,
}

impl RealizationSpec {
    pub fn master_dt(&self) -> f64 {
        self.horizon / self.cells as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub path_seed: u64,
    pub spec: RealizationSpec,
    /// `W(k · master_dt)`, `k = 0..=cells`.
    nodes: Vec<Vec<Complex64>>,
    /// Sorted by time; ties keep switches before jumps.
    events: Vec<Event>,
    event_wiener: Vec<Vec<Complex64>>,
    chain: ChainPath,
}

impl NoiseRealization {
    pub fn generate(path_seed: u64, spec: RealizationSpec, spectrum: &CovarianceSpectrum, gamma: &GeneratorMatrix) -> Result<Self> {
        if spec.cells == 0 || !(spec.horizon > 0.0) {
            return Err(Error::param(
                "horizon",
                "realization needs a positive horizon and at least one cell",
            ));
        }
        let h = spec.master_dt();

        let mut rng = stream_rng(path_seed, Stream::Wiener);
        let mut nodes = Vec::with_capacity(spec.cells + 1);
        let mut w = vec![Complex64::new(0.0, 0.0); spectrum.len()];
        nodes.push(w.clone());
        for _ in 0..spec.cells {
            for (acc, d) in w.iter_mut().zip(sample_wiener_increment(spectrum, h, &mut rng)) {
                *acc += d;
            }
            nodes.push(w.clone());
        }

        let mut events = Vec::new();
        if spec.jump_rate > 0.0 {
            let mut rng = stream_rng(path_seed, Stream::Jumps);
            let clock = Exp::new(spec.jump_rate).expect("positive rate");
            let mut t = 0.0;
            loop {
                t += clock.sample(&mut rng);
                if t > spec.horizon {
                    break;
                }
                let mark: f64 = rng.sample(StandardNormal);
                events.push(Event {
                    time: t,
                    kind: EventKind::Jump { mark },
                });
            }
        }

        let mut rng = stream_rng(path_seed, Stream::Chain);
        let table = build_interval_table(gamma);
        let chain = simulate_chain_prm(&table, spec.initial_regime, spec.horizon, &mut rng)?;
        events.extend(chain.switches.iter().map(|&(time, to)| Event {
            time,
            kind: EventKind::Switch { to },
        }));
        events.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then_with(|| matches!(a.kind, EventKind::Jump { .. }).cmp(&matches!(b.kind, EventKind::Jump { .. })))
        });

        let event_wiener = bridge_values(path_seed, &spec, spectrum, &nodes, &events);
        Ok(Self {
            path_seed,
            spec,
            nodes,
            events,
            event_wiener,
            chain,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn chain(&self) -> &ChainPath {
        &self.chain
    }

    pub fn jump_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Jump { .. })).count()
    }

    pub fn master_dt(&self) -> f64 {
        self.spec.master_dt()
    }

    pub fn cells(&self) -> usize {
        self.spec.cells
    }

    pub fn wiener(&self, at: WienerRef) -> &[Complex64] {
        match at {
            WienerRef::Node(k) => &self.nodes[k],
            WienerRef::Event(e) => &self.event_wiener[e],
        }
    }

    /// `W(b) − W(a)`.
    pub fn increment(&self, a: WienerRef, b: WienerRef) -> Vec<Complex64> {
        self.wiener(b).iter().zip(self.wiener(a)).map(|(x, y)| x - y).collect()
    }

    /// Master nodes per step of size `dt`, or an error when `dt` is not a
    /// whole multiple of the master step.
    pub fn stride_for(&self, dt: f64) -> Result<usize> {
        let ratio = dt / self.master_dt();
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio.max(1.0) || self.cells() % stride as usize != 0 {
            return Err(Error::CouplingMismatch(format!(
                "step {dt} is not a whole multiple of the master step {} dividing the horizon",
                self.master_dt()
            )));
        }
        Ok(stride as usize)
    }
}

fn bridge_values(
    path_seed: u64,
    spec: &RealizationSpec,
    spectrum: &CovarianceSpectrum,
    nodes: &[Vec<Complex64>],
    events: &[Event],
) -> Vec<Vec<Complex64>> {
    let h = spec.master_dt();
    let mut out = Vec::with_capacity(events.len());
    let mut e = 0;
    while e < events.len() {
        let cell = ((events[e].time / h).floor() as usize).min(spec.cells - 1);
        let end = events[e..]
            .iter()
            .position(|ev| ((ev.time / h).floor() as usize).min(spec.cells - 1) != cell)
            .map_or(events.len(), |p| e + p);
        let mut rng = indexed_rng(path_seed, Stream::Bridge, cell as u64);
        let right = &nodes[cell + 1];
        let t_right = (cell + 1) as f64 * h;
        let mut left = nodes[cell].clone();
        let mut t_left = cell as f64 * h;
        for ev in &events[e..end] {
            let span = t_right - t_left;
            let frac = if span > 0.0 {
                ((ev.time - t_left) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            // Conditional variance per real component: (q/2)(τ − a)(b − τ)/(b − a).
            let var_time = frac * (t_right - ev.time).max(0.0);
            let value: Vec<Complex64> = left
                .iter()
                .zip(right)
                .zip(spectrum.q())
                .map(|((l, r), q)| {
                    let s = (0.5 * q * var_time).sqrt();
                    let zr: f64 = rng.sample(StandardNormal);
                    let zi: f64 = rng.sample(StandardNormal);
                    l + (r - l) * frac + Complex64::new(s * zr, s * zi)
                })
                .collect();
            left = value.clone();
            t_left = ev.time;
            out.push(value);
        }
        e = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::path_seed;
    use crate::spectral::build_modes;
    use crate::stats::{correlation, Estimate};

    fn spec(rate: f64) -> RealizationSpec {
        RealizationSpec {
            horizon: 1.0,
            cells: 100,
            initial_regime: 0,
            jump_rate: rate,
        }
    }

    fn gamma() -> GeneratorMatrix {
        GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap()
    }

    #[test]
    fn replay_is_bit_identical() {
        let modes = build_modes(1).unwrap();
        let q = CovarianceSpectrum::power_law(&modes, 1.0, 2.0).unwrap();
        let a = NoiseRealization::generate(path_seed(1, 2), spec(3.0), &q, &gamma()).unwrap();
        let b = NoiseRealization::generate(path_seed(1, 2), spec(3.0), &q, &gamma()).unwrap();
        assert_eq!(a, b);
        let c = NoiseRealization::generate(path_seed(1, 3), spec(3.0), &q, &gamma()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn events_are_sorted_and_inside_horizon() {
        let q = CovarianceSpectrum::new(vec![1.0]).unwrap();
        for p in 0..50 {
            let r = NoiseRealization::generate(path_seed(9, p), spec(5.0), &q, &gamma()).unwrap();
            assert!(r.events().windows(2).all(|w| w[0].time <= w[1].time));
            assert!(r.events().iter().all(|e| e.time > 0.0 && e.time <= 1.0));
        }
    }

    #[test]
    fn jump_counts_are_poisson() {
        let q = CovarianceSpectrum::new(vec![0.0]).unwrap();
        let rate = 3.0;
        let counts: Vec<f64> = (0..10_000)
            .map(|p| {
                NoiseRealization::generate(path_seed(5, p), spec(rate), &q, &GeneratorMatrix::frozen(1))
                    .unwrap()
                    .jump_count() as f64
            })
            .collect();
        let mean = Estimate::from_samples(&counts);
        assert!(mean.z_score(rate).abs() < 3.0, "{mean:?}");
        // Variance of a Poisson count equals its mean; SE of the sample
        // variance from the fourth central moment μ₄ = λ + 3λ².
        let sq: Vec<f64> = counts.iter().map(|c| (c - mean.mean).powi(2)).collect();
        let var = Estimate::from_samples(&sq);
        let se = ((rate + 3.0 * rate * rate - rate * rate) / counts.len() as f64).sqrt();
        assert!((var.mean - rate).abs() < 3.0 * se, "{var:?}");
    }

    #[test]
    fn streams_are_uncorrelated() {
        let q = CovarianceSpectrum::new(vec![1.0]).unwrap();
        let n = 10_000;
        let mut w = Vec::with_capacity(n);
        let mut jumps = Vec::with_capacity(n);
        let mut switches = Vec::with_capacity(n);
        for p in 0..n as u64 {
            let r = NoiseRealization::generate(path_seed(77, p), spec(2.0), &q, &gamma()).unwrap();
            w.push(r.wiener(WienerRef::Node(100))[0].re);
            jumps.push(r.jump_count() as f64);
            switches.push(r.chain().switches.len() as f64);
        }
        for (a, b) in [(&w, &jumps), (&w, &switches), (&jumps, &switches)] {
            let c = correlation(a, b);
            assert!(c.mean.abs() < 3.0 * c.se, "{c:?}");
        }
    }

    #[test]
    fn bridge_points_have_bridge_variance() {
        // Var(W(τ) − interpolant) = q τ'(h − τ')/h for τ' inside the cell.
        let q = CovarianceSpectrum::new(vec![2.0]).unwrap();
        let mut resid = Vec::new();
        let mut expect = Vec::new();
        for p in 0..4000 {
            let r = NoiseRealization::generate(path_seed(3, p), spec(4.0), &q, &GeneratorMatrix::frozen(1)).unwrap();
            let h = r.master_dt();
            if let Some(ev) = r.events().first() {
                let cell = (ev.time / h).floor() as usize;
                let frac = ev.time / h - cell as f64;
                let l = r.wiener(WienerRef::Node(cell))[0];
                let rr = r.wiener(WienerRef::Node(cell + 1))[0];
                let d = r.wiener(WienerRef::Event(0))[0] - (l + (rr - l) * frac);
                resid.push(d.norm_sqr());
                expect.push(2.0 * frac * (1.0 - frac) * h);
            }
        }
        let ratio = Estimate::from_samples(&resid).mean / Estimate::from_samples(&expect).mean;
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn stride_validation() {
        let q = CovarianceSpectrum::new(vec![1.0]).unwrap();
        let r = NoiseRealization::generate(1, spec(0.0), &q, &GeneratorMatrix::frozen(1)).unwrap();
        assert_eq!(r.stride_for(0.01).unwrap(), 1);
        assert_eq!(r.stride_for(0.04).unwrap(), 4);
        assert!(r.stride_for(0.015).is_err());
        assert!(r.stride_for(0.03).is_err());
    }
}
