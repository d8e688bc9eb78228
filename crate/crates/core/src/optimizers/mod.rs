//! Box-bounded minimisers: golden section search for one variable, and
//! simulated annealing, a real-coded genetic algorithm and particle swarm
//! optimisation for several.
//!
//! Everything minimises. To maximise a utility, negate it at the call site.

mod annealing;
mod genetic;
mod golden;
mod swarm;

use std::io::Write;

pub use annealing::{simulated_annealing, simulated_annealing_from, AnnealingSchedule};
pub use genetic::{genetic_algorithm, GeneticConfig};
pub use golden::{golden_section, golden_section_brackets, GoldenConfig, INV_PHI};
pub use swarm::{particle_swarm, SwarmConfig};

use rand::Rng;

use crate::error::{Error, Result};

/// Per-dimension `(lo, hi)` search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds(Vec<(f64, f64)>);

impl Bounds {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Config("bounds need at least one dimension".into()));
        }
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("dimension {i}: need finite lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(Bounds(ranges))
    }

    pub fn uniform(dims: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi); dims])
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn width(&self, i: usize) -> f64 {
        self.0[i].1 - self.0[i].0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && x.iter().zip(&self.0).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.0.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    /// Incumbent value after each iteration (temperature level, generation,
    /// swarm step or bracket reduction).
    pub trace: Vec<f64>,
}

impl OptimResult {
    /// Writes the trace as `iteration,best_value` CSV, iterations from 0.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,best_value")?;
        for (i, v) in self.trace.iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        Ok(())
    }
}

/// Counts evaluations and turns non-finite objective values into errors.
pub(crate) struct Counted<F> {
    f: F,
    pub evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    pub fn new(f: F) -> Self {
        Counted { f, evaluations: 0 }
    }

    pub fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective { point: x.to_vec() })
        }
    }
}

/// One of the four routines with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    GoldenSection(GoldenConfig),
    Annealing { schedule: AnnealingSchedule, seed: u64 },
    Genetic(GeneticConfig),
    Swarm(SwarmConfig),
}

/// Minimises `f` over `bounds` with the chosen routine. Golden section search
/// requires one-dimensional bounds.
pub fn minimize<F>(f: F, bounds: &Bounds, method: &Method) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    match method {
        Method::GoldenSection(cfg) => {
            if bounds.dims() != 1 {
                return Err(Error::Config(format!(
                    "golden section search is univariate, got {} dimensions",
                    bounds.dims()
                )));
            }
            let (lo, hi) = bounds.ranges()[0];
            let mut f = f;
            golden_section(|x| f(&[x]), lo, hi, cfg.tol, cfg.max_iter)
        }
        Method::Annealing { schedule, seed } => simulated_annealing(f, bounds, schedule, *seed),
        Method::Genetic(cfg) => genetic_algorithm(f, bounds, cfg),
        Method::Swarm(cfg) => particle_swarm(f, bounds, cfg),
    }
}
