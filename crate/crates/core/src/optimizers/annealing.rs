use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Bounds, Counted, OptimResult};
use crate::error::{Error, Result};

/// Proposal standard deviation as a fraction of each dimension's width.
const PROPOSAL_SCALE: f64 = 0.1;
/// Random points used to estimate the starting temperature.
const T0_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealingSchedule {
    /// Starting temperature. `None` uses the spread (max − min) of the
    /// objective over 20 random points.
    pub t0: Option<f64>,
    /// Geometric cooling factor.
    pub alpha: f64,
    pub steps_per_temp: usize,
    pub t_min: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        AnnealingSchedule { t0: None, alpha: 0.95, steps_per_temp: 100, t_min: 1e-8 }
    }
}

impl AnnealingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.t_min.is_finite() && self.t_min > 0.0) {
            return Err(Error::Config(format!("t_min must be positive, got {}", self.t_min)));
        }
        if let Some(t0) = self.t0 {
            if !(t0.is_finite() && t0 > self.t_min) {
                return Err(Error::Config(format!("t0 must exceed t_min, got t0={t0} t_min={}", self.t_min)));
            }
        }
        if self.steps_per_temp == 0 {
            return Err(Error::Config("steps_per_temp must be at least 1".into()));
        }
        Ok(())
    }
}

/// Simulated annealing from a uniformly random start.
///
/// Gaussian proposals with a standard deviation of 10% of each dimension's
/// width are clamped to the box and accepted by the Metropolis rule. The
/// temperature cools geometrically until it drops below `t_min`. The trace
/// has one incumbent value per temperature level.
pub fn simulated_annealing<F>(f: F, bounds: &Bounds, schedule: &AnnealingSchedule, seed: u64) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    simulated_annealing_from(f, bounds, schedule, seed, None)
}

/// [`simulated_annealing`] starting from `start` (clamped into the box) when
/// given.
pub fn simulated_annealing_from<F>(
    f: F,
    bounds: &Bounds,
    schedule: &AnnealingSchedule,
    seed: u64,
    start: Option<&[f64]>,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    schedule.validate()?;
    let dims = bounds.dims();
    if let Some(s) = start {
        if s.len() != dims {
            return Err(Error::Shape(format!("start point has {} dimensions, bounds have {dims}", s.len())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Counted::new(f);

    let mut best_point: Option<Vec<f64>> = None;
    let mut best_value = f64::INFINITY;
    let consider = |x: &[f64], v: f64, best_point: &mut Option<Vec<f64>>, best_value: &mut f64| {
        if v < *best_value {
            *best_value = v;
            *best_point = Some(x.to_vec());
        }
    };

    let t0 = match schedule.t0 {
        Some(t0) => t0,
        None => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for _ in 0..T0_SAMPLES {
                let x = bounds.sample(&mut rng);
                let v = f.eval(&x)?;
                lo = lo.min(v);
                hi = hi.max(v);
                consider(&x, v, &mut best_point, &mut best_value);
            }
            let spread = hi - lo;
            if spread > schedule.t_min {
                spread
            } else {
                10.0 * schedule.t_min
            }
        }
    };

    let mut x = match start {
        Some(s) => {
            let mut s = s.to_vec();
            bounds.clamp(&mut s);
            s
        }
        None => bounds.sample(&mut rng),
    };
    let mut fx = f.eval(&x)?;
    consider(&x, fx, &mut best_point, &mut best_value);

    let scales: Vec<f64> = (0..dims).map(|i| PROPOSAL_SCALE * bounds.width(i)).collect();
    let mut trace = Vec::new();
    let mut temp = t0;
    let mut candidate = vec![0.0; dims];
    while temp > schedule.t_min {
        for _ in 0..schedule.steps_per_temp {
            for (c, (xi, s)) in candidate.iter_mut().zip(x.iter().zip(&scales)) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *c = xi + s * z;
            }
            bounds.clamp(&mut candidate);
            let fc = f.eval(&candidate)?;
            let delta = fc - fx;
            let u: f64 = rng.gen();
            if delta <= 0.0 || u < (-delta / temp).exp() {
                x.copy_from_slice(&candidate);
                fx = fc;
                consider(&x, fx, &mut best_point, &mut best_value);
            }
        }
        trace.push(best_value);
        temp *= schedule.alpha;
    }

    Ok(OptimResult {
        best_point: best_point.expect("at least one point is always evaluated"),
        best_value,
        evaluations: f.evaluations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::testfns::{rastrigin, sphere};

    #[test]
    fn sphere_reaches_origin() {
        let b = Bounds::uniform(2, -5.0, 5.0).unwrap();
        let r = simulated_annealing(sphere, &b, &AnnealingSchedule::default(), 7).unwrap();
        assert!(r.best_value < 1e-2, "{}", r.best_value);
        assert_eq!(r.best_value, sphere(&r.best_point));
    }

    #[test]
    fn rastrigin_1d_success_rate() {
        let b = Bounds::uniform(1, -5.12, 5.12).unwrap();
        let hits = (0..20u64)
            .filter(|&seed| simulated_annealing(rastrigin, &b, &AnnealingSchedule::default(), seed).unwrap().best_value < 1e-1)
            .count();
        assert!(hits >= 19, "{hits}/20");
    }

    #[test]
    fn seeded_runs_repeat() {
        let b = Bounds::uniform(3, -2.0, 2.0).unwrap();
        let s = AnnealingSchedule { steps_per_temp: 10, ..Default::default() };
        assert_eq!(simulated_annealing(rastrigin, &b, &s, 11).unwrap(), simulated_annealing(rastrigin, &b, &s, 11).unwrap());
    }

    #[test]
    fn trace_is_monotone_and_points_in_bounds() {
        let b = Bounds::new(vec![(0.2, 0.3), (-1.0, -0.9)]).unwrap();
        let mut outside = 0;
        let r = simulated_annealing(
            |x| {
                if !b.contains(x) {
                    outside += 1;
                }
                rastrigin(x)
            },
            &b,
            &AnnealingSchedule { steps_per_temp: 20, ..Default::default() },
            1,
        )
        .unwrap();
        assert_eq!(outside, 0);
        assert!(b.contains(&r.best_point));
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn explicit_start_is_used() {
        let b = Bounds::uniform(1, -1.0, 1.0).unwrap();
        let s = AnnealingSchedule { t0: Some(1e-6), t_min: 1e-7, alpha: 0.5, steps_per_temp: 1 };
        let r = simulated_annealing_from(|x| x[0], &b, &s, 0, Some(&[-1.0])).unwrap();
        assert_eq!(r.best_point, vec![-1.0]);
    }

    #[test]
    fn schedule_validation() {
        let b = Bounds::uniform(1, -1.0, 1.0).unwrap();
        for s in [
            AnnealingSchedule { alpha: 1.0, ..Default::default() },
            AnnealingSchedule { alpha: 0.0, ..Default::default() },
            AnnealingSchedule { t_min: 0.0, ..Default::default() },
            AnnealingSchedule { t0: Some(1e-9), t_min: 1e-8, ..Default::default() },
            AnnealingSchedule { steps_per_temp: 0, ..Default::default() },
        ] {
            assert!(matches!(simulated_annealing(sphere, &b, &s, 0), Err(Error::Config(_))), "{s:?}");
        }
    }
}
