use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bounds, Counted, OptimResult};
use crate::error::{Error, Result};

/// Initial velocities are uniform in ± this fraction of each dimension's width.
const INITIAL_VELOCITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive_coef: f64,
    pub social_coef: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig { swarm_size: 30, iterations: 200, inertia: 0.7, cognitive_coef: 1.5, social_coef: 1.5, seed: 0 }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::Config("swarm needs at least one particle".into()));
        }
        for (name, c) in [
            ("inertia", self.inertia),
            ("cognitive_coef", self.cognitive_coef),
            ("social_coef", self.social_coef),
        ] {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {c}")));
            }
        }
        Ok(())
    }
}

/// Particle swarm optimisation with the canonical velocity update
/// `v = w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)`. A particle that hits a
/// wall is clamped to it and loses that velocity component. The global best
/// is refreshed once per iteration; the trace holds it after initialisation
/// and after each iteration.
pub fn particle_swarm<F>(f: F, bounds: &Bounds, cfg: &SwarmConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut f = Counted::new(f);
    let dims = bounds.dims();

    let mut pos: Vec<Vec<f64>> = (0..cfg.swarm_size).map(|_| bounds.sample(&mut rng)).collect();
    let mut vel: Vec<Vec<f64>> = (0..cfg.swarm_size)
        .map(|_| {
            (0..dims)
                .map(|i| {
                    let v = INITIAL_VELOCITY * bounds.width(i);
                    rng.gen_range(-v..=v)
                })
                .collect()
        })
        .collect();
    let mut pbest = pos.clone();
    let mut pbest_val = pos.iter().map(|x| f.eval(x)).collect::<Result<Vec<_>>>()?;

    let mut g = 0;
    for i in 1..pbest_val.len() {
        if pbest_val[i] < pbest_val[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_val = pbest_val[g];
    let mut trace = vec![gbest_val];

    for _ in 0..cfg.iterations {
        for p in 0..cfg.swarm_size {
            for d in 0..dims {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let x = pos[p][d];
                let v = cfg.inertia * vel[p][d]
                    + cfg.cognitive_coef * r1 * (pbest[p][d] - x)
                    + cfg.social_coef * r2 * (gbest[d] - x);
                let (lo, hi) = bounds.ranges()[d];
                let moved = x + v;
                if moved < lo {
                    pos[p][d] = lo;
                    vel[p][d] = 0.0;
                } else if moved > hi {
                    pos[p][d] = hi;
                    vel[p][d] = 0.0;
                } else {
                    pos[p][d] = moved;
                    vel[p][d] = v;
                }
            }
            let value = f.eval(&pos[p])?;
            if value < pbest_val[p] {
                pbest_val[p] = value;
                pbest[p].copy_from_slice(&pos[p]);
            }
        }
        for p in 0..cfg.swarm_size {
            if pbest_val[p] < gbest_val {
                gbest_val = pbest_val[p];
                gbest.copy_from_slice(&pbest[p]);
            }
        }
        trace.push(gbest_val);
    }

    Ok(OptimResult { best_point: gbest, best_value: gbest_val, evaluations: f.evaluations, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::testfns::{rastrigin, sphere};

    #[test]
    fn sphere_converges() {
        let b = Bounds::uniform(2, -5.0, 5.0).unwrap();
        let r = particle_swarm(sphere, &b, &SwarmConfig { seed: 1, ..Default::default() }).unwrap();
        assert!(r.best_value < 1e-4, "{}", r.best_value);
        assert_eq!(r.best_value, sphere(&r.best_point));
    }

    #[test]
    fn frozen_dynamics_keep_initial_best() {
        let b = Bounds::uniform(2, -5.0, 5.0).unwrap();
        let cfg = SwarmConfig { inertia: 0.0, cognitive_coef: 0.0, social_coef: 0.0, iterations: 50, seed: 3, swarm_size: 10 };
        let r = particle_swarm(sphere, &b, &cfg).unwrap();
        assert!(r.trace.iter().all(|v| *v == r.trace[0]));
    }

    #[test]
    fn bigger_swarm_wins_most_pairs() {
        let b = Bounds::uniform(2, -5.0, 5.0).unwrap();
        let wins = (0..20u64)
            .filter(|&seed| {
                let single = particle_swarm(sphere, &b, &SwarmConfig { swarm_size: 1, seed, ..Default::default() }).unwrap();
                let many = particle_swarm(sphere, &b, &SwarmConfig { seed, ..Default::default() }).unwrap();
                many.best_value <= single.best_value
            })
            .count();
        assert!(wins >= 16, "{wins}/20");
    }

    #[test]
    fn rastrigin_success_rate() {
        let b = Bounds::uniform(2, -5.12, 5.12).unwrap();
        let hits = (0..20u64)
            .filter(|&seed| particle_swarm(rastrigin, &b, &SwarmConfig { seed, ..Default::default() }).unwrap().best_value < 1e-1)
            .count();
        assert!(hits >= 19, "{hits}/20");
    }

    #[test]
    fn seeded_runs_repeat() {
        let b = Bounds::uniform(3, -1.0, 1.0).unwrap();
        let cfg = SwarmConfig { iterations: 30, seed: 8, ..Default::default() };
        assert_eq!(particle_swarm(rastrigin, &b, &cfg).unwrap(), particle_swarm(rastrigin, &b, &cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        let b = Bounds::uniform(1, -1.0, 1.0).unwrap();
        assert!(particle_swarm(sphere, &b, &SwarmConfig { swarm_size: 0, ..Default::default() }).is_err());
        assert!(particle_swarm(sphere, &b, &SwarmConfig { inertia: -1.0, ..Default::default() }).is_err());
        assert!(particle_swarm(sphere, &b, &SwarmConfig { social_coef: f64::NAN, ..Default::default() }).is_err());
    }
}
