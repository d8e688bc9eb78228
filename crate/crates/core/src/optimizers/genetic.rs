use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Bounds, Counted, OptimResult};
use crate::error::{Error, Result};

/// Blend crossover draws its mixing coefficient from this range, so children
/// may land slightly outside the segment between the parents.
const BLEND_RANGE: (f64, f64) = (-0.25, 1.25);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneticConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of the dimension's width.
    pub mutation_sigma: f64,
    pub elitism_count: usize,
    pub seed: u64,
}

impl Default for GeneticConfig {
    fn default() -> Self {
        GeneticConfig {
            pop_size: 50,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma: 0.1,
            elitism_count: 2,
            seed: 0,
        }
    }
}

impl GeneticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::Config(format!("population needs at least 2 members, got {}", self.pop_size)));
        }
        if self.elitism_count > self.pop_size {
            return Err(Error::Config(format!(
                "elitism count {} exceeds population {}",
                self.elitism_count, self.pop_size
            )));
        }
        for (name, rate) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {rate}")));
            }
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return Err(Error::Config(format!("mutation_sigma must be non-negative, got {}", self.mutation_sigma)));
        }
        Ok(())
    }
}

/// Real-coded genetic algorithm with size-2 tournaments, blend crossover,
/// clamped Gaussian mutation and elitism. Returns the best individual ever
/// evaluated; the trace has the initial population's best followed by one
/// entry per generation.
pub fn genetic_algorithm<F>(f: F, bounds: &Bounds, cfg: &GeneticConfig) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut f = Counted::new(f);
    let dims = bounds.dims();
    let sigmas: Vec<f64> = (0..dims).map(|i| cfg.mutation_sigma * bounds.width(i)).collect();

    let mut pop: Vec<Vec<f64>> = (0..cfg.pop_size).map(|_| bounds.sample(&mut rng)).collect();
    let mut fitness = pop.iter().map(|x| f.eval(x)).collect::<Result<Vec<_>>>()?;

    let mut best = argmin(&fitness);
    let mut best_point = pop[best].clone();
    let mut best_value = fitness[best];
    let mut trace = vec![best_value];

    for _ in 0..cfg.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));

        let mut next: Vec<Vec<f64>> = order[..cfg.elitism_count].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fitness: Vec<f64> = order[..cfg.elitism_count].iter().map(|&i| fitness[i]).collect();

        // draw every offspring before evaluating any of them
        let mut offspring = Vec::with_capacity(cfg.pop_size - cfg.elitism_count);
        while next.len() + offspring.len() < cfg.pop_size {
            let p1 = tournament(&fitness, &mut rng);
            let p2 = tournament(&fitness, &mut rng);
            let mut child = if rng.gen::<f64>() < cfg.crossover_rate {
                pop[p1]
                    .iter()
                    .zip(&pop[p2])
                    .map(|(a, b)| {
                        let beta = rng.gen_range(BLEND_RANGE.0..=BLEND_RANGE.1);
                        beta * a + (1.0 - beta) * b
                    })
                    .collect()
            } else {
                pop[p1].clone()
            };
            for (gene, sigma) in child.iter_mut().zip(&sigmas) {
                if rng.gen::<f64>() < cfg.mutation_rate {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *gene += sigma * z;
                }
            }
            bounds.clamp(&mut child);
            offspring.push(child);
        }
        for child in offspring {
            next_fitness.push(f.eval(&child)?);
            next.push(child);
        }

        pop = next;
        fitness = next_fitness;
        best = argmin(&fitness);
        if fitness[best] < best_value {
            best_value = fitness[best];
            best_point = pop[best].clone();
        }
        trace.push(best_value);
    }

    Ok(OptimResult { best_point, best_value, evaluations: f.evaluations, trace })
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("population is never empty")
}

fn tournament<R: Rng>(fitness: &[f64], rng: &mut R) -> usize {
    let a = rng.gen_range(0..fitness.len());
    let b = rng.gen_range(0..fitness.len());
    if fitness[b] < fitness[a] {
        b
    } else {
        a
    }
}
