//! Cuckoo optimization algorithm for bound-constrained minimization.
//!
//! Each iteration: every cuckoo lays eggs within its egg-laying radius, the
//! worst eggs die, parents and eggs are merged and culled to the population
//! cap, the population is clustered, and every habitat except the incumbent
//! best flies part of the way toward the best cluster's best habitat with a
//! small angular deviation.

mod benchmarks;
mod kmeans;

pub use benchmarks::{rastrigin, sphere, Benchmark};
pub use kmeans::kmeans;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

const KMEANS_ITERATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoaConfig {
    pub n_initial: usize,
    pub max_population: usize,
    pub eggs_min: usize,
    pub eggs_max: usize,
    pub n_clusters: usize,
    pub motion_coefficient: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Scale of the egg-laying radius.
    pub alpha_elr: f64,
    /// Share of each generation's eggs (the worst ones) that die.
    pub egg_loss: f64,
    /// Largest migration deviation, radians.
    pub max_deviation: f64,
    /// Stop after this many iterations without a relative improvement of
    /// `stall_tolerance`.
    pub stall_iterations: usize,
    pub stall_tolerance: f64,
}

impl Default for CoaConfig {
    fn default() -> Self {
        Self {
            n_initial: 20,
            max_population: 50,
            eggs_min: 2,
            eggs_max: 4,
            n_clusters: 3,
            motion_coefficient: 2.0,
            max_iterations: 300,
            seed: 0,
            alpha_elr: 5.0,
            egg_loss: 0.1,
            max_deviation: std::f64::consts::PI / 6.0,
            stall_iterations: 50,
            stall_tolerance: 1e-9,
        }
    }
}

impl CoaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_initial < 1 || self.max_population < 1 {
            return bad("n_initial and max_population must be >= 1");
        }
        if self.eggs_min < 1 || self.eggs_min > self.eggs_max {
            return bad("need 1 <= eggs_min <= eggs_max");
        }
        if self.n_clusters < 1 {
            return bad("n_clusters must be >= 1");
        }
        if !(self.motion_coefficient >= 0.0 && self.alpha_elr >= 0.0 && self.max_deviation >= 0.0) {
            return bad("motion_coefficient, alpha_elr and max_deviation must be >= 0");
        }
        if !(0.0..1.0).contains(&self.egg_loss) {
            return bad("egg_loss must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Habitat {
    pub position: Vec<f64>,
    /// Lower is better; non-finite objective values are stored as +∞.
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub best_fitness: f64,
    pub population_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoaResult {
    pub best: Habitat,
    /// Entry 0 is the initial population.
    pub trace: Vec<TraceEntry>,
    /// True when the stall rule ended the run before `max_iterations`.
    pub stalled: bool,
    pub evaluations: usize,
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidParameter("no decision variables".into()));
    }
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("degenerate bounds [{lo}, {hi}] in dimension {d}")));
        }
    }
    Ok(())
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// `n` points drawn uniformly in the box.
pub fn init_population<R: Rng + ?Sized>(bounds: &[(f64, f64)], n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    check_bounds(bounds)?;
    Ok((0..n)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect())
        .collect())
}

/// `count` eggs uniform within `elr[d]` of the cuckoo in every dimension,
/// clipped to the box.
pub fn lay_eggs<R: Rng + ?Sized>(
    cuckoo: &[f64],
    count: usize,
    elr: &[f64],
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut egg: Vec<f64> = cuckoo
                .iter()
                .zip(elr)
                .map(|(&x, &r)| if r > 0.0 { x + rng.random_range(-r..=r) } else { x })
                .collect();
            clip(&mut egg, bounds);
            egg
        })
        .collect()
}

/// Moves each position by `coefficient·u·(goal − x)`, `u ~ U[0, 1]`, with the
/// displacement rotated by up to `max_deviation` in a random coordinate
/// plane, then clips to the box.
pub fn migrate<R: Rng + ?Sized>(
    population: &mut [Vec<f64>],
    goal: &[f64],
    coefficient: f64,
    max_deviation: f64,
    bounds: &[(f64, f64)],
    rng: &mut R,
) {
    let dim = goal.len();
    for x in population.iter_mut() {
        let u: f64 = rng.random();
        let mut d: Vec<f64> = goal.iter().zip(x.iter()).map(|(g, v)| coefficient * u * (g - v)).collect();
        if dim >= 2 && max_deviation > 0.0 {
            let i = rng.random_range(0..dim);
            let j = (i + rng.random_range(1..dim)) % dim;
            let theta = rng.random_range(-max_deviation..=max_deviation);
            let (s, c) = theta.sin_cos();
            let (a, b) = (d[i], d[j]);
            d[i] = a * c - b * s;
            d[j] = a * s + b * c;
        }
        for (v, dv) in x.iter_mut().zip(&d) {
            *v += dv;
        }
        clip(x, bounds);
    }
}

fn evaluate_all<F>(objective: &F, positions: Vec<Vec<f64>>) -> Vec<Habitat>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    positions
        .into_par_iter()
        .map(|p| {
            let f = objective(&p);
            Habitat {
                fitness: if f.is_finite() { f } else { f64::INFINITY },
                position: p,
            }
        })
        .collect()
}

fn sort_by_fitness(pop: &mut [Habitat]) {
    pop.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
}

/// Goal habitat: the best member of the cluster with the lowest mean
/// fitness.
fn select_goal(pop: &[Habitat], k: usize, rng: &mut Stream) -> usize {
    let positions: Vec<Vec<f64>> = pop.iter().map(|h| h.position.clone()).collect();
    let labels = kmeans(&positions, k, KMEANS_ITERATIONS, rng);
    let k = labels.iter().max().map_or(1, |m| m + 1);
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (h, &l) in pop.iter().zip(&labels) {
        sum[l] += h.fitness;
        count[l] += 1;
    }
    let best_cluster = (0..k)
        .filter(|&c| count[c] > 0)
        .min_by(|&a, &b| (sum[a] / count[a] as f64).total_cmp(&(sum[b] / count[b] as f64)))
        .expect("at least one non-empty cluster");
    (0..pop.len())
        .filter(|&i| labels[i] == best_cluster)
        .min_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness))
        .expect("cluster is non-empty")
}

/// Minimizes `objective` over the box.
pub fn optimize<F>(objective: F, bounds: &[(f64, f64)], cfg: &CoaConfig) -> Result<CoaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    optimize_from(objective, bounds, cfg, &[])
}

/// Like [`optimize`], with `seeds` (clipped to the box) replacing the first
/// members of the random initial population.
pub fn optimize_from<F>(objective: F, bounds: &[(f64, f64)], cfg: &CoaConfig, seeds: &[Vec<f64>]) -> Result<CoaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    check_bounds(bounds)?;
    if seeds.iter().any(|s| s.len() != bounds.len()) {
        return Err(Error::InvalidParameter("seed positions must match the problem dimension".into()));
    }
    let mut rng = stream(cfg.seed, 0);
    let range: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();

    let mut initial = init_population(bounds, cfg.n_initial, &mut rng)?;
    for (slot, s) in initial.iter_mut().zip(seeds) {
        *slot = s.clone();
        clip(slot, bounds);
    }
    let mut evaluations = initial.len();
    let mut pop = evaluate_all(&objective, initial);
    sort_by_fitness(&mut pop);
    pop.truncate(cfg.max_population);

    let mut trace = vec![TraceEntry {
        iteration: 0,
        best_fitness: pop[0].fitness,
        population_size: pop.len(),
    }];
    let mut stall = 0;
    let mut stalled = false;

    for iteration in 1..=cfg.max_iterations {
        let counts: Vec<usize> = pop
            .iter()
            .map(|_| rng.random_range(cfg.eggs_min..=cfg.eggs_max))
            .collect();
        let total: usize = counts.iter().sum();
        let mut eggs = Vec::with_capacity(total);
        for (h, &c) in pop.iter().zip(&counts) {
            let share = cfg.alpha_elr * c as f64 / total as f64;
            let elr: Vec<f64> = range.iter().map(|r| share * r).collect();
            eggs.extend(lay_eggs(&h.position, c, &elr, bounds, &mut rng));
        }
        evaluations += eggs.len();
        let mut hatched = evaluate_all(&objective, eggs);
        sort_by_fitness(&mut hatched);
        let lost = (cfg.egg_loss * hatched.len() as f64).floor() as usize;
        hatched.truncate(hatched.len() - lost);

        pop.extend(hatched);
        sort_by_fitness(&mut pop);
        pop.truncate(cfg.max_population);

        if pop.len() > 1 {
            let goal_idx = select_goal(&pop, cfg.n_clusters, &mut rng);
            let goal = pop[goal_idx].position.clone();
            // the incumbent best stays put
            let mut movers: Vec<Vec<f64>> = pop[1..].iter().map(|h| h.position.clone()).collect();
            migrate(&mut movers, &goal, cfg.motion_coefficient, cfg.max_deviation, bounds, &mut rng);
            evaluations += movers.len();
            let moved = evaluate_all(&objective, movers);
            pop.truncate(1);
            pop.extend(moved);
            sort_by_fitness(&mut pop);
        }

        let best = pop[0].fitness;
        let prev = trace.last().expect("trace starts non-empty").best_fitness;
        trace.push(TraceEntry {
            iteration,
            best_fitness: best,
            population_size: pop.len(),
        });
        let improved = if prev.is_finite() {
            prev - best > cfg.stall_tolerance * prev.abs().max(f64::MIN_POSITIVE)
        } else {
            best < prev
        };
        stall = if improved { 0 } else { stall + 1 };
        if stall >= cfg.stall_iterations {
            stalled = iteration < cfg.max_iterations;
            break;
        }
    }

    Ok(CoaResult {
        best: pop.swap_remove(0),
        trace,
        stalled,
        evaluations,
    })
}
