//! Two independent estimates of reachability probabilities: exact
//! enumeration of finite paths and seeded Monte Carlo simulation.

use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dtmc::Dtmc;
use crate::lang::ast::Expr;
use crate::lang::ExpandError;
use crate::modelcheck::backward_reachable;
use crate::ratio::{self, Rational};

/// Expanded prefixes after which enumeration gives up.
pub const PREFIX_LIMIT: usize = 10_000_000;

/// Trials per independently seeded stream. Fixed so that the estimate does
/// not depend on the number of worker threads.
const BLOCK: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("path enumeration exceeded {0} expanded prefixes")]
    PathExplosion(usize),
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Target(#[from] ExpandError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl SimEstimate {
    fn new(hits: u64, trials: u64, seed: u64) -> Self {
        let mean = hits as f64 / trials as f64;
        SimEstimate {
            mean,
            stderr: (mean * (1.0 - mean) / trials as f64).sqrt(),
            trials,
            seed,
        }
    }

    /// Whether `value` lies within `k` standard errors of the mean. A zero
    /// standard error requires equality up to rounding.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + 1e-12
    }
}

/// Sum of the probabilities of all paths from the initial state that reach
/// `target` within `depth` steps.
pub fn enumerate_paths_set(m: &Dtmc, target: &[bool], depth: u64) -> Result<Rational, SimError> {
    let alive = backward_reachable(m, target);
    let mut total = Rational::zero();
    let mut stack = vec![(m.initial(), Rational::one(), 0u64)];
    let mut expanded = 0usize;
    while let Some((s, p, d)) = stack.pop() {
        if target[s] {
            total += p;
            continue;
        }
        if d == depth || !alive[s] {
            continue;
        }
        expanded += 1;
        if expanded > PREFIX_LIMIT {
            return Err(SimError::PathExplosion(PREFIX_LIMIT));
        }
        for (t, q) in m.row(s) {
            if alive[*t] && !q.is_zero() {
                stack.push((*t, &p * q, d + 1));
            }
        }
    }
    Ok(total)
}

pub fn enumerate_paths(m: &Dtmc, target: &Expr, depth: u64) -> Result<Rational, SimError> {
    enumerate_paths_set(m, &m.satisfying(target)?, depth)
}

struct Sampler {
    cumulative: Vec<Vec<(f64, usize)>>,
    target: Vec<bool>,
    alive: Vec<bool>,
    max_steps: usize,
}

impl Sampler {
    fn new(m: &Dtmc, target: &[bool]) -> Self {
        let cumulative = m
            .rows()
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(t, p)| {
                        acc += ratio::to_f64(p);
                        (acc, *t)
                    })
                    .collect()
            })
            .collect();
        Sampler {
            cumulative,
            target: target.to_vec(),
            alive: backward_reachable(m, target),
            max_steps: 10 * m.num_states(),
        }
    }

    fn step(&self, s: usize, rng: &mut ChaCha8Rng) -> usize {
        let row = &self.cumulative[s];
        let total = row.last().map(|x| x.0).unwrap_or(1.0);
        let u: f64 = rng.random::<f64>() * total;
        let k = row.partition_point(|&(c, _)| c <= u);
        row[k.min(row.len() - 1)].1
    }

    fn trial(&self, start: usize, rng: &mut ChaCha8Rng) -> bool {
        let mut s = start;
        for _ in 0..self.max_steps {
            if self.target[s] {
                return true;
            }
            if !self.alive[s] {
                return false;
            }
            s = self.step(s, rng);
        }
        self.target[s]
    }
}

/// Fraction of `trials` simulated runs that reach `target`. Runs longer than
/// ten times the number of states count as not reaching it.
pub fn monte_carlo_set(m: &Dtmc, target: &[bool], trials: u64, seed: u64) -> Result<SimEstimate, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    let sampler = Sampler::new(m, target);
    let blocks = trials.div_ceil(BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = BLOCK.min(trials - b * BLOCK);
            (0..n).filter(|_| sampler.trial(m.initial(), &mut rng)).count() as u64
        })
        .sum();
    Ok(SimEstimate::new(hits, trials, seed))
}

pub fn monte_carlo(m: &Dtmc, target: &Expr, trials: u64, seed: u64) -> Result<SimEstimate, SimError> {
    monte_carlo_set(m, &m.satisfying(target)?, trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    fn loop_err() -> Dtmc {
        Dtmc::from_rows(
            vec![
                vec![(0, frac(4, 5)), (1, frac(1, 5))],
                vec![(1, Rational::one())],
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn bounded_enumeration() {
        let m = loop_err();
        assert_eq!(enumerate_paths_set(&m, &[false, true], 3).unwrap(), frac(488, 1000));
        assert!(enumerate_paths_set(&m, &[false, true], 0).unwrap().is_zero());
    }

    #[test]
    fn explosion_is_reported() {
        let third = || vec![(0, frac(1, 3)), (1, frac(1, 3)), (2, frac(1, 3))];
        let m = Dtmc::from_rows(vec![third(), third(), vec![(2, Rational::one())]], 0).unwrap();
        assert_eq!(
            enumerate_paths_set(&m, &[false, false, true], 40),
            Err(SimError::PathExplosion(PREFIX_LIMIT))
        );
    }

    #[test]
    fn target_at_start() {
        let m = loop_err();
        let m = m.with_rows(vec![vec![(0, Rational::one())], vec![(1, Rational::one())]]);
        let e = monte_carlo_set(&m, &[true, false], 100, 1).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
    }

    #[test]
    fn reproducible_and_close() {
        let m = Dtmc::from_rows(
            vec![
                vec![(1, frac(1, 5)), (2, frac(4, 5))],
                vec![(1, Rational::one())],
                vec![(2, Rational::one())],
            ],
            0,
        )
        .unwrap();
        let target = [false, true, false];
        let a = monte_carlo_set(&m, &target, 100_000, 42).unwrap();
        assert_eq!(a, monte_carlo_set(&m, &target, 100_000, 42).unwrap());
        assert!(a.agrees_with(0.2, 4.0), "{a:?}");
        assert_ne!(a.mean, monte_carlo_set(&m, &target, 100_000, 43).unwrap().mean);
    }

    #[test]
    fn truncation_counts_as_miss() {
        // two states, so runs stop after 20 steps
        let e = monte_carlo_set(&loop_err(), &[false, true], 100_000, 7).unwrap();
        let reach = 1.0 - 0.8f64.powi(20);
        assert!(e.agrees_with(reach, 4.0), "{e:?} {reach}");
    }

    #[test]
    fn zero_trials() {
        assert_eq!(monte_carlo_set(&loop_err(), &[false, true], 0, 0), Err(SimError::NoTrials));
    }
}
