//! Cross-entropy method with a diagonal Gaussian search distribution.

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{
    wrong_state, EvaluatedPopulation, InitArgs, Optimizer, OptimizerState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeParams {
    pub elite_fraction: f64,
    /// Weight of the freshly fitted moments; 1.0 disables smoothing.
    pub smoothing: f64,
    /// Sigma floor as a fraction of each component's bound range.
    pub sigma_floor_frac: f64,
    /// Initial sigma as a fraction of each component's bound range.
    pub init_sigma_frac: f64,
}

impl Default for CeParams {
    fn default() -> Self {
        CeParams {
            elite_fraction: 0.2,
            smoothing: 0.7,
            sigma_floor_frac: 1e-8,
            init_sigma_frac: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CeState {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Population-moment fit of a diagonal Gaussian (divides by n, not n-1).
pub fn fit_diag_gaussian(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n;
        }
    }
    let mut sigma = vec![0.0; dim];
    for s in samples {
        for (d, v) in s.iter().enumerate() {
            sigma[d] += (v - mean[d]).powi(2) / n;
        }
    }
    for s in sigma.iter_mut() {
        *s = s.sqrt();
    }
    (mean, sigma)
}

pub struct CeOptimizer {
    params: CeParams,
    population_size: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: CeState,
}

impl CeOptimizer {
    pub fn new(
        params: CeParams,
        population_size: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if !(params.elite_fraction > 0.0 && params.elite_fraction <= 1.0) {
            return Err(Error::config("ce elite_fraction must be in (0, 1]"));
        }
        let elites = (params.elite_fraction * population_size as f64).ceil() as usize;
        if elites < 2 {
            return Err(Error::config("ce needs at least 2 elites per generation"));
        }
        if !(params.smoothing > 0.0 && params.smoothing <= 1.0) {
            return Err(Error::config("ce smoothing must be in (0, 1]"));
        }
        Ok(CeOptimizer { params, population_size, lower, upper, state: CeState::default() })
    }

    pub fn state(&self) -> &CeState {
        &self.state
    }

    fn sigma_floor(&self, d: usize) -> f64 {
        self.params.sigma_floor_frac * (self.upper[d] - self.lower[d])
    }
}

impl Optimizer for CeOptimizer {
    fn id(&self) -> &'static str {
        "ce"
    }

    fn initialize(&mut self, init: &mut InitArgs<'_>) -> Result<()> {
        self.state.mean = (init.sampler)()?;
        self.state.sigma = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| self.params.init_sigma_frac * (u - l))
            .collect();
        Ok(())
    }

    fn ask(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.mean.is_empty() {
            return Err(Error::step("ce asked before initialization"));
        }
        let population = (0..self.population_size)
            .map(|_| {
                self.state
                    .mean
                    .iter()
                    .zip(&self.state.sigma)
                    .map(|(&m, &s)| {
                        if s > 0.0 {
                            Normal::new(m, s).expect("finite sigma").sample(rng)
                        } else {
                            m
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(population)
    }

    fn tell(&mut self, population: &EvaluatedPopulation, _rng: &mut dyn RngCore) -> Result<()> {
        population.require_ok()?;
        let ranked = population.ranked_ok_indices();
        let elite_count = ((self.params.elite_fraction * population.entries.len() as f64).ceil()
            as usize)
            .clamp(1, ranked.len());
        let elites: Vec<Vec<f64>> = ranked[..elite_count]
            .iter()
            .map(|&i| population.entries[i].individual.flatten())
            .collect();
        let (mean, sigma) = fit_diag_gaussian(&elites);
        let alpha = self.params.smoothing;
        for d in 0..self.state.mean.len() {
            self.state.mean[d] = alpha * mean[d] + (1.0 - alpha) * self.state.mean[d];
            let smoothed = alpha * sigma[d] + (1.0 - alpha) * self.state.sigma[d];
            self.state.sigma[d] = smoothed.max(self.sigma_floor(d));
        }
        Ok(())
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Ce(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Ce(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("ce")),
        }
    }
}
