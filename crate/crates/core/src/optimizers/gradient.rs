//! Gradient ascent with a regression-estimated gradient.
//!
//! The gradient is the slope of a least-squares fit of weighted fitness on
//! parameter offsets around the current point; the next population is the
//! moved point plus Gaussian exploration samples.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{
    wrong_state, EvaluatedPopulation, InitArgs, Optimizer, OptimizerState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdParams {
    pub learning_rate: f64,
    /// Exploration sigma as a fraction of each component's bound range.
    pub exploration_radius_frac: f64,
}

impl Default for GdParams {
    fn default() -> Self {
        GdParams { learning_rate: 0.01, exploration_radius_frac: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GdState {
    pub point: Vec<f64>,
    /// Set after a degenerate regression; the next population is resampled
    /// uniformly instead of locally.
    pub resample_uniform: bool,
}

/// Least-squares estimate of the fitness gradient at the sample mean.
///
/// Fits fitness = a + b . (x - mean(x)) and returns b. Errors when the
/// offsets are rank-deficient (all samples identical, or too few samples).
pub fn estimate_gradient(points: &[Vec<f64>], fitnesses: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() || points.len() != fitnesses.len() {
        return Err(Error::step("gradient estimate needs matched points and fitnesses"));
    }
    let dim = points[0].len();
    let n = points.len();
    if n < dim + 1 {
        return Err(Error::step("gradient estimate needs more samples than dimensions"));
    }
    let mut mean = vec![0.0; dim];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / n as f64;
        }
    }
    let design = DMatrix::from_fn(n, dim + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            points[r][c - 1] - mean[c - 1]
        }
    });
    let rhs = DVector::from_row_slice(fitnesses);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * 1e-10 * (n.max(dim + 1) as f64);
    if svd.singular_values.iter().filter(|&&s| s > tol).count() < dim + 1 {
        return Err(Error::step("degenerate offset matrix in gradient estimate"));
    }
    let coeffs = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::step(format!("least squares solve failed: {e}")))?;
    Ok(coeffs.as_slice()[1..].to_vec())
}

pub struct GdOptimizer {
    params: GdParams,
    population_size: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: GdState,
}

impl GdOptimizer {
    pub fn new(
        params: GdParams,
        population_size: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if population_size < 2 {
            return Err(Error::config("gd requires population size >= 2"));
        }
        if !(params.learning_rate > 0.0) {
            return Err(Error::config("gd learning_rate must be > 0"));
        }
        Ok(GdOptimizer { params, population_size, lower, upper, state: GdState::default() })
    }

    pub fn state(&self) -> &GdState {
        &self.state
    }
}

impl Optimizer for GdOptimizer {
    fn id(&self) -> &'static str {
        "gd"
    }

    fn initialize(&mut self, init: &mut InitArgs<'_>) -> Result<()> {
        self.state.point = (init.sampler)()?;
        Ok(())
    }

    fn ask(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.point.is_empty() {
            return Err(Error::step("gd asked before initialization"));
        }
        if self.state.resample_uniform {
            return Ok((0..self.population_size)
                .map(|_| {
                    self.lower
                        .iter()
                        .zip(&self.upper)
                        .map(|(&l, &u)| if l < u { rng.random_range(l..=u) } else { l })
                        .collect()
                })
                .collect());
        }
        let mut population = Vec::with_capacity(self.population_size);
        population.push(self.state.point.clone());
        for _ in 1..self.population_size {
            let sample: Vec<f64> = self
                .state
                .point
                .iter()
                .enumerate()
                .map(|(d, &v)| {
                    let sigma = self.params.exploration_radius_frac * (self.upper[d] - self.lower[d]);
                    if sigma > 0.0 {
                        v + Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
                    } else {
                        v
                    }
                })
                .collect();
            population.push(sample);
        }
        Ok(population)
    }

    fn tell(&mut self, population: &EvaluatedPopulation, _rng: &mut dyn RngCore) -> Result<()> {
        population.require_ok()?;
        let points: Vec<Vec<f64>> =
            population.ok_entries().map(|e| e.individual.flatten()).collect();
        let fitnesses: Vec<f64> = population.ok_entries().map(|e| e.weighted_fitness).collect();
        match estimate_gradient(&points, &fitnesses) {
            Ok(gradient) => {
                for (d, g) in gradient.iter().enumerate() {
                    self.state.point[d] += self.params.learning_rate * g;
                }
                self.state.resample_uniform = false;
            }
            Err(err) => {
                log::warn!("gd: {err}; falling back to uniform resampling");
                self.state.resample_uniform = true;
            }
        }
        Ok(())
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Gd(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Gd(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("gd")),
        }
    }
}
