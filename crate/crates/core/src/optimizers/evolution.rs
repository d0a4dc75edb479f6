//! Evolution strategies with centered-rank fitness shaping.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{
    wrong_state, EvaluatedPopulation, InitArgs, Optimizer, OptimizerState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsParams {
    pub learning_rate: f64,
    /// Sampling sigma as a fraction of each component's bound range.
    pub sigma_frac: f64,
}

impl Default for EsParams {
    fn default() -> Self {
        EsParams { learning_rate: 1.0, sigma_frac: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EsState {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Unit perturbations of the last asked population, one per member.
    pub noise: Vec<Vec<f64>>,
}

/// Centered rank transform with tie averaging: values map into
/// [-0.5, 0.5] and sum to zero; equal fitnesses get equal weight.
pub fn centered_ranks(fitnesses: &[f64]) -> Vec<f64> {
    let n = fitnesses.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitnesses[a].partial_cmp(&fitnesses[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && fitnesses[order[j + 1]] == fitnesses[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
        .into_iter()
        .map(|r| r / (n as f64 - 1.0) - 0.5)
        .collect()
}

pub struct EsOptimizer {
    params: EsParams,
    population_size: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: EsState,
}

impl EsOptimizer {
    pub fn new(
        params: EsParams,
        population_size: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if population_size < 2 {
            return Err(Error::config("es requires population size >= 2"));
        }
        if !(params.sigma_frac > 0.0) {
            return Err(Error::config("es sigma must be > 0"));
        }
        if !(params.learning_rate > 0.0) {
            return Err(Error::config("es learning_rate must be > 0"));
        }
        Ok(EsOptimizer { params, population_size, lower, upper, state: EsState::default() })
    }

    pub fn state(&self) -> &EsState {
        &self.state
    }
}

impl Optimizer for EsOptimizer {
    fn id(&self) -> &'static str {
        "es"
    }

    fn initialize(&mut self, init: &mut InitArgs<'_>) -> Result<()> {
        self.state.mean = (init.sampler)()?;
        self.state.sigma = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| self.params.sigma_frac * (u - l))
            .collect();
        Ok(())
    }

    fn ask(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.mean.is_empty() {
            return Err(Error::step("es asked before initialization"));
        }
        let dim = self.state.mean.len();
        self.state.noise = (0..self.population_size)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        Ok(self
            .state
            .noise
            .iter()
            .map(|eps| {
                eps.iter()
                    .enumerate()
                    .map(|(d, &e)| self.state.mean[d] + self.state.sigma[d] * e)
                    .collect()
            })
            .collect())
    }

    fn tell(&mut self, population: &EvaluatedPopulation, _rng: &mut dyn RngCore) -> Result<()> {
        population.require_ok()?;
        if population.entries.len() != self.state.noise.len() {
            return Err(Error::step("population size does not match recorded noise"));
        }
        let ok: Vec<usize> = population
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_ok())
            .map(|(i, _)| i)
            .collect();
        let fitnesses: Vec<f64> =
            ok.iter().map(|&i| population.entries[i].weighted_fitness).collect();
        let shaped = centered_ranks(&fitnesses);
        let n = ok.len() as f64;
        for d in 0..self.state.mean.len() {
            let mut acc = 0.0;
            for (k, &i) in ok.iter().enumerate() {
                acc += shaped[k] * self.state.noise[i][d];
            }
            self.state.mean[d] += self.params.learning_rate / (n * self.state.sigma[d]) * acc;
        }
        Ok(())
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Es(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Es(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("es")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{EvalStatus, FitnessVector};
    use crate::individual::{Individual, NamedParam};
    use crate::optimizers::EvaluatedIndividual;
    use crate::rng::{purpose, substream};
    use approx::assert_abs_diff_eq;

    fn optimizer(mean: f64, sigma: f64, pop: usize) -> EsOptimizer {
        let mut opt =
            EsOptimizer::new(EsParams::default(), pop, vec![-10.0], vec![10.0]).unwrap();
        opt.state.mean = vec![mean];
        opt.state.sigma = vec![sigma];
        opt
    }

    fn tell_with(opt: &mut EsOptimizer, values: &[f64], fitnesses: &[f64]) {
        let pop = EvaluatedPopulation {
            entries: values
                .iter()
                .zip(fitnesses)
                .enumerate()
                .map(|(i, (v, f))| EvaluatedIndividual {
                    individual: Individual::new(0, i, vec![NamedParam::scalar("x", *v)]),
                    fitness: FitnessVector::scalar(*f),
                    weighted_fitness: *f,
                    status: EvalStatus::Ok,
                    model_output: None,
                })
                .collect(),
        };
        let mut rng = substream(40, purpose::TELL, 0, 0);
        opt.tell(&pop, &mut rng).unwrap();
    }

    #[test]
    fn centered_ranks_sum_to_zero_and_span_half() {
        let shaped = centered_ranks(&[0.1, 0.9, 0.5, 0.3]);
        assert_abs_diff_eq!(shaped.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(shaped.iter().fold(f64::MIN, |a, &b| a.max(b)), 0.5);
        assert_abs_diff_eq!(shaped.iter().fold(f64::MAX, |a, &b| a.min(b)), -0.5);
    }

    #[test]
    fn equal_fitnesses_leave_mean_unchanged() {
        let mut opt = optimizer(1.5, 0.5, 4);
        let mut rng = substream(41, purpose::ASK, 0, 0);
        let asked = opt.ask(&mut rng).unwrap();
        let values: Vec<f64> = asked.iter().map(|v| v[0]).collect();
        tell_with(&mut opt, &values, &[2.0, 2.0, 2.0, 2.0]);
        assert_abs_diff_eq!(opt.state.mean[0], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn mean_moves_up_linear_fitness() {
        let mut opt = optimizer(0.0, 1.0, 2);
        opt.state.noise = vec![vec![-1.0], vec![1.0]];
        tell_with(&mut opt, &[-1.0, 1.0], &[-1.0, 1.0]);
        assert!(opt.state.mean[0] > 0.0);
    }

    #[test]
    fn quadratic_bowl_converges_near_zero() {
        let mut opt = optimizer(3.0, 0.2, 16);
        for gen in 0..200u64 {
            let mut rng = substream(42, purpose::ASK, gen, 0);
            let asked = opt.ask(&mut rng).unwrap();
            let values: Vec<f64> = asked.iter().map(|v| v[0]).collect();
            let fitnesses: Vec<f64> = values.iter().map(|x| -x * x).collect();
            tell_with(&mut opt, &values, &fitnesses);
        }
        assert!(
            opt.state.mean[0].abs() < 0.1,
            "mean {} did not converge near 0",
            opt.state.mean[0]
        );
    }
}
