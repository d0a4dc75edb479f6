//! Simulated annealing with independent per-individual chains.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{
    wrong_state, EvaluatedPopulation, InitArgs, Optimizer, OptimizerState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub initial_temperature: f64,
    /// Multiplied into the temperature after every generation.
    pub cooling_rate: f64,
    /// Proposal sigma = step_frac * bound range * temperature.
    pub step_frac: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams { initial_temperature: 1.0, cooling_rate: 0.98, step_frac: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SaState {
    pub temperature: f64,
    pub cooling_rate: f64,
    pub currents: Vec<Vec<f64>>,
    pub current_fitness: Vec<f64>,
    /// False until the initial population has been evaluated.
    pub evaluated: bool,
}

/// Metropolis criterion: always accept improvements, otherwise accept with
/// probability exp(delta / temperature).
pub fn metropolis_accept(delta: f64, temperature: f64, rng: &mut dyn RngCore) -> bool {
    if delta >= 0.0 {
        true
    } else {
        rng.random_range(0.0..1.0) < (delta / temperature).exp()
    }
}

pub struct SaOptimizer {
    params: SaParams,
    population_size: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: SaState,
}

impl SaOptimizer {
    pub fn new(
        params: SaParams,
        population_size: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if !(params.initial_temperature > 0.0) {
            return Err(Error::config("sa initial_temperature must be > 0"));
        }
        if !(params.cooling_rate > 0.0 && params.cooling_rate <= 1.0) {
            return Err(Error::config("sa cooling_rate must be in (0, 1]"));
        }
        let state = SaState {
            temperature: params.initial_temperature,
            cooling_rate: params.cooling_rate,
            ..SaState::default()
        };
        Ok(SaOptimizer { params, population_size, lower, upper, state })
    }

    pub fn state(&self) -> &SaState {
        &self.state
    }
}

impl Optimizer for SaOptimizer {
    fn id(&self) -> &'static str {
        "sa"
    }

    fn initialize(&mut self, init: &mut InitArgs<'_>) -> Result<()> {
        self.state.currents =
            (0..self.population_size).map(|_| (init.sampler)()).collect::<Result<_>>()?;
        self.state.current_fitness = vec![f64::NEG_INFINITY; self.population_size];
        self.state.evaluated = false;
        Ok(())
    }

    fn ask(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.currents.is_empty() {
            return Err(Error::step("sa asked before initialization"));
        }
        if !self.state.evaluated {
            return Ok(self.state.currents.clone());
        }
        let t = self.state.temperature;
        Ok(self
            .state
            .currents
            .iter()
            .map(|x| {
                x.iter()
                    .enumerate()
                    .map(|(d, &v)| {
                        let sigma = self.params.step_frac * (self.upper[d] - self.lower[d]) * t;
                        if sigma > 0.0 {
                            v + Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect())
    }

    fn tell(&mut self, population: &EvaluatedPopulation, rng: &mut dyn RngCore) -> Result<()> {
        population.require_ok()?;
        if population.entries.len() != self.state.currents.len() {
            return Err(Error::step("population size does not match sa chains"));
        }
        for (i, entry) in population.entries.iter().enumerate() {
            if !entry.is_ok() {
                continue; // failed proposal: keep the current point
            }
            let proposal = entry.individual.flatten();
            let fitness = entry.weighted_fitness;
            if !self.state.evaluated {
                self.state.currents[i] = proposal;
                self.state.current_fitness[i] = fitness;
                continue;
            }
            let delta = fitness - self.state.current_fitness[i];
            if metropolis_accept(delta, self.state.temperature, rng) {
                self.state.currents[i] = proposal;
                self.state.current_fitness[i] = fitness;
            }
        }
        self.state.evaluated = true;
        self.state.temperature *= self.state.cooling_rate;
        Ok(())
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Sa(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Sa(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("sa")),
        }
    }
}
