//! Genetic algorithm: tournament selection, blend crossover, Gaussian
//! mutation, and a hall of fame reinjected as elites.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{
    wrong_state, EvaluatedPopulation, InitArgs, Optimizer, OptimizerState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    /// Per-component mutation probability once an offspring mutates.
    pub mutation_indpb: f64,
    /// Mutation sigma as a fraction of each component's bound range.
    pub mutation_sigma_frac: f64,
    pub blend_alpha: f64,
    pub hall_of_fame_size: usize,
    /// Hall-of-fame members reinjected each generation, replacing the
    /// trailing offspring slots.
    pub elite_count: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            tournament_size: 3,
            crossover_prob: 0.7,
            mutation_prob: 0.2,
            mutation_indpb: 0.25,
            mutation_sigma_frac: 0.1,
            blend_alpha: 0.5,
            hall_of_fame_size: 5,
            elite_count: 2,
        }
    }
}

/// Best-ever individual retained by the hall of fame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HofEntry {
    pub values: Vec<f64>,
    pub weighted_fitness: f64,
    pub generation: u64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GaState {
    pub hall_of_fame: Vec<HofEntry>,
    /// OK entries of the last evaluated generation: (values, weighted fitness).
    pub parents: Vec<(Vec<f64>, f64)>,
    /// Population queued before the first evaluation.
    pub pending: Vec<Vec<f64>>,
}

pub struct GaOptimizer {
    params: GaParams,
    population_size: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: GaState,
}

impl GaOptimizer {
    pub fn new(
        params: GaParams,
        population_size: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if population_size < 2 {
            return Err(Error::config("ga requires population size >= 2"));
        }
        if params.tournament_size == 0 {
            return Err(Error::config("ga tournament size must be >= 1"));
        }
        for (name, p) in [
            ("crossover_prob", params.crossover_prob),
            ("mutation_prob", params.mutation_prob),
            ("mutation_indpb", params.mutation_indpb),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("ga {name} must be in [0, 1]")));
            }
        }
        Ok(GaOptimizer { params, population_size, lower, upper, state: GaState::default() })
    }

    pub fn state(&self) -> &GaState {
        &self.state
    }
}

/// Ordered insert keeping the best-ever entries; ties prefer the earlier
/// (generation, index). Reinjected elites re-enter with identical values and
/// would crowd out the archive, so exact duplicates are collapsed.
fn update_hall_of_fame(hof: &mut Vec<HofEntry>, candidate: HofEntry, capacity: usize) {
    if capacity == 0 {
        return;
    }
    if let Some(existing) = hof.iter().position(|e| e.values == candidate.values) {
        if candidate.weighted_fitness <= hof[existing].weighted_fitness {
            return;
        }
        hof.remove(existing);
    }
    let pos = hof
        .iter()
        .position(|e| {
            (candidate.weighted_fitness, e.generation, e.index)
                > (e.weighted_fitness, candidate.generation, candidate.index)
        })
        .unwrap_or(hof.len());
    hof.insert(pos, candidate);
    hof.truncate(capacity);
}

fn tournament<'a>(
    pool: &'a [(Vec<f64>, f64)],
    size: usize,
    rng: &mut dyn RngCore,
) -> &'a (Vec<f64>, f64) {
    let mut best: Option<&(Vec<f64>, f64)> = None;
    for _ in 0..size {
        let pick = &pool[rng.random_range(0..pool.len())];
        best = match best {
            Some(b) if b.1 >= pick.1 => Some(b),
            _ => Some(pick),
        };
    }
    best.expect("tournament size >= 1")
}

/// One GA update: selection, crossover, mutation, hall-of-fame elitism.
/// Returns the next population; `state` is only modified on success.
pub fn ga_step(
    population: &EvaluatedPopulation,
    state: &mut GaState,
    params: &GaParams,
    population_size: usize,
    lower: &[f64],
    upper: &[f64],
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    population.require_ok()?;

    for entry in population.ok_entries() {
        update_hall_of_fame(
            &mut state.hall_of_fame,
            HofEntry {
                values: entry.individual.flatten(),
                weighted_fitness: entry.weighted_fitness,
                generation: entry.individual.generation,
                index: entry.individual.index,
            },
            params.hall_of_fame_size,
        );
    }
    state.parents = population
        .ok_entries()
        .map(|e| (e.individual.flatten(), e.weighted_fitness))
        .collect();

    let mut offspring: Vec<Vec<f64>> = (0..population_size)
        .map(|_| tournament(&state.parents, params.tournament_size, rng).0.clone())
        .collect();

    // Blend crossover over consecutive pairs (DEAP cxBlend).
    for pair in offspring.chunks_exact_mut(2) {
        if rng.random_range(0.0..1.0) < params.crossover_prob {
            let (a, b) = pair.split_at_mut(1);
            for (x, y) in a[0].iter_mut().zip(b[0].iter_mut()) {
                let u: f64 = rng.random_range(0.0..1.0);
                let gamma = (1.0 + 2.0 * params.blend_alpha) * u - params.blend_alpha;
                let (x0, y0) = (*x, *y);
                *x = (1.0 - gamma) * x0 + gamma * y0;
                *y = gamma * x0 + (1.0 - gamma) * y0;
            }
        }
    }

    for child in offspring.iter_mut() {
        if rng.random_range(0.0..1.0) < params.mutation_prob {
            for (d, v) in child.iter_mut().enumerate() {
                if rng.random_range(0.0..1.0) < params.mutation_indpb {
                    let sigma = params.mutation_sigma_frac * (upper[d] - lower[d]);
                    if sigma > 0.0 {
                        *v += Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
                    }
                }
            }
        }
    }

    let elites = params.elite_count.min(state.hall_of_fame.len()).min(population_size);
    for k in 0..elites {
        let slot = population_size - elites + k;
        offspring[slot] = state.hall_of_fame[k].values.clone();
    }

    Ok(offspring)
}

impl Optimizer for GaOptimizer {
    fn id(&self) -> &'static str {
        "ga"
    }

    fn initialize(&mut self, init: &mut InitArgs<'_>) -> Result<()> {
        self.state.pending =
            (0..self.population_size).map(|_| (init.sampler)()).collect::<Result<_>>()?;
        Ok(())
    }

    fn ask(&mut self, _rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.pending.is_empty() {
            return Err(Error::step("ga asked before initialization or tell"));
        }
        Ok(self.state.pending.clone())
    }

    fn tell(&mut self, population: &EvaluatedPopulation, rng: &mut dyn RngCore) -> Result<()> {
        let next = ga_step(
            population,
            &mut self.state,
            &self.params,
            self.population_size,
            &self.lower,
            &self.upper,
            rng,
        )?;
        self.state.pending = next;
        Ok(())
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Ga(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Ga(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("ga")),
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

    fn evaluated(values: &[(&[f64], f64)]) -> EvaluatedPopulation {
        EvaluatedPopulation {
            entries: values
                .iter()
                .enumerate()
                .map(|(i, (v, f))| EvaluatedIndividual {
                    individual: Individual::new(0, i, vec![NamedParam::new("x", v.to_vec())]),
                    fitness: FitnessVector::scalar(*f),
                    weighted_fitness: *f,
                    status: EvalStatus::Ok,
                    model_output: None,
                })
                .collect(),
        }
    }

    #[test]
    fn no_variation_offspring_are_copies_of_selected_parents() {
        let pop = evaluated(&[(&[1.0, 2.0], 0.1), (&[3.0, 4.0], 0.7), (&[5.0, 6.0], 0.3)]);
        let params = GaParams {
            crossover_prob: 0.0,
            mutation_sigma_frac: 0.0,
            elite_count: 0,
            ..GaParams::default()
        };
        let mut state = GaState::default();
        let mut rng = substream(1, purpose::TELL, 0, 0);
        let offspring =
            ga_step(&pop, &mut state, &params, 6, &[-10.0, -10.0], &[10.0, 10.0], &mut rng)
                .unwrap();
        assert_eq!(offspring.len(), 6);
        let parents: Vec<Vec<f64>> =
            pop.entries.iter().map(|e| e.individual.flatten()).collect();
        for child in &offspring {
            assert!(parents.contains(child), "offspring {child:?} is not a parent copy");
        }
    }

    #[test]
    fn hall_of_fame_tracks_global_best() {
        let params = GaParams::default();
        let mut state = GaState::default();
        let mut rng = substream(2, purpose::TELL, 0, 0);
        let gens = [
            evaluated(&[(&[0.0], 0.5), (&[1.0], 0.9)]),
            evaluated(&[(&[2.0], 0.2), (&[3.0], 0.4)]),
            evaluated(&[(&[4.0], 0.95), (&[5.0], 0.1)]),
        ];
        let mut best_so_far = f64::NEG_INFINITY;
        for pop in &gens {
            ga_step(&pop.clone(), &mut state, &params, 2, &[-10.0], &[10.0], &mut rng).unwrap();
            best_so_far = best_so_far
                .max(pop.entries.iter().map(|e| e.weighted_fitness).fold(f64::MIN, f64::max));
            assert_eq!(state.hall_of_fame[0].weighted_fitness, best_so_far);
        }
    }

    #[test]
    fn hall_of_fame_fitness_is_non_decreasing() {
        let params = GaParams::default();
        let mut state = GaState::default();
        let mut rng = substream(3, purpose::TELL, 0, 0);
        let mut prev = f64::NEG_INFINITY;
        for (g, f) in [0.3, 0.1, 0.6, 0.2, 0.9].iter().enumerate() {
            let pop = evaluated(&[(&[g as f64], *f), (&[0.0], 0.0)]);
            ga_step(&pop, &mut state, &params, 2, &[-10.0], &[10.0], &mut rng).unwrap();
            assert!(state.hall_of_fame[0].weighted_fitness >= prev);
            prev = state.hall_of_fame[0].weighted_fitness;
        }
    }

    #[test]
    fn all_failed_leaves_state_unchanged() {
        let mut pop = evaluated(&[(&[0.0], 0.5), (&[1.0], 0.9)]);
        for e in &mut pop.entries {
            e.status = EvalStatus::Failed;
        }
        let params = GaParams::default();
        let mut state = GaState::default();
        let before = state.clone();
        let mut rng = substream(4, purpose::TELL, 0, 0);
        let err = ga_step(&pop, &mut state, &params, 2, &[-10.0], &[10.0], &mut rng);
        assert!(err.is_err());
        assert_eq!(state, before);
    }

    #[test]
    fn elites_replace_trailing_offspring() {
        let pop = evaluated(&[(&[1.0], 1.0), (&[2.0], 0.5), (&[3.0], 0.2)]);
        let params = GaParams { elite_count: 1, ..GaParams::default() };
        let mut state = GaState::default();
        let mut rng = substream(5, purpose::TELL, 0, 0);
        let offspring =
            ga_step(&pop, &mut state, &params, 3, &[-10.0], &[10.0], &mut rng).unwrap();
        assert_eq!(offspring[2], vec![1.0]);
    }
}
