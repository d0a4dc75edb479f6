//! Ensemble Kalman inversion with rank-based replacement.
//!
//! The ensemble update is u_j += C_ug (C_gg + gamma I)^-1 (y - g_j), with
//! unbiased sample covariances over the ensemble. Parameters are mapped to
//! [0, 1] using their bounds before the update and mapped back afterwards.

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
pub struct EnkfParams {
    /// Additive observation-noise regularization; behaves like a learning
    /// rate (larger gamma, smaller steps).
    pub gamma: f64,
    /// Fraction of the population replaced by perturbed copies of the best.
    pub replace_fraction: f64,
    /// Sigma of the replacement noise, in normalized [0, 1] units.
    pub noise_sigma: f64,
}

impl Default for EnkfParams {
    fn default() -> Self {
        EnkfParams { gamma: 0.5, replace_fraction: 0.1, noise_sigma: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EnkfState {
    /// Ensemble columns in normalized [0, 1] space, one per individual.
    pub ensemble: Vec<Vec<f64>>,
    /// Target observation vector.
    pub target: Vec<f64>,
    pub gamma: f64,
    pub replace_fraction: f64,
    pub noise_sigma: f64,
}

/// One ensemble Kalman inversion step.
///
/// `ensemble` is D×J (one column per member), `outputs` is K×J (the model
/// observations g(u_j)), `target` is the K-dimensional observation to match.
pub fn enkf_update(
    ensemble: &DMatrix<f64>,
    outputs: &DMatrix<f64>,
    target: &DVector<f64>,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    let (dim, members) = ensemble.shape();
    let (obs_dim, out_members) = outputs.shape();
    if members < 2 {
        return Err(Error::config("enkf update requires at least 2 ensemble members"));
    }
    if out_members != members {
        return Err(Error::config("outputs must have one column per ensemble member"));
    }
    if target.len() != obs_dim {
        return Err(Error::config("target length must match output dimension"));
    }
    if !(gamma > 0.0) {
        return Err(Error::config("enkf gamma must be > 0"));
    }
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::evaluation("enkf outputs contain non-finite values"));
    }

    let u_mean = ensemble.column_mean();
    let g_mean = outputs.column_mean();
    let mut u_dev = ensemble.clone();
    let mut g_dev = outputs.clone();
    for j in 0..members {
        u_dev.column_mut(j).axpy(-1.0, &u_mean, 1.0);
        g_dev.column_mut(j).axpy(-1.0, &g_mean, 1.0);
    }
    let norm = 1.0 / (members as f64 - 1.0);
    let c_ug = &u_dev * g_dev.transpose() * norm; // D x K
    let mut c_gg = &g_dev * g_dev.transpose() * norm; // K x K
    for k in 0..obs_dim {
        c_gg[(k, k)] += gamma;
    }
    let chol = nalgebra::Cholesky::new(c_gg)
        .ok_or_else(|| Error::step("enkf covariance factorization failed"))?;

    // Innovations y - g_j for every member at once.
    let mut innovations = DMatrix::zeros(obs_dim, members);
    for j in 0..members {
        let mut col = innovations.column_mut(j);
        col.copy_from(target);
        col -= outputs.column(j);
    }
    let solved = chol.solve(&innovations);
    let mut updated = ensemble.clone();
    updated.gemm(1.0, &c_ug, &solved, 1.0);
    debug_assert_eq!(updated.shape(), (dim, members));
    Ok(updated)
}

/// Replaces the worst floor(fraction * J) members with copies of the best
/// ones plus per-component Gaussian noise. Ranking is by weighted fitness,
/// ties broken by lower index. Returns the new flattened population.
pub fn rank_replace(
    population: &EvaluatedPopulation,
    fraction: f64,
    noise_sigma: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    let mut vectors: Vec<Vec<f64>> =
        population.entries.iter().map(|e| e.individual.flatten()).collect();
    let ranked = rank_all(population);
    rank_replace_vectors(&mut vectors, &ranked, fraction, noise_sigma, rng)?;
    Ok(vectors)
}

/// All entry indices sorted best-first by weighted fitness (index tie-break).
fn rank_all(population: &EvaluatedPopulation) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..population.entries.len()).collect();
    indices.sort_by(|&a, &b| {
        population.entries[b]
            .weighted_fitness
            .partial_cmp(&population.entries[a].weighted_fitness)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.cmp(&b))
    });
    indices
}

/// In-place rank replacement over raw vectors given a best-first ranking.
pub(crate) fn rank_replace_vectors(
    vectors: &mut [Vec<f64>],
    ranked_best_first: &[usize],
    fraction: f64,
    noise_sigma: f64,
    rng: &mut dyn RngCore,
) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::config("replace fraction must be in (0, 0.5]"));
    }
    let count = (fraction * vectors.len() as f64).floor() as usize;
    for k in 0..count {
        let best = ranked_best_first[k];
        let worst = ranked_best_first[ranked_best_first.len() - 1 - k];
        let mut replacement = vectors[best].clone();
        if noise_sigma > 0.0 {
            let noise = Normal::new(0.0, noise_sigma).expect("finite sigma");
            for v in replacement.iter_mut() {
                *v += noise.sample(rng);
            }
        }
        vectors[worst] = replacement;
    }
    Ok(count)
}

pub struct EnkfOptimizer {
    population_size: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: EnkfState,
}

impl EnkfOptimizer {
    pub fn new(
        params: EnkfParams,
        population_size: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if population_size < 2 {
            return Err(Error::config("enkf requires population size >= 2"));
        }
        if !(params.gamma > 0.0) {
            return Err(Error::config("enkf gamma must be > 0"));
        }
        if !(params.replace_fraction > 0.0 && params.replace_fraction <= 0.5) {
            return Err(Error::config("enkf replace_fraction must be in (0, 0.5]"));
        }
        let state = EnkfState {
            ensemble: Vec::new(),
            target: Vec::new(),
            gamma: params.gamma,
            replace_fraction: params.replace_fraction,
            noise_sigma: params.noise_sigma,
        };
        Ok(EnkfOptimizer { population_size, lower, upper, state })
    }

    pub fn state(&self) -> &EnkfState {
        &self.state
    }

    fn normalize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let range = self.upper[d] - self.lower[d];
                if range > 0.0 {
                    (v - self.lower[d]) / range
                } else {
                    0.5
                }
            })
            .collect()
    }

    fn denormalize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(d, v)| self.lower[d] + v * (self.upper[d] - self.lower[d]))
            .collect()
    }
}

impl Optimizer for EnkfOptimizer {
    fn id(&self) -> &'static str {
        "enkf"
    }

    fn initialize(&mut self, init: &mut InitArgs<'_>) -> Result<()> {
        self.state.target = init.observation_target.clone().ok_or_else(|| {
            Error::config("enkf requires an optimizee that declares observation targets")
        })?;
        self.state.ensemble = (0..self.population_size)
            .map(|_| Ok(self.normalize(&(init.sampler)()?)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    fn ask(&mut self, _rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.ensemble.is_empty() {
            return Err(Error::step("enkf asked before initialization"));
        }
        Ok(self.state.ensemble.iter().map(|col| self.denormalize(col)).collect())
    }

    fn tell(&mut self, population: &EvaluatedPopulation, rng: &mut dyn RngCore) -> Result<()> {
        population.require_ok()?;
        if population.entries.len() != self.state.ensemble.len() {
            return Err(Error::step("population size does not match ensemble"));
        }
        let dim = self.lower.len();
        let obs_dim = self.state.target.len();

        let ok_indices: Vec<usize> = population
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_ok())
            .map(|(i, _)| i)
            .collect();
        if ok_indices.len() >= 2 {
            let mut ensemble_ok = DMatrix::zeros(dim, ok_indices.len());
            let mut outputs_ok = DMatrix::zeros(obs_dim, ok_indices.len());
            for (c, &i) in ok_indices.iter().enumerate() {
                let output = population.entries[i].model_output.as_deref().ok_or_else(|| {
                    Error::step("enkf requires model outputs on successful evaluations")
                })?;
                if output.len() != obs_dim {
                    return Err(Error::step(format!(
                        "model output length {} does not match target length {obs_dim}",
                        output.len()
                    )));
                }
                ensemble_ok
                    .column_mut(c)
                    .copy_from_slice(&self.state.ensemble[i]);
                outputs_ok.column_mut(c).copy_from_slice(output);
            }
            let target = DVector::from_column_slice(&self.state.target);
            let updated = enkf_update(&ensemble_ok, &outputs_ok, &target, self.state.gamma)?;
            for (c, &i) in ok_indices.iter().enumerate() {
                self.state.ensemble[i] = updated.column(c).iter().copied().collect();
            }
        }

        let ranked = rank_all(population);
        let fraction = self.state.replace_fraction;
        let noise_sigma = self.state.noise_sigma;
        rank_replace_vectors(&mut self.state.ensemble, &ranked, fraction, noise_sigma, rng)?;
        Ok(())
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Enkf(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Enkf(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("enkf")),
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

    #[test]
    fn zero_innovation_leaves_ensemble_unchanged() {
        let ensemble = DMatrix::from_column_slice(2, 3, &[0.1, 0.2, 0.4, 0.5, 0.7, 0.9]);
        let target = DVector::from_column_slice(&[1.0, 2.0]);
        let outputs = DMatrix::from_columns(&[target.clone(), target.clone(), target.clone()]);
        let updated = enkf_update(&ensemble, &outputs, &target, 0.5).unwrap();
        assert!((updated - ensemble).norm() < 1e-12);
    }

    #[test]
    fn huge_gamma_freezes_the_ensemble() {
        let ensemble = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, 2.0]);
        let outputs = DMatrix::from_column_slice(1, 3, &[0.0, 2.0, 4.0]);
        let target = DVector::from_column_slice(&[2.0]);
        let updated = enkf_update(&ensemble, &outputs, &target, 1e12).unwrap();
        let innovation_norm = (2.0f64.powi(2) + 0.0 + 2.0f64.powi(2)).sqrt();
        assert!((updated - ensemble).norm() < 1e-6 * innovation_norm);
    }

    #[test]
    fn scalar_linear_model_matches_analytic_update() {
        // g(u) = 2u on ensemble {0, 1, 2}, target 2, gamma 0.5:
        // C_ug = 2, C_gg = 4, factor = 2/4.5, innovations {2, 0, -2}.
        let ensemble = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, 2.0]);
        let outputs = DMatrix::from_column_slice(1, 3, &[0.0, 2.0, 4.0]);
        let target = DVector::from_column_slice(&[2.0]);
        let updated = enkf_update(&ensemble, &outputs, &target, 0.5).unwrap();
        assert_abs_diff_eq!(updated[(0, 0)], 8.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(updated[(0, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(updated[(0, 2)], 10.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn update_is_invariant_under_column_reordering() {
        let mut rng = substream(11, purpose::TELL, 0, 0);
        let dim = 3;
        let obs = 2;
        let members = 5;
        let ensemble = DMatrix::from_fn(dim, members, |_, _| rng.random_range(-1.0..1.0));
        let outputs = DMatrix::from_fn(obs, members, |_, _| rng.random_range(-1.0..1.0));
        let target = DVector::from_fn(obs, |_, _| rng.random_range(-1.0..1.0));
        let updated = enkf_update(&ensemble, &outputs, &target, 0.3).unwrap();

        let perm = [3usize, 0, 4, 1, 2];
        let ensemble_p = DMatrix::from_fn(dim, members, |r, c| ensemble[(r, perm[c])]);
        let outputs_p = DMatrix::from_fn(obs, members, |r, c| outputs[(r, perm[c])]);
        let updated_p = enkf_update(&ensemble_p, &outputs_p, &target, 0.3).unwrap();
        for c in 0..members {
            for r in 0..dim {
                assert_abs_diff_eq!(updated_p[(r, c)], updated[(r, perm[c])], epsilon = 1e-12);
            }
        }
    }

    fn population(fitnesses: &[f64]) -> EvaluatedPopulation {
        EvaluatedPopulation {
            entries: fitnesses
                .iter()
                .enumerate()
                .map(|(i, &f)| EvaluatedIndividual {
                    individual: Individual::new(
                        0,
                        i,
                        vec![NamedParam::new("x", vec![i as f64, 10.0 + i as f64])],
                    ),
                    fitness: FitnessVector::scalar(f),
                    weighted_fitness: f,
                    status: EvalStatus::Ok,
                    model_output: None,
                })
                .collect(),
        }
    }

    #[test]
    fn worst_becomes_copy_of_best_without_noise() {
        let pop = population(&[0.9, 0.1, 0.5, 0.6, 0.3, 0.8, 0.2, 0.7, 0.4, 0.05]);
        let mut rng = substream(12, purpose::TELL, 0, 0);
        let replaced = rank_replace(&pop, 0.1, 0.0, &mut rng).unwrap();
        // index 9 is worst (0.05); index 0 is best (0.9)
        assert_eq!(replaced[9], pop.entries[0].individual.flatten());
        for i in 0..9 {
            assert_eq!(replaced[i], pop.entries[i].individual.flatten());
        }
    }

    #[test]
    fn fraction_flooring_to_zero_is_a_noop() {
        let pop = population(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        let mut rng = substream(13, purpose::TELL, 0, 0);
        let replaced = rank_replace(&pop, 0.05, 1.0, &mut rng).unwrap();
        for (i, entry) in pop.entries.iter().enumerate() {
            assert_eq!(replaced[i], entry.individual.flatten());
        }
    }

    #[test]
    fn ninety_eight_members_at_ten_percent_replaces_nine() {
        let fitnesses: Vec<f64> = (0..98).map(|i| i as f64).collect();
        let pop = population(&fitnesses);
        let mut vectors: Vec<Vec<f64>> =
            pop.entries.iter().map(|e| e.individual.flatten()).collect();
        let ranked = rank_all(&pop);
        let mut rng = substream(14, purpose::TELL, 0, 0);
        let count = rank_replace_vectors(&mut vectors, &ranked, 0.1, 0.0, &mut rng).unwrap();
        assert_eq!(count, 9);
    }

    #[test]
    fn noiseless_replacement_never_lowers_minimum_fitness() {
        let pop = population(&[0.5, -0.2, 0.9, 0.1, -0.7, 0.3]);
        let mut rng = substream(15, purpose::TELL, 0, 0);
        let replaced = rank_replace(&pop, 0.34, 0.0, &mut rng).unwrap();
        // fitness of a replaced vector equals its donor's fitness
        let fitness_of = |v: &Vec<f64>| {
            pop.entries
                .iter()
                .find(|e| &e.individual.flatten() == v)
                .map(|e| e.weighted_fitness)
                .unwrap()
        };
        let old_min =
            pop.entries.iter().map(|e| e.weighted_fitness).fold(f64::INFINITY, f64::min);
        let new_min = replaced.iter().map(fitness_of).fold(f64::INFINITY, f64::min);
        assert!(new_min >= old_min);
    }

    #[test]
    fn invalid_fraction_is_config_error() {
        let pop = population(&[0.1, 0.2]);
        let mut rng = substream(16, purpose::TELL, 0, 0);
        assert!(rank_replace(&pop, 0.0, 0.0, &mut rng).is_err());
        assert!(rank_replace(&pop, 0.6, 0.0, &mut rng).is_err());
    }
}
