//! Outer-loop algorithms.
//!
//! Each optimizer follows an ask/tell protocol: `ask` emits the next
//! population from its state, `tell` folds the evaluated population back in.
//! Both are deterministic functions of (state, rng stream), which is what
//! makes checkpoint/resume reproduce uninterrupted runs exactly.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::{EvalStatus, FitnessVector};
use crate::individual::Individual;

pub mod annealing;
pub mod cross_entropy;
pub mod enkf;
pub mod evolution;
pub mod ga;
pub mod gradient;
pub mod grid;
pub mod mga;

pub use annealing::{SaOptimizer, SaParams, SaState};
pub use cross_entropy::{CeOptimizer, CeParams, CeState};
pub use enkf::{enkf_update, rank_replace, EnkfOptimizer, EnkfParams, EnkfState};
pub use evolution::{EsOptimizer, EsParams, EsState};
pub use ga::{GaOptimizer, GaParams, GaState};
pub use gradient::{estimate_gradient, GdOptimizer, GdParams, GdState};
pub use grid::{grid_search_plan, GridAxis, GridOptimizer, GridParams, GridState};
pub use mga::{expand_range_grid, mga_step, MgaOptimizer, MgaParams, MgaState};

/// One evaluated individual as seen by an optimizer.
#[derive(Debug, Clone)]
pub struct EvaluatedIndividual {
    pub individual: Individual,
    pub fitness: FitnessVector,
    pub weighted_fitness: f64,
    pub status: EvalStatus,
    pub model_output: Option<Vec<f64>>,
}

impl EvaluatedIndividual {
    pub fn is_ok(&self) -> bool {
        self.status.is_ok()
    }
}

/// A fully evaluated generation.
#[derive(Debug, Clone)]
pub struct EvaluatedPopulation {
    pub entries: Vec<EvaluatedIndividual>,
}

impl EvaluatedPopulation {
    pub fn ok_entries(&self) -> impl Iterator<Item = &EvaluatedIndividual> {
        self.entries.iter().filter(|e| e.is_ok())
    }

    /// Update steps need at least one successful entry.
    pub fn require_ok(&self) -> Result<()> {
        if self.ok_entries().next().is_none() {
            Err(Error::step("no successful evaluations in population"))
        } else {
            Ok(())
        }
    }

    /// Indices of OK entries sorted best-first by weighted fitness; ties
    /// broken by lower individual index.
    pub fn ranked_ok_indices(&self) -> Vec<usize> {
        let mut indices: Vec<usize> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_ok())
            .map(|(i, _)| i)
            .collect();
        indices.sort_by(|&a, &b| {
            self.entries[b]
                .weighted_fitness
                .partial_cmp(&self.entries[a].weighted_fitness)
                .expect("ok entries are finite")
                .then_with(|| a.cmp(&b))
        });
        indices
    }
}

/// Serializable snapshot of any optimizer. Snapshots round-trip losslessly:
/// restoring one reproduces the optimizer's future stream of populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerState {
    Ga(GaState),
    Enkf(EnkfState),
    Gd(GdState),
    Mga(MgaState),
    Ce(CeState),
    Sa(SaState),
    Grid(GridState),
    Es(EsState),
}

/// Initialization inputs threaded from the optimizee.
pub struct InitArgs<'a> {
    /// Draws one fresh individual (flattened), in bound space.
    pub sampler: &'a mut dyn FnMut() -> Result<Vec<f64>>,
    /// Target observations, required by observation-matching optimizers.
    pub observation_target: Option<Vec<f64>>,
}

/// Outer-loop algorithm producing populations of flattened parameter vectors.
pub trait Optimizer: Send {
    fn id(&self) -> &'static str;

    /// Seeds the initial state. Not called when restoring from a snapshot.
    fn initialize(&mut self, init: &mut InitArgs<'_>) -> Result<()>;

    /// Emits the next population to evaluate. Must be a deterministic
    /// function of (checkpointed state, rng stream) so a resumed run asks
    /// the same population again.
    fn ask(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>>;

    /// Consumes the evaluated population and advances the state.
    fn tell(&mut self, population: &EvaluatedPopulation, rng: &mut dyn RngCore) -> Result<()>;

    /// Optimizer-declared convergence; the generation loop stops when true.
    fn converged(&self) -> bool {
        false
    }

    fn snapshot(&self) -> OptimizerState;

    fn restore(&mut self, state: OptimizerState) -> Result<()>;
}

pub(crate) fn wrong_state(expected: &str) -> Error {
    Error::Checkpoint(format!("snapshot does not match optimizer kind {expected}"))
}
