//! The inner-loop contract: anything that can score an individual.

use rand::{Rng, RngCore};
use std::path::Path;
use std::time::Duration;

use crate::error::Result;
use crate::fitness::FitnessVector;
use crate::individual::{Bounds, Individual, ParamLayout};

/// Result of evaluating one individual.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fitness: FitnessVector,
    /// Model observations for observation-matching optimizers (one vector
    /// per individual, e.g. flattened class probabilities).
    pub model_output: Option<Vec<f64>>,
}

impl Evaluation {
    pub fn fitness_only(fitness: FitnessVector) -> Self {
        Evaluation { fitness, model_output: None }
    }
}

/// Per-task context handed to an evaluation.
pub struct EvalContext<'a> {
    pub rng: &'a mut dyn RngCore,
    /// Scratch directory, present only for subprocess-backed optimizees.
    pub work_dir: Option<&'a Path>,
    pub timeout: Duration,
}

/// The program under optimization. Implementations must be pure given
/// (parameters, rng stream) so they can be evaluated in parallel.
pub trait Optimizee: Send + Sync {
    /// Registry id, as referenced from run configs.
    fn id(&self) -> &str;

    /// Names and dimensions of the optimized parameters.
    fn layout(&self) -> ParamLayout;

    /// Box constraints applied before every evaluation.
    fn bounds(&self) -> Bounds;

    /// Fixed length of the fitness vector.
    fn fitness_len(&self) -> usize;

    /// Samples a fresh individual; default is uniform within bounds.
    fn create_individual(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let layout = self.layout();
        let (lower, upper) = self.bounds().flattened(&layout)?;
        Ok(lower
            .iter()
            .zip(&upper)
            .map(|(&l, &u)| if l < u { rng.random_range(l..=u) } else { l })
            .collect())
    }

    /// Runs the simulation and computes the fitness vector.
    fn evaluate(&self, individual: &Individual, ctx: &mut EvalContext<'_>) -> Result<Evaluation>;

    /// Target observations for observation-matching optimizers.
    fn observation_target(&self) -> Option<Vec<f64>> {
        None
    }

    /// Whether evaluation shells out to an external command (the runner
    /// provisions a work directory per task if so).
    fn is_external(&self) -> bool {
        false
    }
}
