//! Native desk-scale optimizees and fitness utilities.

pub mod accounting;
pub mod classifier;
pub mod functions;
pub mod mountain_car;
pub mod network;
pub mod trace;

pub use accounting::{
    colony_fitness, layered_rate_fitness, two_pop_rate_fitness, ColonyCounts, ColonyEventLog,
};
pub use classifier::{mse_fitness, softmax, ClassifierOptimizee, ClassifierParams};
pub use functions::{analytic_fitness, rastrigin, rosenbrock, sphere, AnalyticOptimizee, AnalyticParams};
pub use mountain_car::{MountainCarOptimizee, MountainCarParams};
pub use network::{
    fc_matrix, fc_sc_fitness, load_sc_csv, pearson, simulate_network, FcMatchOptimizee,
    FcMatchParams, FcMode, NetworkDynamics,
};
pub use trace::{spike_rate, stacked_trace_fitness, trace_fitness, TraceOptimizee, TraceParams};
