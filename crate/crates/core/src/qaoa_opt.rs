//! Classical outer loop: Adam descent on the QAOA energy and the multi-start
//! search that produces training labels.

use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamHyper};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::qsim::{ParamVector, QaoaCircuit, NUM_PARAMS};
use crate::seed::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Parent seed for random initializations.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 500,
            learning_rate: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Parameter("Adam betas must lie in [0, 1)".into()));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::Parameter("Adam eps must be positive".into()));
        }
        Ok(())
    }

    fn hyper(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    /// Energy at every iterate, starting with the initial point.
    pub energies: Vec<f64>,
    pub best_params: ParamVector,
    pub best_energy: f64,
}

/// Uniform draw of all six angles from `[-π, π)`.
pub fn random_init(seed: u64) -> ParamVector {
    let mut rng = rng_from_seed(seed);
    ParamVector::from([0.0; NUM_PARAMS].map(|_| rng.random_range(-PI..PI)))
}

/// Seed of the `index`-th start of a multi-start run.
pub fn start_seed(parent: u64, index: usize) -> u64 {
    derive_seed(parent, stream::START, index as u64)
}

/// Run `cfg.max_iters` Adam steps from `init`, returning the best iterate.
pub fn optimize(
    circuit: &QaoaCircuit,
    init: &ParamVector,
    cfg: &OptimizerConfig,
) -> Result<OptimizationTrace> {
    cfg.validate()?;
    if !init.is_finite() {
        return Err(Error::Parameter("initial parameters must be finite".into()));
    }
    let mut adam = Adam::new(cfg.hyper(), NUM_PARAMS);
    let mut theta = init.to_array();
    let mut energies = Vec::with_capacity(cfg.max_iters + 1);
    let mut best_energy = f64::INFINITY;
    let mut best_params = *init;

    for _ in 0..cfg.max_iters {
        let current = ParamVector::from(theta);
        let (energy, grad) = circuit.value_and_gradient(&current);
        if !energy.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Internal(format!(
                "non-finite energy or gradient at iterate {}",
                energies.len()
            )));
        }
        energies.push(energy);
        if energy < best_energy {
            best_energy = energy;
            best_params = current;
        }
        adam.update(&mut theta, &grad);
    }
    let last = ParamVector::from(theta);
    let energy = circuit.expectation(&last);
    if !energy.is_finite() {
        return Err(Error::Internal("non-finite final energy".into()));
    }
    energies.push(energy);
    if energy < best_energy {
        best_energy = energy;
        best_params = last;
    }

    Ok(OptimizationTrace {
        energies,
        best_params,
        best_energy,
    })
}

/// Optimize from `n_starts` random initializations and keep the lowest
/// `best_energy`, preferring the earliest start on ties.
pub fn multi_start_optimize(
    circuit: &QaoaCircuit,
    n_starts: usize,
    cfg: &OptimizerConfig,
) -> Result<OptimizationTrace> {
    if n_starts == 0 {
        return Err(Error::Parameter("n_starts must be at least 1".into()));
    }
    cfg.validate()?;
    let traces: Vec<OptimizationTrace> = (0..n_starts)
        .into_par_iter()
        .map(|s| optimize(circuit, &random_init(start_seed(cfg.seed, s)), cfg))
        .collect::<Result<_>>()?;
    let mut best: Option<OptimizationTrace> = None;
    for t in traces {
        if best.as_ref().is_none_or(|b| t.best_energy < b.best_energy) {
            best = Some(t);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Convenience wrapper building the circuit from a graph.
pub fn optimize_graph(
    g: &Graph,
    init: &ParamVector,
    cfg: &OptimizerConfig,
) -> Result<OptimizationTrace> {
    optimize(&QaoaCircuit::new(g)?, init, cfg)
}
