//! Classical outer loop for the variational solvers, backed by argmin.

use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason, TerminationStatus};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::neldermead::NelderMead;
use argmin::solver::quasinewton::LBFGS;
use serde::{Deserialize, Serialize};

use crate::ansatz::random_angles;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    /// Derivative-free simplex search.
    NelderMead {
        #[serde(default = "default_iters")]
        max_iters: u64,
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "default_step")]
        initial_step: f64,
    },
    /// Quasi-Newton descent on parameter-shift gradients.
    Lbfgs {
        #[serde(default = "default_iters")]
        max_iters: u64,
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
}

fn default_iters() -> u64 {
    2000
}
fn default_restarts() -> usize {
    3
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_step() -> f64 {
    0.5
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec::NelderMead {
            max_iters: default_iters(),
            restarts: default_restarts(),
            tolerance: default_tolerance(),
            initial_step: default_step(),
        }
    }
}

impl OptimizerSpec {
    pub fn lbfgs() -> Self {
        OptimizerSpec::Lbfgs {
            max_iters: default_iters(),
            restarts: default_restarts(),
            tolerance: default_tolerance(),
        }
    }

    fn restarts(&self) -> usize {
        match self {
            OptimizerSpec::NelderMead { restarts, .. } | OptimizerSpec::Lbfgs { restarts, .. } => {
                (*restarts).max(1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub params: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
    pub converged: bool,
    /// One entry per restart that ended in a solver error.
    pub failures: Vec<String>,
}

struct Problem<'a, F, G> {
    cost: &'a F,
    grad: &'a G,
}

impl<F, G> CostFunction for Problem<'_, F, G>
where
    F: Fn(&[f64]) -> f64,
{
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.cost)(p))
    }
}

impl<F, G> Gradient for Problem<'_, F, G>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, p: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok((self.grad)(p))
    }
}

/// Minimizes `cost` from seeded random starting points in `[−π, π]`; the
/// first start is the zero vector. `grad` is only consulted by L-BFGS.
pub fn minimize<F, G>(
    n_params: usize,
    cost: F,
    grad: G,
    spec: &OptimizerSpec,
    seed: u64,
) -> Result<OptimizationReport>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if n_params == 0 {
        return Ok(OptimizationReport {
            params: vec![],
            value: cost(&[]),
            iterations: 0,
            converged: true,
            failures: vec![],
        });
    }
    let mut best: Option<OptimizationReport> = None;
    let mut failures = Vec::new();
    for r in 0..spec.restarts() {
        let x0 = if r == 0 {
            vec![0.0; n_params]
        } else {
            random_angles(n_params, std::f64::consts::PI, seed.wrapping_add(r as u64))
        };
        let problem = Problem { cost: &cost, grad: &grad };
        let outcome = match spec {
            OptimizerSpec::NelderMead { max_iters, tolerance, initial_step, .. } => {
                let mut simplex = vec![x0.clone()];
                for k in 0..n_params {
                    let mut v = x0.clone();
                    v[k] += initial_step;
                    simplex.push(v);
                }
                NelderMead::new(simplex)
                    .with_sd_tolerance(*tolerance)
                    .and_then(|s| {
                        Executor::new(problem, s).configure(|st| st.max_iters(*max_iters)).run()
                    })
                    .map(|res| summarize(res.state()))
            }
            OptimizerSpec::Lbfgs { max_iters, tolerance, .. } => {
                LBFGS::new(MoreThuenteLineSearch::new(), 10)
                    .with_tolerance_grad(*tolerance)
                    .and_then(|s| s.with_tolerance_cost(tolerance * 1e-3))
                    .and_then(|s| {
                        Executor::new(problem, s)
                            .configure(|st| st.param(x0.clone()).max_iters(*max_iters))
                            .run()
                    })
                    .map(|res| summarize(res.state()))
            }
        };
        match outcome {
            Ok(Some(rep)) => {
                if best.as_ref().is_none_or(|b| rep.value < b.value) {
                    best = Some(rep);
                }
            }
            Ok(None) => failures.push(format!("restart {r}: no parameters returned")),
            Err(e) => failures.push(format!("restart {r}: {e}")),
        }
    }
    let mut best = best.ok_or_else(|| Error::Optimization(failures.join("; ")))?;
    best.failures = failures;
    Ok(best)
}

fn summarize<S>(state: &S) -> Option<OptimizationReport>
where
    S: State<Param = Vec<f64>, Float = f64>,
{
    let params = state.get_best_param()?.clone();
    Some(OptimizationReport {
        params,
        value: state.get_best_cost(),
        iterations: state.get_iter(),
        converged: matches!(state.get_termination_status(), TerminationStatus::Terminated(TerminationReason::SolverConverged | TerminationReason::TargetCostReached)),
        failures: vec![],
    })
}
