//! Epoch loop shared by every fitting stage: finite-difference gradient on the
//! training objective, clipped Adam step, projection onto the feasible set,
//! then validation drives plateau learning-rate cuts, early stopping and
//! best-iterate selection.

use serde::Serialize;

use super::{adam_step, fd_gradient, OptimState, OptimizerConfig};
use crate::error::{Error, Result};
use crate::losses::LossReport;

/// Divergence threshold relative to the initial validation loss.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub total: f64,
    pub report: LossReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub stage: String,
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub report: LossReport,
}

#[derive(Debug, Clone)]
pub struct Minimized {
    pub params: Vec<f64>,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub best_report: LossReport,
    pub history: Vec<EpochRecord>,
    /// Gradient coordinates zeroed because a probe was non-finite, summed over epochs.
    pub flagged_coordinates: usize,
    pub skipped_steps: usize,
}

pub fn minimize<T, V, P>(
    stage: &str,
    train: &T,
    validate: &V,
    project: &P,
    init: Vec<f64>,
    config: &OptimizerConfig,
) -> Result<Minimized>
where
    T: Fn(&[f64]) -> f64 + Sync,
    V: Fn(&[f64]) -> Evaluation,
    P: Fn(&mut [f64]),
{
    minimize_local(stage, &|_: &[f64]| train, validate, project, init, config)
}

/// Like [`minimize`], with the training objective rebuilt around each
/// epoch's parameters by `local`. The returned evaluator only needs to be
/// accurate for probes near that point.
pub fn minimize_local<L, G, V, P>(
    stage: &str,
    local: &L,
    validate: &V,
    project: &P,
    init: Vec<f64>,
    config: &OptimizerConfig,
) -> Result<Minimized>
where
    L: Fn(&[f64]) -> G,
    G: Fn(&[f64]) -> f64 + Sync,
    V: Fn(&[f64]) -> Evaluation,
    P: Fn(&mut [f64]),
{
    config.validate()?;
    let mut params = init;
    project(&mut params);
    let initial = validate(&params);
    if !initial.total.is_finite() {
        return Err(Error::invalid(format!(
            "{stage}: initial loss is not finite"
        )));
    }
    let mut state = OptimState::new(&params, initial.total, config);
    let mut out = Minimized {
        params: params.clone(),
        initial_loss: initial.total,
        best_loss: initial.total,
        best_report: initial.report.clone(),
        history: Vec::new(),
        flagged_coordinates: 0,
        skipped_steps: 0,
    };
    if initial.total <= config.target_loss || params.is_empty() {
        return Ok(out);
    }

    let mut train = local(&params);
    for epoch in 1..=config.max_epochs {
        let grad = fd_gradient(&train, &params, config);
        out.flagged_coordinates += grad.flagged.len();
        if adam_step(&mut params, &grad.gradient, &mut state, config).is_err() {
            out.skipped_steps += 1;
        }
        project(&mut params);
        train = local(&params);
        let eval = validate(&params);
        if !eval.total.is_finite() || eval.total > DIVERGENCE_FACTOR * initial.total {
            return Err(Error::Divergence {
                stage: stage.to_string(),
                loss: eval.total,
                initial: initial.total,
            });
        }
        out.history.push(EpochRecord {
            stage: stage.to_string(),
            epoch,
            lr: state.lr,
            train_loss: train(&params),
            validation_loss: eval.total,
            report: eval.report.clone(),
        });

        if eval.total < state.best_loss {
            state.best_loss = eval.total;
            state.best_params = params.clone();
            state.epochs_since_improvement = 0;
            out.best_report = eval.report;
        } else {
            state.epochs_since_improvement += 1;
            if state
                .epochs_since_improvement
                .is_multiple_of(config.plateau_patience)
            {
                state.plateau_events += 1;
                state.lr = config.lr_after(state.plateau_events);
            }
            if state.epochs_since_improvement >= config.early_stop_patience {
                break;
            }
        }
        if state.best_loss <= config.target_loss {
            break;
        }
    }

    out.params = state.best_params;
    out.best_loss = state.best_loss;
    Ok(out)
}
