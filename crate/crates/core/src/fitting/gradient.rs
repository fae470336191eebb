use rayon::prelude::*;

use super::OptimizerConfig;

/// Central-difference gradient plus the coordinates whose probes failed.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub gradient: Vec<f64>,
    /// Coordinates where a probe was non-finite; their gradient is set to 0.
    pub flagged: Vec<usize>,
}

/// `(L(p + h e_i) - L(p - h e_i)) / 2h` with `h = max(rel |p_i|, abs)`.
/// Coordinates are probed in parallel; the result does not depend on the
/// evaluation order.
pub fn fd_gradient<F>(loss: &F, params: &[f64], config: &OptimizerConfig) -> FdGradient
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let results: Vec<Option<f64>> = (0..params.len())
        .into_par_iter()
        .map(|i| {
            let h = (config.fd_step_rel * params[i].abs()).max(config.fd_step_abs);
            let mut probe = params.to_vec();
            probe[i] = params[i] + h;
            let up = loss(&probe);
            probe[i] = params[i] - h;
            let down = loss(&probe);
            let g = (up - down) / (2.0 * h);
            g.is_finite().then_some(g)
        })
        .collect();
    let flagged = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_none().then_some(i))
        .collect();
    FdGradient {
        gradient: results.into_iter().map(|r| r.unwrap_or(0.0)).collect(),
        flagged,
    }
}
