use super::OptimizerConfig;
use crate::error::{Error, Result};

/// Adam moments plus the bookkeeping the schedule needs.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub plateau_events: u32,
    pub best_loss: f64,
    pub best_params: Vec<f64>,
    pub epochs_since_improvement: usize,
}

impl OptimState {
    pub fn new(params: &[f64], initial_loss: f64, config: &OptimizerConfig) -> Self {
        Self {
            first_moment: vec![0.0; params.len()],
            second_moment: vec![0.0; params.len()],
            step_count: 0,
            lr: config.lr,
            plateau_events: 0,
            best_loss: initial_loss,
            best_params: params.to_vec(),
            epochs_since_improvement: 0,
        }
    }
}

/// Rescales `gradient` in place to L2 norm at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_gradient(gradient: &mut [f64], max_norm: f64) -> f64 {
    let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        gradient.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// One clipped, bias-corrected Adam update at the state's current learning
/// rate. A non-finite gradient leaves everything untouched and is reported.
pub fn adam_step(
    params: &mut [f64],
    gradient: &[f64],
    state: &mut OptimState,
    config: &OptimizerConfig,
) -> Result<f64> {
    if params.len() != gradient.len() || params.len() != state.first_moment.len() {
        return Err(Error::invalid(
            "parameter, gradient and moment lengths differ",
        ));
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("non-finite gradient; step skipped"));
    }
    let mut g = gradient.to_vec();
    let raw_norm = clip_gradient(&mut g, config.grad_clip_norm);
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for i in 0..params.len() {
        state.first_moment[i] = config.beta1 * state.first_moment[i] + (1.0 - config.beta1) * g[i];
        state.second_moment[i] =
            config.beta2 * state.second_moment[i] + (1.0 - config.beta2) * g[i] * g[i];
        let m_hat = state.first_moment[i] / c1;
        let v_hat = state.second_moment[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(raw_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook Adam with norm clipping, written independently of `adam_step`.
    struct ReferenceAdam {
        lr: f64,
        m: f64,
        v: f64,
        t: i32,
    }

    impl ReferenceAdam {
        fn step(&mut self, x: f64, grad: f64) -> f64 {
            let g = if grad.abs() > 1.0 {
                grad.signum()
            } else {
                grad
            };
            self.t += 1;
            self.m = 0.9 * self.m + 0.1 * g;
            self.v = 0.999 * self.v + 0.001 * g * g;
            let mh = self.m / (1.0 - 0.9f64.powi(self.t));
            let vh = self.v / (1.0 - 0.999f64.powi(self.t));
            x - self.lr * mh / (vh.sqrt() + 1e-8)
        }
    }

    #[test]
    fn quadratic_matches_reference_step_for_step() {
        let config = OptimizerConfig {
            lr: 0.1,
            ..Default::default()
        };
        let mut x = vec![1.0];
        let mut state = OptimState::new(&x, 1.0, &config);
        let mut reference = ReferenceAdam {
            lr: 0.1,
            m: 0.0,
            v: 0.0,
            t: 0,
        };
        let mut rx = 1.0;
        let mut reached = false;
        for _ in 0..200 {
            let grad = [2.0 * x[0]];
            adam_step(&mut x, &grad, &mut state, &config).unwrap();
            rx = reference.step(rx, 2.0 * rx);
            assert!((x[0] - rx).abs() <= 1e-12);
            reached |= x[0].abs() <= 0.05;
        }
        assert!(reached);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let config = OptimizerConfig::default();
        let mut p = vec![0.5, -0.5];
        let mut state = OptimState::new(&p, 1.0, &config);
        state.first_moment = vec![0.2, 0.1];
        state.second_moment = vec![0.04, 0.01];
        state.step_count = 10;
        state.lr = 0.0;
        adam_step(&mut p, &[0.0, 0.0], &mut state, &config).unwrap();
        assert_eq!(p, vec![0.5, -0.5]);
        assert!(state.first_moment[0] < 0.2 && state.second_moment[0] < 0.04);
    }

    #[test]
    fn clipping_to_unit_norm() {
        let mut g = vec![6.0, 8.0];
        let before = clip_gradient(&mut g, 1.0);
        assert_eq!(before, 10.0);
        let after = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((after - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let config = OptimizerConfig::default();
        let mut p = vec![1.0];
        let mut state = OptimState::new(&p, 1.0, &config);
        assert!(adam_step(&mut p, &[f64::NAN], &mut state, &config).is_err());
        assert_eq!(p, vec![1.0]);
        assert_eq!(state.step_count, 0);
    }

    proptest! {
        #[test]
        fn clipped_norm_never_exceeds_one(g in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let mut g = g;
            clip_gradient(&mut g, 1.0);
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(n <= 1.0 + 1e-12);
        }
    }
}
