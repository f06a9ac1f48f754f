//! Bias-corrected Adam over a flat list of parameter tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter. Moments are
/// zero-initialized and stay shape-aligned with the parameter list.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        Self {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update, in place. `params` and `grads` must line up with the
/// state's moment tensors element for element.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam_step: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        if p.shape() != grads[i].shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Shape(format!(
                "adam_step: parameter {i} shape {:?} vs grad {:?} vs moment {:?}",
                p.shape(),
                grads[i].shape(),
                state.m[i].shape()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.data_mut();
        let gd = g.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        for k in 0..pd.len() {
            md[k] = cfg.beta1 * md[k] + (1.0 - cfg.beta1) * gd[k];
            vd[k] = cfg.beta2 * vd[k] + (1.0 - cfg.beta2) * gd[k] * gd[k];
            let m_hat = md[k] / bc1;
            let v_hat = vd[k] / bc2;
            pd[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensors(vals: &[&[f64]]) -> Vec<Tensor> {
        vals.iter()
            .map(|v| Tensor::from_vec(&[v.len()], v.to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = tensors(&[&[1.0, -2.0, 3.0]]);
        let grads = tensors(&[&[0.0, 0.0, 0.0]]);
        let mut state = AdamState::new(&params.iter().collect::<Vec<_>>());
        let before = params[0].clone();
        let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
        adam_step(&mut refs, &grads.iter().collect::<Vec<_>>(), &mut state, &AdamConfig::default())
            .unwrap();
        assert_eq!(params[0], before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_against_gradient_sign() {
        let cfg = AdamConfig::default();
        let mut params = tensors(&[&[0.0, 0.0]]);
        let grads = tensors(&[&[3.0, -0.5]]);
        let mut state = AdamState::new(&params.iter().collect::<Vec<_>>());
        let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
        adam_step(&mut refs, &grads.iter().collect::<Vec<_>>(), &mut state, &cfg).unwrap();
        // at t=1 bias correction makes m_hat = g, v_hat = g^2, so the update
        // is -lr * g / (|g| + eps) = -lr * sign(g) up to epsilon
        for (p, g) in params[0].data().iter().zip([3.0, -0.5]) {
            let expected = -cfg.lr * g.signum();
            assert!((p - expected).abs() < 1e-6, "{p} vs {expected}");
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = tensors(&[&[0.0, 0.0]]);
        let grads = tensors(&[&[1.0]]);
        let mut state = AdamState::new(&params.iter().collect::<Vec<_>>());
        let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
        let err = adam_step(&mut refs, &grads.iter().collect::<Vec<_>>(), &mut state, &AdamConfig::default());
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    /// Independent scalar recurrence used as the oracle for the quadratic
    /// convergence check.
    fn scalar_adam(c: f64, steps: usize, cfg: &AdamConfig) -> f64 {
        let (mut w, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = 2.0 * (w - c);
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let m_hat = m / (1.0 - cfg.beta1.powi(t as i32));
            let v_hat = v / (1.0 - cfg.beta2.powi(t as i32));
            w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        w
    }

    #[test]
    fn quadratic_converges_and_matches_scalar_recurrence() {
        let cfg = AdamConfig { lr: 0.05, ..AdamConfig::default() };
        let target = [1.0, -2.0];
        let mut params = tensors(&[&[0.0, 0.0]]);
        let mut state = AdamState::new(&params.iter().collect::<Vec<_>>());
        for _ in 0..200 {
            let g: Vec<f64> = params[0]
                .data()
                .iter()
                .zip(target)
                .map(|(w, c)| 2.0 * (w - c))
                .collect();
            let grads = tensors(&[&g]);
            let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
            adam_step(&mut refs, &grads.iter().collect::<Vec<_>>(), &mut state, &cfg).unwrap();
        }
        let dist = params[0]
            .data()
            .iter()
            .zip(target)
            .map(|(w, c)| (w - c) * (w - c))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-2, "distance {dist}");
        // per-coordinate agreement with the independent recurrence
        for (k, c) in target.iter().enumerate() {
            let oracle = scalar_adam(*c, 200, &cfg);
            assert!(
                (params[0].data()[k] - oracle).abs() < 1e-12,
                "coordinate {k}: {} vs oracle {oracle}",
                params[0].data()[k]
            );
        }
    }
}
