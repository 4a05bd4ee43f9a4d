//! Adam with bias correction:
//!
//! ```text
//! m <- b1 m + (1 - b1) g
//! v <- b2 v + (1 - b2) g^2
//! p <- p - lr * m_hat / (sqrt(v_hat) + eps),  m_hat = m / (1 - b1^t),  v_hat = v / (1 - b2^t)
//! ```

use super::dense::Parameters;
use crate::error::{check_dims, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.eps > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid Adam settings {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            config,
        }
    }
}

/// One Adam update of `param` in place. `name` labels the tensor in errors.
pub fn adam_step(name: &str, param: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
    check_dims(&format!("adam_step({name}) grad"), grad.len(), param.len())?;
    check_dims(&format!("adam_step({name}) state"), state.m.len(), param.len())?;
    state.config.validate()?;
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::numeric(format!(
            "non-finite gradient for tensor '{name}' at index {i}"
        )));
    }

    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    for (((p, &g), m), v) in param
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// One [`AdamState`] per named tensor of a model.
#[derive(Clone, Debug)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new<M: Parameters>(model: &M, config: AdamConfig) -> Self {
        let states = model
            .tensors()
            .iter()
            .map(|t| AdamState::new(t.data.len(), config))
            .collect();
        Self { states }
    }

    pub fn step<M: Parameters>(&mut self, model: &mut M, grads: &M) -> Result<()> {
        let grad_tensors = grads.tensors();
        let mut params = model.tensors_mut();
        check_dims("optimizer tensor count", grad_tensors.len(), params.len())?;
        check_dims("optimizer state count", self.states.len(), params.len())?;
        for (((name, p), g), state) in params
            .iter_mut()
            .map(|(n, p)| (n.as_str(), p))
            .zip(grad_tensors.iter())
            .zip(self.states.iter_mut())
        {
            adam_step(name, p, g.data, state)?;
        }
        Ok(())
    }

    pub fn states(&self) -> &[AdamState] {
        &self.states
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_param() {
        let mut p = vec![0.3, -1.2];
        let mut s = AdamState::new(2, AdamConfig::new(0.01));
        adam_step("p", &mut p, &[0.0, 0.0], &mut s).unwrap();
        assert_eq!(p, vec![0.3, -1.2]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // t=1: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1 => step = 0.01 / (1 + 1e-8)
        let mut p = vec![0.0];
        let mut s = AdamState::new(1, AdamConfig::new(0.01));
        adam_step("p", &mut p, &[1.0], &mut s).unwrap();
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15, "{}", p[0]);
    }

    #[test]
    fn constant_gradient_decreases_each_step() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1, AdamConfig::new(0.01));
        let mut prev = p[0];
        for _ in 0..2 {
            adam_step("p", &mut p, &[1.0], &mut s).unwrap();
            assert!(p[0] < prev);
            prev = p[0];
        }
        // hand evaluation of step 2: m = 0.19, v = 0.001999; m_hat = 1, v_hat = 1
        assert!((p[0] + 2.0 * 0.01 / (1.0 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(2, AdamConfig::default());
        assert!(matches!(
            adam_step("w", &mut p, &[1.0], &mut s),
            Err(Error::Contract(_))
        ));
        let err = adam_step("w", &mut p, &[1.0, f64::NAN], &mut s).unwrap_err();
        assert!(err.to_string().contains("'w'"));
        assert_eq!(s.t, 0);
    }
}
