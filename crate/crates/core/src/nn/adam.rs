use super::model::{Gradients, SiameseModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments over the flattened parameter vector. Learning-rate decay
/// is zero: the step size stays constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(param_count: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    /// Applies one bias-corrected update to the flat parameter vector. A
    /// non-finite gradient leaves both the parameters and the state
    /// untouched.
    pub fn step_flat<'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut f64>,
        grads: &[f64],
    ) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::Shape {
                context: "adam gradient length",
                expected: self.m.len(),
                actual: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::PoisonedState(format!("non-finite gradient at parameter {i}")));
        }
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powf(self.t as f64);
        let bc2 = 1.0 - beta2.powf(self.t as f64);
        let mut n = 0;
        for (((p, &g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            n += 1;
        }
        debug_assert_eq!(n, grads.len());
        Ok(())
    }

    /// The only place model parameters change during training.
    pub fn step(&mut self, model: &mut SiameseModel, grads: &Gradients) -> Result<()> {
        let g: Vec<f64> = grads.values().copied().collect();
        if g.len() != model.param_count() {
            return Err(Error::Shape {
                context: "gradient container",
                expected: model.param_count(),
                actual: g.len(),
            });
        }
        self.step_flat(model.params_mut(), &g)
    }
}
