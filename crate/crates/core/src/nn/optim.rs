use super::network::{Gradients, Network};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self { learning_rate, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adaptive-moment optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Gradients,
    pub second_moment: Gradients,
}

impl Adam {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<(), NnError> {
        self.step_masked(net, grads, |_| true)
    }

    /// Updates only layers for which `trainable(layer_index)` holds; other
    /// layers keep their parameters and moments untouched.
    pub fn step_masked(
        &mut self,
        net: &mut Network,
        grads: &Gradients,
        trainable: impl Fn(usize) -> bool,
    ) -> Result<(), NnError> {
        if !grads.matches(net) || !self.first_moment.matches(net) {
            return Err(NnError::Dimension("gradient shapes do not match parameters".into()));
        }
        grads.check_finite()?;
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        };
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            if !trainable(i) {
                continue;
            }
            let g = &grads.layers[i];
            let m = &mut self.first_moment.layers[i];
            let v = &mut self.second_moment.layers[i];
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        if !net.all_finite() {
            return Err(NnError::Numeric("optimizer produced non-finite parameters".into()));
        }
        Ok(())
    }
}

/// Adam for a single scalar parameter (the entropy temperature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAdam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: f64,
    pub v: f64,
}

impl ScalarAdam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, m: 0.0, v: 0.0 }
    }

    pub fn step(&mut self, param: &mut f64, grad: f64) {
        let c = self.config;
        self.step += 1;
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * grad;
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * grad * grad;
        let m_hat = self.m / (1.0 - c.beta1.powi(self.step as i32));
        let v_hat = self.v / (1.0 - c.beta2.powi(self.step as i32));
        *param -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
    }
}
