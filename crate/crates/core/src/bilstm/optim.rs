use serde::{Deserialize, Serialize};

use super::model::Params;
use super::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Stochastic gradient descent with momentum.
    Sgdm,
    #[serde(alias = "rmsprop")]
    RmsProp,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgdm" => Ok(OptimizerKind::Sgdm),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer {other:?} (expected sgdm, rmsprop or adam)")),
        }
    }
}

/// Per-parameter optimizer state.
///
/// * SGDM: `v ← μv − ηg`, `θ ← θ + v`
/// * RMSprop: `s ← ρs + (1−ρ)g²`, `θ ← θ − ηg / (√s + ε)`
/// * Adam: first/second moments with bias correction,
///   `θ ← θ − η m̂ / (√v̂ + ε)`
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    momentum: f64,
    grad_decay: f64,
    squared_grad_decay: f64,
    epsilon: f64,
    clip_norm: Option<f64>,
    steps: u64,
    first: Params,
    second: Params,
}

impl Optimizer {
    pub fn new(config: &TrainConfig, params: &Params) -> Self {
        Self {
            kind: config.optimizer,
            learning_rate: config.learning_rate,
            momentum: config.momentum,
            grad_decay: config.grad_decay,
            squared_grad_decay: config.squared_grad_decay,
            epsilon: config.epsilon,
            clip_norm: config.clip_norm,
            steps: 0,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        self.steps += 1;
        let clip = match self.clip_norm {
            Some(max) => {
                let norm = grads.l2_norm();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let lr = self.learning_rate;
        let eps = self.epsilon;
        let t = self.steps as i32;
        let (b1, b2) = (self.grad_decay, self.squared_grad_decay);
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);

        let params_t = params.tensors_mut();
        let grads_t = grads.tensors();
        let first_t = self.first.tensors_mut();
        let second_t = self.second.tensors_mut();
        for (((p, g), m), s) in params_t
            .into_iter()
            .zip(grads_t)
            .zip(first_t)
            .zip(second_t)
        {
            let (p, g, m, s) = (p.1, g.1, m.1, s.1);
            match self.kind {
                OptimizerKind::Sgdm => {
                    for k in 0..p.len() {
                        m[k] = self.momentum * m[k] - lr * g[k] * clip;
                        p[k] += m[k];
                    }
                }
                OptimizerKind::RmsProp => {
                    let rho = self.squared_grad_decay;
                    for k in 0..p.len() {
                        let gk = g[k] * clip;
                        s[k] = rho * s[k] + (1.0 - rho) * gk * gk;
                        p[k] -= lr * gk / (s[k].sqrt() + eps);
                    }
                }
                OptimizerKind::Adam => {
                    for k in 0..p.len() {
                        let gk = g[k] * clip;
                        m[k] = b1 * m[k] + (1.0 - b1) * gk;
                        s[k] = b2 * s[k] + (1.0 - b2) * gk * gk;
                        let m_hat = m[k] / bias1;
                        let v_hat = s[k] / bias2;
                        p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
