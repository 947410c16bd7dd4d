use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{CellParams, StepCache};
use super::ModelError;
use crate::features::FeatureSequence;

/// Shape and regularisation of a sequence classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Feature dimension D (the input size I).
    pub input_size: usize,
    /// Hidden units per direction H.
    pub hidden_size: usize,
    pub class_count: usize,
    /// When false only the forward cell is used and `V = h_m`.
    pub bidirectional: bool,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn new(input_size: usize, hidden_size: usize, class_count: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            class_count,
            bidirectional: true,
            dropout: 0.0,
        }
    }

    pub fn unidirectional(mut self) -> Self {
        self.bidirectional = false;
        self
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    /// Width of the combined state fed to the dense head.
    pub fn state_width(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_size
        } else {
            self.hidden_size
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut problems = Vec::new();
        if self.input_size == 0 {
            problems.push("input_size must be at least 1".to_string());
        }
        if self.hidden_size == 0 {
            problems.push("hidden_size must be at least 1".to_string());
        }
        if self.class_count < 2 {
            problems.push("class_count must be at least 2".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(problems))
        }
    }
}

/// All learnable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub forward: CellParams,
    pub backward: Option<CellParams>,
    /// `C × width` where width is `2H` (or `H` unidirectional).
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, h, c) = (config.input_size, config.hidden_size, config.class_count);
        Self {
            forward: CellParams::zeros(d, h),
            backward: config.bidirectional.then(|| CellParams::zeros(d, h)),
            dense_w: Array2::zeros((c, config.state_width())),
            dense_b: Array1::zeros(c),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let cell = |p: &CellParams| CellParams {
            w: Array2::zeros(p.w.raw_dim()),
            u: Array2::zeros(p.u.raw_dim()),
            b: Array1::zeros(p.b.raw_dim()),
        };
        Self {
            forward: cell(&self.forward),
            backward: self.backward.as_ref().map(cell),
            dense_w: Array2::zeros(self.dense_w.raw_dim()),
            dense_b: Array1::zeros(self.dense_b.raw_dim()),
        }
    }

    /// Named flat views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        fn flat(a: Option<&[f64]>) -> &[f64] {
            a.expect("parameters are kept in standard layout")
        }
        let mut out = vec![
            ("forward.w", flat(self.forward.w.as_slice())),
            ("forward.u", flat(self.forward.u.as_slice())),
            ("forward.b", flat(self.forward.b.as_slice())),
        ];
        if let Some(b) = &self.backward {
            out.push(("backward.w", flat(b.w.as_slice())));
            out.push(("backward.u", flat(b.u.as_slice())));
            out.push(("backward.b", flat(b.b.as_slice())));
        }
        out.push(("dense.w", flat(self.dense_w.as_slice())));
        out.push(("dense.b", flat(self.dense_b.as_slice())));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        fn flat(a: Option<&mut [f64]>) -> &mut [f64] {
            a.expect("parameters are kept in standard layout")
        }
        let mut out = vec![
            ("forward.w", flat(self.forward.w.as_slice_mut())),
            ("forward.u", flat(self.forward.u.as_slice_mut())),
            ("forward.b", flat(self.forward.b.as_slice_mut())),
        ];
        if let Some(b) = &mut self.backward {
            out.push(("backward.w", flat(b.w.as_slice_mut())));
            out.push(("backward.u", flat(b.u.as_slice_mut())));
            out.push(("backward.b", flat(b.b.as_slice_mut())));
        }
        out.push(("dense.w", flat(self.dense_w.as_slice_mut())));
        out.push(("dense.b", flat(self.dense_b.as_slice_mut())));
        out
    }

    pub fn element_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }
}

/// Hidden states of both directions for one sequence.
#[derive(Debug, Clone)]
pub struct SequenceStates {
    /// Forward states; column t is `h_t` after consuming columns `0..=t`.
    pub h: Array2<f64>,
    /// Backward states; column t is `g_t` after consuming columns `m-1..=t`.
    pub g: Option<Array2<f64>>,
    pub c_forward: Array2<f64>,
    pub c_backward: Option<Array2<f64>>,
    /// Combined state `[h_m ; g_1]` before dropout.
    pub v: Array1<f64>,
}

/// Everything produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub probs: Array1<f64>,
    pub logits: Array1<f64>,
    pub states: SequenceStates,
    /// Inverted-dropout multipliers applied to `V` (0 or `1/(1-p)`).
    pub dropout_mask: Option<Array1<f64>>,
    forward_trace: Vec<StepCache>,
    backward_trace: Option<Vec<StepCache>>,
}

impl ForwardPass {
    /// `V` after dropout, as seen by the dense head.
    pub fn dense_input(&self) -> Array1<f64> {
        match &self.dropout_mask {
            Some(mask) => &self.states.v * mask,
            None => self.states.v.clone(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// `-log p[label]` from logits via log-sum-exp.
pub fn cross_entropy_from_logits(logits: &Array1<f64>, label: usize) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// `-log p[label]` for an already normalised distribution, clamped at 1e-300.
pub fn cross_entropy(probs: &Array1<f64>, label: usize) -> f64 {
    -probs[label].max(1e-300).ln()
}

/// A single-layer (Bi)LSTM sequence-to-one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmModel {
    pub config: ModelConfig,
    pub params: Params,
}

impl BiLstmModel {
    /// Seeded Glorot-uniform initialisation.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h, c) = (config.input_size, config.hidden_size, config.class_count);
        let forward = CellParams::init(d, h, &mut rng);
        let backward = config
            .bidirectional
            .then(|| CellParams::init(d, h, &mut rng));
        let width = config.state_width();
        let lim = (6.0 / (width + c) as f64).sqrt();
        let dense_w = Array2::from_shape_simple_fn((c, width), || rng.random_range(-lim..lim));
        Ok(Self {
            config,
            params: Params {
                forward,
                backward,
                dense_w,
                dense_b: Array1::zeros(c),
            },
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self {
            config,
            params: Params::zeros(&config),
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.element_count()
    }

    fn check_input(&self, seq: &FeatureSequence) -> Result<(), ModelError> {
        if seq.dim() != self.config.input_size {
            return Err(ModelError::ShapeMismatch {
                expected: self.config.input_size,
                found: seq.dim(),
            });
        }
        if seq.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        Ok(())
    }

    /// Forward pass. Dropout is drawn from `rng` only when `training` is set
    /// and the dropout rate is positive.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        seq: &FeatureSequence,
        training: bool,
        rng: &mut R,
    ) -> Result<ForwardPass, ModelError> {
        self.check_input(seq)?;
        let xs = seq.features.view();
        let m = seq.len();
        let hidden = self.config.hidden_size;

        let forward_trace = self.params.forward.run(xs, 0..m)?;
        let backward_trace = match &self.params.backward {
            Some(cell) => Some(cell.run(xs, (0..m).rev())?),
            None => None,
        };

        let mut h = Array2::zeros((hidden, m));
        let mut c_forward = Array2::zeros((hidden, m));
        for (t, step) in forward_trace.iter().enumerate() {
            h.column_mut(t).assign(&step.h);
            c_forward.column_mut(t).assign(&step.c);
        }
        let (g, c_backward) = match &backward_trace {
            Some(trace) => {
                let mut g = Array2::zeros((hidden, m));
                let mut cb = Array2::zeros((hidden, m));
                for (k, step) in trace.iter().enumerate() {
                    let t = m - 1 - k;
                    g.column_mut(t).assign(&step.h);
                    cb.column_mut(t).assign(&step.c);
                }
                (Some(g), Some(cb))
            }
            None => (None, None),
        };

        let mut v = Array1::zeros(self.config.state_width());
        v.slice_mut(s![0..hidden]).assign(&h.column(m - 1));
        if let Some(g) = &g {
            v.slice_mut(s![hidden..]).assign(&g.column(0));
        }

        let p = self.config.dropout;
        let dropout_mask = (training && p > 0.0).then(|| {
            let keep = 1.0 / (1.0 - p);
            Array1::from_shape_simple_fn(v.len(), || if rng.random::<f64>() < p { 0.0 } else { keep })
        });
        let dense_in = match &dropout_mask {
            Some(mask) => &v * mask,
            None => v.clone(),
        };
        let logits = self.params.dense_w.dot(&dense_in) + &self.params.dense_b;
        let probs = softmax(&logits);

        Ok(ForwardPass {
            probs,
            logits,
            states: SequenceStates {
                h,
                g,
                c_forward,
                c_backward,
                v,
            },
            dropout_mask,
            forward_trace,
            backward_trace,
        })
    }

    /// Class probabilities with dropout off.
    pub fn predict_proba(&self, seq: &FeatureSequence) -> Result<Array1<f64>, ModelError> {
        // The rng is never drawn from when training is off.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(seq, false, &mut rng)?.probs)
    }

    pub fn classify(&self, seq: &FeatureSequence) -> Result<usize, ModelError> {
        Ok(argmax(&self.predict_proba(seq)?))
    }

    /// Inference-mode loss for `label`.
    pub fn loss(&self, seq: &FeatureSequence, label: usize) -> Result<f64, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pass = self.forward(seq, false, &mut rng)?;
        Ok(cross_entropy_from_logits(&pass.logits, label))
    }

    /// Full BPTT gradient of the cross-entropy at the final combined state,
    /// reusing the activations and dropout mask of `pass`.
    pub fn gradients(
        &self,
        seq: &FeatureSequence,
        label: usize,
        pass: &ForwardPass,
    ) -> Result<(f64, Params), ModelError> {
        self.check_input(seq)?;
        if label >= self.config.class_count {
            return Err(ModelError::LabelOutOfRange {
                label,
                class_count: self.config.class_count,
            });
        }
        let hidden = self.config.hidden_size;
        let m = seq.len();
        let xs = seq.features.view();
        let mut grads = self.params.zeros_like();

        let loss = cross_entropy_from_logits(&pass.logits, label);
        let mut d_logits = pass.probs.clone();
        d_logits[label] -= 1.0;

        let dense_in = pass.dense_input();
        grads.dense_w =
            Array2::from_shape_fn(grads.dense_w.raw_dim(), |(c, j)| d_logits[c] * dense_in[j]);
        grads.dense_b = d_logits.clone();
        let mut d_v = self.params.dense_w.t().dot(&d_logits);
        if let Some(mask) = &pass.dropout_mask {
            d_v *= mask;
        }

        let forward_order: Vec<usize> = (0..m).collect();
        self.params.forward.backward(
            xs,
            &forward_order,
            &pass.forward_trace,
            d_v.slice(s![0..hidden]),
            &mut grads.forward,
        );
        if let (Some(cell), Some(trace), Some(g)) = (
            &self.params.backward,
            &pass.backward_trace,
            grads.backward.as_mut(),
        ) {
            let backward_order: Vec<usize> = (0..m).rev().collect();
            cell.backward(xs, &backward_order, trace, d_v.slice(s![hidden..]), g);
        }

        if let Some(tensor) = grads.first_non_finite() {
            return Err(ModelError::NonFiniteGradient { tensor });
        }
        Ok((loss, grads))
    }

    /// Convenience: forward pass plus gradients.
    pub fn compute_gradients<R: Rng + ?Sized>(
        &self,
        seq: &FeatureSequence,
        label: usize,
        training: bool,
        rng: &mut R,
    ) -> Result<(f64, Params, ForwardPass), ModelError> {
        let pass = self.forward(seq, training, rng)?;
        let (loss, grads) = self.gradients(seq, label, &pass)?;
        Ok((loss, grads, pass))
    }
}

pub fn argmax(values: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
