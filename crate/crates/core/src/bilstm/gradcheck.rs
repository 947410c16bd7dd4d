use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

use super::model::{BiLstmModel, ModelConfig};
use super::ModelError;
use crate::features::FeatureSequence;

/// Worst relative error between BPTT and central differences, overall and
/// per tensor.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub per_tensor: Vec<(&'static str, f64)>,
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn tensor(&self, name: &str) -> Option<f64> {
        self.per_tensor.iter().find(|(n, _)| *n == name).map(|(_, e)| *e)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-12);
    (analytic - numeric).abs() / denom
}

type Dd = TwoFloat;

fn dd(v: f64) -> Dd {
    Dd::from(v)
}

// ln 2 split into a leading double and its remainder.
const LN2_HI: f64 = std::f64::consts::LN_2;
const LN2_LO: f64 = 2.319_046_813_846_299_6e-17;

/// `1 / d` refined by two Newton steps; the crate's division is only
/// accurate to about one double ulp.
fn recip_dd(d: Dd) -> Dd {
    let mut y = dd(1.0 / d.hi());
    for _ in 0..2 {
        y += y * (dd(1.0) - d * y);
    }
    y
}

/// exp to double-double accuracy: `x = k ln2 + r`, Taylor series on
/// `r / 2^10`, then ten squarings.
fn exp_dd(x: Dd) -> Dd {
    let k = (x.hi() / LN2_HI).round();
    let ln2 = Dd::try_from((LN2_HI, LN2_LO)).expect("normalized constant");
    let r = (x - ln2 * k) * (1.0 / 1024.0);
    let mut term = dd(1.0);
    let mut sum = dd(1.0);
    for n in 1..=14 {
        term = term * r * recip_dd(dd(n as f64));
        sum += term;
    }
    for _ in 0..10 {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

/// Natural log by one Newton step on `exp(y) = x` from the f64 estimate.
fn ln_dd(x: Dd) -> Dd {
    let y = dd(x.hi().ln());
    y + x * exp_dd(-y) - 1.0
}

fn sigmoid_dd(x: Dd) -> Dd {
    recip_dd(exp_dd(-x) + 1.0)
}

fn tanh_dd(x: Dd) -> Dd {
    let e = exp_dd(x * 2.0);
    (e - 1.0) * recip_dd(e + 1.0)
}

/// Scalar re-implementation of the inference loss over the flat tensors
/// returned by `Params::tensors`, evaluated in extended precision.
struct Reference<'a> {
    config: ModelConfig,
    seq: &'a FeatureSequence,
    label: usize,
}

impl Reference<'_> {
    fn run_cell(&self, w: &[Dd], u: &[Dd], b: &[Dd], reverse: bool) -> Vec<Dd> {
        let (d, hn) = (self.config.input_size, self.config.hidden_size);
        let m = self.seq.len();
        let mut h = vec![dd(0.0); hn];
        let mut c = vec![dd(0.0); hn];
        for step in 0..m {
            let t = if reverse { m - 1 - step } else { step };
            let z: Vec<Dd> = (0..4 * hn)
                .map(|r| {
                    let mut acc = b[r];
                    for j in 0..d {
                        acc += w[r * d + j] * self.seq.features[[j, t]];
                    }
                    for j in 0..hn {
                        acc += u[r * hn + j] * h[j];
                    }
                    acc
                })
                .collect();
            for k in 0..hn {
                let i = sigmoid_dd(z[k]);
                let f = sigmoid_dd(z[hn + k]);
                let g = tanh_dd(z[2 * hn + k]);
                let o = sigmoid_dd(z[3 * hn + k]);
                c[k] = f * c[k] + i * g;
                h[k] = o * tanh_dd(c[k]);
            }
        }
        h
    }

    fn loss(&self, t: &[Vec<Dd>]) -> Dd {
        let mut v = self.run_cell(&t[0], &t[1], &t[2], false);
        let dense = if self.config.bidirectional {
            v.extend(self.run_cell(&t[3], &t[4], &t[5], true));
            6
        } else {
            3
        };
        let (dw, db) = (&t[dense], &t[dense + 1]);
        let width = v.len();
        let logits: Vec<Dd> = (0..self.config.class_count)
            .map(|c| {
                let mut acc = db[c];
                for (j, vj) in v.iter().enumerate() {
                    acc += dw[c * width + j] * *vj;
                }
                acc
            })
            .collect();
        let max = logits.iter().copied().fold(logits[0], |a, b| if b > a { b } else { a });
        let mut sum = dd(0.0);
        for l in &logits {
            sum += exp_dd(*l - max);
        }
        max + ln_dd(sum) - logits[self.label]
    }
}

/// Compares every analytic gradient entry with `(L(θ+δ) − L(θ−δ)) / 2δ`,
/// dropout off. The two losses are evaluated in double-double precision by a
/// separate scalar implementation so the difference quotient is not limited
/// by rounding in the loss itself.
pub fn gradient_check_report(
    model: &BiLstmModel,
    seq: &FeatureSequence,
    label: usize,
    step: f64,
) -> Result<GradCheckReport, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, grads, _) = model.compute_gradients(seq, label, false, &mut rng)?;
    let reference = Reference {
        config: model.config,
        seq,
        label,
    };
    let mut params: Vec<Vec<Dd>> = model
        .params
        .tensors()
        .into_iter()
        .map(|(_, t)| t.iter().map(|&v| dd(v)).collect())
        .collect();
    let delta = dd(step);

    let mut per_tensor = Vec::with_capacity(params.len());
    let mut entries = 0;
    for (ti, (name, a)) in grads.tensors().into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (k, &analytic) in a.iter().enumerate() {
            let original = params[ti][k];
            params[ti][k] = original + delta;
            let plus = reference.loss(&params);
            params[ti][k] = original - delta;
            let minus = reference.loss(&params);
            params[ti][k] = original;
            let numeric = ((plus - minus) * recip_dd(dd(2.0 * step))).hi();
            worst = worst.max(relative_error(analytic, numeric));
            entries += 1;
        }
        per_tensor.push((name, worst));
    }
    let max_rel_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        per_tensor,
        entries_checked: entries,
    })
}

/// Loss of the double-double reference at the model's current parameters.
pub fn reference_loss(model: &BiLstmModel, seq: &FeatureSequence, label: usize) -> f64 {
    let params: Vec<Vec<Dd>> = model
        .params
        .tensors()
        .into_iter()
        .map(|(_, t)| t.iter().map(|&v| dd(v)).collect())
        .collect();
    Reference {
        config: model.config,
        seq,
        label,
    }
    .loss(&params)
    .hi()
}

pub fn gradient_check(
    model: &BiLstmModel,
    seq: &FeatureSequence,
    label: usize,
    step: f64,
) -> Result<f64, ModelError> {
    gradient_check_report(model, seq, label, step).map(|r| r.max_rel_error)
}
