use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Gate blocks, in the row order used by the stacked weight matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Candidate,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Candidate, Gate::Output];

    pub fn name(&self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Forget => "forget",
            Gate::Candidate => "candidate",
            Gate::Output => "output",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

/// Weights of one LSTM direction with the four gates stacked row-wise:
/// `w` is `4H × D`, `u` is `4H × H`, `b` has length `4H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Activations kept from one step for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub c: Array1<f64>,
    pub tanh_c: Array1<f64>,
    pub h: Array1<f64>,
}

impl CellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Glorot-uniform weights per gate block, forget bias 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_lim = (6.0 / (input + hidden) as f64).sqrt();
        let u_lim = (6.0 / (2 * hidden) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((4 * hidden, input), || rng.random_range(-w_lim..w_lim));
        let u = Array2::from_shape_simple_fn((4 * hidden, hidden), || rng.random_range(-u_lim..u_lim));
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Self { w, u, b }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input(&self) -> usize {
        self.w.ncols()
    }

    pub fn gate_rows(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden();
        gate.index() * h..(gate.index() + 1) * h
    }

    /// Input weights of one gate (`H × D`).
    pub fn w_gate(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.w.slice(s![self.gate_rows(gate), ..])
    }

    /// Recurrent weights of one gate (`H × H`).
    pub fn u_gate(&self, gate: Gate) -> ArrayView2<'_, f64> {
        self.u.slice(s![self.gate_rows(gate), ..])
    }

    pub fn b_gate(&self, gate: Gate) -> ArrayView1<'_, f64> {
        self.b.slice(s![self.gate_rows(gate)])
    }

    /// One time step, returning everything the backward pass needs.
    pub fn step_cached(
        &self,
        x: ArrayView1<'_, f64>,
        h_prev: &Array1<f64>,
        c_prev: &Array1<f64>,
    ) -> Result<StepCache, ModelError> {
        let hidden = self.hidden();
        let z = self.w.dot(&x) + self.u.dot(h_prev) + &self.b;
        for gate in Gate::ALL {
            if z.slice(s![self.gate_rows(gate)]).iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteActivation { gate: gate.name() });
            }
        }
        let i = z.slice(s![0..hidden]).mapv(sigmoid);
        let f = z.slice(s![hidden..2 * hidden]).mapv(sigmoid);
        let g = z.slice(s![2 * hidden..3 * hidden]).mapv(f64::tanh);
        let o = z.slice(s![3 * hidden..4 * hidden]).mapv(sigmoid);
        let c = &f * c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h = &o * &tanh_c;
        if h.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteActivation { gate: "cell" });
        }
        Ok(StepCache {
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        })
    }

    /// `(h, c)` after consuming `x` from state `(h_prev, c_prev)`.
    pub fn step(
        &self,
        x: ArrayView1<'_, f64>,
        h_prev: &Array1<f64>,
        c_prev: &Array1<f64>,
    ) -> Result<(Array1<f64>, Array1<f64>), ModelError> {
        let cache = self.step_cached(x, h_prev, c_prev)?;
        Ok((cache.h, cache.c))
    }

    /// Runs the cell over the given columns of `xs` in the given order,
    /// starting from zero state.
    pub fn run(
        &self,
        xs: ArrayView2<'_, f64>,
        order: impl Iterator<Item = usize>,
    ) -> Result<Vec<StepCache>, ModelError> {
        let hidden = self.hidden();
        let mut h = Array1::zeros(hidden);
        let mut c = Array1::zeros(hidden);
        let mut trace = Vec::with_capacity(xs.ncols());
        for t in order {
            let step = self.step_cached(xs.column(t), &h, &c)?;
            h = step.h.clone();
            c = step.c.clone();
            trace.push(step);
        }
        Ok(trace)
    }

    /// Backpropagates a gradient on the final hidden state through a trace
    /// produced by [`CellParams::run`] with the same column `order`,
    /// accumulating into `grads`.
    pub fn backward(
        &self,
        xs: ArrayView2<'_, f64>,
        order: &[usize],
        trace: &[StepCache],
        d_h_final: ArrayView1<'_, f64>,
        grads: &mut CellParams,
    ) {
        let hidden = self.hidden();
        let mut dh = d_h_final.to_owned();
        let mut dc = Array1::<f64>::zeros(hidden);
        let mut dz = Array1::<f64>::zeros(4 * hidden);
        for (step, &t) in trace.iter().zip(order).rev() {
            for k in 0..hidden {
                let tc = step.tanh_c[k];
                let d_o = dh[k] * tc;
                let dck = dc[k] + dh[k] * step.o[k] * (1.0 - tc * tc);
                let (i, f, g, o) = (step.i[k], step.f[k], step.g[k], step.o[k]);
                dz[k] = dck * g * i * (1.0 - i);
                dz[hidden + k] = dck * step.c_prev[k] * f * (1.0 - f);
                dz[2 * hidden + k] = dck * i * (1.0 - g * g);
                dz[3 * hidden + k] = d_o * o * (1.0 - o);
                dc[k] = dck * f;
            }
            let x = xs.column(t);
            let dz_col = dz.view().insert_axis(Axis(1));
            grads
                .w
                .scaled_add(1.0, &dz_col.dot(&x.insert_axis(Axis(0))));
            grads
                .u
                .scaled_add(1.0, &dz_col.dot(&step.h_prev.view().insert_axis(Axis(0))));
            grads.b += &dz;
            dh = self.u.t().dot(&dz);
        }
    }
}
