//! Closed-form learnable-parameter count of the BiLSTM head.
//!
//! With input size I, H hidden units per direction, M = 2H and K = M/2:
//! `W = 4·M·((I+1) + K)` (input weights with bias plus recurrent weights for
//! the four gates) and `F = C·M` for the dense layer. The total `W + F` is the
//! head's "FLOP" count in the per-sample convention; it is not multiplied by
//! sequence length.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopsReport {
    /// I
    pub input_size: u64,
    /// H
    pub hidden_per_direction: u64,
    /// M = 2H
    pub total_hidden: u64,
    /// K = M / 2
    pub combined_output: u64,
    pub class_count: u64,
    /// W = 4·M·((I+1)+K)
    pub bilstm_params: u64,
    /// F = C·M, dense weights only.
    pub dense_params: u64,
    /// F plus the C dense biases.
    pub dense_params_with_bias: u64,
    /// W + F
    pub total: u64,
    /// W + F + C
    pub total_with_bias: u64,
}

pub fn bilstm_flops(input_size: u64, hidden: u64, class_count: u64) -> FlopsReport {
    assert!(input_size >= 1 && hidden >= 1 && class_count >= 1);
    let m = 2 * hidden;
    let k = m / 2;
    let w = 4 * m * ((input_size + 1) + k);
    let f = class_count * m;
    FlopsReport {
        input_size,
        hidden_per_direction: hidden,
        total_hidden: m,
        combined_output: k,
        class_count,
        bilstm_params: w,
        dense_params: f,
        dense_params_with_bias: f + class_count,
        total: w + f,
        total_with_bias: w + f + class_count,
    }
}

impl fmt::Display for FlopsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, u64); 10] = [
            ("input size (I)", self.input_size),
            ("hidden units per direction (H)", self.hidden_per_direction),
            ("total hidden units (M = 2H)", self.total_hidden),
            ("combined output (K = M/2)", self.combined_output),
            ("classes (C)", self.class_count),
            ("BiLSTM parameters (W)", self.bilstm_params),
            ("dense weights (F = C*M)", self.dense_params),
            ("dense weights + bias", self.dense_params_with_bias),
            ("learnable parameters W+F (FLOP convention)", self.total),
            ("learnable parameters incl. dense bias", self.total_with_bias),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v:>14}")?;
        }
        Ok(())
    }
}
