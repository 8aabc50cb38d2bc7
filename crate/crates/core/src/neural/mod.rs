//! Stacked-LSTM policy network with an affine read-out.
//!
//! Each cell `j` keeps the four gate matrices stacked row-wise in the order
//! input, forget, output, candidate: `w` has shape `4 d_j x (d_j + d_{j-1})`
//! and multiplies the concatenation `[h_{t-1}^{(j)}, h_t^{(j-1)}]`.

mod activation;
mod adam;
mod io;
mod lstm;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use lstm::{
    backward, backward_step, forward, forward_step, infer_step, BackwardCarry, LstmState,
    SequenceTape, StepTape,
};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub d_in: usize,
    /// neurons per cell, bottom to top
    pub widths: Vec<usize>,
    pub d_out: usize,
}

impl LstmConfig {
    pub fn new(d_in: usize, widths: Vec<usize>, d_out: usize) -> Result<Self> {
        let cfg = LstmConfig { d_in, widths, d_out };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(HedgeError::invalid("widths", "need at least one cell"));
        }
        if self.d_in == 0 || self.d_out == 0 || self.widths.contains(&0) {
            return Err(HedgeError::invalid("widths", "all dimensions must be >= 1"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.widths.len()
    }

    /// Width of the input feeding cell `j` from below.
    pub fn below(&self, j: usize) -> usize {
        if j == 0 {
            self.d_in
        } else {
            self.widths[j - 1]
        }
    }

    pub fn top(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Closed-form count of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let cells: usize = (0..self.n_cells())
            .map(|j| {
                let d = self.widths[j];
                4 * d * (d + self.below(j)) + 4 * d
            })
            .sum();
        cells + self.d_out * self.top() + self.d_out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Candidate,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    fn block(self) -> usize {
        match self {
            Gate::Input => 0,
            Gate::Forget => 1,
            Gate::Output => 2,
            Gate::Candidate => 3,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Candidate => "c",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Every weight matrix and bias vector of the policy.
///
/// The same type carries gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub config: LstmConfig,
    pub cells: Vec<CellParams>,
    pub w_y: Array2<f64>,
    pub b_y: Array1<f64>,
}

impl PolicyParams {
    pub fn zeros(config: &LstmConfig) -> Self {
        let cells = (0..config.n_cells())
            .map(|j| {
                let d = config.widths[j];
                CellParams {
                    w: Array2::zeros((4 * d, d + config.below(j))),
                    b: Array1::zeros(4 * d),
                }
            })
            .collect();
        PolicyParams {
            config: config.clone(),
            cells,
            w_y: Array2::zeros((config.d_out, config.top())),
            b_y: Array1::zeros(config.d_out),
        }
    }

    /// Glorot-uniform weights, each gate matrix bounded by
    /// `sqrt(6 / (fan_in + fan_out))`; biases start at zero.
    pub fn glorot(config: &LstmConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |m: &mut Array2<f64>| {
            let (rows, cols) = m.dim();
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let law = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            m.iter_mut().for_each(|x| *x = law.sample(&mut rng));
        };
        for cell in &mut params.cells {
            let d = cell.w.nrows() / 4;
            for g in 0..4 {
                let mut block = cell.w.slice(s![g * d..(g + 1) * d, ..]).to_owned();
                fill(&mut block);
                cell.w.slice_mut(s![g * d..(g + 1) * d, ..]).assign(&block);
            }
        }
        fill(&mut params.w_y);
        Ok(params)
    }

    pub fn gate_weights(&self, cell: usize, gate: Gate) -> ArrayView2<'_, f64> {
        let d = self.config.widths[cell];
        let g = gate.block();
        self.cells[cell].w.slice(s![g * d..(g + 1) * d, ..])
    }

    pub fn gate_bias(&self, cell: usize, gate: Gate) -> ArrayView1<'_, f64> {
        let d = self.config.widths[cell];
        let g = gate.block();
        self.cells[cell].b.slice(s![g * d..(g + 1) * d])
    }

    /// Parameter tensors in serialization order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.cells.len() + 2);
        for c in &self.cells {
            out.push(c.w.as_slice().expect("standard layout"));
            out.push(c.b.as_slice().expect("standard layout"));
        }
        out.push(self.w_y.as_slice().expect("standard layout"));
        out.push(self.b_y.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.cells.len() + 2);
        for c in &mut self.cells {
            out.push(c.w.as_slice_mut().expect("standard layout"));
            out.push(c.b.as_slice_mut().expect("standard layout"));
        }
        out.push(self.w_y.as_slice_mut().expect("standard layout"));
        out.push(self.b_y.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn from_flat(config: &LstmConfig, flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(config);
        if flat.len() != params.n_params() {
            return Err(HedgeError::Contract(format!(
                "{} values for {} parameters",
                flat.len(),
                params.n_params()
            )));
        }
        let mut offset = 0;
        for t in params.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(params)
    }

    pub fn add_assign(&mut self, other: &PolicyParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn same_shape(&self, other: &PolicyParams) -> bool {
        self.config == other.config
    }
}
