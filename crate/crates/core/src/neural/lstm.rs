//! Batched forward and backward passes, one time step at a time.
//!
//! Rows of every matrix are samples. A step consumes a `B x d_in` feature
//! block and produces a `B x d_out` decision block.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis, Zip};

use super::activation::{sigmoid_in_place, tanh_in_place, tanh_into};
use super::{LstmConfig, PolicyParams};
use crate::error::{HedgeError, Result};

/// Hidden and cell states of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Array2<f64>>,
    pub c: Vec<Array2<f64>>,
}

impl LstmState {
    pub fn zeros(config: &LstmConfig, batch: usize) -> Self {
        let h: Vec<_> = config.widths.iter().map(|&d| Array2::zeros((batch, d))).collect();
        LstmState { c: h.clone(), h }
    }

    pub fn batch(&self) -> usize {
        self.h[0].nrows()
    }
}

#[derive(Debug, Clone)]
struct CellTape {
    /// `[h_prev, input]`
    u: Array2<f64>,
    /// activated gates, blocks i, f, o, c
    gates: Array2<f64>,
    c_prev: Array2<f64>,
    tanh_c: Array2<f64>,
}

/// Intermediates of one forward step needed by its backward step.
#[derive(Debug, Clone)]
pub struct StepTape {
    cells: Vec<CellTape>,
    top_h: Array2<f64>,
}

/// Pending gradients flowing backwards into the previous time step.
#[derive(Debug, Clone)]
pub struct BackwardCarry {
    dh: Vec<Array2<f64>>,
    dc: Vec<Array2<f64>>,
}

impl BackwardCarry {
    pub fn zeros(config: &LstmConfig, batch: usize) -> Self {
        let dh: Vec<_> = config.widths.iter().map(|&d| Array2::zeros((batch, d))).collect();
        BackwardCarry { dc: dh.clone(), dh }
    }
}

fn check_input(params: &PolicyParams, state: &LstmState, x: &ArrayView2<f64>) -> Result<()> {
    if x.ncols() != params.config.d_in || x.nrows() != state.batch() {
        return Err(HedgeError::Contract(format!(
            "input block {:?}, expected ({}, {})",
            x.dim(),
            state.batch(),
            params.config.d_in
        )));
    }
    Ok(())
}

/// Runs one cell and returns its tape; updates `h` and `c` in place.
fn cell_forward(
    params: &PolicyParams,
    j: usize,
    input: ArrayView2<f64>,
    h: &mut Array2<f64>,
    c: &mut Array2<f64>,
) -> CellTape {
    let d = params.config.widths[j];
    let u = ndarray::concatenate(Axis(1), &[h.view(), input]).expect("equal batch");

    let cell = &params.cells[j];
    let batch = u.nrows();
    let mut gates = cell.b.broadcast((batch, 4 * d)).expect("bias row").to_owned();
    general_mat_mul(1.0, &u, &cell.w.t(), 1.0, &mut gates);
    for mut row in gates.rows_mut() {
        let row = row.as_slice_mut().expect("row-major");
        sigmoid_in_place(&mut row[..3 * d]);
        tanh_in_place(&mut row[3 * d..]);
    }

    let c_prev = c.clone();
    for (g, mut c_row) in gates.rows().into_iter().zip(c.rows_mut()) {
        let g = g.as_slice().expect("row-major");
        let c_row = c_row.as_slice_mut().expect("row-major");
        let (i, rest) = g.split_at(d);
        let (f, rest) = rest.split_at(d);
        let cand = &rest[d..];
        for k in 0..d {
            c_row[k] = f[k] * c_row[k] + i[k] * cand[k];
        }
    }
    let mut tanh_c = Array2::zeros(c.raw_dim());
    tanh_into(
        c.as_slice().expect("contiguous"),
        tanh_c.as_slice_mut().expect("contiguous"),
    );
    for ((g, t_row), mut h_row) in gates.rows().into_iter().zip(tanh_c.rows()).zip(h.rows_mut()) {
        let o = &g.as_slice().expect("row-major")[2 * d..3 * d];
        let h_row = h_row.as_slice_mut().expect("row-major");
        let t_row = t_row.as_slice().expect("row-major");
        for k in 0..d {
            h_row[k] = o[k] * t_row[k];
        }
    }
    CellTape { u, gates, c_prev, tanh_c }
}

fn read_out(params: &PolicyParams, top: &Array2<f64>) -> Array2<f64> {
    let batch = top.nrows();
    let mut y = Array2::zeros((batch, params.config.d_out));
    y.assign(&params.b_y.broadcast((batch, params.config.d_out)).expect("bias row"));
    general_mat_mul(1.0, top, &params.w_y.t(), 1.0, &mut y);
    y
}

/// Forward one step, recording what the backward pass needs.
pub fn forward_step(
    params: &PolicyParams,
    state: &mut LstmState,
    x: ArrayView2<f64>,
) -> Result<(Array2<f64>, StepTape)> {
    check_input(params, state, &x)?;
    let mut cells = Vec::with_capacity(params.config.n_cells());
    for j in 0..params.config.n_cells() {
        let (below, rest) = state.h.split_at_mut(j);
        let input = if j == 0 { x.view() } else { below[j - 1].view() };
        cells.push(cell_forward(params, j, input, &mut rest[0], &mut state.c[j]));
    }
    let top_h = state.h.last().expect("validated").clone();
    let y = finite(read_out(params, &top_h))?;
    Ok((y, StepTape { cells, top_h }))
}

/// Forward one step without keeping intermediates.
pub fn infer_step(
    params: &PolicyParams,
    state: &mut LstmState,
    x: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    check_input(params, state, &x)?;
    for j in 0..params.config.n_cells() {
        let (below, rest) = state.h.split_at_mut(j);
        let input = if j == 0 { x.view() } else { below[j - 1].view() };
        cell_forward(params, j, input, &mut rest[0], &mut state.c[j]);
    }
    finite(read_out(params, state.h.last().expect("validated")))
}

fn finite(y: Array2<f64>) -> Result<Array2<f64>> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(y)
    } else {
        Err(HedgeError::Diverged("non-finite network output".into()))
    }
}

/// Backward through one step.
///
/// Accumulates parameter gradients into `grads`, updates `carry` to refer to
/// the previous step and returns the gradient with respect to the step input.
pub fn backward_step(
    params: &PolicyParams,
    tape: &StepTape,
    dy: ArrayView2<f64>,
    carry: &mut BackwardCarry,
    grads: &mut PolicyParams,
) -> Result<Array2<f64>> {
    let batch = tape.top_h.nrows();
    if dy.dim() != (batch, params.config.d_out) {
        return Err(HedgeError::Contract(format!(
            "output gradient {:?}, expected ({batch}, {})",
            dy.dim(),
            params.config.d_out
        )));
    }
    general_mat_mul(1.0, &dy.t(), &tape.top_h, 1.0, &mut grads.w_y);
    grads.b_y += &dy.sum_axis(Axis(0));

    let top = params.config.n_cells() - 1;
    let mut dh = carry.dh[top].clone();
    general_mat_mul(1.0, &dy, &params.w_y, 1.0, &mut dh);

    for j in (0..=top).rev() {
        let d = params.config.widths[j];
        let t = &tape.cells[j];
        let mut dz = Array2::zeros((batch, 4 * d));
        let dc_next = &mut carry.dc[j];
        Zip::from(dz.rows_mut())
            .and(t.gates.rows())
            .and(t.tanh_c.rows())
            .and(t.c_prev.rows())
            .and(dh.rows())
            .and(dc_next.rows_mut())
            .for_each(|mut dz_row, g, tc, cp, dh_row, mut dc_row| {
                let g = g.as_slice().expect("row-major");
                let dz_row = dz_row.as_slice_mut().expect("row-major");
                let tc = tc.as_slice().expect("row-major");
                let cp = cp.as_slice().expect("row-major");
                let dh_row = dh_row.as_slice().expect("row-major");
                let dc_row = dc_row.as_slice_mut().expect("row-major");
                let (g, dz_row) = (&g[..4 * d], &mut dz_row[..4 * d]);
                let (tc, cp, dh_row, dc_row) = (&tc[..d], &cp[..d], &dh_row[..d], &mut dc_row[..d]);
                for k in 0..d {
                    let (i, f, o, cand) = (g[k], g[d + k], g[2 * d + k], g[3 * d + k]);
                    let dc = dh_row[k] * o * (1.0 - tc[k] * tc[k]) + dc_row[k];
                    dz_row[k] = dc * cand * i * (1.0 - i);
                    dz_row[d + k] = dc * cp[k] * f * (1.0 - f);
                    dz_row[2 * d + k] = dh_row[k] * tc[k] * o * (1.0 - o);
                    dz_row[3 * d + k] = dc * i * (1.0 - cand * cand);
                    dc_row[k] = dc * f;
                }
            });
        let cell_grads = &mut grads.cells[j];
        general_mat_mul(1.0, &dz.t(), &t.u, 1.0, &mut cell_grads.w);
        cell_grads.b += &dz.sum_axis(Axis(0));

        let du = dz.dot(&params.cells[j].w);
        carry.dh[j].assign(&du.slice(s![.., ..d]));
        let d_input = du.slice(s![.., d..]).to_owned();
        if j == 0 {
            return Ok(d_input);
        }
        dh = d_input + &carry.dh[j - 1];
    }
    unreachable!("at least one cell")
}

/// Tape of a full sequence.
#[derive(Debug, Clone)]
pub struct SequenceTape {
    steps: Vec<StepTape>,
}

impl SequenceTape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Forward a whole sequence of `B x d_in` blocks from zero state.
pub fn forward(
    params: &PolicyParams,
    inputs: &[Array2<f64>],
) -> Result<(Vec<Array2<f64>>, SequenceTape)> {
    let batch = inputs.first().map_or(0, |x| x.nrows());
    let mut state = LstmState::zeros(&params.config, batch);
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (y, tape) = forward_step(params, &mut state, x.view())?;
        outputs.push(y);
        steps.push(tape);
    }
    Ok((outputs, SequenceTape { steps }))
}

/// Gradients of `sum_n <output_grads[n], Y_n>` with respect to the
/// parameters and to every input block.
pub fn backward(
    params: &PolicyParams,
    tape: &SequenceTape,
    output_grads: &[Array2<f64>],
) -> Result<(PolicyParams, Vec<Array2<f64>>)> {
    if output_grads.len() != tape.len() {
        return Err(HedgeError::Contract(format!(
            "{} output gradients for {} steps",
            output_grads.len(),
            tape.len()
        )));
    }
    let mut grads = PolicyParams::zeros(&params.config);
    let batch = tape.steps.first().map_or(0, |t| t.top_h.nrows());
    let mut carry = BackwardCarry::zeros(&params.config, batch);
    let mut dx = vec![Array2::zeros((0, 0)); tape.len()];
    for n in (0..tape.len()).rev() {
        dx[n] = backward_step(params, &tape.steps[n], output_grads[n].view(), &mut carry, &mut grads)?;
    }
    Ok((grads, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
    }

    fn objective(params: &PolicyParams, xs: &[Array2<f64>], ws: &[Array2<f64>]) -> f64 {
        let (ys, _) = forward(params, xs).unwrap();
        ys.iter().zip(ws).map(|(y, w)| (y * w).sum()).sum()
    }

    #[test]
    fn zero_weights_give_bias_output() {
        let cfg = LstmConfig::new(3, vec![4, 5], 2).unwrap();
        let mut p = PolicyParams::zeros(&cfg);
        p.b_y[0] = 0.7;
        p.b_y[1] = -1.5;
        let xs = vec![Array2::ones((3, 3)); 4];
        let (ys, _) = forward(&p, &xs).unwrap();
        for y in ys {
            for row in y.rows() {
                assert_eq!(row.to_vec(), vec![0.7, -1.5]);
            }
        }
    }

    #[test]
    fn single_unit_hand_computed() {
        // one cell, one unit, scalar input, all weights 0.5
        let cfg = LstmConfig::new(1, vec![1], 1).unwrap();
        let mut p = PolicyParams::zeros(&cfg);
        p.cells[0].w.fill(0.5);
        p.w_y.fill(0.5);
        let xs = vec![Array2::from_elem((1, 1), 2.0)];
        let (ys, _) = forward(&p, &xs).unwrap();
        // h_prev = 0 so every pre-activation is 0.5 * 2 = 1
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        let c = s * 1.0f64.tanh();
        let h = s * c.tanh();
        assert!((ys[0][[0, 0]] - 0.5 * h).abs() < 1e-15);
    }

    #[test]
    fn batch_rows_are_independent() {
        let cfg = LstmConfig::new(3, vec![4, 3], 2).unwrap();
        let p = PolicyParams::glorot(&cfg, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<_> = (0..5).map(|_| random(4, 3, &mut rng)).collect();
        let (ys, _) = forward(&p, &xs).unwrap();
        for b in 0..4 {
            let single: Vec<_> = xs.iter().map(|x| x.slice(s![b..b + 1, ..]).to_owned()).collect();
            let (ys1, _) = forward(&p, &single).unwrap();
            for n in 0..5 {
                for k in 0..2 {
                    assert!((ys[n][[b, k]] - ys1[n][[0, k]]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn infer_matches_forward() {
        let cfg = LstmConfig::new(5, vec![6, 6], 2).unwrap();
        let p = PolicyParams::glorot(&cfg, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<_> = (0..3).map(|_| random(7, 5, &mut rng)).collect();
        let (ys, _) = forward(&p, &xs).unwrap();
        let mut state = LstmState::zeros(&cfg, 7);
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(&infer_step(&p, &mut state, x.view()).unwrap(), y);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let cfg = LstmConfig::new(3, vec![4, 3], 2).unwrap();
        let mut p = PolicyParams::glorot(&cfg, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|x| { let z: f64 = StandardNormal.sample(&mut rng); *x += 0.1 * z });
        }
        let xs: Vec<_> = (0..4).map(|_| random(2, 3, &mut rng)).collect();
        let ws: Vec<_> = (0..4).map(|_| random(2, 2, &mut rng)).collect();
        let (_, tape) = forward(&p, &xs).unwrap();
        let (grads, dx) = backward(&p, &tape, &ws).unwrap();

        let h = 1e-5;
        let flat = p.to_flat();
        let analytic = grads.to_flat();
        for k in 0..flat.len() {
            let mut up = flat.clone();
            up[k] += h;
            let mut dn = flat.clone();
            dn[k] -= h;
            let fd = (objective(&PolicyParams::from_flat(&cfg, &up).unwrap(), &xs, &ws)
                - objective(&PolicyParams::from_flat(&cfg, &dn).unwrap(), &xs, &ws))
                / (2.0 * h);
            let scale = analytic[k].abs().max(fd.abs()).max(1e-3);
            assert!((analytic[k] - fd).abs() / scale < 1e-6, "param {k}: {} vs {fd}", analytic[k]);
        }
        for n in 0..4 {
            for idx in [(0, 0), (1, 2)] {
                let mut up = xs.clone();
                up[n][idx] += h;
                let mut dn = xs.clone();
                dn[n][idx] -= h;
                let fd = (objective(&p, &up, &ws) - objective(&p, &dn, &ws)) / (2.0 * h);
                assert!((dx[n][idx] - fd).abs() < 1e-8, "input {n} {idx:?}");
            }
        }
    }

    #[test]
    fn zero_output_gradients_give_zero_gradients() {
        let cfg = LstmConfig::new(3, vec![4], 2).unwrap();
        let p = PolicyParams::glorot(&cfg, 1).unwrap();
        let xs = vec![Array2::ones((2, 3)); 3];
        let (_, tape) = forward(&p, &xs).unwrap();
        let (g, dx) = backward(&p, &tape, &vec![Array2::zeros((2, 2)); 3]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|d| d.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn output_bias_gradient_counts_steps() {
        let cfg = LstmConfig::new(3, vec![4, 4], 2).unwrap();
        let p = PolicyParams::glorot(&cfg, 2).unwrap();
        let xs = vec![Array2::ones((1, 3)); 5];
        let (_, tape) = forward(&p, &xs).unwrap();
        let (g, _) = backward(&p, &tape, &vec![Array2::ones((1, 2)); 5]).unwrap();
        assert_eq!(g.b_y.to_vec(), vec![5.0, 5.0]);
    }

    #[test]
    fn gate_and_state_ranges() {
        let cfg = LstmConfig::new(3, vec![5, 4], 1).unwrap();
        let mut p = PolicyParams::glorot(&cfg, 4).unwrap();
        p.scale(8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<_> = (0..6).map(|_| random(8, 3, &mut rng) * 5.0).collect();
        let (_, tape) = forward(&p, &xs).unwrap();
        for step in &tape.steps {
            for (j, cell) in step.cells.iter().enumerate() {
                let d = cfg.widths[j];
                for row in cell.gates.rows() {
                    assert!(row.iter().take(3 * d).all(|&g| (0.0..=1.0).contains(&g)));
                    assert!(row.iter().skip(3 * d).all(|&g| (-1.0..=1.0).contains(&g)));
                }
                assert!(cell.tanh_c.iter().all(|&t| t.abs() <= 1.0));
            }
            assert!(step.top_h.iter().all(|&h| h.abs() <= 1.0));
        }
    }

    #[test]
    fn non_finite_input_is_divergence() {
        let cfg = LstmConfig::new(1, vec![2], 1).unwrap();
        let p = PolicyParams::glorot(&cfg, 1).unwrap();
        let xs = vec![Array2::from_elem((1, 1), f64::NAN)];
        assert!(matches!(forward(&p, &xs), Err(HedgeError::Diverged(_))));
    }

    #[test]
    fn shape_errors() {
        let cfg = LstmConfig::new(3, vec![2], 1).unwrap();
        let p = PolicyParams::zeros(&cfg);
        let mut state = LstmState::zeros(&cfg, 2);
        assert!(infer_step(&p, &mut state, Array2::zeros((2, 4)).view()).is_err());
        assert!(infer_step(&p, &mut state, Array2::zeros((3, 3)).view()).is_err());
        let (_, tape) = forward(&p, &[Array2::zeros((2, 3))]).unwrap();
        assert!(backward(&p, &tape, &[]).is_err());
        assert!(backward(&p, &tape, &[Array2::zeros((2, 2))]).is_err());
    }
}
