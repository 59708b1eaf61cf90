//! Numeric execution of both schedules.
//!
//! Schedule A concatenates `x_t` with `h_{t-1}` and multiplies against the
//! full G every step. Schedule A+ multiplies G1 against all inputs at once
//! into X', then per step only multiplies G2 against `h_{t-1}` and adds the
//! matching row of X'. Both produce the same hidden states up to
//! floating-point reassociation.
//!
//! LSTM gate order is `f, i, o, c'`. The output is `h = o * c` unless the
//! weight set requests the standard `h = o * tanh(c)`. GRU gate order is
//! `z, r, h~` with `h' = z * h + (1 - z) * h~` and the candidate computed
//! from `U_h (r * h)`.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{CellType, Matrix, WeightSet};

/// Recurrent state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState<F> {
    pub h: Vec<F>,
    /// Empty for GRU.
    pub c: Vec<F>,
}

impl<F: Float> StepState<F> {
    pub fn zeros(cell: CellType, n: usize) -> Self {
        let c = match cell {
            CellType::LSTM => vec![F::zero(); n],
            CellType::GRU => Vec::new(),
        };
        Self { h: vec![F::zero(); n], c }
    }
}

/// Network inputs: raw vectors, or token ids looked up in the embedding.
#[derive(Debug, Clone)]
pub enum Inputs<F> {
    Vectors(Matrix<F>),
    Tokens(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<F> {
    /// Per layer, `[T x n]` hidden states.
    pub hidden: Vec<Matrix<F>>,
    /// Per step softmax probabilities of the last layer, when the network has
    /// a vocabulary.
    pub probabilities: Option<Matrix<F>>,
}

impl<F: Float> RunOutput<F> {
    pub fn final_hidden(&self) -> &[F] {
        let last = self.hidden.last().expect("at least one layer");
        last.row(last.rows() - 1)
    }
}

pub fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Max-subtracted softmax.
pub fn softmax<F: Float>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum = exps.iter().copied().fold(F::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// `y += sum_i x[i] * m[row0 + i][col0..col0 + y.len()]`
fn accumulate<F: Float>(m: &Matrix<F>, row0: usize, col0: usize, x: &[F], y: &mut [F]) {
    for (i, &xi) in x.iter().enumerate() {
        let row = &m.row(row0 + i)[col0..col0 + y.len()];
        for (acc, &w) in y.iter_mut().zip(row) {
            *acc = *acc + xi * w;
        }
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what}: expected {want} elements, got {got}")))
    }
}

fn lstm_finish<F: Float>(mut y: Vec<F>, c_prev: &[F], n: usize, standard_output_gate: bool) -> StepState<F> {
    for v in &mut y[..3 * n] {
        *v = sigmoid(*v);
    }
    for v in &mut y[3 * n..] {
        *v = v.tanh();
    }
    let (f, rest) = y.split_at(n);
    let (i, rest) = rest.split_at(n);
    let (o, cand) = rest.split_at(n);
    let c: Vec<F> = (0..n).map(|k| f[k] * c_prev[k] + i[k] * cand[k]).collect();
    let h = (0..n).map(|k| if standard_output_gate { o[k] * c[k].tanh() } else { o[k] * c[k] }).collect();
    StepState { h, c }
}

fn gru_finish<F: Float>(zr: &[F], cand: &[F], h_prev: &[F]) -> Vec<F> {
    let n = h_prev.len();
    (0..n)
        .map(|k| {
            let z = zr[k];
            z * h_prev[k] + (F::one() - z) * cand[k]
        })
        .collect()
}

fn activate_zr<F: Float>(zr: &mut [F]) {
    for v in zr.iter_mut() {
        *v = sigmoid(*v);
    }
}

fn reset_hidden<F: Float>(zr: &[F], h: &[F]) -> Vec<F> {
    let n = h.len();
    (0..n).map(|k| zr[n + k] * h[k]).collect()
}

/// One LSTM step of the concatenated schedule against `G = [G1; G2]`.
pub fn lstm_step_a<F: Float>(
    g: &Matrix<F>,
    x: &[F],
    state: &StepState<F>,
    standard_output_gate: bool,
) -> Result<StepState<F>> {
    let n = state.h.len();
    check_len("G columns", g.cols(), 4 * n)?;
    check_len("G rows", g.rows(), x.len() + n)?;
    check_len("cell state", state.c.len(), n)?;
    let input: Vec<F> = x.iter().chain(&state.h).copied().collect();
    let mut y = vec![F::zero(); 4 * n];
    accumulate(g, 0, 0, &input, &mut y);
    Ok(lstm_finish(y, &state.c, n, standard_output_gate))
}

/// One GRU step against `G = [G1; G2]`.
pub fn gru_step_a<F: Float>(g: &Matrix<F>, x: &[F], state: &StepState<F>) -> Result<StepState<F>> {
    let n = state.h.len();
    let n_in = x.len();
    check_len("G columns", g.cols(), 3 * n)?;
    check_len("G rows", g.rows(), n_in + n)?;
    let input: Vec<F> = x.iter().chain(&state.h).copied().collect();
    let mut zr = vec![F::zero(); 2 * n];
    accumulate(g, 0, 0, &input, &mut zr);
    activate_zr(&mut zr);
    let mut cand = vec![F::zero(); n];
    accumulate(g, 0, 2 * n, x, &mut cand);
    accumulate(g, n_in, 2 * n, &reset_hidden(&zr, &state.h), &mut cand);
    for v in &mut cand {
        *v = v.tanh();
    }
    Ok(StepState { h: gru_finish(&zr, &cand, &state.h), c: Vec::new() })
}

fn resolve_inputs<F: Float>(weights: &WeightSet<F>, inputs: &Inputs<F>) -> Result<Matrix<F>> {
    let n_in = weights.input_width();
    match inputs {
        Inputs::Vectors(m) => {
            check_len("input width", m.cols(), n_in)?;
            Ok(m.clone())
        }
        Inputs::Tokens(tokens) => {
            let emb =
                weights.embedding.as_ref().ok_or_else(|| Error::Dimension("token inputs need an embedding".into()))?;
            let mut m = Matrix::zeros(tokens.len(), n_in);
            for (t, &tok) in tokens.iter().enumerate() {
                if tok >= emb.rows() {
                    return Err(Error::Dimension(format!("token {tok} outside vocabulary {}", emb.rows())));
                }
                m.row_mut(t).copy_from_slice(emb.row(tok));
            }
            Ok(m)
        }
    }
}

fn project_softmax<F: Float>(weights: &WeightSet<F>, hidden: &Matrix<F>) -> Option<Matrix<F>> {
    let sm = weights.softmax.as_ref()?;
    let mut out = Matrix::zeros(hidden.rows(), sm.cols());
    for t in 0..hidden.rows() {
        let mut logits = vec![F::zero(); sm.cols()];
        accumulate(sm, 0, 0, hidden.row(t), &mut logits);
        out.row_mut(t).copy_from_slice(&softmax(&logits));
    }
    Some(out)
}

fn check_steps<F: Float>(seq: &Matrix<F>) -> Result<()> {
    if seq.rows() == 0 {
        Err(Error::Dimension("need at least one time step".into()))
    } else {
        Ok(())
    }
}

/// Layer-major, step-inner execution against the concatenated G.
pub fn run_schedule_a<F: Float>(weights: &WeightSet<F>, inputs: &Inputs<F>) -> Result<RunOutput<F>> {
    let mut seq = resolve_inputs(weights, inputs)?;
    check_steps(&seq)?;
    let mut hidden = Vec::with_capacity(weights.layers.len());
    for layer in &weights.layers {
        let g = layer.concat();
        let n = layer.g2.rows();
        let mut state = StepState::zeros(weights.cell_type, n);
        let mut out = Matrix::zeros(seq.rows(), n);
        for t in 0..seq.rows() {
            state = match weights.cell_type {
                CellType::LSTM => lstm_step_a(&g, seq.row(t), &state, weights.standard_output_gate)?,
                CellType::GRU => gru_step_a(&g, seq.row(t), &state)?,
            };
            out.row_mut(t).copy_from_slice(&state.h);
        }
        seq = out.clone();
        hidden.push(out);
    }
    let probabilities = project_softmax(weights, &seq);
    Ok(RunOutput { hidden, probabilities })
}

/// `X' = I' * G1`: one row of input products per time step.
pub fn precompute_inputs<F: Float>(g1: &Matrix<F>, seq: &Matrix<F>) -> Result<Matrix<F>> {
    check_len("G1 rows", g1.rows(), seq.cols())?;
    let mut x = Matrix::zeros(seq.rows(), g1.cols());
    for t in 0..seq.rows() {
        accumulate(g1, 0, 0, seq.row(t), x.row_mut(t));
    }
    Ok(x)
}

/// Split-G execution: input products for all steps first, then the
/// recurrent products step by step.
pub fn run_schedule_a_plus<F: Float>(weights: &WeightSet<F>, inputs: &Inputs<F>) -> Result<RunOutput<F>> {
    let mut seq = resolve_inputs(weights, inputs)?;
    check_steps(&seq)?;
    let mut hidden = Vec::with_capacity(weights.layers.len());
    for layer in &weights.layers {
        let n = layer.g2.rows();
        let x_prime = precompute_inputs(&layer.g1, &seq)?;
        let mut state = StepState::zeros(weights.cell_type, n);
        let mut out = Matrix::zeros(seq.rows(), n);
        for t in 0..seq.rows() {
            let xt = x_prime.row(t);
            state = match weights.cell_type {
                CellType::LSTM => {
                    let mut y = vec![F::zero(); 4 * n];
                    accumulate(&layer.g2, 0, 0, &state.h, &mut y);
                    for (v, &p) in y.iter_mut().zip(xt) {
                        *v = p + *v;
                    }
                    lstm_finish(y, &state.c, n, weights.standard_output_gate)
                }
                CellType::GRU => {
                    let mut zr = vec![F::zero(); 2 * n];
                    accumulate(&layer.g2, 0, 0, &state.h, &mut zr);
                    for (v, &p) in zr.iter_mut().zip(&xt[..2 * n]) {
                        *v = p + *v;
                    }
                    activate_zr(&mut zr);
                    let mut cand = vec![F::zero(); n];
                    accumulate(&layer.g2, 0, 2 * n, &reset_hidden(&zr, &state.h), &mut cand);
                    for (v, &p) in cand.iter_mut().zip(&xt[2 * n..]) {
                        *v = (p + *v).tanh();
                    }
                    StepState { h: gru_finish(&zr, &cand, &state.h), c: Vec::new() }
                }
            };
            out.row_mut(t).copy_from_slice(&state.h);
        }
        seq = out.clone();
        hidden.push(out);
    }
    let probabilities = project_softmax(weights, &seq);
    Ok(RunOutput { hidden, probabilities })
}

/// Largest elementwise difference between two runs, relative to the
/// largest magnitude of the first run (floored at one).
pub fn max_relative_diff<F: Float>(a: &RunOutput<F>, b: &RunOutput<F>) -> F {
    let mut diff = F::zero();
    let mut scale = F::one();
    for (ma, mb) in a.hidden.iter().zip(&b.hidden) {
        for (&x, &y) in ma.as_slice().iter().zip(mb.as_slice()) {
            diff = diff.max((x - y).abs());
            scale = scale.max(x.abs());
        }
    }
    diff / scale
}
