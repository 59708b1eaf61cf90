//! Network configurations, the simulated address-space layout, and the
//! input/recurrent weight split.
//!
//! A layer's gate weights are kept as two row blocks: `G1` holds the input
//! weights (`n_in` rows) and `G2` the recurrent weights (`n` rows), both with
//! `g * n` columns where `g` is the gate count of the cell. Stacking them
//! row-wise gives the concatenated `G` of shape `[(n_in + n) x g*n]`, and a
//! layer step computes `Y = G^T * [x; h]`.

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Every tensor base address is aligned to this many bytes, so no cache line
/// (up to this size) is shared between two tensors.
pub const TENSOR_ALIGN: u64 = 4096;

/// Bound on `init_range` for seeded weight initialization.
pub const WEIGHT_INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellType {
    LSTM,
    GRU,
}

impl CellType {
    /// Number of gate matrices per weight set.
    pub fn gates(self) -> usize {
        match self {
            CellType::LSTM => 4,
            CellType::GRU => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellType::LSTM => "lstm",
            CellType::GRU => "gru",
        }
    }
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CellType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellType::LSTM),
            "gru" => Ok(CellType::GRU),
            other => Err(Error::InvalidConfig(format!("unknown cell type {other:?}"))),
        }
    }
}

fn default_element_bytes() -> usize {
    4
}

fn default_true() -> bool {
    true
}

/// Full description of one RNN benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub cell_type: CellType,
    pub hidden_size: usize,
    /// Defaults to the first layer's hidden size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_size: Option<usize>,
    pub num_layers: usize,
    pub input_length: usize,
    /// Zero means no embedding and no softmax layer.
    #[serde(default)]
    pub vocab_size: usize,
    #[serde(default = "default_element_bytes")]
    pub element_bytes: usize,
    #[serde(default = "default_true")]
    pub softmax_every_step: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_sizes: Option<Vec<usize>>,
    /// Use `h = o * tanh(c)` instead of the literal `h = o * c`.
    #[serde(default)]
    pub standard_output_gate: bool,
    /// Number of trailing layers that are decoder layers. These cannot use
    /// the precomputed input products and always run in per-step order.
    #[serde(default)]
    pub decoder_layers: usize,
    /// Adds a fixed `[n x n]` attention matvec per step of the first
    /// decoder layer.
    #[serde(default)]
    pub attention: bool,
}

/// Input, hidden and gate widths of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub input: usize,
    pub hidden: usize,
    pub gates: usize,
}

impl LayerDims {
    /// Columns of G1 and G2.
    pub fn gate_width(&self) -> usize {
        self.gates * self.hidden
    }

    pub fn g1_elems(&self) -> u64 {
        (self.input * self.gate_width()) as u64
    }

    pub fn g2_elems(&self) -> u64 {
        (self.hidden * self.gate_width()) as u64
    }
}

impl NetworkConfig {
    pub fn new(cell_type: CellType, hidden_size: usize, num_layers: usize, input_length: usize) -> Self {
        Self {
            cell_type,
            hidden_size,
            input_size: None,
            num_layers,
            input_length,
            vocab_size: 0,
            element_bytes: 4,
            softmax_every_step: true,
            layer_sizes: None,
            standard_output_gate: false,
            decoder_layers: 0,
            attention: false,
        }
    }

    pub fn with_vocab(mut self, vocab: usize) -> Self {
        self.vocab_size = vocab;
        self
    }

    pub fn with_input_size(mut self, input: usize) -> Self {
        self.input_size = Some(input);
        self
    }

    pub fn with_input_length(mut self, t: usize) -> Self {
        self.input_length = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden_size == 0 {
            return bad("hidden_size must be positive".into());
        }
        if self.num_layers == 0 {
            return bad("num_layers must be positive".into());
        }
        if self.input_length == 0 {
            return bad("input_length must be positive".into());
        }
        if self.input_size == Some(0) {
            return bad("input_size must be positive".into());
        }
        if !matches!(self.element_bytes, 2 | 4 | 8) {
            return bad(format!("element_bytes must be 2, 4 or 8, got {}", self.element_bytes));
        }
        if let Some(sizes) = &self.layer_sizes {
            if sizes.len() != self.num_layers {
                return bad(format!("layer_sizes has {} entries but num_layers is {}", sizes.len(), self.num_layers));
            }
            if sizes.contains(&0) {
                return bad("layer_sizes entries must be positive".into());
            }
        }
        if self.decoder_layers > self.num_layers {
            return bad("decoder_layers exceeds num_layers".into());
        }
        if self.attention && self.decoder_layers == 0 {
            return bad("attention requires at least one decoder layer".into());
        }
        Ok(())
    }

    pub fn gates(&self) -> usize {
        self.cell_type.gates()
    }

    pub fn layer_hidden(&self, layer: usize) -> usize {
        match &self.layer_sizes {
            Some(sizes) => sizes[layer],
            None => self.hidden_size,
        }
    }

    /// Width of the network input `x_t`.
    pub fn input_width(&self) -> usize {
        self.input_size.unwrap_or_else(|| self.layer_hidden(0))
    }

    pub fn output_width(&self) -> usize {
        self.layer_hidden(self.num_layers - 1)
    }

    pub fn layer_dims(&self) -> Vec<LayerDims> {
        (0..self.num_layers)
            .map(|l| LayerDims {
                input: if l == 0 { self.input_width() } else { self.layer_hidden(l - 1) },
                hidden: self.layer_hidden(l),
                gates: self.gates(),
            })
            .collect()
    }

    /// Whether a layer may use the precomputed input products.
    pub fn is_decoder_layer(&self, layer: usize) -> bool {
        layer + self.decoder_layers >= self.num_layers
    }

    pub fn first_decoder_layer(&self) -> Option<usize> {
        (self.decoder_layers > 0).then(|| self.num_layers - self.decoder_layers)
    }

    pub fn g_bytes(&self, layer: usize) -> u64 {
        let d = self.layer_dims()[layer];
        (d.g1_elems() + d.g2_elems()) * self.element_bytes as u64
    }

    /// Closed form of all weight bytes: every layer's G plus embedding,
    /// softmax and attention weights.
    pub fn weight_bytes(&self) -> u64 {
        let eb = self.element_bytes as u64;
        let v = self.vocab_size as u64;
        let gates: u64 = self.layer_dims().iter().map(|d| (d.input + d.hidden) as u64 * d.gate_width() as u64).sum();
        let vocab = v * self.input_width() as u64 + self.output_width() as u64 * v;
        gates * eb + vocab * eb + self.attention_elems() * eb
    }

    pub(crate) fn attention_elems(&self) -> u64 {
        match (self.attention, self.first_decoder_layer()) {
            (true, Some(l)) => {
                let n = self.layer_hidden(l) as u64;
                n * n
            }
            _ => 0,
        }
    }
}

/// Role of a tensor in the simulated address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TensorRole {
    /// G1: input weights `[n_in x g*n]`.
    InputWeight,
    /// G2: recurrent weights `[n x g*n]`.
    RecurrentWeight,
    Embedding,
    SoftmaxWeight,
    AttentionWeight,
    /// Network input sequence `[T x n_in]`, present when there is no embedding.
    InputVector,
    /// Per-layer hidden sequence `[(T+1) x n]`; row 0 is the zero initial state.
    HiddenState,
    CellState,
    /// X': input products for all steps `[T x g*n_max]`, shared by layers.
    PrecomputedInput,
    GateBuffer,
    AttentionContext,
    Logits,
}

impl TensorRole {
    pub fn is_weight(self) -> bool {
        matches!(
            self,
            TensorRole::InputWeight
                | TensorRole::RecurrentWeight
                | TensorRole::Embedding
                | TensorRole::SoftmaxWeight
                | TensorRole::AttentionWeight
        )
    }

    /// Tensors whose contents exist before the trace starts.
    pub fn is_predefined(self) -> bool {
        self.is_weight() || self == TensorRole::InputVector
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TensorRole::InputWeight => "G1",
            TensorRole::RecurrentWeight => "G2",
            TensorRole::Embedding => "embedding",
            TensorRole::SoftmaxWeight => "softmax",
            TensorRole::AttentionWeight => "attention",
            TensorRole::InputVector => "input",
            TensorRole::HiddenState => "h",
            TensorRole::CellState => "c",
            TensorRole::PrecomputedInput => "X'",
            TensorRole::GateBuffer => "gates",
            TensorRole::AttentionContext => "context",
            TensorRole::Logits => "logits",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorHandle {
    pub id: usize,
    pub role: TensorRole,
    pub layer: Option<usize>,
    pub rows: usize,
    pub cols: usize,
    pub base_address: u64,
    pub byte_len: u64,
}

impl TensorHandle {
    pub fn end_address(&self) -> u64 {
        self.base_address + self.byte_len
    }

    pub fn row_bytes(&self, element_bytes: usize) -> u64 {
        (self.cols * element_bytes) as u64
    }
}

/// Tensor ids of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTensors {
    pub g1: usize,
    pub g2: usize,
    pub hidden: usize,
    pub cell: Option<usize>,
    pub gates: usize,
}

/// Deterministic address-space layout of every tensor either schedule touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorTable {
    pub element_bytes: usize,
    pub handles: Vec<TensorHandle>,
    pub layers: Vec<LayerTensors>,
    pub embedding: Option<usize>,
    pub softmax: Option<usize>,
    pub attention: Option<usize>,
    pub input: Option<usize>,
    pub precomputed: usize,
    pub context: Option<usize>,
    pub logits: Option<usize>,
}

struct Allocator {
    next: u64,
    eb: usize,
    handles: Vec<TensorHandle>,
}

impl Allocator {
    fn alloc(&mut self, role: TensorRole, layer: Option<usize>, rows: usize, cols: usize) -> usize {
        let id = self.handles.len();
        let byte_len = (rows * cols * self.eb) as u64;
        self.handles.push(TensorHandle { id, role, layer, rows, cols, base_address: self.next, byte_len });
        self.next = (self.next + byte_len).div_ceil(TENSOR_ALIGN) * TENSOR_ALIGN;
        id
    }
}

impl TensorTable {
    /// Lays out tensors in declaration order: weights first, then inputs and
    /// per-layer state, then the shared buffers.
    pub fn layout(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.layer_dims();
        let t = config.input_length;
        let v = config.vocab_size;
        let mut a = Allocator { next: 0, eb: config.element_bytes, handles: Vec::new() };

        let mut weights = Vec::with_capacity(dims.len());
        for (l, d) in dims.iter().enumerate() {
            let g1 = a.alloc(TensorRole::InputWeight, Some(l), d.input, d.gate_width());
            let g2 = a.alloc(TensorRole::RecurrentWeight, Some(l), d.hidden, d.gate_width());
            weights.push((g1, g2));
        }
        let attention = config.attention_elems().gt(&0).then(|| {
            let l = config.first_decoder_layer().unwrap_or(0);
            let n = config.layer_hidden(l);
            a.alloc(TensorRole::AttentionWeight, Some(l), n, n)
        });
        let embedding = (v > 0).then(|| a.alloc(TensorRole::Embedding, None, v, config.input_width()));
        let softmax = (v > 0).then(|| a.alloc(TensorRole::SoftmaxWeight, None, config.output_width(), v));

        let input = (v == 0).then(|| a.alloc(TensorRole::InputVector, None, t, config.input_width()));
        let mut layers = Vec::with_capacity(dims.len());
        for (l, d) in dims.iter().enumerate() {
            let hidden = a.alloc(TensorRole::HiddenState, Some(l), t + 1, d.hidden);
            let cell =
                (config.cell_type == CellType::LSTM).then(|| a.alloc(TensorRole::CellState, Some(l), 1, d.hidden));
            let gates = a.alloc(TensorRole::GateBuffer, Some(l), 1, d.gate_width());
            let (g1, g2) = weights[l];
            layers.push(LayerTensors { g1, g2, hidden, cell, gates });
        }
        let widest = dims.iter().map(|d| d.gate_width()).max().unwrap_or(0);
        let precomputed = a.alloc(TensorRole::PrecomputedInput, None, t, widest);
        let context = attention.map(|att| {
            let n = a.handles[att].rows;
            a.alloc(TensorRole::AttentionContext, a.handles[att].layer, 1, n)
        });
        let logits = (v > 0).then(|| a.alloc(TensorRole::Logits, None, 1, v));

        Ok(Self {
            element_bytes: config.element_bytes,
            handles: a.handles,
            layers,
            embedding,
            softmax,
            attention,
            input,
            precomputed,
            context,
            logits,
        })
    }

    pub fn get(&self, id: usize) -> Result<&TensorHandle> {
        self.handles.get(id).ok_or(Error::UnknownTensor(id))
    }

    pub fn handle(&self, id: usize) -> &TensorHandle {
        &self.handles[id]
    }

    /// Tensor containing the byte at `address`, if any.
    pub fn owner_of(&self, address: u64) -> Option<&TensorHandle> {
        let idx = self.handles.partition_point(|h| h.base_address <= address);
        let h = self.handles.get(idx.checked_sub(1)?)?;
        (address < h.end_address()).then_some(h)
    }

    pub fn total_weight_bytes(&self) -> u64 {
        self.handles.iter().filter(|h| h.role.is_weight()).map(|h| h.byte_len).sum()
    }

    pub fn address_space_end(&self) -> u64 {
        self.handles.last().map_or(0, |h| h.end_address())
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} values cannot fill a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let data =
            (0..rows * cols).map(|_| F::from(rng.gen_range(-WEIGHT_INIT_RANGE..=WEIGHT_INIT_RANGE)).unwrap()).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }
}

/// Row-wise stack of input weights over recurrent weights.
pub fn concat_g<F: Float>(g1: &Matrix<F>, g2: &Matrix<F>) -> Result<Matrix<F>> {
    if g1.cols != g2.cols {
        return Err(Error::Dimension(format!("G1 has {} columns but G2 has {}", g1.cols, g2.cols)));
    }
    let mut data = Vec::with_capacity(g1.data.len() + g2.data.len());
    data.extend_from_slice(&g1.data);
    data.extend_from_slice(&g2.data);
    Ok(Matrix { rows: g1.rows + g2.rows, cols: g1.cols, data })
}

/// Splits G after its first `input_rows` rows.
pub fn split_g<F: Float>(g: &Matrix<F>, input_rows: usize) -> Result<(Matrix<F>, Matrix<F>)> {
    if input_rows == 0 || input_rows >= g.rows {
        return Err(Error::Dimension(format!("cannot split {} rows after row {input_rows}", g.rows)));
    }
    let at = input_rows * g.cols;
    let g1 = Matrix { rows: input_rows, cols: g.cols, data: g.data[..at].to_vec() };
    let g2 = Matrix { rows: g.rows - input_rows, cols: g.cols, data: g.data[at..].to_vec() };
    Ok((g1, g2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<F> {
    pub g1: Matrix<F>,
    pub g2: Matrix<F>,
}

impl<F: Float> LayerWeights<F> {
    pub fn concat(&self) -> Matrix<F> {
        concat_g(&self.g1, &self.g2).expect("layer weights share a column count")
    }
}

/// Numeric weights of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<F> {
    pub cell_type: CellType,
    pub standard_output_gate: bool,
    pub layers: Vec<LayerWeights<F>>,
    /// `[V x n_in]`
    pub embedding: Option<Matrix<F>>,
    /// `[n_L x V]`
    pub softmax: Option<Matrix<F>>,
}

impl<F: Float> WeightSet<F> {
    /// Weights drawn uniformly from `[-0.1, 0.1]` by a seeded generator.
    pub fn random(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_dims()
            .iter()
            .map(|d| LayerWeights {
                g1: Matrix::random(d.input, d.gate_width(), &mut rng),
                g2: Matrix::random(d.hidden, d.gate_width(), &mut rng),
            })
            .collect();
        let v = config.vocab_size;
        let embedding = (v > 0).then(|| Matrix::random(v, config.input_width(), &mut rng));
        let softmax = (v > 0).then(|| Matrix::random(config.output_width(), v, &mut rng));
        Ok(Self {
            cell_type: config.cell_type,
            standard_output_gate: config.standard_output_gate,
            layers,
            embedding,
            softmax,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].g1.rows()
    }

    pub fn hidden(&self, layer: usize) -> usize {
        self.layers[layer].g2.rows()
    }
}

/// Builds the tensor layout and seeded weights for a config.
pub fn build_network<F: Float>(config: &NetworkConfig, seed: u64) -> Result<(TensorTable, WeightSet<F>)> {
    Ok((TensorTable::layout(config)?, WeightSet::random(config, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lstm(n: usize) -> NetworkConfig {
        NetworkConfig::new(CellType::LSTM, n, 1, 1)
    }

    #[test]
    fn lstm_unit_shapes() {
        let (table, w) = build_network::<f32>(&lstm(2), 1).unwrap();
        assert_eq!(w.layers[0].g1.shape(), (2, 8));
        assert_eq!(w.layers[0].g2.shape(), (2, 8));
        let g1 = table.handle(table.layers[0].g1);
        assert_eq!((g1.rows, g1.cols), (2, 8));
    }

    #[test]
    fn gru_unit_shapes() {
        let cfg = NetworkConfig::new(CellType::GRU, 3, 1, 1);
        let (_, w) = build_network::<f32>(&cfg, 1).unwrap();
        assert_eq!(w.layers[0].g1.shape(), (3, 9));
        assert!(w.layers[0].g1.as_slice().iter().all(|x| x.abs() <= 0.1));
    }

    #[test]
    fn g_of_512_lstm_is_8_mib() {
        let cfg = lstm(512).with_input_size(512);
        assert_eq!(cfg.g_bytes(0), 8 << 20);
        let table = TensorTable::layout(&cfg).unwrap();
        assert_eq!(table.total_weight_bytes(), 8 << 20);
        assert_eq!(cfg.weight_bytes(), 8 << 20);
    }

    #[test]
    fn concat_of_512_lstm_is_1024_by_2048() {
        let w = WeightSet::<f32>::random(&lstm(512), 3).unwrap();
        let g = w.layers[0].concat();
        assert_eq!(g.shape(), (1024, 2048));
        let (g1, g2) = split_g(&g, 512).unwrap();
        assert_eq!(g1.shape(), (512, 2048));
        assert_eq!(g2.shape(), (512, 2048));
    }

    #[test]
    fn concat_stacks_rows() {
        let g1 = Matrix::from_rows(&[vec![1.0f32, 2.0]]).unwrap();
        let g2 = Matrix::from_rows(&[vec![3.0f32, 4.0]]).unwrap();
        let g = concat_g(&g1, &g2).unwrap();
        assert_eq!(g, Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    }

    #[test]
    fn concat_rejects_column_mismatch() {
        let g1 = Matrix::<f32>::zeros(1, 2);
        let g2 = Matrix::<f32>::zeros(1, 3);
        assert!(matches!(concat_g(&g1, &g2), Err(Error::Dimension(_))));
    }

    #[test]
    fn split_two_by_one() {
        let g = Matrix::from_rows(&[vec![5.0f64], vec![6.0]]).unwrap();
        let (a, b) = split_g(&g, 1).unwrap();
        assert_eq!(a.shape(), (1, 1));
        assert_eq!(b.get(0, 0), 6.0);
    }

    #[test]
    fn split_rejects_too_many_input_rows() {
        let g = Matrix::<f32>::zeros(2, 4);
        assert!(split_g(&g, 2).is_err());
        assert!(split_g(&g, 0).is_err());
    }

    #[test]
    fn rejects_layer_size_mismatch_and_zero_dims() {
        let mut cfg = lstm(4);
        cfg.layer_sizes = Some(vec![4, 4]);
        assert!(matches!(build_network::<f32>(&cfg, 0), Err(Error::InvalidConfig(_))));
        let mut cfg = lstm(4);
        cfg.layer_sizes = Some(vec![0]);
        assert!(cfg.validate().is_err());
        assert!(lstm(0).validate().is_err());
        assert!(NetworkConfig::new(CellType::GRU, 4, 0, 1).validate().is_err());
        assert!(NetworkConfig::new(CellType::GRU, 4, 1, 0).validate().is_err());
        let mut cfg = lstm(4);
        cfg.element_bytes = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn layout_is_aligned_and_disjoint() {
        let mut cfg = NetworkConfig::new(CellType::LSTM, 33, 3, 7).with_vocab(60);
        cfg.layer_sizes = Some(vec![33, 17, 5]);
        let table = TensorTable::layout(&cfg).unwrap();
        for pair in table.handles.windows(2) {
            assert!(pair[0].end_address() <= pair[1].base_address);
            assert_eq!(pair[1].base_address % TENSOR_ALIGN, 0);
        }
        assert_eq!(table.total_weight_bytes(), cfg.weight_bytes());
        let h = table.handle(table.layers[1].hidden);
        assert_eq!(table.owner_of(h.base_address + 3).unwrap().id, h.id);
        assert!(table.owner_of(table.address_space_end() + 10).is_none());
    }

    #[test]
    fn config_json_field_names() {
        let json = r#"{"cell_type":"GRU","hidden_size":8,"num_layers":2,"input_length":5}"#;
        let cfg: NetworkConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.element_bytes, 4);
        assert!(cfg.softmax_every_step);
        assert_eq!(cfg.input_width(), 8);
        let back: NetworkConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
