//! Next-location classifier with exact gradients.
//!
//! The model maps a window of `k` planar locations to logits over `G` grid
//! cells:
//!
//! ```text
//! u      = flatten(inputs / coordinate_scale)          (2k)
//! h      = tanh(W1 u + b1)                             (H)
//! logits = W2 h + b2                                   (G)
//! loss   = -Σ q_i ln softmax(logits)_i
//! ```
//!
//! where `q` is either a one-hot cell or `softmax(y)` for a free dummy label
//! `y`. Besides the parameter gradient, [`attack_gradient`] differentiates the
//! gradient-matching distance `‖∇w(x, y) − ∇w*‖²` with respect to the inputs
//! and the dummy label, which needs a second reverse pass through the
//! parameter gradient.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BBox, Location};

/// Shape of the model plus the input normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "k")]
    pub window_len: usize,
    #[serde(rename = "H")]
    pub hidden_units: usize,
    #[serde(rename = "G")]
    pub num_cells: usize,
    pub coordinate_scale: f64,
}

impl ModelSpec {
    pub fn new(
        window_len: usize,
        hidden_units: usize,
        num_cells: usize,
        coordinate_scale: f64,
    ) -> Result<Self> {
        let spec = ModelSpec {
            window_len,
            hidden_units,
            num_cells,
            coordinate_scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 1 {
            return Err(Error::config("window_len k must be >= 1"));
        }
        if self.hidden_units < 1 {
            return Err(Error::config("hidden_units H must be >= 1"));
        }
        if self.num_cells < 2 {
            return Err(Error::config("num_cells G must be >= 2"));
        }
        if !(self.coordinate_scale > 0.0 && self.coordinate_scale.is_finite()) {
            return Err(Error::config(
                "coordinate_scale must be positive and finite",
            ));
        }
        Ok(())
    }

    /// Width of the flattened input, `2k`.
    pub fn input_dim(&self) -> usize {
        2 * self.window_len
    }

    pub fn num_params(&self) -> usize {
        let (h, g, d) = (self.hidden_units, self.num_cells, self.input_dim());
        h * d + h + g * h + g
    }

    fn layout(&self) -> Layout {
        let (h, g, d) = (self.hidden_units, self.num_cells, self.input_dim());
        let b1 = h * d;
        let w2 = b1 + h;
        let b2 = w2 + g * h;
        Layout { b1, w2, b2 }
    }

    /// Human-readable name of a flat parameter index.
    pub fn component_name(&self, idx: usize) -> String {
        let l = self.layout();
        let d = self.input_dim();
        let h = self.hidden_units;
        if idx < l.b1 {
            format!("W1[{},{}]", idx / d, idx % d)
        } else if idx < l.w2 {
            format!("b1[{}]", idx - l.b1)
        } else if idx < l.b2 {
            let j = idx - l.w2;
            format!("W2[{},{}]", j / h, j % h)
        } else {
            format!("b2[{}]", idx - l.b2)
        }
    }
}

/// Offsets of the parameter blocks inside the flat vector (W1 starts at 0).
#[derive(Debug, Clone, Copy)]
struct Layout {
    b1: usize,
    w2: usize,
    b2: usize,
}

/// Flat parameter vector in `W1, b1, W2, b2` order (matrices row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams(pub Vec<f64>);

/// Gradient with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVec(pub Vec<f64>);

impl ModelParams {
    pub fn zeros(spec: &ModelSpec) -> Self {
        ModelParams(vec![0.0; spec.num_params()])
    }

    /// Gaussian init scaled by fan-in; biases start at zero.
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Self {
        let l = spec.layout();
        let mut v = vec![0.0; spec.num_params()];
        let n1 = Normal::new(0.0, (1.0 / spec.input_dim() as f64).sqrt()).expect("valid std");
        let n2 = Normal::new(0.0, (1.0 / spec.hidden_units as f64).sqrt()).expect("valid std");
        for w in &mut v[..l.b1] {
            *w = n1.sample(rng);
        }
        for w in &mut v[l.w2..l.b2] {
            *w = n2.sample(rng);
        }
        ModelParams(v)
    }

    pub fn from_vec(spec: &ModelSpec, v: Vec<f64>) -> Result<Self> {
        check_len(spec, v.len(), "params")?;
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::numeric(
                spec.component_name(i),
                "non-finite parameter",
            ));
        }
        Ok(ModelParams(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        f64s_to_le_bytes(&self.0)
    }

    pub fn from_le_bytes(spec: &ModelSpec, bytes: &[u8]) -> Result<Self> {
        ModelParams::from_vec(spec, f64s_from_le_bytes(bytes)?)
    }

    /// JSON sidecar describing the shape of a serialized parameter array.
    pub fn sidecar_json(spec: &ModelSpec) -> String {
        serde_json::to_string(spec).expect("spec serializes")
    }

    /// `self − rate · grad`.
    pub fn sgd_step(&self, grad: &GradientVec, rate: f64) -> ModelParams {
        ModelParams(
            self.0
                .iter()
                .zip(&grad.0)
                .map(|(p, g)| p - rate * g)
                .collect(),
        )
    }
}

impl GradientVec {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        f64s_to_le_bytes(&self.0)
    }

    pub fn from_le_bytes(spec: &ModelSpec, bytes: &[u8]) -> Result<Self> {
        let v = f64s_from_le_bytes(bytes)?;
        check_len(spec, v.len(), "gradient")?;
        Ok(GradientVec(v))
    }
}

pub fn f64s_to_le_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn f64s_from_le_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::input(format!(
            "byte length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn check_len(spec: &ModelSpec, len: usize, what: &str) -> Result<()> {
    if len != spec.num_params() {
        return Err(Error::config(format!(
            "{what} length {len} does not match model size {}",
            spec.num_params()
        )));
    }
    Ok(())
}

/// Target of the cross-entropy loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Label {
    /// Ground-truth cell index.
    Cell(usize),
    /// Free real vector; the target distribution is its softmax.
    Soft(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingWindow {
    pub inputs: Vec<Location>,
    pub label: Label,
}

impl TrainingWindow {
    pub fn new(inputs: Vec<Location>, label: Label) -> Self {
        TrainingWindow { inputs, label }
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        check_inputs(spec, &self.inputs)?;
        match &self.label {
            Label::Cell(c) if *c >= spec.num_cells => Err(Error::input(format!(
                "label cell {c} out of range for G = {}",
                spec.num_cells
            ))),
            Label::Soft(v) if v.len() != spec.num_cells => Err(Error::config(format!(
                "soft label length {} differs from G = {}",
                v.len(),
                spec.num_cells
            ))),
            _ => Ok(()),
        }
    }

    /// Target distribution `q`.
    pub fn target(&self, spec: &ModelSpec) -> Vec<f64> {
        match &self.label {
            Label::Cell(c) => {
                let mut q = vec![0.0; spec.num_cells];
                q[*c] = 1.0;
                q
            }
            Label::Soft(y) => softmax(y),
        }
    }
}

fn check_inputs(spec: &ModelSpec, inputs: &[Location]) -> Result<()> {
    if inputs.len() != spec.window_len {
        return Err(Error::config(format!(
            "window has {} inputs, model expects k = {}",
            inputs.len(),
            spec.window_len
        )));
    }
    Ok(())
}

fn check_params(spec: &ModelSpec, params: &ModelParams) -> Result<()> {
    check_len(spec, params.len(), "params")
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Inputs divided by the coordinate scale and flattened as `x0, y0, x1, y1, …`.
pub fn normalize_inputs(spec: &ModelSpec, inputs: &[Location]) -> Vec<f64> {
    inputs
        .iter()
        .flat_map(|l| [l.x / spec.coordinate_scale, l.y / spec.coordinate_scale])
        .collect()
}

/// Cached activations of one forward pass.
struct Activations {
    u: Vec<f64>,
    h: Vec<f64>,
    logits: Vec<f64>,
}

fn forward_normalized(spec: &ModelSpec, w: &[f64], u: Vec<f64>) -> Activations {
    let (hd, g, d) = (spec.hidden_units, spec.num_cells, spec.input_dim());
    let l = spec.layout();
    let w1 = &w[..l.b1];
    let b1 = &w[l.b1..l.w2];
    let w2 = &w[l.w2..l.b2];
    let b2 = &w[l.b2..];
    let h: Vec<f64> = (0..hd)
        .map(|i| {
            let row = &w1[i * d..(i + 1) * d];
            (b1[i] + row.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()).tanh()
        })
        .collect();
    let logits = (0..g)
        .map(|c| {
            let row = &w2[c * hd..(c + 1) * hd];
            b2[c] + row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    Activations { u, h, logits }
}

/// Logits for a window of inputs.
pub fn forward(spec: &ModelSpec, params: &ModelParams, inputs: &[Location]) -> Result<Vec<f64>> {
    check_params(spec, params)?;
    check_inputs(spec, inputs)?;
    Ok(forward_normalized(spec, &params.0, normalize_inputs(spec, inputs)).logits)
}

/// Cross-entropy of `softmax(logits)` against the window's target distribution.
pub fn loss(spec: &ModelSpec, params: &ModelParams, window: &TrainingWindow) -> Result<f64> {
    check_params(spec, params)?;
    window.validate(spec)?;
    let act = forward_normalized(spec, &params.0, normalize_inputs(spec, &window.inputs));
    let logp = log_softmax(&act.logits);
    let q = window.target(spec);
    Ok(-q.iter().zip(&logp).map(|(q, lp)| q * lp).sum::<f64>())
}

/// Intermediate quantities of the backward pass that the second-order pass reuses.
struct Backward {
    act: Activations,
    /// `softmax(logits)`
    p: Vec<f64>,
    /// target distribution
    q: Vec<f64>,
    /// `W2ᵀ r`
    m: Vec<f64>,
    /// `(1 − h²) ⊙ m`, the hidden pre-activation gradient
    delta: Vec<f64>,
}

fn backward(spec: &ModelSpec, w: &[f64], u: Vec<f64>, q: Vec<f64>, grad: &mut [f64]) -> Backward {
    let (hd, g, d) = (spec.hidden_units, spec.num_cells, spec.input_dim());
    let l = spec.layout();
    let act = forward_normalized(spec, w, u);
    let p = softmax(&act.logits);
    let w2 = &w[l.w2..l.b2];

    let r: Vec<f64> = p.iter().zip(&q).map(|(p, q)| p - q).collect();
    let mut m = vec![0.0; hd];
    for c in 0..g {
        grad[l.b2 + c] = r[c];
        for i in 0..hd {
            grad[l.w2 + c * hd + i] = r[c] * act.h[i];
            m[i] += w2[c * hd + i] * r[c];
        }
    }
    let delta: Vec<f64> = (0..hd)
        .map(|i| (1.0 - act.h[i] * act.h[i]) * m[i])
        .collect();
    for i in 0..hd {
        grad[l.b1 + i] = delta[i];
        for j in 0..d {
            grad[i * d + j] = delta[i] * act.u[j];
        }
    }
    Backward {
        act,
        p,
        q,
        m,
        delta,
    }
}

fn check_finite(spec: &ModelSpec, grad: &[f64]) -> Result<()> {
    match grad.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::numeric(
            spec.component_name(i),
            "non-finite gradient entry",
        )),
        None => Ok(()),
    }
}

/// Exact gradient of [`loss`] with respect to every parameter.
pub fn param_gradient(
    spec: &ModelSpec,
    params: &ModelParams,
    window: &TrainingWindow,
) -> Result<GradientVec> {
    check_params(spec, params)?;
    window.validate(spec)?;
    let mut grad = vec![0.0; spec.num_params()];
    backward(
        spec,
        &params.0,
        normalize_inputs(spec, &window.inputs),
        window.target(spec),
        &mut grad,
    );
    check_finite(spec, &grad)?;
    Ok(GradientVec(grad))
}

/// Gradient-matching distance and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackGradient {
    /// `D = ‖∇w(x, y) − ∇w*‖²`
    pub distance: f64,
    /// `∂D/∂x` per input location, in meters⁻¹ units of the raw coordinates.
    pub d_inputs: Vec<Location>,
    /// `∂D/∂y` for the dummy label vector.
    pub d_label: Vec<f64>,
}

fn check_attack_args(
    spec: &ModelSpec,
    params: &ModelParams,
    inputs: &[Location],
    label: &[f64],
    true_grad: &GradientVec,
) -> Result<()> {
    check_params(spec, params)?;
    check_inputs(spec, inputs)?;
    check_len(spec, true_grad.len(), "true gradient")?;
    if label.len() != spec.num_cells {
        return Err(Error::config(format!(
            "dummy label length {} differs from G = {}",
            label.len(),
            spec.num_cells
        )));
    }
    Ok(())
}

/// `‖∇w(x, y) − ∇w*‖²` without its gradients.
pub fn gradient_distance(
    spec: &ModelSpec,
    params: &ModelParams,
    inputs: &[Location],
    label: &[f64],
    true_grad: &GradientVec,
) -> Result<f64> {
    check_attack_args(spec, params, inputs, label, true_grad)?;
    Ok(distance_normalized(
        spec,
        params,
        normalize_inputs(spec, inputs),
        label,
        true_grad,
    ))
}

pub(crate) fn distance_normalized(
    spec: &ModelSpec,
    params: &ModelParams,
    u: Vec<f64>,
    label: &[f64],
    true_grad: &GradientVec,
) -> f64 {
    let mut grad = vec![0.0; spec.num_params()];
    backward(spec, &params.0, u, softmax(label), &mut grad);
    grad.iter()
        .zip(&true_grad.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Gradient of `D` with respect to the normalized inputs `u` and the label.
pub(crate) fn attack_gradient_normalized(
    spec: &ModelSpec,
    params: &ModelParams,
    u: Vec<f64>,
    label: &[f64],
    true_grad: &GradientVec,
) -> (f64, Vec<f64>, Vec<f64>) {
    let (hd, g, d) = (spec.hidden_units, spec.num_cells, spec.input_dim());
    let l = spec.layout();
    let w = &params.0;
    let w1 = &w[..l.b1];
    let w2 = &w[l.w2..l.b2];

    let mut grad = vec![0.0; spec.num_params()];
    let bw = backward(spec, w, u, softmax(label), &mut grad);
    let h = &bw.act.h;
    let uvec = &bw.act.u;

    // adjoint of the parameter gradient: ē = 2 (∇w − ∇w*)
    let e: Vec<f64> = grad.iter().zip(&true_grad.0).map(|(a, b)| a - b).collect();
    let distance: f64 = e.iter().map(|v| v * v).sum();
    let ebar: Vec<f64> = e.iter().map(|v| 2.0 * v).collect();

    let mut u_bar = vec![0.0; d];
    let mut delta_bar = vec![0.0; hd];
    // gW1 = δ uᵀ, gb1 = δ
    for i in 0..hd {
        let row = &ebar[i * d..(i + 1) * d];
        delta_bar[i] = ebar[l.b1 + i] + row.iter().zip(uvec).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..d {
            u_bar[j] += row[j] * bw.delta[i];
        }
    }
    // δ = (1 − h²) ⊙ m, m = W2ᵀ r
    let mut h_bar = vec![0.0; hd];
    let mut m_bar = vec![0.0; hd];
    for i in 0..hd {
        m_bar[i] = delta_bar[i] * (1.0 - h[i] * h[i]);
        h_bar[i] = -2.0 * h[i] * delta_bar[i] * bw.m[i];
    }
    // r̄ from m = W2ᵀ r, gW2 = r hᵀ and gb2 = r; h̄ from gW2
    let r: Vec<f64> = bw.p.iter().zip(&bw.q).map(|(p, q)| p - q).collect();
    let mut r_bar = vec![0.0; g];
    for c in 0..g {
        let row = &w2[c * hd..(c + 1) * hd];
        let erow = &ebar[l.w2 + c * hd..l.w2 + (c + 1) * hd];
        r_bar[c] = ebar[l.b2 + c]
            + row.iter().zip(&m_bar).map(|(a, b)| a * b).sum::<f64>()
            + erow.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..hd {
            h_bar[i] += erow[i] * r[c];
        }
    }
    // r = p − q; both sides are softmax outputs
    let softmax_vjp = |s: &[f64], s_bar: &[f64]| -> Vec<f64> {
        let dot: f64 = s.iter().zip(s_bar).map(|(a, b)| a * b).sum();
        s.iter().zip(s_bar).map(|(s, sb)| s * (sb - dot)).collect()
    };
    let z_bar = softmax_vjp(&bw.p, &r_bar);
    let neg_r_bar: Vec<f64> = r_bar.iter().map(|v| -v).collect();
    let label_bar = softmax_vjp(&bw.q, &neg_r_bar);
    // logits = W2 h + b2
    for c in 0..g {
        let row = &w2[c * hd..(c + 1) * hd];
        for i in 0..hd {
            h_bar[i] += row[i] * z_bar[c];
        }
    }
    // h = tanh(W1 u + b1)
    for i in 0..hd {
        let a_bar = h_bar[i] * (1.0 - h[i] * h[i]);
        let row = &w1[i * d..(i + 1) * d];
        for j in 0..d {
            u_bar[j] += row[j] * a_bar;
        }
    }
    (distance, u_bar, label_bar)
}

/// Exact gradient of `D(x, y) = ‖∇w(x, y) − ∇w*‖²` with respect to the dummy
/// inputs (raw coordinates) and the dummy label vector.
pub fn attack_gradient(
    spec: &ModelSpec,
    params: &ModelParams,
    inputs: &[Location],
    label: &[f64],
    true_grad: &GradientVec,
) -> Result<AttackGradient> {
    check_attack_args(spec, params, inputs, label, true_grad)?;
    let (distance, u_bar, label_bar) = attack_gradient_normalized(
        spec,
        params,
        normalize_inputs(spec, inputs),
        label,
        true_grad,
    );
    if !distance.is_finite() {
        return Err(Error::numeric("D", "non-finite gradient distance"));
    }
    if let Some(i) = u_bar.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("d_inputs[{}]", i / 2), "non-finite"));
    }
    if let Some(i) = label_bar.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("d_label[{i}]"), "non-finite"));
    }
    let s = spec.coordinate_scale;
    let d_inputs = u_bar
        .chunks_exact(2)
        .map(|c| Location::new(c[0] / s, c[1] / s))
        .collect();
    Ok(AttackGradient {
        distance,
        d_inputs,
        d_label: label_bar,
    })
}

/// Cell indices ordered by descending logit; ties keep the lower index first.
pub fn rank_cells(logits: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..logits.len()).collect();
    idx.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    idx
}

/// Fraction of `truths` found in the top `k` of the matching ranking.
pub fn recall_at_k(rankings: &[Vec<usize>], truths: &[usize], k: usize) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::input("recall@k needs at least one sample"));
    }
    if rankings.len() != truths.len() {
        return Err(Error::input(format!(
            "{} rankings but {} truths",
            rankings.len(),
            truths.len()
        )));
    }
    let hits = rankings
        .iter()
        .zip(truths)
        .filter(|(r, t)| r.iter().take(k).any(|c| c == *t))
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Equal-size partition of a bounding box into `cols × rows` cells, numbered
/// row-major from the minimum corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub bbox: BBox,
    pub cols: usize,
    pub rows: usize,
}

impl CellGrid {
    pub fn new(bbox: BBox, cols: usize, rows: usize) -> Result<Self> {
        if cols * rows < 2 {
            return Err(Error::config("cell grid needs at least 2 cells"));
        }
        if bbox.width() <= 0.0 && bbox.height() <= 0.0 {
            return Err(Error::config(
                "cell grid needs a non-degenerate bounding box",
            ));
        }
        Ok(CellGrid { bbox, cols, rows })
    }

    pub fn num_cells(&self) -> usize {
        self.cols * self.rows
    }

    /// Cell containing `loc`; points outside the box go to the nearest border cell.
    pub fn cell_of(&self, loc: &Location) -> usize {
        let idx = |v: f64, lo: f64, extent: f64, n: usize| -> usize {
            if extent <= 0.0 {
                return 0;
            }
            let f = ((v - lo) / extent * n as f64).floor();
            (f.max(0.0) as usize).min(n - 1)
        };
        let c = idx(loc.x, self.bbox.min.x, self.bbox.width(), self.cols);
        let r = idx(loc.y, self.bbox.min.y, self.bbox.height(), self.rows);
        r * self.cols + c
    }

    pub fn cell_center(&self, cell: usize) -> Location {
        let (r, c) = (cell / self.cols, cell % self.cols);
        Location::new(
            self.bbox.min.x + (c as f64 + 0.5) * self.bbox.width() / self.cols as f64,
            self.bbox.min.y + (r as f64 + 0.5) * self.bbox.height() / self.rows as f64,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, Stream};
    use approx::assert_abs_diff_eq;

    fn spec() -> ModelSpec {
        ModelSpec::new(3, 5, 4, 1000.0).unwrap()
    }

    fn window(label: Label) -> TrainingWindow {
        TrainingWindow::new(
            vec![
                Location::new(120.0, 300.0),
                Location::new(-50.0, 640.0),
                Location::new(800.0, 10.0),
            ],
            label,
        )
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(0, 1, 2, 1.0).is_err());
        assert!(ModelSpec::new(1, 0, 2, 1.0).is_err());
        assert!(ModelSpec::new(1, 1, 1, 1.0).is_err());
        assert!(ModelSpec::new(1, 1, 2, 0.0).is_err());
        assert_eq!(spec().num_params(), 5 * 6 + 5 + 4 * 5 + 4);
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let s = spec();
        let logits = forward(&s, &ModelParams::zeros(&s), &window(Label::Cell(0)).inputs).unwrap();
        assert!(logits.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn constant_head_ignores_input() {
        let s = spec();
        let mut p = ModelParams::init(&s, &mut derive(1, Stream::Misc, &[]));
        let l = s.layout();
        for w in &mut p.0[l.w2..l.b2] {
            *w = 0.0;
        }
        for (c, b) in p.0[l.b2..].iter_mut().enumerate() {
            *b = c as f64 - 1.5;
        }
        let logits = forward(&s, &p, &window(Label::Cell(0)).inputs).unwrap();
        assert_eq!(logits, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn loss_reference_values() {
        let s = spec();
        let zero = ModelParams::zeros(&s);
        assert_abs_diff_eq!(
            loss(&s, &zero, &window(Label::Cell(2))).unwrap(),
            4f64.ln(),
            epsilon = 1e-12
        );

        let s2 = ModelSpec::new(3, 5, 2, 1000.0).unwrap();
        let l = loss(&s2, &ModelParams::zeros(&s2), &window(Label::Cell(0))).unwrap();
        assert_abs_diff_eq!(l, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn loss_equals_entropy_when_target_matches_prediction() {
        let s = spec();
        let p = ModelParams::init(&s, &mut derive(2, Stream::Misc, &[]));
        let w = window(Label::Cell(0));
        let logits = forward(&s, &p, &w.inputs).unwrap();
        let probs = softmax(&logits);
        let entropy: f64 = -probs.iter().map(|q| q * q.ln()).sum::<f64>();
        let soft = window(Label::Soft(logits));
        assert_abs_diff_eq!(loss(&s, &p, &soft).unwrap(), entropy, epsilon = 1e-12);
        assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn matched_soft_label_zeroes_head_gradient() {
        let s = spec();
        let zero = ModelParams::zeros(&s);
        let g = param_gradient(&s, &zero, &window(Label::Soft(vec![0.3; 4]))).unwrap();
        let l = s.layout();
        assert!(g.0[l.w2..].iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn normalization_cancels() {
        let s = spec();
        let s2 = ModelSpec {
            coordinate_scale: 2.0 * s.coordinate_scale,
            ..s
        };
        let p = ModelParams::init(&s, &mut derive(3, Stream::Misc, &[]));
        let w = window(Label::Cell(1));
        let w2 = TrainingWindow::new(
            w.inputs.iter().map(|l| l.scaled(2.0)).collect(),
            w.label.clone(),
        );
        let g1 = param_gradient(&s, &p, &w).unwrap();
        let g2 = param_gradient(&s2, &p, &w2).unwrap();
        for (a, b) in g1.0.iter().zip(&g2.0) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let s = spec();
        let p = ModelParams::zeros(&s);
        assert!(matches!(
            forward(&s, &p, &[Location::default()]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            forward(
                &s,
                &ModelParams(vec![0.0; 3]),
                &window(Label::Cell(0)).inputs
            ),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            param_gradient(&s, &p, &window(Label::Cell(9))),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn non_finite_gradient_names_component() {
        let s = spec();
        let mut p = ModelParams::zeros(&s);
        p.0[0] = f64::NAN;
        match param_gradient(&s, &p, &window(Label::Cell(0))) {
            Err(Error::Numeric { component, .. }) => assert!(
                component.starts_with("W1")
                    || component.starts_with("b1")
                    || component.starts_with("W2")
                    || component.starts_with("b2")
            ),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn attack_gradient_vanishes_at_truth() {
        let s = spec();
        let p = ModelParams::init(&s, &mut derive(4, Stream::Misc, &[]));
        let w = window(Label::Cell(2));
        let truth = param_gradient(&s, &p, &w).unwrap();
        // a very peaked soft label stands in for the one-hot target
        let mut y = vec![-40.0; 4];
        y[2] = 40.0;
        let ag = attack_gradient(&s, &p, &w.inputs, &y, &truth).unwrap();
        assert!(ag.distance < 1e-30);
        assert!(ag
            .d_inputs
            .iter()
            .all(|d| d.x.abs() < 1e-12 && d.y.abs() < 1e-12));
        assert!(ag.d_label.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn recall_counting() {
        let r = vec![vec![0, 1, 2], vec![1, 0, 2], vec![2, 1, 0]];
        assert_eq!(recall_at_k(&r, &[0, 1, 2], 1).unwrap(), 1.0);
        assert_eq!(recall_at_k(&r, &[2, 2, 0], 1).unwrap(), 0.0);
        let r5 = vec![(0..10).collect::<Vec<_>>(); 3];
        assert_abs_diff_eq!(
            recall_at_k(&r5, &[3, 9, 4], 5).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );
        assert!(recall_at_k(&[], &[], 5).is_err());
        assert!(recall_at_k(&r, &[0], 5).is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(rank_cells(&[0.5, 1.0, 0.5, -1.0]), vec![1, 0, 2, 3]);
    }

    #[test]
    fn byte_serialization() {
        let s = spec();
        let p = ModelParams::init(&s, &mut derive(5, Stream::Misc, &[]));
        let back = ModelParams::from_le_bytes(&s, &p.to_le_bytes()).unwrap();
        assert_eq!(p, back);
        assert!(ModelParams::from_le_bytes(&s, &[0u8; 7]).is_err());
        let side: serde_json::Value = serde_json::from_str(&ModelParams::sidecar_json(&s)).unwrap();
        assert_eq!(side["k"], 3);
        assert_eq!(side["H"], 5);
        assert_eq!(side["G"], 4);
        assert_eq!(side["coordinate_scale"], 1000.0);
    }

    #[test]
    fn cell_grid_assignment() {
        let bbox = BBox {
            min: Location::new(0.0, 0.0),
            max: Location::new(100.0, 100.0),
        };
        let grid = CellGrid::new(bbox, 4, 4).unwrap();
        assert_eq!(grid.cell_of(&Location::new(0.0, 0.0)), 0);
        assert_eq!(grid.cell_of(&Location::new(100.0, 100.0)), 15);
        assert_eq!(grid.cell_of(&Location::new(30.0, 60.0)), 2 * 4 + 1);
        assert_eq!(grid.cell_of(&Location::new(-10.0, 500.0)), 12);
        assert_eq!(grid.cell_of(&grid.cell_center(6)), 6);
    }
}
