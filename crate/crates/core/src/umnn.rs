//! Per-column learnable monotone maps.
//!
//! A [`MonotoneMap`] wraps a small scalar network `net` and exposes
//!
//! ```text
//! f(a) = softplus(net(a)) - ln 2        (bias enabled)
//! z(x) = integral of f from 0 to x
//! ```
//!
//! With the bias disabled `f` is strictly positive, so `z` is monotone
//! non-decreasing; with the bias enabled `f >= -ln 2`, which lets a fitted map
//! bend back when the supplied category ranking was wrong. The integral is
//! evaluated with fixed-order Gauss–Legendre quadrature on `[0, x]`, and
//! gradients with respect to the network parameters are obtained by applying
//! the same quadrature to `df/dtheta`, i.e. by differentiating under the
//! integral sign. `dz/dx` is `f(x)` exactly.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const LN_2: f64 = std::f64::consts::LN_2;

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic function; also the derivative of softplus.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Gauss–Legendre quadrature
// ---------------------------------------------------------------------------

/// Nodes and weights for Gauss–Legendre quadrature on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Computes the order-`n` rule by Newton iteration on the Legendre roots.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "quadrature order must be at least 1".into(),
            ));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev initial guess for the i-th positive root.
            let mut z = ((i as f64 + 0.75) / (n as f64 + 0.5) * std::f64::consts::PI).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_and_derivative(n, z);
                let step = p / dp;
                z -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_and_derivative(n, z);
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[lo, hi]` in a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * t);
        }
        half * acc
    }
}

/// Evaluates the Legendre polynomial `P_n` and its derivative at `x` via the
/// three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut curr = x;
    for k in 2..=n {
        let next = ((2 * k - 1) as f64 * x * curr - (k - 1) as f64 * prev) / k as f64;
        prev = curr;
        curr = next;
    }
    let dp = n as f64 * (x * curr - prev) / (x * x - 1.0);
    (curr, dp)
}

// ---------------------------------------------------------------------------
// Scalar network
// ---------------------------------------------------------------------------

/// A dense scalar-to-scalar network with softplus hidden activations and a
/// linear output. Parameters live in one flat vector so optimizers and
/// serializers can treat the whole map as a single parameter block.
///
/// Layout: for each layer, weights in row-major `(out, in)` order followed by
/// the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarNet {
    widths: Vec<usize>,
    theta: Vec<f64>,
}

/// Reusable forward/backward buffers for one [`ScalarNet`] architecture.
#[derive(Debug, Clone, Default)]
pub struct NetWorkspace {
    acts: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl ScalarNet {
    /// Zero-initialized net. `widths` runs input → hidden… → output and must
    /// start and end at width 1.
    pub fn new(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "scalar net needs at least an input and an output layer".into(),
            ));
        }
        if widths[0] != 1 || *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArgument(format!(
                "scalar net is 1 -> 1, got widths {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        let n_params: usize = widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(ScalarNet {
            widths: widths.to_vec(),
            theta: vec![0.0; n_params],
        })
    }

    /// Hidden-layer weights drawn uniformly in `±1/sqrt(fan_in)`; the final
    /// layer's weights and every bias stay zero, so the freshly initialized
    /// net is identically zero and `f(a) = softplus(0) - ln 2 = 0`.
    pub fn init_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut offset = 0;
        let n_layers = self.widths.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            for k in 0..fan_out * fan_in {
                self.theta[offset + k] = if l + 1 < n_layers {
                    rng.random_range(-scale..scale)
                } else {
                    0.0
                };
            }
            offset += fan_out * fan_in;
            for k in 0..fan_out {
                self.theta[offset + k] = 0.0;
            }
            offset += fan_out;
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn param_len(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::LayoutMismatch(format!(
                "theta has {} entries, architecture wants {}",
                theta.len(),
                self.theta.len()
            )));
        }
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    fn ensure_workspace(&self, ws: &mut NetWorkspace) {
        if ws.acts.len() != self.widths.len() {
            ws.acts = self.widths.iter().map(|&w| vec![0.0; w]).collect();
            ws.preacts = self.widths.iter().map(|&w| vec![0.0; w]).collect();
            let max_w = *self.widths.iter().max().unwrap();
            ws.delta = vec![0.0; max_w];
            ws.delta_prev = vec![0.0; max_w];
        }
    }

    /// Forward pass; fills the workspace so a backward pass can follow.
    pub fn forward(&self, a: f64, ws: &mut NetWorkspace) -> f64 {
        self.ensure_workspace(ws);
        ws.acts[0][0] = a;
        let n_layers = self.widths.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let (lower, upper) = ws.acts.split_at_mut(l + 1);
            let input = &lower[l];
            let preact = &mut ws.preacts[l + 1];
            for j in 0..fan_out {
                let row = &self.theta[offset + j * fan_in..offset + (j + 1) * fan_in];
                let mut sum = self.theta[offset + fan_out * fan_in + j];
                for (w, x) in row.iter().zip(input.iter()) {
                    sum += w * x;
                }
                preact[j] = sum;
                upper[0][j] = if l + 1 < n_layers { softplus(sum) } else { sum };
            }
            offset += fan_out * (fan_in + 1);
        }
        ws.acts[n_layers][0]
    }

    /// Accumulates `seed * d net(a) / d theta` into `grad`, reusing the state
    /// of the workspace left by the preceding [`forward`](Self::forward) call.
    pub fn backward(&self, ws: &mut NetWorkspace, seed: f64, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.theta.len());
        let n_layers = self.widths.len() - 1;
        ws.delta[0] = seed;
        let mut offset = self.theta.len();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            offset -= fan_out * (fan_in + 1);
            let input = &ws.acts[l];
            for j in 0..fan_out {
                let d = ws.delta[j];
                let g_row = &mut grad[offset + j * fan_in..offset + (j + 1) * fan_in];
                for (g, x) in g_row.iter_mut().zip(input.iter()) {
                    *g += d * x;
                }
                grad[offset + fan_out * fan_in + j] += d;
            }
            if l > 0 {
                for i in 0..fan_in {
                    let mut acc = 0.0;
                    for j in 0..fan_out {
                        acc += ws.delta[j] * self.theta[offset + j * fan_in + i];
                    }
                    ws.delta_prev[i] = acc * sigmoid(ws.preacts[l][i]);
                }
                ws.delta[..fan_in].copy_from_slice(&ws.delta_prev[..fan_in]);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Monotone map
// ---------------------------------------------------------------------------

/// Serializable description of a [`MonotoneMap`]; the quadrature rule is
/// rebuilt from its order on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpec {
    pub widths: Vec<usize>,
    pub theta: Vec<f64>,
    pub bias_enabled: bool,
    pub quadrature_order: usize,
}

/// A learnable monotone (or boundedly non-monotone) scalar map.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    net: ScalarNet,
    rule: QuadratureRule,
    quadrature_order: usize,
    bias_enabled: bool,
}

/// Reusable buffers for map evaluation.
#[derive(Debug, Clone, Default)]
pub struct MapWorkspace {
    net: NetWorkspace,
}

impl MonotoneMap {
    pub const MIN_QUADRATURE_ORDER: usize = 8;

    pub fn new(net: ScalarNet, quadrature_order: usize, bias_enabled: bool) -> Result<Self> {
        if quadrature_order < Self::MIN_QUADRATURE_ORDER {
            return Err(Error::InvalidArgument(format!(
                "quadrature order {quadrature_order} below minimum {}",
                Self::MIN_QUADRATURE_ORDER
            )));
        }
        Ok(MonotoneMap {
            rule: QuadratureRule::gauss_legendre(quadrature_order)?,
            net,
            quadrature_order,
            bias_enabled,
        })
    }

    /// Fresh map with randomized hidden layers; `hidden` lists the hidden
    /// widths, e.g. `[16, 16]`.
    pub fn with_new_net<R: Rng + ?Sized>(
        hidden: &[usize],
        quadrature_order: usize,
        bias_enabled: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(1);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut net = ScalarNet::new(&widths)?;
        net.init_params(rng);
        Self::new(net, quadrature_order, bias_enabled)
    }

    pub fn net(&self) -> &ScalarNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut ScalarNet {
        &mut self.net
    }

    pub fn bias_enabled(&self) -> bool {
        self.bias_enabled
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn param_len(&self) -> usize {
        self.net.param_len()
    }

    fn bias(&self) -> f64 {
        if self.bias_enabled {
            LN_2
        } else {
            0.0
        }
    }

    fn f_raw(&self, a: f64, ws: &mut MapWorkspace) -> f64 {
        softplus(self.net.forward(a, &mut ws.net)) - self.bias()
    }

    /// `f(a) = softplus(net(a)) - ln 2` (bias enabled) or `softplus(net(a))`.
    pub fn f_eval(&self, a: f64) -> Result<f64> {
        if !a.is_finite() {
            return Err(Error::NonFinite(format!("f input {a}")));
        }
        let mut ws = MapWorkspace::default();
        Ok(self.f_raw(a, &mut ws))
    }

    /// `z(x) = ∫_0^x f(a) da` by single-panel Gauss–Legendre on `[0, x]`.
    /// `z(0) = 0` exactly; negative `x` integrates with a negative sign.
    pub fn z_eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("z input {x}")));
        }
        let mut ws = MapWorkspace::default();
        Ok(self.z_raw(x, &mut ws))
    }

    pub(crate) fn z_raw(&self, x: f64, ws: &mut MapWorkspace) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let half = 0.5 * x;
        let mut acc = 0.0;
        for (&t, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            acc += w * self.f_raw(half * (t + 1.0), ws);
        }
        half * acc
    }

    /// `dz/dx = f(x)` by the fundamental theorem of calculus.
    pub fn z_grad_input(&self, x: f64) -> Result<f64> {
        self.f_eval(x)
    }

    /// `dz/dtheta`, with the same quadrature nodes as [`z_eval`](Self::z_eval).
    pub fn z_grad_params(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("z input {x}")));
        }
        let mut grad = vec![0.0; self.net.param_len()];
        let mut ws = MapWorkspace::default();
        self.z_with_grad(x, &mut ws, &mut grad);
        Ok(grad)
    }

    /// Fused evaluation: returns `z(x)` and accumulates `dz/dtheta` into
    /// `grad` (which must be zeroed by the caller if a fresh gradient is
    /// wanted).
    pub fn z_with_grad(&self, x: f64, ws: &mut MapWorkspace, grad: &mut [f64]) -> f64 {
        debug_assert_eq!(grad.len(), self.net.param_len());
        if x == 0.0 {
            return 0.0;
        }
        let half = 0.5 * x;
        let mut acc = 0.0;
        for (&t, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let u = self.net.forward(half * (t + 1.0), &mut ws.net);
            acc += w * (softplus(u) - self.bias());
            // d z / d theta = half * sum_k w_k sigmoid(u_k) d net/d theta
            self.net.backward(&mut ws.net, half * w * sigmoid(u), grad);
        }
        half * acc
    }

    /// Fused `f(a)` with `scale * df/dtheta` accumulated into `grad`; used for
    /// the derivative-at-zero fallback of the effective gradient.
    pub fn f_with_grad(&self, a: f64, ws: &mut MapWorkspace, scale: f64, grad: &mut [f64]) -> f64 {
        let u = self.net.forward(a, &mut ws.net);
        self.net.backward(&mut ws.net, scale * sigmoid(u), grad);
        softplus(u) - self.bias()
    }

    pub fn to_spec(&self) -> MapSpec {
        MapSpec {
            widths: self.net.widths.clone(),
            theta: self.net.theta.clone(),
            bias_enabled: self.bias_enabled,
            quadrature_order: self.quadrature_order,
        }
    }

    pub fn from_spec(spec: &MapSpec) -> Result<Self> {
        let mut net = ScalarNet::new(&spec.widths)?;
        net.set_theta(&spec.theta)?;
        Self::new(net, spec.quadrature_order, spec.bias_enabled)
    }
}
