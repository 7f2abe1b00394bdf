//! The three classifiers and their training loop.
//!
//! - `LR`: plain logistic regression with a small ridge penalty.
//! - `BiasedLR`: logistic regression with the penalty
//!   `lambda * ||beta - beta_p||^2` pulling weights toward the prior signs.
//! - `MonotonicLR`: logistic regression on per-column monotone maps,
//!   `yhat = sigmoid(sum_i beta_i z_i(x_i) + alpha)`, regularized through the
//!   average effective gradient `beta_eff_i = mean_c beta_i z_i(v_c) / v_c`
//!   over a column's category values.
//!
//! All gradients are computed analytically (the map gradients by
//! differentiating under the quadrature sign) and training is full-batch Adam,
//! deterministic for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnStats, EncodedColumn, EncodedKind, EncodedMatrix};
use crate::error::{Error, Result};
use crate::umnn::{sigmoid, MapSpec, MapWorkspace, MonotoneMap};

/// Probabilities are clamped to this range inside the cross-entropy so
/// separable fits keep a finite loss.
pub const BCE_CLAMP: f64 = 1e-12;

/// Values closer to zero than this are skipped in the effective-gradient
/// secant `z(v)/v`; if a column has no usable points the derivative at zero,
/// `beta * f(0)`, substitutes.
pub const BETA_EFF_EPS: f64 = 1e-6;

/// Continuous columns contribute at most this many quantile points to the
/// effective gradient.
pub const BETA_EFF_MAX_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lr")]
    Lr,
    #[serde(rename = "biased")]
    BiasedLr,
    #[serde(rename = "monotonic")]
    MonotonicLr,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::BiasedLr => "biased",
            ModelKind::MonotonicLr => "monotonic",
        }
    }

    /// Display name matching the result tables.
    pub fn display(&self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::BiasedLr => "BiasedLR",
            ModelKind::MonotonicLr => "MonotonicLR",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(ModelKind::Lr),
            "biased" => Ok(ModelKind::BiasedLr),
            "monotonic" => Ok(ModelKind::MonotonicLr),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected lr|biased|monotonic)"
            ))),
        }
    }
}

/// Whether the effective gradient averages or sums the per-category secants.
/// The mean keeps `beta_eff` on the prior's unit scale across columns with
/// different category counts; the sum is kept for fidelity experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaEffMode {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub alpha: f64,
    pub beta: Vec<f64>,
}

/// A fitted model: linear parameters, the per-column maps for MonotonicLR,
/// and a copy of the encoding metadata (column map + standardization stats)
/// it was trained with.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub kind: ModelKind,
    pub linear: LinearParams,
    pub maps: Option<Vec<MonotoneMap>>,
    pub column_map: Vec<EncodedColumn>,
    pub stats: Option<Vec<ColumnStats>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Prior-penalty strength; see [`lambda_schedule`].
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Relative loss-improvement threshold; training stops after 20
    /// consecutive epochs below it.
    pub tolerance: f64,
    pub seed: u64,
    /// Ridge strength for plain LR.
    pub l2_fallback: f64,
    /// Hidden widths of each per-column map network.
    pub map_hidden: Vec<usize>,
    pub quadrature_order: usize,
    /// Subtract ln 2 from the map integrand, allowing bounded non-monotone
    /// corrections.
    pub map_bias_enabled: bool,
    pub beta_eff_mode: BetaEffMode,
}

impl TrainConfig {
    /// The configuration used throughout the evaluation protocol.
    pub fn for_kind(kind: ModelKind, n_shots: usize, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            lambda: lambda_schedule(n_shots, kind)?,
            learning_rate: match kind {
                ModelKind::MonotonicLr => 0.005,
                _ => 0.01,
            },
            max_epochs: 2000,
            tolerance: 1e-7,
            seed,
            l2_fallback: 1e-3,
            map_hidden: vec![16, 16],
            quadrature_order: 32,
            map_bias_enabled: true,
            beta_eff_mode: BetaEffMode::Mean,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be positive".into()));
        }
        if self.tolerance <= 0.0 {
            return Err(Error::InvalidArgument("tolerance must be > 0".into()));
        }
        if self.l2_fallback < 0.0 {
            return Err(Error::InvalidArgument("l2_fallback must be >= 0".into()));
        }
        Ok(())
    }
}

/// The prior strength used in the protocol: `0.5/sqrt(n)` for BiasedLR,
/// `0.1/sqrt(n)` for MonotonicLR, and 0 for plain LR (whose ridge is a
/// separate knob).
pub fn lambda_schedule(n_shots: usize, kind: ModelKind) -> Result<f64> {
    if n_shots < 1 {
        return Err(Error::InvalidArgument("n_shots must be >= 1".into()));
    }
    let scale = match kind {
        ModelKind::Lr => return Ok(0.0),
        ModelKind::BiasedLr => 0.5,
        ModelKind::MonotonicLr => 0.1,
    };
    Ok(scale / (n_shots as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

fn check_layout(state: &ModelState, matrix: &EncodedMatrix) -> Result<()> {
    if state.column_map != matrix.column_map {
        return Err(Error::LayoutMismatch(
            "matrix columns do not match the layout the model was trained with".into(),
        ));
    }
    if state.linear.beta.len() != matrix.n_cols() {
        return Err(Error::LayoutMismatch(format!(
            "beta has {} entries for {} columns",
            state.linear.beta.len(),
            matrix.n_cols()
        )));
    }
    Ok(())
}

/// The maps of a MonotonicLR state, checked to be one per encoded column.
fn monotonic_maps<'a>(state: &'a ModelState, matrix: &EncodedMatrix) -> Result<&'a [MonotoneMap]> {
    let maps = state.maps.as_deref().ok_or_else(|| {
        Error::LayoutMismatch("MonotonicLR state has no maps".into())
    })?;
    if maps.len() != matrix.n_cols() {
        return Err(Error::LayoutMismatch(format!(
            "{} maps for {} columns",
            maps.len(),
            matrix.n_cols()
        )));
    }
    Ok(maps)
}

fn check_finite(matrix: &EncodedMatrix) -> Result<()> {
    for r in 0..matrix.n_rows() {
        if matrix.row(r).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature row {r}")));
        }
    }
    Ok(())
}

/// Pre-sigmoid logits, one per row.
pub fn logits(state: &ModelState, matrix: &EncodedMatrix) -> Result<Vec<f64>> {
    check_layout(state, matrix)?;
    check_finite(matrix)?;
    match state.kind {
        ModelKind::MonotonicLr => {
            let maps = monotonic_maps(state, matrix)?;
            let plans: Vec<ColumnPlan> = (0..matrix.n_cols())
                .map(|c| ColumnPlan::build(matrix, c))
                .collect();
            let mut ws = MapWorkspace::default();
            let z: Vec<Vec<f64>> = plans
                .iter()
                .zip(maps)
                .map(|(plan, map)| plan.distinct.iter().map(|&v| map.z_raw(v, &mut ws)).collect())
                .collect();
            Ok((0..matrix.n_rows())
                .map(|r| {
                    let mut u = state.linear.alpha;
                    for (c, plan) in plans.iter().enumerate() {
                        u += state.linear.beta[c] * z[c][plan.row_idx[r]];
                    }
                    u
                })
                .collect())
        }
        _ => Ok((0..matrix.n_rows())
            .map(|r| {
                let row = matrix.row(r);
                state.linear.alpha
                    + row
                        .iter()
                        .zip(&state.linear.beta)
                        .map(|(x, b)| x * b)
                        .sum::<f64>()
            })
            .collect()),
    }
}

/// Predicted probabilities `sigmoid(logit)`, one per row, in `(0, 1)`.
pub fn predict(state: &ModelState, matrix: &EncodedMatrix) -> Result<Vec<f64>> {
    Ok(logits(state, matrix)?.into_iter().map(sigmoid).collect())
}

fn bce_mean(probs: &[f64], y: &[u8]) -> f64 {
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            if t == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

// ---------------------------------------------------------------------------
// Losses and analytic gradients
// ---------------------------------------------------------------------------

/// Loss value plus gradients for every parameter block. `grad_maps` is empty
/// for the linear kinds.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_alpha: f64,
    pub grad_beta: Vec<f64>,
    pub grad_maps: Vec<Vec<f64>>,
}

fn check_loss_inputs(
    state: &ModelState,
    matrix: &EncodedMatrix,
    y: &[u8],
    beta_p: &[f64],
    lambda: f64,
) -> Result<()> {
    check_layout(state, matrix)?;
    check_finite(matrix)?;
    if matrix.n_rows() == 0 {
        return Err(Error::InvalidArgument("loss needs at least one row".into()));
    }
    if y.len() != matrix.n_rows() {
        return Err(Error::LayoutMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            matrix.n_rows()
        )));
    }
    if beta_p.len() != state.linear.beta.len() {
        return Err(Error::LayoutMismatch(format!(
            "prior vector has {} entries for {} weights",
            beta_p.len(),
            state.linear.beta.len()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    Ok(())
}

/// `mean BCE + lambda * ||beta - beta_p||^2` for LR/BiasedLR states.
pub fn loss_biased(
    state: &ModelState,
    matrix: &EncodedMatrix,
    y: &[u8],
    beta_p: &[f64],
    lambda: f64,
) -> Result<f64> {
    Ok(loss_biased_with_grad(state, matrix, y, beta_p, lambda)?.loss)
}

/// [`loss_biased`] plus its gradient with respect to `beta` and `alpha`.
pub fn loss_biased_with_grad(
    state: &ModelState,
    matrix: &EncodedMatrix,
    y: &[u8],
    beta_p: &[f64],
    lambda: f64,
) -> Result<LossGrad> {
    check_loss_inputs(state, matrix, y, beta_p, lambda)?;
    let probs = predict(state, matrix)?;
    let n = matrix.n_rows() as f64;
    let mut grad_beta = vec![0.0; matrix.n_cols()];
    let mut grad_alpha = 0.0;
    for (r, (&p, &t)) in probs.iter().zip(y).enumerate() {
        let e = (p - t as f64) / n;
        grad_alpha += e;
        for (g, &x) in grad_beta.iter_mut().zip(matrix.row(r)) {
            *g += e * x;
        }
    }
    let mut penalty = 0.0;
    for ((g, &b), &bp) in grad_beta.iter_mut().zip(&state.linear.beta).zip(beta_p) {
        penalty += (b - bp) * (b - bp);
        *g += 2.0 * lambda * (b - bp);
    }
    Ok(LossGrad {
        loss: bce_mean(&probs, y) + lambda * penalty,
        grad_alpha,
        grad_beta,
        grad_maps: Vec::new(),
    })
}

// --- monotonic machinery ---

/// Per-column evaluation plan: the distinct values, each row's index into
/// them, and which points feed the effective gradient.
struct ColumnPlan {
    distinct: Vec<f64>,
    row_idx: Vec<usize>,
    pen_pts: Vec<usize>,
    use_fallback: bool,
}

impl ColumnPlan {
    fn build(matrix: &EncodedMatrix, col: usize) -> ColumnPlan {
        let mut distinct = matrix.column_values(col);
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        let row_idx = (0..matrix.n_rows())
            .map(|r| {
                distinct
                    .binary_search_by(|v| v.partial_cmp(&matrix.value(r, col)).unwrap())
                    .unwrap()
            })
            .collect();

        let candidates: Vec<usize> = (0..distinct.len())
            .filter(|&j| distinct[j].abs() > BETA_EFF_EPS)
            .collect();
        let continuous = matches!(
            matrix.column_map[col].kind,
            EncodedKind::Continuous
        );
        let pen_pts = if continuous && candidates.len() > BETA_EFF_MAX_POINTS {
            // Quantile subsample over the sorted candidate values.
            let m = candidates.len();
            let mut picked: Vec<usize> = (0..BETA_EFF_MAX_POINTS)
                .map(|j| candidates[j * (m - 1) / (BETA_EFF_MAX_POINTS - 1)])
                .collect();
            picked.dedup();
            picked
        } else {
            candidates
        };
        ColumnPlan {
            use_fallback: pen_pts.is_empty(),
            distinct,
            row_idx,
            pen_pts,
        }
    }
}

/// z (and optionally dz/dtheta) at each distinct value of one column, plus
/// the zero-point fallback when the secant set is empty.
struct ColumnEval {
    z: Vec<f64>,
    /// Row-major `[distinct][param]`, present only when gradients are wanted.
    dz: Vec<f64>,
    f0: f64,
    df0: Vec<f64>,
}

fn eval_column(
    map: &MonotoneMap,
    plan: &ColumnPlan,
    want_grad: bool,
    ws: &mut MapWorkspace,
) -> ColumnEval {
    let p = map.param_len();
    let mut z = Vec::with_capacity(plan.distinct.len());
    let mut dz = vec![0.0; if want_grad { plan.distinct.len() * p } else { 0 }];
    for (j, &v) in plan.distinct.iter().enumerate() {
        if want_grad {
            z.push(map.z_with_grad(v, ws, &mut dz[j * p..(j + 1) * p]));
        } else {
            z.push(map.z_raw(v, ws));
        }
    }
    let (mut f0, mut df0) = (0.0, Vec::new());
    if plan.use_fallback {
        if want_grad {
            df0 = vec![0.0; p];
            f0 = map.f_with_grad(0.0, ws, 1.0, &mut df0);
        } else {
            f0 = map.f_eval(0.0).expect("0 is finite");
        }
    }
    ColumnEval { z, dz, f0, df0 }
}

fn beta_eff_column(
    beta: f64,
    plan: &ColumnPlan,
    eval: &ColumnEval,
    mode: BetaEffMode,
) -> (f64, f64) {
    // Returns (s, beta_eff) with beta_eff = beta * s.
    if plan.use_fallback {
        return (eval.f0, beta * eval.f0);
    }
    let mut s = 0.0;
    for &j in &plan.pen_pts {
        s += eval.z[j] / plan.distinct[j];
    }
    if mode == BetaEffMode::Mean {
        s /= plan.pen_pts.len() as f64;
    }
    (s, beta * s)
}

/// The average effective gradient `beta_eff_i = mean_c beta_i z_i(v_c)/v_c`
/// over each column's distinct training values (secant slopes through the
/// origin). Continuous columns use at most [`BETA_EFF_MAX_POINTS`] quantile
/// points; a column with no points beyond `|v| > 1e-6` falls back to the
/// derivative at zero, `beta_i * f_i(0)`.
pub fn beta_eff(state: &ModelState, matrix: &EncodedMatrix) -> Result<Vec<f64>> {
    beta_eff_with_mode(state, matrix, BetaEffMode::Mean)
}

pub fn beta_eff_with_mode(
    state: &ModelState,
    matrix: &EncodedMatrix,
    mode: BetaEffMode,
) -> Result<Vec<f64>> {
    check_layout(state, matrix)?;
    check_finite(matrix)?;
    let maps = monotonic_maps(state, matrix)?;
    let mut ws = MapWorkspace::default();
    let mut out = Vec::with_capacity(matrix.n_cols());
    for c in 0..matrix.n_cols() {
        let plan = ColumnPlan::build(matrix, c);
        let eval = eval_column(&maps[c], &plan, false, &mut ws);
        out.push(beta_eff_column(state.linear.beta[c], &plan, &eval, mode).1);
    }
    Ok(out)
}

/// `mean BCE + lambda * ||beta_eff - beta_p||^2` for MonotonicLR states.
pub fn loss_monotonic(
    state: &ModelState,
    matrix: &EncodedMatrix,
    y: &[u8],
    beta_p: &[f64],
    lambda: f64,
) -> Result<f64> {
    Ok(loss_monotonic_with_grad(state, matrix, y, beta_p, lambda, BetaEffMode::Mean)?.loss)
}

/// [`loss_monotonic`] plus gradients for `alpha`, `beta`, and every map
/// parameter; the penalty gradient flows through `beta_eff` into both `beta`
/// and the maps.
pub fn loss_monotonic_with_grad(
    state: &ModelState,
    matrix: &EncodedMatrix,
    y: &[u8],
    beta_p: &[f64],
    lambda: f64,
    mode: BetaEffMode,
) -> Result<LossGrad> {
    check_loss_inputs(state, matrix, y, beta_p, lambda)?;
    let maps = monotonic_maps(state, matrix)?;
    let plans: Vec<ColumnPlan> = (0..matrix.n_cols())
        .map(|c| ColumnPlan::build(matrix, c))
        .collect();
    let mut ws = MapWorkspace::default();
    let evals: Vec<ColumnEval> = plans
        .iter()
        .zip(maps)
        .map(|(plan, map)| eval_column(map, plan, true, &mut ws))
        .collect();
    Ok(monotonic_loss_grad_from_evals(
        state, matrix, y, beta_p, lambda, mode, &plans, &evals,
    ))
}

#[allow(clippy::too_many_arguments)]
fn monotonic_loss_grad_from_evals(
    state: &ModelState,
    matrix: &EncodedMatrix,
    y: &[u8],
    beta_p: &[f64],
    lambda: f64,
    mode: BetaEffMode,
    plans: &[ColumnPlan],
    evals: &[ColumnEval],
) -> LossGrad {
    let n_rows = matrix.n_rows();
    let n_cols = matrix.n_cols();
    let beta = &state.linear.beta;
    let n = n_rows as f64;

    let probs: Vec<f64> = (0..n_rows)
        .map(|r| {
            let mut u = state.linear.alpha;
            for c in 0..n_cols {
                u += beta[c] * evals[c].z[plans[c].row_idx[r]];
            }
            sigmoid(u)
        })
        .collect();
    let bce = bce_mean(&probs, y);

    let mut grad_alpha = 0.0;
    let mut grad_beta = vec![0.0; n_cols];
    // Per column, per distinct value: accumulated BCE error mass.
    let mut node_err: Vec<Vec<f64>> = plans
        .iter()
        .map(|p| vec![0.0; p.distinct.len()])
        .collect();
    for r in 0..n_rows {
        let e = (probs[r] - y[r] as f64) / n;
        grad_alpha += e;
        for c in 0..n_cols {
            let j = plans[c].row_idx[r];
            grad_beta[c] += e * evals[c].z[j];
            node_err[c][j] += e;
        }
    }

    let maps = state.maps.as_ref().expect("caller validated maps");
    let mut penalty = 0.0;
    let mut grad_maps: Vec<Vec<f64>> = maps.iter().map(|m| vec![0.0; m.param_len()]).collect();
    for c in 0..n_cols {
        let p = grad_maps[c].len();
        // BCE part: d/dtheta = sum_j err_j * beta_c * dz_j.
        for (j, &err) in node_err[c].iter().enumerate() {
            if err != 0.0 {
                let dz = &evals[c].dz[j * p..(j + 1) * p];
                let scale = err * beta[c];
                for (g, &d) in grad_maps[c].iter_mut().zip(dz) {
                    *g += scale * d;
                }
            }
        }
        // Penalty part through beta_eff.
        let (s, be) = beta_eff_column(beta[c], &plans[c], &evals[c], mode);
        let resid = be - beta_p[c];
        penalty += resid * resid;
        grad_beta[c] += 2.0 * lambda * resid * s;
        let coeff = 2.0 * lambda * resid * beta[c];
        if coeff != 0.0 {
            if plans[c].use_fallback {
                for (g, &d) in grad_maps[c].iter_mut().zip(&evals[c].df0) {
                    *g += coeff * d;
                }
            } else {
                let agg = match mode {
                    BetaEffMode::Mean => 1.0 / plans[c].pen_pts.len() as f64,
                    BetaEffMode::Sum => 1.0,
                };
                for &j in &plans[c].pen_pts {
                    let dz = &evals[c].dz[j * p..(j + 1) * p];
                    let w = coeff * agg / plans[c].distinct[j];
                    for (g, &d) in grad_maps[c].iter_mut().zip(dz) {
                        *g += w * d;
                    }
                }
            }
        }
    }

    LossGrad {
        loss: bce + lambda * penalty,
        grad_alpha,
        grad_beta,
        grad_maps,
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + Self::EPS);
        }
    }
}

/// Fits a model of the given kind by full-batch Adam on its loss.
/// Deterministic for identical `(kind, matrix, y, beta_p, config)`. Stops at
/// `max_epochs` or after 20 consecutive epochs whose relative loss
/// improvement falls below `tolerance`, and returns the best-loss state seen.
pub fn train(
    kind: ModelKind,
    matrix: &EncodedMatrix,
    y: &[u8],
    beta_p: &[f64],
    config: &TrainConfig,
) -> Result<ModelState> {
    config.validate()?;
    if matrix.n_rows() == 0 {
        return Err(Error::InvalidArgument("cannot train on zero rows".into()));
    }
    check_finite(matrix)?;
    if y.len() != matrix.n_rows() {
        return Err(Error::LayoutMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            matrix.n_rows()
        )));
    }
    if beta_p.len() != matrix.n_cols() {
        return Err(Error::LayoutMismatch(format!(
            "prior vector has {} entries for {} columns",
            beta_p.len(),
            matrix.n_cols()
        )));
    }
    let n_pos = y.iter().filter(|&&t| t == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        log::warn!(
            "training pool has a single class ({n_pos} of {} positive)",
            y.len()
        );
    }

    let n_cols = matrix.n_cols();
    let mut state = ModelState {
        kind,
        linear: LinearParams {
            alpha: 0.0,
            beta: vec![0.0; n_cols],
        },
        maps: None,
        column_map: matrix.column_map.clone(),
        stats: matrix.stats.clone(),
    };
    if kind == ModelKind::MonotonicLr {
        // The maps start at z = 0, so beta starts at 1: with both at zero
        // every beta- and map-gradient carries a beta*z factor and training
        // would sit at that stationary point forever.
        state.linear.beta.fill(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let maps: Result<Vec<MonotoneMap>> = (0..n_cols)
            .map(|_| {
                MonotoneMap::with_new_net(
                    &config.map_hidden,
                    config.quadrature_order,
                    config.map_bias_enabled,
                    &mut rng,
                )
            })
            .collect();
        state.maps = Some(maps?);
    }

    // Flat parameter vector: beta, alpha, then each map's theta.
    let map_lens: Vec<usize> = state
        .maps
        .as_ref()
        .map(|maps| maps.iter().map(|m| m.param_len()).collect())
        .unwrap_or_default();
    let total = n_cols + 1 + map_lens.iter().sum::<usize>();
    let mut adam = Adam::new(total, config.learning_rate);
    let mut grad = vec![0.0; total];
    let mut params = vec![0.0; total];

    let plans: Vec<ColumnPlan> = if kind == ModelKind::MonotonicLr {
        (0..n_cols).map(|c| ColumnPlan::build(matrix, c)).collect()
    } else {
        Vec::new()
    };
    let mut ws = MapWorkspace::default();

    let mut best_loss = f64::INFINITY;
    let mut best_params = params.clone();
    let mut prev_loss = f64::INFINITY;
    let mut stall = 0usize;

    for epoch in 0..config.max_epochs {
        let loss = match kind {
            ModelKind::Lr => {
                linear_loss_grad(matrix, y, &state.linear, config.l2_fallback, None, &mut grad)
            }
            ModelKind::BiasedLr => {
                linear_loss_grad(matrix, y, &state.linear, config.lambda, Some(beta_p), &mut grad)
            }
            ModelKind::MonotonicLr => {
                let maps = state.maps.as_ref().unwrap();
                let evals: Vec<ColumnEval> = plans
                    .iter()
                    .zip(maps)
                    .map(|(plan, map)| eval_column(map, plan, true, &mut ws))
                    .collect();
                let lg = monotonic_loss_grad_from_evals(
                    &state,
                    matrix,
                    y,
                    beta_p,
                    config.lambda,
                    config.beta_eff_mode,
                    &plans,
                    &evals,
                );
                grad[..n_cols].copy_from_slice(&lg.grad_beta);
                grad[n_cols] = lg.grad_alpha;
                let mut off = n_cols + 1;
                for g in &lg.grad_maps {
                    grad[off..off + g.len()].copy_from_slice(g);
                    off += g.len();
                }
                lg.loss
            }
        };

        if !loss.is_finite() {
            return Err(Error::Diverged {
                kind: kind.display().to_string(),
                epoch,
                loss,
            });
        }
        gather_params(&state, &mut params);
        if loss < best_loss {
            best_loss = loss;
            best_params.copy_from_slice(&params);
        }

        let rel = (prev_loss - loss) / prev_loss.abs().max(1e-12);
        if rel < config.tolerance {
            stall += 1;
            if stall >= 20 {
                break;
            }
        } else {
            stall = 0;
        }
        prev_loss = loss;

        adam.step(&mut params, &grad);
        scatter_params(&mut state, &params);
    }

    scatter_params(&mut state, &best_params);
    Ok(state)
}

fn linear_loss_grad(
    matrix: &EncodedMatrix,
    y: &[u8],
    linear: &LinearParams,
    lambda: f64,
    target: Option<&[f64]>,
    grad: &mut [f64],
) -> f64 {
    let n_cols = matrix.n_cols();
    let n = matrix.n_rows() as f64;
    grad.fill(0.0);
    let mut bce = 0.0;
    for r in 0..matrix.n_rows() {
        let row = matrix.row(r);
        let u = linear.alpha
            + row
                .iter()
                .zip(&linear.beta)
                .map(|(x, b)| x * b)
                .sum::<f64>();
        let p = sigmoid(u);
        let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        bce += if y[r] == 1 { -pc.ln() } else { -(1.0 - pc).ln() };
        let e = (p - y[r] as f64) / n;
        grad[n_cols] += e;
        for (g, &x) in grad[..n_cols].iter_mut().zip(row) {
            *g += e * x;
        }
    }
    bce /= n;
    let mut penalty = 0.0;
    for c in 0..n_cols {
        let d = linear.beta[c] - target.map_or(0.0, |t| t[c]);
        penalty += d * d;
        grad[c] += 2.0 * lambda * d;
    }
    bce + lambda * penalty
}

fn gather_params(state: &ModelState, params: &mut [f64]) {
    let d = state.linear.beta.len();
    params[..d].copy_from_slice(&state.linear.beta);
    params[d] = state.linear.alpha;
    if let Some(maps) = &state.maps {
        let mut off = d + 1;
        for map in maps {
            let theta = map.net().theta();
            params[off..off + theta.len()].copy_from_slice(theta);
            off += theta.len();
        }
    }
}

fn scatter_params(state: &mut ModelState, params: &[f64]) {
    let d = state.linear.beta.len();
    state.linear.beta.copy_from_slice(&params[..d]);
    state.linear.alpha = params[d];
    if let Some(maps) = &mut state.maps {
        let mut off = d + 1;
        for map in maps {
            let len = map.param_len();
            map.net_mut()
                .set_theta(&params[off..off + len])
                .expect("architecture unchanged during training");
            off += len;
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// On-disk model format: everything needed to score new rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub column_map: Vec<EncodedColumn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<Vec<ColumnStats>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<MapSpec>>,
    pub train_config: TrainConfig,
}

impl Checkpoint {
    pub fn from_state(state: &ModelState, config: &TrainConfig) -> Checkpoint {
        Checkpoint {
            kind: state.kind,
            alpha: state.linear.alpha,
            beta: state.linear.beta.clone(),
            column_map: state.column_map.clone(),
            stats: state.stats.clone(),
            maps: state
                .maps
                .as_ref()
                .map(|maps| maps.iter().map(|m| m.to_spec()).collect()),
            train_config: config.clone(),
        }
    }

    pub fn to_state(&self) -> Result<ModelState> {
        let maps = match &self.maps {
            Some(specs) => Some(
                specs
                    .iter()
                    .map(MonotoneMap::from_spec)
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        if self.kind == ModelKind::MonotonicLr {
            match &maps {
                Some(m) if m.len() == self.beta.len() => {}
                _ => {
                    return Err(Error::LayoutMismatch(
                        "MonotonicLR checkpoint needs one map per encoded column".into(),
                    ))
                }
            }
        }
        Ok(ModelState {
            kind: self.kind,
            linear: LinearParams {
                alpha: self.alpha,
                beta: self.beta.clone(),
            },
            maps,
            column_map: self.column_map.clone(),
            stats: self.stats.clone(),
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}
