//! Interpretability extracts from fitted models: per-column activation
//! curves `a_i(x) = beta_i * z_i(x)` (or `beta_i * x` for the linear kinds),
//! per-category expected-outcome marginals, and automatic flagging of
//! non-monotone learned maps — the tell-tale of a wrong category ranking.

use serde::Serialize;

use crate::data::{CellValue, ColumnKind, DatasetTable, EncodedKind, EncodedMatrix};
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelState};
use crate::umnn::MapWorkspace;

/// Evaluation points for continuous-column curves.
pub const CONTINUOUS_GRID_POINTS: usize = 101;

/// Successive differences smaller than this count as flat when classifying
/// monotonicity, so tiny-`n` noise does not raise mistake flags.
pub const MONOTONICITY_DEAD_BAND: f64 = 1e-6;

/// One column's additive contribution to the logit, tabulated over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ActivationCurve {
    pub column: String,
    pub encoded_index: usize,
    /// Grid in standardized feature space, ascending.
    pub grid: Vec<f64>,
    /// Original-scale labels: category names for ordinal columns, formatted
    /// raw values for continuous ones.
    pub labels: Vec<String>,
    pub activation: Vec<f64>,
}

/// Mean observed target per category, over the full dataset.
#[derive(Debug, Clone, Serialize)]
pub struct CategoryMarginal {
    pub column: String,
    pub categories: Vec<String>,
    /// `None` for categories declared in the schema but absent from the data.
    pub means: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum MonotonicityFlag {
    Monotone {
        direction: Direction,
    },
    NonMonotone {
        kind: ExtremumKind,
        extremum_index: usize,
        extremum_x: f64,
        extremum_label: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnMonotonicity {
    pub column: String,
    pub encoded_index: usize,
    pub flag: MonotonicityFlag,
}

/// The activation of a single standardized value in one encoded column.
pub fn activation_at(state: &ModelState, encoded_index: usize, x: f64) -> Result<f64> {
    let beta = *state
        .linear
        .beta
        .get(encoded_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no encoded column {encoded_index}")))?;
    match (state.kind, &state.maps) {
        (ModelKind::MonotonicLr, Some(maps)) => Ok(beta * maps[encoded_index].z_eval(x)?),
        (ModelKind::MonotonicLr, None) => Err(Error::LayoutMismatch(
            "MonotonicLR state has no maps".into(),
        )),
        _ => Ok(beta * x),
    }
}

/// Per-row, per-column activations; their sum plus `alpha` reproduces the
/// model's logit exactly.
pub fn row_activations(state: &ModelState, matrix: &EncodedMatrix) -> Result<Vec<Vec<f64>>> {
    let mut ws = MapWorkspace::default();
    (0..matrix.n_rows())
        .map(|r| {
            (0..matrix.n_cols())
                .map(|c| match (state.kind, &state.maps) {
                    (ModelKind::MonotonicLr, Some(maps)) => {
                        Ok(state.linear.beta[c] * maps[c].z_raw(matrix.value(r, c), &mut ws))
                    }
                    (ModelKind::MonotonicLr, None) => Err(Error::LayoutMismatch(
                        "MonotonicLR state has no maps".into(),
                    )),
                    _ => Ok(state.linear.beta[c] * matrix.value(r, c)),
                })
                .collect()
        })
        .collect()
}

fn grid_for_column(matrix: &EncodedMatrix, encoded_index: usize) -> (Vec<f64>, Vec<String>) {
    let enc = &matrix.column_map[encoded_index];
    let stats = matrix.stats.as_ref().map(|s| s[encoded_index]);
    let (mean, std) = stats.map_or((0.0, 1.0), |s| (s.mean, s.std));
    match &enc.kind {
        EncodedKind::Ordinal { ranking } => {
            let grid = (0..ranking.len())
                .map(|rank| (rank as f64 - mean) / std)
                .collect();
            (grid, ranking.clone())
        }
        _ => {
            let values = matrix.column_values(encoded_index);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let grid: Vec<f64> = if lo == hi {
                vec![lo]
            } else {
                (0..CONTINUOUS_GRID_POINTS)
                    .map(|i| lo + (hi - lo) * i as f64 / (CONTINUOUS_GRID_POINTS - 1) as f64)
                    .collect()
            };
            let labels = grid.iter().map(|&x| format!("{}", x * std + mean)).collect();
            (grid, labels)
        }
    }
}

/// Tabulates one column's activation: ordinal columns over their standardized
/// category values, continuous columns over an even grid spanning the
/// observed range.
pub fn activation_curve(
    state: &ModelState,
    matrix: &EncodedMatrix,
    encoded_index: usize,
) -> Result<ActivationCurve> {
    if encoded_index >= matrix.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "no encoded column {encoded_index} in a {}-column matrix",
            matrix.n_cols()
        )));
    }
    let (grid, labels) = grid_for_column(matrix, encoded_index);
    let activation = grid
        .iter()
        .map(|&x| activation_at(state, encoded_index, x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ActivationCurve {
        column: matrix.column_map[encoded_index].source.clone(),
        encoded_index,
        grid,
        labels,
        activation,
    })
}

/// Curves for every encoded column.
pub fn activation_curves(state: &ModelState, matrix: &EncodedMatrix) -> Result<Vec<ActivationCurve>> {
    (0..matrix.n_cols())
        .map(|c| activation_curve(state, matrix, c))
        .collect()
}

/// Mean observed target per category of one categorical column, over the
/// whole table.
pub fn category_marginal(table: &DatasetTable, column: &str) -> Result<CategoryMarginal> {
    let idx = table
        .column_index(column)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown column {column:?}")))?;
    let schema = &table.schema[idx];
    if schema.kind != ColumnKind::Categorical {
        return Err(Error::InvalidArgument(format!(
            "column {column:?} is not categorical"
        )));
    }
    let k = schema.categories.len();
    let mut counts = vec![0usize; k];
    let mut positives = vec![0usize; k];
    for (row, &y) in table.rows.iter().zip(&table.target) {
        if let CellValue::Category(c) = row[idx] {
            counts[c] += 1;
            positives[c] += y as usize;
        }
    }
    let means = counts
        .iter()
        .zip(&positives)
        .map(|(&n, &p)| if n == 0 { None } else { Some(p as f64 / n as f64) })
        .collect();
    Ok(CategoryMarginal {
        column: column.to_string(),
        categories: schema.categories.clone(),
        means,
        counts,
    })
}

fn classify(curve: &ActivationCurve) -> MonotonicityFlag {
    let a = &curve.activation;
    let mut any_up = false;
    let mut any_down = false;
    for w in a.windows(2) {
        let d = w[1] - w[0];
        if d > MONOTONICITY_DEAD_BAND {
            any_up = true;
        } else if d < -MONOTONICITY_DEAD_BAND {
            any_down = true;
        }
    }
    match (any_up, any_down) {
        (false, false) => MonotonicityFlag::Monotone {
            direction: Direction::Flat,
        },
        (true, false) => MonotonicityFlag::Monotone {
            direction: Direction::Increasing,
        },
        (false, true) => MonotonicityFlag::Monotone {
            direction: Direction::Decreasing,
        },
        (true, true) => {
            // First significant move tells whether the interior extremum is a
            // minimum or a maximum.
            let first_down = a
                .windows(2)
                .find_map(|w| {
                    let d = w[1] - w[0];
                    (d.abs() > MONOTONICITY_DEAD_BAND).then_some(d < 0.0)
                })
                .unwrap_or(false);
            let (kind, idx) = if first_down {
                let idx = a
                    .iter()
                    .enumerate()
                    .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                (ExtremumKind::Minimum, idx)
            } else {
                let idx = a
                    .iter()
                    .enumerate()
                    .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                (ExtremumKind::Maximum, idx)
            };
            MonotonicityFlag::NonMonotone {
                kind,
                extremum_index: idx,
                extremum_x: curve.grid[idx],
                extremum_label: curve.labels[idx].clone(),
            }
        }
    }
}

/// Classifies every column's activation curve as monotone (increasing,
/// decreasing, or flat) or non-monotone with the extremum's grid location.
pub fn monotonicity_flags(
    state: &ModelState,
    matrix: &EncodedMatrix,
) -> Result<Vec<ColumnMonotonicity>> {
    activation_curves(state, matrix).map(|curves| {
        curves
            .iter()
            .map(|curve| ColumnMonotonicity {
                column: curve.column.clone(),
                encoded_index: curve.encoded_index,
                flag: classify(curve),
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

/// `column,label,x_standardized,activation` rows for every curve.
pub fn curves_to_csv(curves: &[ActivationCurve]) -> String {
    let mut out = String::from("column,label,x_standardized,activation\n");
    for curve in curves {
        for ((x, label), a) in curve.grid.iter().zip(&curve.labels).zip(&curve.activation) {
            out.push_str(&format!(
                "{},{},{x},{a}\n",
                csv_escape(&curve.column),
                csv_escape(label)
            ));
        }
    }
    out
}

/// `column,category,mean,count` rows; unused categories leave the mean empty.
pub fn marginals_to_csv(marginals: &[CategoryMarginal]) -> String {
    let mut out = String::from("column,category,mean,count\n");
    for m in marginals {
        for ((cat, mean), count) in m.categories.iter().zip(&m.means).zip(&m.counts) {
            let mean = mean.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{mean},{count}\n",
                csv_escape(&m.column),
                csv_escape(cat)
            ));
        }
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// A minimal standalone SVG line chart of one activation curve.
pub fn render_curve_svg(curve: &ActivationCurve) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let (x_lo, x_hi) = match (curve.grid.first(), curve.grid.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        (Some(&lo), _) => (lo - 1.0, lo + 1.0),
        _ => (0.0, 1.0),
    };
    let a_lo = curve.activation.iter().copied().fold(f64::INFINITY, f64::min);
    let a_hi = curve.activation.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (a_lo, a_hi) = if a_lo < a_hi {
        (a_lo, a_hi)
    } else {
        (a_lo - 1.0, a_lo + 1.0)
    };
    let sx = |x: f64| PAD + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * PAD);
    let sy = |a: f64| H - PAD - (a - a_lo) / (a_hi - a_lo) * (H - 2.0 * PAD);
    let points: Vec<String> = curve
        .grid
        .iter()
        .zip(&curve.activation)
        .map(|(&x, &a)| format!("{:.2},{:.2}", sx(x), sy(a)))
        .collect();
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            r#"<line x1="{pad}" y1="{y0}" x2="{xmax}" y2="{y0}" stroke="gray"/>"#,
            r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{y0}" stroke="gray"/>"#,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{points}"/>"#,
            r#"<text x="{pad}" y="30" font-family="sans-serif" font-size="16">{title}</text>"#,
            r#"<text x="{pad}" y="{ylab}" font-family="sans-serif" font-size="11">x (standardized) {xlo:.3} to {xhi:.3}; activation {alo:.3} to {ahi:.3}</text>"#,
            "</svg>\n"
        ),
        w = W,
        h = H,
        pad = PAD,
        y0 = H - PAD,
        xmax = W - PAD,
        points = points.join(" "),
        title = curve.column,
        ylab = H - PAD / 2.0,
        xlo = x_lo,
        xhi = x_hi,
        alo = a_lo,
        ahi = a_hi,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSchema, ColumnStats, EncodedColumn};
    use crate::models::{logits, LinearParams};
    use crate::umnn::{MonotoneMap, ScalarNet};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn continuous_matrix(values: &[f64]) -> EncodedMatrix {
        EncodedMatrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    fn linear_state(beta: Vec<f64>, alpha: f64, matrix: &EncodedMatrix) -> ModelState {
        ModelState {
            kind: ModelKind::Lr,
            linear: LinearParams { alpha, beta },
            maps: None,
            column_map: matrix.column_map.clone(),
            stats: None,
        }
    }

    fn monotonic_state(matrix: &EncodedMatrix, maps: Vec<MonotoneMap>, beta: Vec<f64>) -> ModelState {
        ModelState {
            kind: ModelKind::MonotonicLr,
            linear: LinearParams { alpha: 0.3, beta },
            maps: Some(maps),
            column_map: matrix.column_map.clone(),
            stats: None,
        }
    }

    fn zero_map() -> MonotoneMap {
        MonotoneMap::new(ScalarNet::new(&[1, 8, 1]).unwrap(), 32, true).unwrap()
    }

    /// net(a) = 4a - 2, so f flips sign at a = 0.5 and z has a minimum there.
    fn dip_map() -> MonotoneMap {
        let mut net = ScalarNet::new(&[1, 1]).unwrap();
        net.set_theta(&[4.0, -2.0]).unwrap();
        MonotoneMap::new(net, 32, true).unwrap()
    }

    #[test]
    fn linear_activation_is_beta_x() {
        let m = continuous_matrix(&[-1.0, 0.0, 1.0]);
        let state = linear_state(vec![2.0], 0.0, &m);
        for (x, want) in [(-1.0, -2.0), (0.0, 0.0), (1.0, 2.0)] {
            assert_eq!(activation_at(&state, 0, x).unwrap(), want);
        }
        let curve = activation_curve(&state, &m, 0).unwrap();
        assert_eq!(curve.grid.len(), CONTINUOUS_GRID_POINTS);
        assert_abs_diff_eq!(curve.activation[0], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*curve.activation.last().unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_maps_curve_is_zero_and_flagged_flat() {
        let m = continuous_matrix(&[-1.0, 0.5, 2.0]);
        let state = monotonic_state(&m, vec![zero_map()], vec![1.2]);
        let curve = activation_curve(&state, &m, 0).unwrap();
        assert!(curve.activation.iter().all(|&a| a.abs() < 1e-14));
        let flags = monotonicity_flags(&state, &m).unwrap();
        assert_eq!(
            flags[0].flag,
            MonotonicityFlag::Monotone {
                direction: Direction::Flat
            }
        );
    }

    #[test]
    fn ordinal_curve_uses_category_grid() {
        let ranking = vec!["TA".to_string(), "ATA".to_string(), "NAP".to_string(), "ASY".to_string()];
        let column_map = vec![EncodedColumn {
            source: "ChestPainType".into(),
            source_index: 0,
            kind: EncodedKind::Ordinal {
                ranking: ranking.clone(),
            },
        }];
        let mut m = EncodedMatrix::new(vec![0.0, 1.0, 2.0, 3.0], column_map).unwrap();
        m.stats = Some(vec![ColumnStats { mean: 1.5, std: 1.118033988749895 }]);
        let state = linear_state(vec![1.0], 0.0, &m);
        let curve = activation_curve(&state, &m, 0).unwrap();
        assert_eq!(curve.labels, ranking);
        assert_eq!(curve.grid.len(), 4);
        assert_abs_diff_eq!(curve.grid[0], -1.3416407864998738, epsilon = 1e-12);
        assert!(curve.grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dip_map_flags_non_monotone_near_half() {
        let m = continuous_matrix(&[-1.0, 2.0]);
        let state = monotonic_state(&m, vec![dip_map()], vec![1.0]);
        let flags = monotonicity_flags(&state, &m).unwrap();
        match &flags[0].flag {
            MonotonicityFlag::NonMonotone {
                kind,
                extremum_x,
                ..
            } => {
                assert_eq!(*kind, ExtremumKind::Minimum);
                assert!((extremum_x - 0.5).abs() < 0.05, "extremum at {extremum_x}");
            }
            other => panic!("expected non-monotone, got {other:?}"),
        }
    }

    #[test]
    fn strictly_decreasing_curve_flags_decreasing() {
        let m = continuous_matrix(&[-1.0, 1.0]);
        let state = linear_state(vec![-0.5], 0.0, &m);
        let flags = monotonicity_flags(&state, &m).unwrap();
        assert_eq!(
            flags[0].flag,
            MonotonicityFlag::Monotone {
                direction: Direction::Decreasing
            }
        );
    }

    #[test]
    fn bias_disabled_maps_always_flag_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut map = MonotoneMap::with_new_net(&[6, 6], 32, false, &mut rng).unwrap();
            for t in map.net_mut().theta_mut() {
                *t += rng.random_range(-0.7..0.7);
            }
            let m = continuous_matrix(&[-2.0, 0.3, 1.7]);
            let state = monotonic_state(&m, vec![map], vec![rng.random_range(0.1..1.0)]);
            let flags = monotonicity_flags(&state, &m).unwrap();
            assert!(
                matches!(flags[0].flag, MonotonicityFlag::Monotone { .. }),
                "bias-disabled map flagged {:?}",
                flags[0].flag
            );
        }
    }

    fn toy_table() -> DatasetTable {
        DatasetTable {
            schema: vec![ColumnSchema {
                name: "cat".into(),
                kind: ColumnKind::Categorical,
                categories: vec!["A".into(), "B".into(), "C".into()],
            }],
            target_name: "y".into(),
            rows: vec![
                vec![CellValue::Category(0)],
                vec![CellValue::Category(0)],
                vec![CellValue::Category(1)],
            ],
            target: vec![1, 0, 1],
        }
    }

    #[test]
    fn category_marginal_hand_count() {
        let marginal = category_marginal(&toy_table(), "cat").unwrap();
        assert_eq!(marginal.means[0], Some(0.5));
        assert_eq!(marginal.counts[0], 2);
        assert_eq!(marginal.means[1], Some(1.0));
        assert_eq!(marginal.counts[1], 1);
        // Declared but unused category reports count 0 and no mean.
        assert_eq!(marginal.means[2], None);
        assert_eq!(marginal.counts[2], 0);
        // Counts cover the dataset.
        assert_eq!(marginal.counts.iter().sum::<usize>(), 3);
    }

    #[test]
    fn category_marginal_rejects_bad_columns() {
        assert!(category_marginal(&toy_table(), "nope").is_err());
        let mut table = toy_table();
        table.schema[0].kind = ColumnKind::Continuous;
        table.schema[0].categories.clear();
        table.rows = vec![vec![CellValue::Number(1.0)]; 3];
        assert!(category_marginal(&table, "cat").is_err());
    }

    #[test]
    fn decomposition_matches_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let m = EncodedMatrix::from_rows(&rows).unwrap();
        let maps: Vec<MonotoneMap> = (0..3)
            .map(|_| {
                let mut map = MonotoneMap::with_new_net(&[6, 6], 32, true, &mut rng).unwrap();
                for t in map.net_mut().theta_mut() {
                    *t += rng.random_range(-0.5..0.5);
                }
                map
            })
            .collect();
        let beta = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let state = monotonic_state(&m, maps, beta);
        let acts = row_activations(&state, &m).unwrap();
        let logit = logits(&state, &m).unwrap();
        for (row_acts, &u) in acts.iter().zip(&logit) {
            let sum: f64 = row_acts.iter().sum::<f64>() + state.linear.alpha;
            assert_abs_diff_eq!(sum, u, epsilon = 1e-9);
        }
    }

    #[test]
    fn csv_and_svg_exports() {
        let m = continuous_matrix(&[-1.0, 1.0]);
        let state = linear_state(vec![2.0], 0.0, &m);
        let curve = activation_curve(&state, &m, 0).unwrap();
        let csv = curves_to_csv(&[curve.clone()]);
        assert!(csv.starts_with("column,label,x_standardized,activation\n"));
        assert_eq!(csv.lines().count(), 1 + CONTINUOUS_GRID_POINTS);

        let marginal = category_marginal(&toy_table(), "cat").unwrap();
        let csv = marginals_to_csv(&[marginal]);
        assert!(csv.contains("cat,A,0.5,2"));
        assert!(csv.contains("cat,C,,0"));

        let svg = render_curve_svg(&curve);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
    }
}
