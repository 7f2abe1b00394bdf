//! The few-shot evaluation protocol: shot ladder × seeds × encodings ×
//! methods, ROC-AUC per cell, and aggregation into a report that mirrors the
//! result tables.
//!
//! Every cell is self-contained — it draws its own split, fits its own
//! standardizer (on the training shots only), and trains its own model — so
//! cells can run in parallel without changing any result.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    apply_standardizer, encode_table, fit_standardizer, load_csv, sample_shots, DatasetTable,
    EncodedMatrix, Encoding, Schema,
};
use crate::error::{Error, Result};
use crate::models::{predict, train, ModelKind, TrainConfig};
use crate::priors::{load_prior_file, prior_vector, PriorSpec};

/// Candidate ridge strengths for the optional plain-LR grid search.
pub const L2_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Hex-encoded SHA-256, used for config hashes in reports and manifests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// AUC
// ---------------------------------------------------------------------------

/// Area under the ROC curve by the rank (Mann–Whitney) formulation:
/// `(concordant pairs + 0.5 * tied pairs) / (positives * negatives)`,
/// computed from average ranks in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores contain a non-finite value".into()));
    }
    let n_pos = labels.iter().filter(|&&t| t == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "AUC needs both classes in the labels".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Sum of average ranks (1-based) over the positive class.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }

    let p = n_pos as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

// ---------------------------------------------------------------------------
// Grid definition
// ---------------------------------------------------------------------------

/// A grid file: which dataset, methods, encodings, shot counts, and seeds to
/// run. JSON on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentGrid {
    /// Path to the dataset CSV.
    pub dataset: PathBuf,
    /// Path to the schema JSON.
    pub schema: PathBuf,
    /// Path to the prior file; optional when no method uses priors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<PathBuf>,
    pub methods: Vec<ModelKind>,
    pub encodings: Vec<Encoding>,
    pub shots: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Select the plain-LR ridge on a nested validation split instead of the
    /// fixed default.
    #[serde(default)]
    pub tune_l2: bool,
}

impl ExperimentGrid {
    pub fn from_path(path: impl AsRef<Path>) -> Result<ExperimentGrid> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let grid: ExperimentGrid =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.encodings.is_empty() || self.shots.is_empty() || self.seeds.is_empty()
        {
            return Err(Error::InvalidArgument(
                "grid needs at least one method, encoding, shot count, and seed".into(),
            ));
        }
        if !self.shots.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "shots must be strictly ascending".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.seeds.iter().all(|s| seen.insert(s)) {
            return Err(Error::InvalidArgument("seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Stable hash of the resolved configuration, for provenance.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("grid serializes");
        sha256_hex(canonical.as_bytes())
    }
}

/// The loaded inputs behind a grid file.
pub struct GridInputs {
    pub table: DatasetTable,
    pub schema: Schema,
    pub priors: Option<PriorSpec>,
}

pub fn load_grid_inputs(grid: &ExperimentGrid) -> Result<GridInputs> {
    let schema = Schema::from_path(&grid.schema)?;
    let table = load_csv(&grid.dataset, &schema)?;
    if let Some(&n) = grid.shots.iter().find(|&&n| n >= table.n_rows()) {
        return Err(Error::InvalidArgument(format!(
            "shot count {n} too large for a dataset of {} rows",
            table.n_rows()
        )));
    }
    let priors = match &grid.priors {
        Some(path) => Some(load_prior_file(path, &schema)?),
        None => None,
    };
    Ok(GridInputs {
        table,
        schema,
        priors,
    })
}

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

/// Runs one grid cell end to end: split → encode → standardize on the
/// training shots → train → score the test rows → AUC. Deterministic per
/// `(table, method, encoding, n, seed)`.
pub fn run_cell(
    table: &DatasetTable,
    priors: Option<&PriorSpec>,
    method: ModelKind,
    encoding: Encoding,
    n_shots: usize,
    seed: u64,
    tune_l2: bool,
) -> Result<f64> {
    let split = sample_shots(table, n_shots, seed)?;
    let orderings = priors.map(|p| p.orderings());
    let matrix = encode_table(table, encoding, orderings.as_ref())?;
    let stats = fit_standardizer(&matrix, &split.train_indices)?;
    let matrix = apply_standardizer(&matrix, &stats)?;
    let train_m = matrix.select_rows(&split.train_indices);
    let test_m = matrix.select_rows(&split.test_indices);
    let y_train: Vec<u8> = split.train_indices.iter().map(|&i| table.target[i]).collect();
    let y_test: Vec<u8> = split.test_indices.iter().map(|&i| table.target[i]).collect();

    let beta_p = match priors {
        Some(spec) => prior_vector(spec, &matrix),
        None => vec![0.0; matrix.n_cols()],
    };

    let mut config = TrainConfig::for_kind(method, n_shots, seed)?;
    if method == ModelKind::Lr && tune_l2 {
        if let Some(l2) = select_l2(&train_m, &y_train, seed)? {
            config.l2_fallback = l2;
        }
    }
    let state = train(method, &train_m, &y_train, &beta_p, &config)?;
    let scores = predict(&state, &test_m)?;
    auc(&scores, &y_test)
}

/// Picks the plain-LR ridge from [`L2_GRID`] on a stratified half split of
/// the training shots; returns `None` when the shots are too few to split
/// with both classes on each side.
pub fn select_l2(train_m: &EncodedMatrix, y_train: &[u8], seed: u64) -> Result<Option<f64>> {
    let pos: Vec<usize> = (0..y_train.len()).filter(|&i| y_train[i] == 1).collect();
    let neg: Vec<usize> = (0..y_train.len()).filter(|&i| y_train[i] == 0).collect();
    if pos.len() < 2 || neg.len() < 2 {
        return Ok(None);
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    let (mut pos, mut neg) = (pos, neg);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fit_idx: Vec<usize> = pos[..pos.len() / 2].to_vec();
    fit_idx.extend_from_slice(&neg[..neg.len() / 2]);
    let mut val_idx: Vec<usize> = pos[pos.len() / 2..].to_vec();
    val_idx.extend_from_slice(&neg[neg.len() / 2..]);
    fit_idx.sort_unstable();
    val_idx.sort_unstable();

    let fit_m = train_m.select_rows(&fit_idx);
    let val_m = train_m.select_rows(&val_idx);
    let y_fit: Vec<u8> = fit_idx.iter().map(|&i| y_train[i]).collect();
    let y_val: Vec<u8> = val_idx.iter().map(|&i| y_train[i]).collect();

    let beta_p = vec![0.0; train_m.n_cols()];
    let mut best = (f64::NEG_INFINITY, L2_GRID[0]);
    for &l2 in &L2_GRID {
        let config = TrainConfig {
            l2_fallback: l2,
            ..TrainConfig::for_kind(ModelKind::Lr, y_fit.len().max(1), seed)?
        };
        let state = train(ModelKind::Lr, &fit_m, &y_fit, &beta_p, &config)?;
        let scores = predict(&state, &val_m)?;
        let score = auc(&scores, &y_val)?;
        if score > best.0 {
            best = (score, l2);
        }
    }
    Ok(Some(best.1))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub method: ModelKind,
    pub encoding: Encoding,
    pub shots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc_std: Option<f64>,
    pub seeds: Vec<SeedOutcome>,
}

impl CellReport {
    pub fn id(&self, dataset: &str) -> String {
        format!(
            "{dataset}/{}/{}/n={}",
            self.method.display(),
            self.encoding.as_str(),
            self.shots
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset: String,
    pub config_hash: String,
    pub tool_version: String,
    /// Unix seconds; the only field excluded from determinism comparisons.
    pub created_unix: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub cells: Vec<CellReport>,
}

impl EvalReport {
    /// Flat CSV (`method,encoding,shots,seed,auc`) for external plotting;
    /// failed seeds keep an empty auc field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,encoding,shots,seed,auc\n");
        for cell in &self.cells {
            for s in &cell.seeds {
                let auc = s.auc.map(|a| a.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{auc}\n",
                    cell.method.as_str(),
                    cell.encoding.as_str(),
                    cell.shots,
                    s.seed
                ));
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EvalReport> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every `(method, encoding, shots)` cell of the grid over all seeds,
/// in parallel. Per-seed failures are recorded in the report, not fatal.
pub fn run_grid(grid: &ExperimentGrid, inputs: &GridInputs) -> Result<EvalReport> {
    grid.validate()?;
    struct Job {
        method: ModelKind,
        encoding: Encoding,
        shots: usize,
        seed: u64,
    }
    let mut jobs = Vec::new();
    for &method in &grid.methods {
        for &encoding in &grid.encodings {
            for &shots in &grid.shots {
                for &seed in &grid.seeds {
                    jobs.push(Job {
                        method,
                        encoding,
                        shots,
                        seed,
                    });
                }
            }
        }
    }

    let outcomes: Vec<SeedOutcome> = jobs
        .par_iter()
        .map(|job| {
            match run_cell(
                &inputs.table,
                inputs.priors.as_ref(),
                job.method,
                job.encoding,
                job.shots,
                job.seed,
                grid.tune_l2,
            ) {
                Ok(auc) => SeedOutcome {
                    seed: job.seed,
                    auc: Some(auc),
                    error: None,
                },
                Err(e) => SeedOutcome {
                    seed: job.seed,
                    auc: None,
                    error: Some(format!(
                        "{}/{}/n={}/seed={}: {e}",
                        job.method.display(),
                        job.encoding.as_str(),
                        job.shots,
                        job.seed
                    )),
                },
            }
        })
        .collect();

    let seeds_per_cell = grid.seeds.len();
    let mut cells = Vec::new();
    for (cell_idx, chunk) in outcomes.chunks(seeds_per_cell).enumerate() {
        let job = &jobs[cell_idx * seeds_per_cell];
        let ok: Vec<f64> = chunk.iter().filter_map(|s| s.auc).collect();
        let (auc_mean, auc_std) = if ok.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&ok);
            (Some(m), Some(s))
        };
        cells.push(CellReport {
            method: job.method,
            encoding: job.encoding,
            shots: job.shots,
            auc_mean,
            auc_std,
            seeds: chunk.to_vec(),
        });
    }

    Ok(EvalReport {
        meta: ReportMeta {
            dataset: grid
                .dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            config_hash: grid.config_hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
        cells,
    })
}

// ---------------------------------------------------------------------------
// Reference comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub mean: f64,
    pub std: f64,
}

/// Reference tables: `{dataset: {method_key: {shots: {mean, std}}}}` where
/// `method_key` is e.g. `"LR-Raw"`, `"BiasedLR"`, `"MonotonicLR"`.
pub type ReferenceTable = BTreeMap<String, BTreeMap<String, BTreeMap<String, ReferenceCell>>>;

pub fn load_reference(path: impl AsRef<Path>) -> Result<ReferenceTable> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// The reference-table row key for a method/encoding pair. Plain LR carries
/// its encoding; the prior-based methods run on ordered data in the
/// reference, so only that combination maps to their bare names.
pub fn reference_key(method: ModelKind, encoding: Encoding) -> String {
    match (method, encoding) {
        (ModelKind::Lr, e) => format!(
            "LR-{}",
            match e {
                Encoding::Raw => "Raw",
                Encoding::Ordered => "Ordered",
                Encoding::Onehot => "Onehot",
            }
        ),
        (m, Encoding::Ordered) => m.display().to_string(),
        (m, e) => format!("{}-{}", m.display(), e.as_str()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub cell: String,
    pub ours: f64,
    pub reference: f64,
    pub divergence: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub tolerance: f64,
    pub rows: Vec<ComparisonRow>,
    pub all_pass: bool,
}

/// Checks every reported cell mean against the reference table at the given
/// absolute tolerance. A reported cell with no reference row is an error.
pub fn compare_report(
    report: &EvalReport,
    reference: &ReferenceTable,
    tolerance: f64,
) -> Result<Comparison> {
    let dataset = &report.meta.dataset;
    let by_method = reference
        .get(dataset)
        .ok_or_else(|| Error::MissingReferenceCell(dataset.clone()))?;
    let mut rows = Vec::new();
    for cell in &report.cells {
        let Some(ours) = cell.auc_mean else { continue };
        let key = reference_key(cell.method, cell.encoding);
        let cell_id = cell.id(dataset);
        let entry = by_method
            .get(&key)
            .and_then(|shots| shots.get(&cell.shots.to_string()))
            .ok_or_else(|| Error::MissingReferenceCell(cell_id.clone()))?;
        let divergence = (ours - entry.mean).abs();
        rows.push(ComparisonRow {
            cell: cell_id,
            ours,
            reference: entry.mean,
            divergence,
            pass: divergence <= tolerance,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(Comparison {
        tolerance,
        rows,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CellValue, ColumnKind, ColumnSchema};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// O(P*N) pairwise oracle with explicit tie handling.
    pub(crate) fn auc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let mut concordant = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    concordant += 1.0;
                } else if si == sj {
                    concordant += 0.5;
                }
            }
        }
        concordant / pairs
    }

    #[test]
    fn auc_perfect_ranking() {
        let auc = auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let auc = auc(&[0.4, 0.4, 0.4, 0.4], &[1, 0, 1, 0]).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn auc_hand_computed_example() {
        let auc = auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_abs_diff_eq!(auc, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn auc_rejects_single_class_and_bad_input() {
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(auc(&[0.1], &[1, 0]).is_err());
        assert!(auc(&[f64::NAN, 0.2], &[1, 0]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let scores = [0.1, 0.5, 0.3, 0.9, 0.2];
        let labels = [0, 1, 0, 1, 1];
        let a = auc(&scores, &labels).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (5.0 * s).exp() + 7.0).collect();
        let b = auc(&transformed, &labels).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            scores in proptest::collection::vec(0u8..6, 4..50),
            flips in proptest::collection::vec(any::<bool>(), 4..50),
        ) {
            // Coarse score levels force plenty of ties.
            let n = scores.len().min(flips.len());
            let scores: Vec<f64> = scores[..n].iter().map(|&s| s as f64 / 5.0).collect();
            let labels: Vec<u8> = flips[..n].iter().map(|&b| u8::from(b)).collect();
            prop_assume!(labels.iter().any(|&t| t == 1) && labels.iter().any(|&t| t == 0));
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_oracle(&scores, &labels);
            prop_assert!((fast - slow).abs() < 1e-12);
        }
    }

    fn toy_table(n: usize) -> DatasetTable {
        // Feature = label signal + index wiggle, so LR separates easily.
        let rows: Vec<Vec<CellValue>> = (0..n)
            .map(|i| {
                let y = i % 2;
                vec![CellValue::Number(
                    y as f64 * 2.0 + (i as f64 * 0.37).sin() * 0.3,
                )]
            })
            .collect();
        DatasetTable {
            schema: vec![ColumnSchema {
                name: "x".into(),
                kind: ColumnKind::Continuous,
                categories: vec![],
            }],
            target_name: "y".into(),
            rows,
            target: (0..n).map(|i| (i % 2) as u8).collect(),
        }
    }

    #[test]
    fn run_cell_near_full_data_beats_chance() {
        let table = toy_table(60);
        let auc = run_cell(&table, None, ModelKind::Lr, Encoding::Raw, 50, 0, false).unwrap();
        assert!(auc > 0.9, "AUC {auc}");
    }

    #[test]
    fn run_cell_is_deterministic() {
        let table = toy_table(40);
        let a = run_cell(&table, None, ModelKind::Lr, Encoding::Raw, 8, 3, false).unwrap();
        let b = run_cell(&table, None, ModelKind::Lr, Encoding::Raw, 8, 3, false).unwrap();
        assert_eq!(a, b);
    }

    fn toy_grid(dir: &Path) -> (ExperimentGrid, GridInputs) {
        let table = toy_table(30);
        let schema = Schema {
            target: "y".into(),
            columns: table.schema.clone(),
        };
        let grid = ExperimentGrid {
            dataset: dir.join("toy.csv"),
            schema: dir.join("schema.json"),
            priors: None,
            methods: vec![ModelKind::Lr],
            encodings: vec![Encoding::Raw],
            shots: vec![4],
            seeds: vec![0, 1],
            tune_l2: false,
        };
        (
            grid,
            GridInputs {
                table,
                schema,
                priors: None,
            },
        )
    }

    #[test]
    fn run_grid_aggregates_two_seeds() {
        let (grid, inputs) = toy_grid(Path::new("/tmp"));
        let report = run_grid(&grid, &inputs).unwrap();
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert_eq!(cell.seeds.len(), 2);
        let values: Vec<f64> = cell.seeds.iter().map(|s| s.auc.unwrap()).collect();
        let (m, s) = mean_std(&values);
        assert_abs_diff_eq!(cell.auc_mean.unwrap(), m, epsilon = 1e-15);
        assert_abs_diff_eq!(cell.auc_std.unwrap(), s, epsilon = 1e-15);
    }

    #[test]
    fn mean_std_hand_example() {
        let (m, s) = mean_std(&[0.8, 0.9]);
        assert_abs_diff_eq!(m, 0.85, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn run_grid_is_deterministic_across_runs() {
        let (grid, inputs) = toy_grid(Path::new("/tmp"));
        let mut a = run_grid(&grid, &inputs).unwrap();
        let mut b = run_grid(&grid, &inputs).unwrap();
        a.meta.created_unix = 0;
        b.meta.created_unix = 0;
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    fn reference_with(dataset: &str, key: &str, shots: &str, mean: f64) -> ReferenceTable {
        let mut shots_map = BTreeMap::new();
        shots_map.insert(shots.to_string(), ReferenceCell { mean, std: 0.01 });
        let mut by_method = BTreeMap::new();
        by_method.insert(key.to_string(), shots_map);
        let mut table = BTreeMap::new();
        table.insert(dataset.to_string(), by_method);
        table
    }

    #[test]
    fn compare_report_tolerance_and_missing_cells() {
        let (grid, inputs) = toy_grid(Path::new("/tmp"));
        let report = run_grid(&grid, &inputs).unwrap();
        let ours = report.cells[0].auc_mean.unwrap();

        let exact = reference_with("toy", "LR-Raw", "4", ours);
        let cmp = compare_report(&report, &exact, 0.03).unwrap();
        assert!(cmp.all_pass);
        assert_eq!(cmp.rows[0].divergence, 0.0);

        let near = reference_with("toy", "LR-Raw", "4", ours - 0.02);
        assert!(compare_report(&report, &near, 0.03).unwrap().all_pass);

        let far = reference_with("toy", "LR-Raw", "4", ours - 0.2);
        assert!(!compare_report(&report, &far, 0.03).unwrap().all_pass);

        let missing = reference_with("toy", "LR-Raw", "8", 0.5);
        assert!(matches!(
            compare_report(&report, &missing, 0.03).unwrap_err(),
            Error::MissingReferenceCell(_)
        ));
    }

    #[test]
    fn reference_keys() {
        assert_eq!(reference_key(ModelKind::Lr, Encoding::Raw), "LR-Raw");
        assert_eq!(reference_key(ModelKind::Lr, Encoding::Ordered), "LR-Ordered");
        assert_eq!(reference_key(ModelKind::BiasedLr, Encoding::Ordered), "BiasedLR");
        assert_eq!(
            reference_key(ModelKind::MonotonicLr, Encoding::Ordered),
            "MonotonicLR"
        );
        // Off-protocol combinations get explicit keys that a transcription of
        // the published tables will not contain.
        assert_eq!(reference_key(ModelKind::BiasedLr, Encoding::Raw), "BiasedLR-raw");
    }

    #[test]
    fn grid_validation() {
        let (mut grid, _) = toy_grid(Path::new("/tmp"));
        grid.shots = vec![8, 4];
        assert!(grid.validate().is_err());
        grid.shots = vec![4, 8];
        grid.seeds = vec![1, 1];
        assert!(grid.validate().is_err());
        grid.seeds = vec![];
        assert!(grid.validate().is_err());
    }

    #[test]
    fn select_l2_declines_tiny_shot_sets() {
        let table = toy_table(20);
        let matrix = encode_table(&table, Encoding::Raw, None).unwrap();
        let y: Vec<u8> = table.target.clone();
        // Two rows only: one per class, cannot split.
        let m2 = matrix.select_rows(&[0, 1]);
        assert!(select_l2(&m2, &y[0..2], 0).unwrap().is_none());
        // Eight rows: tuning returns one of the candidates, deterministically.
        let m8 = matrix.select_rows(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let l2a = select_l2(&m8, &y[0..8], 0).unwrap().unwrap();
        let l2b = select_l2(&m8, &y[0..8], 0).unwrap().unwrap();
        assert_eq!(l2a, l2b);
        assert!(L2_GRID.contains(&l2a));
    }
}
