//! Batch runner for the prior-augmented tabular classifiers.
//!
//! Subcommands: `prompts` (emit LLM query texts), `train` (fit one model and
//! write a checkpoint), `eval` (run a grid file into a report), `analyze`
//! (activation curves, marginals, monotonicity flags from a checkpoint), and
//! `compare` (check a report against reference tables).
//!
//! Exit codes: 0 success, 1 comparison failure or training divergence,
//! 2 usage or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;

use tabprior::analyze::{
    activation_curves, category_marginal, curves_to_csv, marginals_to_csv, monotonicity_flags,
    render_curve_svg, MonotonicityFlag,
};
use tabprior::data::{
    apply_standardizer, encode_table, encode_with_map, fit_standardizer, load_csv, sample_shots,
    ColumnKind, Encoding, Schema,
};
use tabprior::error::Error;
use tabprior::eval::{
    auc, compare_report, load_grid_inputs, load_reference, run_grid, sha256_hex, EvalReport,
    ExperimentGrid,
};
use tabprior::models::{predict, train, Checkpoint, ModelKind, TrainConfig};
use tabprior::priors::{
    generate_correlation_prompt, generate_ordering_prompt, load_prior_file, prior_vector,
    DatasetMeta,
};

#[derive(Parser)]
#[command(name = "tabprior", version, about = "Few-shot tabular classification with LLM-derived priors")]
struct Cli {
    /// Worker threads for grid evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one LLM query text file per eligible column.
    Prompts {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model on a seeded shot split and write a checkpoint.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        priors: Option<PathBuf>,
        /// lr | biased | monotonic
        #[arg(long)]
        method: String,
        /// raw | ordered | onehot
        #[arg(long, default_value = "ordered")]
        encoding: String,
        #[arg(long)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid file; writes report.json, report.csv, and manifest.json.
    Eval {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Activation curves, category marginals, and monotonicity flags for a
    /// fitted checkpoint.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also render one SVG line chart per column.
        #[arg(long)]
        svg: bool,
    },
    /// Check a report's cell means against reference tables.
    Compare {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 0.03)]
        tolerance: f64,
    },
}

/// Everything needed to reproduce a run, written next to its outputs.
#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    created_unix: u64,
    command: String,
    config: serde_json::Value,
    config_hash: String,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value) -> RunManifest {
        let canonical = config.to_string();
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            command: command.to_string(),
            config,
            config_hash: sha256_hex(canonical.as_bytes()),
        }
    }

    fn save(&self, path: &Path) -> Result<(), Error> {
        write_text(path, &format!("{}\n", serde_json::to_string_pretty(self).unwrap()))
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Prompts { schema, meta, out } => cmd_prompts(&schema, &meta, &out),
        Command::Train {
            dataset,
            schema,
            priors,
            method,
            encoding,
            shots,
            seed,
            out,
        } => cmd_train(&dataset, &schema, priors.as_deref(), &method, &encoding, shots, seed, &out),
        Command::Eval { grid, out } => cmd_eval(&grid, &out),
        Command::Analyze {
            checkpoint,
            dataset,
            schema,
            out,
            svg,
        } => cmd_analyze(&checkpoint, &dataset, &schema, &out, svg),
        Command::Compare {
            report,
            reference,
            tolerance,
        } => cmd_compare(&report, &reference, tolerance),
    }
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn cmd_prompts(schema_path: &Path, meta_path: &Path, out: &Path) -> Result<u8, Error> {
    let schema = Schema::from_path(schema_path)?;
    let meta = DatasetMeta::from_path(meta_path)?;
    ensure_dir(out)?;
    let mut written = 0usize;
    for column in &schema.columns {
        let described = meta.column_descriptions.contains_key(&column.name);
        let result = match column.kind {
            ColumnKind::Continuous if described => {
                generate_correlation_prompt(&meta, &column.name)
                    .map(|text| (format!("{}_correlation.txt", column.name), text))
            }
            ColumnKind::Categorical if described => {
                generate_ordering_prompt(&meta, &column.name)
                    .map(|text| (format!("{}_ordering.txt", column.name), text))
            }
            _ => {
                log::warn!("column {:?} has no description in the meta file; skipped", column.name);
                continue;
            }
        };
        match result {
            Ok((name, text)) => {
                write_text(&out.join(&name), &format!("{text}\n"))?;
                println!("prompt column={} file={name}", column.name);
                written += 1;
            }
            Err(e) => log::warn!("column {:?} skipped: {e}", column.name),
        }
    }
    println!("prompts written={written} out={}", out.display());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    dataset: &Path,
    schema_path: &Path,
    priors_path: Option<&Path>,
    method: &str,
    encoding: &str,
    shots: usize,
    seed: u64,
    out: &Path,
) -> Result<u8, Error> {
    let method = ModelKind::from_str(method)?;
    let encoding = Encoding::from_str(encoding)?;
    let schema = Schema::from_path(schema_path)?;
    let table = load_csv(dataset, &schema)?;
    let priors = priors_path.map(|p| load_prior_file(p, &schema)).transpose()?;

    let split = sample_shots(&table, shots, seed)?;
    let orderings = priors.as_ref().map(|p| p.orderings());
    let matrix = encode_table(&table, encoding, orderings.as_ref())?;
    let stats = fit_standardizer(&matrix, &split.train_indices)?;
    let matrix = apply_standardizer(&matrix, &stats)?;
    let train_m = matrix.select_rows(&split.train_indices);
    let test_m = matrix.select_rows(&split.test_indices);
    let y_train: Vec<u8> = split.train_indices.iter().map(|&i| table.target[i]).collect();
    let y_test: Vec<u8> = split.test_indices.iter().map(|&i| table.target[i]).collect();

    let beta_p = priors
        .as_ref()
        .map(|p| prior_vector(p, &matrix))
        .unwrap_or_else(|| vec![0.0; matrix.n_cols()]);
    let config = TrainConfig::for_kind(method, shots, seed)?;
    println!(
        "train method={} encoding={} shots={shots} seed={seed} lambda={} columns={}",
        method.as_str(),
        encoding.as_str(),
        config.lambda,
        matrix.n_cols()
    );

    let state = train(method, &train_m, &y_train, &beta_p, &config)?;
    let scores = predict(&state, &test_m)?;
    let test_auc = auc(&scores, &y_test)?;
    println!(
        "fit train_rows={} test_rows={} test_auc={test_auc:.4}",
        y_train.len(),
        y_test.len()
    );

    Checkpoint::from_state(&state, &config).save(out)?;
    let split_path = out.with_extension("split.json");
    write_text(
        &split_path,
        &format!("{}\n", serde_json::to_string_pretty(&split).unwrap()),
    )?;
    let manifest = RunManifest::new(
        "train",
        serde_json::json!({
            "dataset": dataset, "schema": schema_path, "priors": priors_path,
            "method": method.as_str(), "encoding": encoding.as_str(),
            "shots": shots, "seed": seed, "train_config": config,
        }),
    );
    manifest.save(&out.with_extension("manifest.json"))?;
    println!("checkpoint out={} split={}", out.display(), split_path.display());
    Ok(0)
}

fn cmd_eval(grid_path: &Path, out: &Path) -> Result<u8, Error> {
    let grid = ExperimentGrid::from_path(grid_path)?;
    let inputs = load_grid_inputs(&grid)?;
    ensure_dir(out)?;
    let report = run_grid(&grid, &inputs)?;

    let mut failures = 0usize;
    for cell in &report.cells {
        let failed = cell.seeds.iter().filter(|s| s.error.is_some()).count();
        failures += failed;
        println!(
            "cell method={} encoding={} shots={} auc_mean={} auc_std={} seeds={} failed={failed}",
            cell.method.as_str(),
            cell.encoding.as_str(),
            cell.shots,
            cell.auc_mean.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            cell.auc_std.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            cell.seeds.len(),
        );
        for s in &cell.seeds {
            if let Some(err) = &s.error {
                log::warn!("{err}");
            }
        }
    }

    report.save(out.join("report.json"))?;
    write_text(&out.join("report.csv"), &report.to_csv())?;
    RunManifest::new("eval", serde_json::to_value(&grid).unwrap()).save(&out.join("manifest.json"))?;
    println!(
        "report cells={} out={} config_hash={}",
        report.cells.len(),
        out.display(),
        report.meta.config_hash
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn cmd_analyze(
    checkpoint_path: &Path,
    dataset: &Path,
    schema_path: &Path,
    out: &Path,
    svg: bool,
) -> Result<u8, Error> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let state = checkpoint.to_state()?;
    let schema = Schema::from_path(schema_path)?;
    let table = load_csv(dataset, &schema)?;

    let mut matrix = encode_with_map(&table, &state.column_map)?;
    if let Some(stats) = &state.stats {
        matrix = apply_standardizer(&matrix, stats)?;
    }

    ensure_dir(out)?;
    let curves = activation_curves(&state, &matrix)?;
    write_text(&out.join("curves.csv"), &curves_to_csv(&curves))?;

    let marginals = schema
        .columns
        .iter()
        .filter(|c| c.kind == ColumnKind::Categorical)
        .map(|c| category_marginal(&table, &c.name))
        .collect::<Result<Vec<_>, Error>>()?;
    write_text(&out.join("marginals.csv"), &marginals_to_csv(&marginals))?;

    let flags = monotonicity_flags(&state, &matrix)?;
    for f in &flags {
        match &f.flag {
            MonotonicityFlag::Monotone { direction } => {
                println!("column={} flag=monotone direction={direction:?}", f.column)
            }
            MonotonicityFlag::NonMonotone {
                kind,
                extremum_x,
                extremum_label,
                ..
            } => println!(
                "column={} flag=non_monotone kind={kind:?} extremum_x={extremum_x:.4} label={extremum_label}",
                f.column
            ),
        }
    }
    write_text(
        &out.join("flags.json"),
        &format!("{}\n", serde_json::to_string_pretty(&flags).unwrap()),
    )?;

    if svg {
        for curve in &curves {
            write_text(
                &out.join(format!("{}_{}.svg", curve.encoded_index, curve.column)),
                &render_curve_svg(curve),
            )?;
        }
    }
    println!("analyze columns={} out={}", curves.len(), out.display());
    Ok(0)
}

fn cmd_compare(report_path: &Path, reference_path: &Path, tolerance: f64) -> Result<u8, Error> {
    let report = EvalReport::load(report_path)?;
    let reference = load_reference(reference_path)?;
    let comparison = compare_report(&report, &reference, tolerance)?;
    for row in &comparison.rows {
        println!(
            "compare cell={} ours={:.4} reference={:.2} divergence={:.4} pass={}",
            row.cell, row.ours, row.reference, row.divergence, row.pass
        );
    }
    println!(
        "compare cells={} tolerance={tolerance} all_pass={}",
        comparison.rows.len(),
        comparison.all_pass
    );
    Ok(if comparison.all_pass { 0 } else { 1 })
}
