//! Pipeline driver: transform raw attributes onto the simplex, fit the
//! labeled background model, fit novel components against it, classify,
//! evaluate, and generate synthetic data.
//!
//! Every stage is deterministic given one configuration and one seed;
//! the worker count changes runtime only, never output bytes.

mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dirmix_core::classify::{classify_batch, evaluate};
use dirmix_core::config::PipelineConfig;
use dirmix_core::csvio::{self, RawTable, SignatureRow};
use dirmix_core::fb::{self, FBModel};
use dirmix_core::persist;
use dirmix_core::seed;
use dirmix_core::synth::{self, SynthSpec};
use dirmix_core::transform::SimplexTransform;
use dirmix_core::tsdm::{LabeledDataset, TSDMModel};
use dirmix_core::{Error, Result};

/// Seed stream for the train/test split, distinct from the EM streams.
const SPLIT_STREAM: u64 = 0x7370_6C69_74;

#[derive(Parser)]
#[command(
    name = "dirmix",
    version,
    about = "Dirichlet-mixture background modeling and novelty detection"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Pipeline configuration JSON (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores). Affects runtime only.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the rank-based simplex transform, or apply a saved one.
    Transform {
        /// Raw attribute CSV (id[,label],attributes...).
        #[arg(long)]
        input: PathBuf,
        /// Attributes to use (default: every numeric column).
        #[arg(long, value_delimiter = ',')]
        attrs: Vec<String>,
        /// Apply this saved transform instead of fitting a new one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Fit the background model on labeled simplex data.
    FitTsdm {
        /// Labeled simplex CSV (id,label,y0..).
        #[arg(long)]
        input: PathBuf,
        /// Fit on every row instead of the seeded train/test split.
        #[arg(long)]
        no_split: bool,
    },
    /// Fit novel components and weights against a frozen background.
    FitFb {
        /// Background model JSON from fit-tsdm.
        #[arg(long)]
        background: PathBuf,
        /// Unlabeled simplex CSV (a label column, if present, is ignored).
        #[arg(long)]
        input: PathBuf,
    },
    /// Assign points to background classes or the novel class.
    Classify {
        /// Fitted model JSON from fit-fb.
        #[arg(long)]
        model: PathBuf,
        /// Simplex CSV to classify.
        #[arg(long)]
        input: PathBuf,
        /// Also render component signatures as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Score assignments against truth labels.
    Evaluate {
        /// Assignments CSV from classify.
        #[arg(long)]
        assignments: PathBuf,
        /// Truth CSV (id,label).
        #[arg(long)]
        truth: PathBuf,
        /// Truth label marking novel points.
        #[arg(long, default_value = "NEW")]
        novel_label: String,
        /// Also render the confusion matrix as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Generate a synthetic dataset from a spec.
    Simulate {
        /// Generator spec JSON.
        #[arg(long)]
        spec: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                2
            } else if e.is_convergence() {
                3
            } else {
                4
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(workers) = cli.global.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    }
    let mut config = match &cli.global.config {
        Some(path) => persist::load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    config.validate()?;
    std::fs::create_dir_all(&cli.global.out)?;
    let out = cli.global.out.as_path();

    match cli.command {
        Command::Transform {
            input,
            attrs,
            model,
        } => cmd_transform(&config, &input, &attrs, model.as_deref(), out),
        Command::FitTsdm { input, no_split } => cmd_fit_tsdm(&config, &input, no_split, out),
        Command::FitFb { background, input } => cmd_fit_fb(&config, &background, &input, out),
        Command::Classify { model, input, svg } => cmd_classify(&model, &input, svg, out),
        Command::Evaluate {
            assignments,
            truth,
            novel_label,
            svg,
        } => cmd_evaluate(&assignments, &truth, &novel_label, svg, out),
        Command::Simulate { spec } => cmd_simulate(cli.global.seed, &spec, out),
    }
}

/// Project the named attribute columns out of a table, in `names` order.
fn select_columns(table: &RawTable, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let indices: Vec<usize> = names
        .iter()
        .map(|name| {
            table
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Validation(format!("missing attribute column {name:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table
        .rows
        .iter()
        .map(|row| indices.iter().map(|&i| row[i]).collect())
        .collect())
}

fn cmd_transform(
    config: &PipelineConfig,
    input: &Path,
    attrs: &[String],
    model: Option<&Path>,
    out: &Path,
) -> Result<()> {
    if model.is_some() && !attrs.is_empty() {
        return Err(Error::Validation(
            "--attrs selects columns for a new fit; a saved --model already fixes them".into(),
        ));
    }
    let table = csvio::read_table(input)?;
    let transform = match model {
        Some(path) => persist::load::<SimplexTransform>(path)?,
        None => {
            let names: Vec<String> = if attrs.is_empty() {
                table.names.clone()
            } else {
                attrs.to_vec()
            };
            let rows = select_columns(&table, &names)?;
            SimplexTransform::fit_with_clamp(&rows, &names, config.clamp)?
        }
    };
    let names: Vec<String> = transform.names().iter().map(|s| s.to_string()).collect();
    let rows = select_columns(&table, &names)?;
    let points = transform.apply_batch(&rows)?;

    persist::save(&out.join("transform.json"), &transform)?;
    csvio::write_simplex(
        &out.join("simplex.csv"),
        &table.ids,
        table.labels.as_deref(),
        &points,
    )?;
    println!(
        "transformed {} rows x {} attributes onto the {}-simplex",
        points.len(),
        transform.n_attrs(),
        transform.dim(),
    );
    Ok(())
}

fn cmd_fit_tsdm(config: &PipelineConfig, input: &Path, no_split: bool, out: &Path) -> Result<()> {
    let table = csvio::read_table(input)?;
    let labels = table
        .labels
        .clone()
        .ok_or_else(|| Error::Validation("fit-tsdm needs a label column".into()))?;
    let points = table.to_simplex()?;

    let split_seed = seed::derive(config.seed, SPLIT_STREAM);
    let (train_idx, test_idx) = if no_split {
        ((0..points.len()).collect::<Vec<_>>(), Vec::new())
    } else {
        synth::stratified_split(&labels, config.split_fraction, split_seed)?
    };
    let train = LabeledDataset::new(
        train_idx.iter().map(|&i| points[i].clone()).collect(),
        train_idx.iter().map(|&i| labels[i].clone()).collect(),
    )?;

    let model = TSDMModel::fit(
        &train,
        config.prior_e.clone(),
        &config.class_ranges(),
        &config.em_config(),
    )?;
    persist::save(&out.join("tsdm.json"), &model)?;

    // Report the split so the held-out rows are recoverable.
    let mut roles = vec!["train"; points.len()];
    for &i in &test_idx {
        roles[i] = "test";
    }
    csvio::write_split(&out.join("split.csv"), &table.ids, &labels, &roles)?;

    println!(
        "fitted background: {} classes on {} training rows (seeded split {}/{}, seed stream {split_seed})",
        model.k(),
        train.len(),
        train_idx.len(),
        test_idx.len(),
    );
    for (k, (label, report)) in model.classes().iter().zip(model.reports()).enumerate() {
        println!(
            "  class {label}: J={} bic={:.3} candidates={:?}",
            model.inner()[k].j(),
            report.bic,
            report.candidate_bics,
        );
    }
    Ok(())
}

fn cmd_fit_fb(config: &PipelineConfig, background: &Path, input: &Path, out: &Path) -> Result<()> {
    let background: TSDMModel = persist::load(background)?;
    let table = csvio::read_table(input)?;
    let points = table.to_simplex()?;
    let (model, report) = fb::fit(
        background,
        &points,
        &config.new_class_candidates(),
        &config.em_config(),
    )?;
    persist::save(&out.join("fb.json"), &model)?;
    persist::save(&out.join("fb_report.json"), &report)?;
    if report.no_novelty {
        println!("no novel component survived; pure background model (lambda0 = 1)");
    } else {
        println!(
            "fitted {} novel component(s): lambda0={:.6}, novel mass={:.6}, bic={:.3}",
            model.new_class().map_or(0, |m| m.j()),
            model.lambda0(),
            1.0 - model.lambda0(),
            report.bic,
        );
    }
    Ok(())
}

fn cmd_classify(model: &Path, input: &Path, render_svg: bool, out: &Path) -> Result<()> {
    let model: FBModel = persist::load(model)?;
    let table = csvio::read_table(input)?;
    let points = table.to_simplex()?;
    let assignments = classify_batch(&model, &points);
    csvio::write_assignments(
        &out.join("assignments.csv"),
        &table.ids,
        model.background().classes(),
        &assignments,
    )?;

    let mut rows = Vec::new();
    for (label, mixture) in model
        .background()
        .classes()
        .iter()
        .zip(model.background().inner())
    {
        for (j, (sig, &w)) in dirmix_core::classify::signatures(mixture)
            .into_iter()
            .zip(mixture.weights())
            .enumerate()
        {
            rows.push(SignatureRow {
                source: label.clone(),
                component: j,
                weight: w,
                values: sig,
            });
        }
    }
    if let Some(mixture) = model.new_class() {
        for (j, (sig, &w)) in dirmix_core::classify::signatures(mixture)
            .into_iter()
            .zip(mixture.weights())
            .enumerate()
        {
            rows.push(SignatureRow {
                source: "new".into(),
                component: j,
                weight: w,
                values: sig,
            });
        }
    }
    let names: Vec<String> = (0..model.dim()).map(|d| format!("y{d}")).collect();
    csvio::write_signatures(&out.join("signatures.csv"), &names, &rows)?;
    if render_svg {
        std::fs::write(
            out.join("signatures.svg"),
            svg::signatures_svg(&names, &rows),
        )?;
    }

    let flagged = assignments.iter().filter(|a| a.is_new_class).count();
    println!(
        "classified {} points: {} assigned to background classes, {} flagged novel",
        assignments.len(),
        assignments.len() - flagged,
        flagged,
    );
    Ok(())
}

fn cmd_evaluate(
    assignments: &Path,
    truth: &Path,
    novel_label: &str,
    render_svg: bool,
    out: &Path,
) -> Result<()> {
    let (ids, classes, assignments) = csvio::read_assignments(assignments)?;
    let truth_table = csvio::read_table(truth)?;
    let truth_labels = truth_table
        .labels
        .as_ref()
        .ok_or_else(|| Error::Validation("truth file needs a label column".into()))?;
    let by_id: std::collections::HashMap<&str, &str> = truth_table
        .ids
        .iter()
        .map(String::as_str)
        .zip(truth_labels.iter().map(String::as_str))
        .collect();
    let truth: Vec<String> = ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|l| l.to_string())
                .ok_or_else(|| Error::Validation(format!("truth file is missing id {id:?}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let (matrix, metrics) = evaluate(&classes, &assignments, &truth, novel_label)?;
    csvio::write_confusion(&out.join("confusion.csv"), &matrix)?;
    let envelope = serde_json::json!({
        "schema_version": persist::SCHEMA_VERSION,
        "kind": "metrics",
        "payload": metrics,
    });
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    std::fs::write(out.join("metrics.json"), text)?;
    if render_svg {
        std::fs::write(out.join("confusion.svg"), svg::confusion_svg(&matrix))?;
    }

    let fmt = |m: Option<f64>| m.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "accuracy={:.4} sensitivity={} specificity={} over {} points",
        metrics.overall_accuracy,
        fmt(metrics.new_class_sensitivity),
        fmt(metrics.new_class_specificity),
        matrix.n(),
    );
    Ok(())
}

fn cmd_simulate(seed_override: Option<u64>, spec: &Path, out: &Path) -> Result<()> {
    let mut spec: SynthSpec = persist::load(spec)?;
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    let (data, hidden) = synth::generate(&spec)?;
    let ids: Vec<String> = (0..data.len()).map(|i| format!("s{i}")).collect();
    csvio::write_simplex(
        &out.join("data.csv"),
        &ids,
        Some(data.labels()),
        data.points(),
    )?;
    csvio::write_hidden(&out.join("hidden.csv"), &ids, &hidden)?;
    let novel = hidden.iter().filter(|h| h.class_index.is_none()).count();
    println!(
        "generated {} points ({} novel) with seed {}; true log-likelihood {:.6}",
        data.len(),
        novel,
        spec.seed,
        synth::true_log_likelihood(&spec, data.points())?,
    );
    Ok(())
}
