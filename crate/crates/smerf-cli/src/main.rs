//! `smerf` binary: simulate datasets, train/tune/predict distance forests,
//! evaluate predictions, rank feature importances, run link prediction on
//! attributed networks, and sweep the s_n convergence diagnostic.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! `SMERF_THREADS` caps the worker pool; any fixed `--seed` makes every
//! command bit-deterministic regardless of thread count.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smerf::forest::{default_grid, train_reduction_forest, tune, SmerfForest};
use smerf::importance::feature_importance;
use smerf::metrics::{map_at_10, rmse_pairs, spearman_per_point};
use smerf::model::{deserialize_forest, serialize_forest};
use smerf::reductions::{absolute_distance, LabeledData};
use smerf::train_forest;
use smerf::types::{Hyperparams, ProjectionMode, Sampling};
use smerf::Error as SmerfError;

use smerf_cli::error::{CliError, Result};
use smerf_cli::io;
use smerf_cli::pipelines::{self, LinkpredConfig, SimFamily};

#[derive(Parser)]
#[command(name = "smerf", version, about = "Distance-learning random forests")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    /// Axis-aligned splits.
    Rf,
    /// Sparse +-1 oblique projections.
    Binary,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Family {
    Regression,
    Bilinear,
    Radial,
    Theory,
    Sbm,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Reduction {
    /// Class labels; indicator distance.
    Class,
    /// Real responses; half squared difference distance.
    Reg,
    /// Real responses; absolute difference distance.
    Abs,
}

/// Forest hyperparameters shared by the training-style commands.
#[derive(Args, Clone)]
struct HpArgs {
    /// Number of trees.
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Candidate projections per node; defaults to round(sqrt(p)).
    #[arg(long)]
    d: Option<usize>,
    /// Minimum node size to attempt a split.
    #[arg(long, default_value_t = 2)]
    min_parent: usize,
    /// Depth cap; unbounded when omitted.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Per-tree subsample size (without replacement); bootstrap when omitted.
    #[arg(long)]
    subsample: Option<usize>,
    /// Split orientation scheme.
    #[arg(long, value_enum, default_value_t = Mode::Rf)]
    mode: Mode,
    /// Expected nonzeros per sparse projection (binary mode).
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
}

impl HpArgs {
    fn build(&self, p: usize, seed: u64) -> Hyperparams {
        let d = self
            .d
            .unwrap_or_else(|| ((p as f64).sqrt().round() as usize).max(1));
        Hyperparams {
            num_trees: self.trees,
            d,
            min_parent: self.min_parent,
            max_depth: self.max_depth,
            sampling: self
                .subsample
                .map_or(Sampling::Bootstrap, Sampling::Subsample),
            projection_mode: match self.mode {
                Mode::Rf => ProjectionMode::AxisAligned,
                Mode::Binary => ProjectionMode::SparseBinary {
                    lambda: self.lambda,
                },
            },
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a simulated dataset into a directory.
    Simulate {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Feature count for the theory family.
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        #[arg(long, default_value_t = 0.5)]
        p_in: f64,
        #[arg(long, default_value_t = 0.05)]
        p_out: f64,
        #[arg(long, default_value_t = 0.0)]
        attr_noise: f64,
    },
    /// Train a forest on a distance matrix or through a label reduction.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        dist: Option<PathBuf>,
        /// Labels or responses, depending on --reduction.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_enum)]
        reduction: Option<Reduction>,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search d and min-parent by out-of-bag RMSE.
    Tune {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional CSV for the per-entry OOB table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the pairwise distance matrix for new points.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted distance matrix against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Optional CSV metric table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-feature split-gain importances of a trained model.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Link prediction on an attributed network via Z = 1 - A.
    Linkpred {
        #[arg(long)]
        adjacency: PathBuf,
        #[arg(long)]
        attributes: PathBuf,
        /// Train proportion of nodes.
        #[arg(long, default_value_t = 0.5)]
        tp: f64,
        #[arg(long, default_value_t = 5)]
        replicates: u64,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Force z_ii = 0 instead of the 1 - A diagonal.
        #[arg(long)]
        zero_diagonal: bool,
        /// Also score train-test pairs.
        #[arg(long)]
        include_cross_pairs: bool,
        /// Optional CSV of per-replicate results.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// s_n convergence sweep on the additive theory model.
    TheoryCheck {
        #[arg(long, default_value_t = 4)]
        min_exp: u32,
        #[arg(long, default_value_t = 12)]
        max_exp: u32,
        #[arg(long, default_value_t = 1000)]
        trees: usize,
        #[arg(long, default_value_t = 200)]
        test_points: usize,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional CSV of (n, s_n) points.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_model(path: &Path) -> Result<SmerfForest> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(deserialize_forest(&bytes)?)
}

fn print_oob(forest: &SmerfForest, x: &smerf::FeatureMatrix) {
    let z = forest.train_z.as_ref().expect("training distances stored");
    match forest.oob_rmse(x, z) {
        Ok(report) => println!(
            "oob_rmse={} covered_pairs={} total_pairs={}",
            report.rmse, report.covered_pairs, report.total_pairs
        ),
        Err(SmerfError::NoCoveredPairs) => {
            println!("oob_rmse=n/a (no pair left out-of-bag)")
        }
        Err(e) => println!("oob_rmse=n/a ({e})"),
    }
}

fn cmd_train(
    features: &Path,
    dist: Option<&Path>,
    labels: Option<&Path>,
    reduction: Option<Reduction>,
    hp_args: &HpArgs,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let x = io::read_features(features)?;
    let hp = hp_args.build(x.p(), seed);
    let forest = match (dist, labels) {
        (Some(dist), None) => {
            if reduction.is_some() {
                return Err(CliError::Usage(
                    "--reduction only applies with --labels".into(),
                ));
            }
            let z = io::read_distance_matrix(dist)?;
            train_forest(&x, &z, &hp)?
        }
        (None, Some(labels)) => match reduction {
            Some(Reduction::Class) => {
                let labeled = LabeledData::classes(io::read_labels(labels)?)?;
                train_reduction_forest(&x, &labeled, &hp, true)?
            }
            Some(Reduction::Reg) => {
                let labeled = LabeledData::responses(io::read_responses(labels)?)?;
                train_reduction_forest(&x, &labeled, &hp, true)?
            }
            Some(Reduction::Abs) => {
                let z = absolute_distance(&io::read_responses(labels)?)?;
                train_forest(&x, &z, &hp)?
            }
            None => {
                return Err(CliError::Usage(
                    "--labels requires --reduction {class|reg|abs}".into(),
                ))
            }
        },
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --dist or --labels".into(),
            ))
        }
    };
    print_oob(&forest, &x);
    std::fs::write(out, serialize_forest(&forest))?;
    println!("model written to {}", out.display());
    Ok(())
}

fn cmd_evaluate(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let pred = io::read_distance_matrix(pred)?;
    let truth = io::read_distance_matrix(truth)?;
    let mut rows: Vec<(String, f64)> = Vec::new();
    rows.push(("rmse".into(), rmse_pairs(&pred, &truth)?));
    let (rho, skipped) = spearman_per_point(&pred, &truth)?;
    rows.push(("spearman".into(), rho));
    rows.push(("spearman_skipped_points".into(), skipped as f64));
    match map_at_10(&pred, &truth) {
        Ok(v) => rows.push(("map10".into(), v)),
        Err(SmerfError::TooFewPoints { .. }) => {
            println!("map10 skipped: needs at least 11 points")
        }
        Err(e) => return Err(e.into()),
    }
    for (name, value) in &rows {
        println!("{name}={value}");
    }
    if let Some(out) = out {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|(n, v)| vec![n.clone(), v.to_string()])
            .collect();
        io::write_table(out, &["metric", "value"], &table)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate {
            family,
            n,
            seed,
            out,
            p,
            blocks,
            p_in,
            p_out,
            attr_noise,
        } => {
            let family = match family {
                Family::Regression => SimFamily::Regression,
                Family::Bilinear => SimFamily::Bilinear,
                Family::Radial => SimFamily::Radial,
                Family::Theory => SimFamily::Theory { p },
                Family::Sbm => SimFamily::Sbm {
                    blocks,
                    p_in,
                    p_out,
                    attr_noise,
                },
            };
            for path in pipelines::simulate(family, n, seed, &out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Cmd::Train {
            features,
            dist,
            labels,
            reduction,
            hp,
            seed,
            out,
        } => cmd_train(
            &features,
            dist.as_deref(),
            labels.as_deref(),
            reduction,
            &hp,
            seed,
            &out,
        ),
        Cmd::Tune {
            features,
            dist,
            hp,
            seed,
            out,
        } => {
            let x = io::read_features(&features)?;
            let z = io::read_distance_matrix(&dist)?;
            let base = hp.build(x.p(), seed);
            let grid = default_grid(x.p(), &base);
            let (best, reports) = tune(&x, &z, &grid, seed)?;
            let mut table = Vec::new();
            for (entry, report) in grid.iter().zip(&reports) {
                println!(
                    "d={} min_parent={} oob_rmse={} covered_pairs={}",
                    entry.d, entry.min_parent, report.rmse, report.covered_pairs
                );
                table.push(vec![
                    entry.d.to_string(),
                    entry.min_parent.to_string(),
                    report.rmse.to_string(),
                    report.covered_pairs.to_string(),
                ]);
            }
            println!("best: d={} min_parent={}", best.d, best.min_parent);
            if let Some(out) = out {
                io::write_table(&out, &["d", "min_parent", "oob_rmse", "covered_pairs"], &table)?;
            }
            Ok(())
        }
        Cmd::Predict {
            model,
            features,
            out,
        } => {
            let forest = load_model(&model)?;
            let x = io::read_features(&features)?;
            let pred = forest.predict_matrix(&x)?;
            io::write_matrix(&out, &pred)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Evaluate { pred, truth, out } => cmd_evaluate(&pred, &truth, out.as_deref()),
        Cmd::Importance { model, out } => {
            let forest = load_model(&model)?;
            let imp = feature_importance(&forest);
            let mut table = Vec::new();
            for (k, (raw, norm)) in imp.raw.iter().zip(&imp.normalized).enumerate() {
                println!("x{} raw={raw} normalized={norm}", k + 1);
                table.push(vec![
                    format!("x{}", k + 1),
                    raw.to_string(),
                    norm.to_string(),
                ]);
            }
            if let Some(out) = out {
                io::write_table(&out, &["feature", "raw", "normalized"], &table)?;
            }
            Ok(())
        }
        Cmd::Linkpred {
            adjacency,
            attributes,
            tp,
            replicates,
            hp,
            seed,
            zero_diagonal,
            include_cross_pairs,
            out,
        } => {
            let adj = io::read_distance_matrix(&adjacency)?;
            let attrs = io::read_features(&attributes)?;
            let n = adj.n();
            println!(
                "n={} node pairs=(n^2 - n)/2 = {}",
                n,
                n * (n - 1) / 2
            );
            let cfg = LinkpredConfig {
                tp,
                replicates,
                seed,
                hp: hp.build(attrs.p(), seed),
                zero_diagonal,
                include_cross_pairs,
            };
            let summary = pipelines::linkpred(&adj, &attrs, &cfg)?;
            let mut table = Vec::new();
            for (r, rep) in summary.replicates.iter().enumerate() {
                println!(
                    "replicate={r} auc_roc={} auc_pr={} prevalence={}",
                    rep.auc_roc, rep.auc_pr, rep.prevalence
                );
                table.push(vec![
                    r.to_string(),
                    rep.auc_roc.to_string(),
                    rep.auc_pr.to_string(),
                    rep.prevalence.to_string(),
                    rep.n_train.to_string(),
                    rep.n_test.to_string(),
                ]);
            }
            println!(
                "auc_roc={} (sd {}) auc_pr={} (sd {})",
                summary.mean_auc_roc, summary.std_auc_roc, summary.mean_auc_pr, summary.std_auc_pr
            );
            if let Some(out) = out {
                io::write_table(
                    &out,
                    &["replicate", "auc_roc", "auc_pr", "prevalence", "n_train", "n_test"],
                    &table,
                )?;
            }
            Ok(())
        }
        Cmd::TheoryCheck {
            min_exp,
            max_exp,
            trees,
            test_points,
            p,
            d,
            seed,
            out,
        } => {
            if min_exp > max_exp {
                return Err(CliError::Usage("--min-exp must not exceed --max-exp".into()));
            }
            let ns: Vec<usize> = (min_exp..=max_exp).map(|e| 1usize << e).collect();
            let points = pipelines::theory_check(&ns, trees, test_points, p, d, seed)?;
            let mut table = Vec::new();
            for pt in &points {
                println!("n={} s_n={}", pt.n, pt.s_n);
                table.push(vec![pt.n.to_string(), pt.s_n.to_string()]);
            }
            if let Some(out) = out {
                io::write_table(&out, &["n", "s_n"], &table)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // die quietly when a downstream pager closes the pipe
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    if let Ok(threads) = std::env::var("SMERF_THREADS") {
        match threads.parse::<usize>() {
            Ok(k) if k >= 1 => {
                // ignore AlreadyInitialized so tests can call run() repeatedly
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global();
            }
            _ => {
                eprintln!("usage: SMERF_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the same path; keep exit 0 there
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
