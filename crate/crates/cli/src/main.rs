//! Command-line interface: compress, query, evaluate, export, generate,
//! and the scaling benchmarks.
//!
//! Exit codes: 0 on success, 1 on runtime errors (bad data, mismatched
//! artifacts, IO failures mid-run), 2 on usage errors (bad flags, missing
//! input files).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use kronpress_core::artifact::{model_from_json, model_to_json};
use kronpress_core::exec::{configure_threads, Exec};
use kronpress_core::harness::{
    bench_epoch_scaling, bench_inference, epochs_tsv, inference_tsv,
};
use kronpress_core::rmat::{rmat_generate, RmatConfig};
use kronpress_core::tensor::{exact_error, load_coo, ApproxReport, OrderState, OrderedData};
use kronpress_core::train::{history_tsv, loss, train, InitChoice, TrainConfig};

#[derive(Parser)]
#[command(name = "kronpress", version, about = "Constant-size lossy compression of sparse reorderable matrices and tensors")]
struct Cli {
    /// Worker thread cap (default: KRONPRESS_THREADS or all cores).
    /// Results are identical for any value; 1 forces sequential work.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input file: whitespace-separated COO (indices then value per line),
    /// or Matrix Market coordinate for matrices.
    #[arg(long)]
    input: PathBuf,
    /// Tensor order (number of modes).
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Input indices start at 0 instead of 1.
    #[arg(long)]
    zero_indexed: bool,
    /// Explicit logical dims (comma-separated); default is the maximum
    /// index per mode.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<u32>>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a sparse input and write the artifacts.
    Compress {
        #[command(flatten)]
        input: InputArgs,
        /// Hidden dimension of the sequence model.
        #[arg(long, default_value_t = 30)]
        hidden: usize,
        /// Adam learning rate.
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        /// Swap acceptance temperature; "inf" for hill climbing.
        #[arg(long, default_value_t = 10.0)]
        gamma: f64,
        /// Reorder rounds per epoch.
        #[arg(long, default_value_t = 2)]
        tp: usize,
        /// Entries per optimizer batch.
        #[arg(long, default_value_t = 4096)]
        batch_size: usize,
        /// Stopping rule: relative improvement threshold.
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        /// Stopping rule: epochs without improvement.
        #[arg(long, default_value_t = 100)]
        patience: usize,
        #[arg(long, default_value_t = 10_000)]
        max_epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial order: shingle | random (default: shingle for matrices,
        /// random for tensors).
        #[arg(long)]
        init: Option<String>,
        /// Sample swap pairs uniformly instead of by min-hash.
        #[arg(long)]
        no_minhash: bool,
        /// Freeze q at the value matching the data square sum.
        #[arg(long)]
        fixed_q: bool,
        /// Use per-shape seed factors instead of the sequence model.
        #[arg(long)]
        no_autoregressive: bool,
        /// Output directory for model/permutation/manifest/history.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Approximate entries at original positions from trained artifacts.
    Query {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        perms: PathBuf,
        /// Positions file: one position per line, original 1-based indices.
        #[arg(long)]
        positions: PathBuf,
        /// Output TSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the approximation error of trained artifacts on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        perms: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Cross-check against the dense oracle when the padded cell count
        /// is at most this.
        #[arg(long)]
        dense_cap: Option<u64>,
        /// Manifest to verify the input checksum against.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-export a permutation file (optionally inverted).
    Export {
        #[arg(long)]
        perms: PathBuf,
        /// Write the inverse mapping instead.
        #[arg(long)]
        inverse: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic recursively-skewed sparse tensor.
    Generate {
        /// First-partition probability per mode per level, in (0.5, 1).
        #[arg(long, default_value_t = 0.8)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Log2 dims, comma-separated; must match --order.
        #[arg(long, value_delimiter = ',')]
        logdims: Vec<u32>,
        /// Total mass to distribute.
        #[arg(long, default_value_t = 10_000)]
        sum: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output COO path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scaling benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Mean per-entry approximation latency on square matrices.
    Inference {
        #[arg(long, default_value_t = 7)]
        min_log: u32,
        #[arg(long, default_value_t = 16)]
        max_log: u32,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 30)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-epoch training time on nested non-zero subsets.
    Epochs {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.125,0.25,0.5,1.0")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, default_value_t = 10.0)]
        gamma: f64,
        #[arg(long, default_value_t = 2)]
        tp: usize,
        /// Epochs to average over per fraction.
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Everything needed to reproduce and verify one compress run.
#[derive(serde::Serialize, serde::Deserialize)]
struct RunManifest {
    input_path: String,
    input_sha256: String,
    config: TrainConfig,
    final_loss: f64,
    epochs_run: usize,
    wall_time_s: f64,
    model_path: String,
    permutation_path: String,
    software_version: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("KRONPRESS_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    configure_threads(threads);

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Marker for errors that are the caller's fault (exit code 2).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!(UsageError(format!("input file not found: {}", path.display())));
    }
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex_digest(&bytes))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_input(args: &InputArgs) -> Result<kronpress_core::tensor::SparseArray> {
    require_file(&args.input)?;
    Ok(load_coo(
        &args.input,
        args.order,
        !args.zero_indexed,
        args.dims.clone(),
    )?)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Compress {
            input,
            hidden,
            lr,
            gamma,
            tp,
            batch_size,
            epsilon,
            patience,
            max_epochs,
            seed,
            init,
            no_minhash,
            fixed_q,
            no_autoregressive,
            out_dir,
        } => {
            let init = match init.as_deref() {
                None => None,
                Some("shingle") => Some(InitChoice::Shingle),
                Some("random") => Some(InitChoice::Random),
                Some(other) => bail!(UsageError(format!(
                    "unknown init strategy {other:?} (expected shingle or random)"
                ))),
            };
            let data = load_input(&input)?;
            let config = TrainConfig {
                hidden_dim: hidden,
                learning_rate: lr,
                gamma,
                order_rounds: tp,
                epsilon,
                patience,
                batch_size,
                max_epochs,
                seed,
                init,
                no_minhash,
                fixed_q,
                no_autoregressive,
            };
            config
                .validate()
                .map_err(|e| anyhow!(UsageError(e.to_string())))?;

            let started = std::time::Instant::now();
            let outcome = train(&data, &config, Exec::Parallel)?;
            let wall = started.elapsed().as_secs_f64();

            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let model_path = out_dir.join("model.json");
            let perm_path = out_dir.join("permutation.txt");
            let manifest_path = out_dir.join("manifest.json");
            let history_path = out_dir.join("history.tsv");

            fs::write(&model_path, model_to_json(&outcome.model, data.dims()))?;
            fs::write(&perm_path, outcome.orders.to_text())?;
            fs::write(&history_path, history_tsv(&outcome.history))?;
            let manifest = RunManifest {
                input_path: input.input.display().to_string(),
                input_sha256: sha256_file(&input.input)?,
                config,
                final_loss: outcome.best_loss,
                epochs_run: outcome.epochs_run,
                wall_time_s: wall,
                model_path: model_path.display().to_string(),
                permutation_path: perm_path.display().to_string(),
                software_version: env!("CARGO_PKG_VERSION").to_string(),
            };
            fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            println!(
                "compressed {} entries in {} epochs: loss {:.6e} ({:.1}s)",
                data.nnz(),
                outcome.epochs_run,
                outcome.best_loss,
                wall
            );
            Ok(())
        }

        Command::Query {
            model,
            perms,
            positions,
            out,
        } => {
            require_file(&model)?;
            require_file(&perms)?;
            require_file(&positions)?;
            let (model, dims) = model_from_json(&fs::read_to_string(&model)?)?;
            let orders = OrderState::from_text(&fs::read_to_string(&perms)?)?;
            orders.check_dims(model.layout().user_log_dims())?;
            let fm = model.as_factor_model();

            let mut result = String::new();
            for (lineno, line) in fs::read_to_string(&positions)?.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let pos: Vec<u32> = line
                    .split_whitespace()
                    .map(|t| t.parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("positions line {}", lineno + 1))?;
                if pos.len() != dims.len() {
                    bail!("positions line {}: expected {} indices", lineno + 1, dims.len());
                }
                for (d, (&i, &n)) in pos.iter().zip(&dims).enumerate() {
                    if i < 1 || i > n {
                        bail!(
                            "positions line {}: index {} of mode {} outside the logical size {}",
                            lineno + 1,
                            i,
                            d + 1,
                            n
                        );
                    }
                }
                let model_pos: Vec<u32> = pos
                    .iter()
                    .enumerate()
                    .map(|(m, &i)| orders.position_of(m, i))
                    .collect();
                let approx = fm.approximate_at(&model_pos);
                for (i, p) in pos.iter().enumerate() {
                    if i > 0 {
                        result.push(' ');
                    }
                    result.push_str(&p.to_string());
                }
                result.push('\t');
                result.push_str(&format!("{approx}"));
                result.push('\n');
            }
            write_output(&out, &result)
        }

        Command::Evaluate {
            model,
            perms,
            input,
            dense_cap,
            manifest,
            out,
        } => {
            require_file(&model)?;
            require_file(&perms)?;
            let data = load_input(&input)?;
            if let Some(manifest_path) = &manifest {
                require_file(manifest_path)?;
                let m: RunManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
                let fresh = sha256_file(&input.input)?;
                if m.input_sha256 != fresh {
                    bail!(
                        "input checksum {} does not match manifest checksum {}",
                        fresh,
                        m.input_sha256
                    );
                }
            }
            let (model, dims) = model_from_json(&fs::read_to_string(&model)?)?;
            if dims != data.dims() {
                bail!(
                    "model was trained on dims {:?} but the input has dims {:?}",
                    dims,
                    data.dims()
                );
            }
            let orders = OrderState::from_text(&fs::read_to_string(&perms)?)?;
            let ordered = OrderedData::new(&data, &orders)?;
            let fm = model.as_factor_model();
            let sq_error = loss(fm, &ordered, Exec::Parallel);
            let report = ApproxReport::new(sq_error, data.value_sq_sum());

            let mut json = serde_json::to_value(report)?;
            if let Some(cap) = dense_cap {
                let reordered = data.apply_order(&orders)?;
                let dense = exact_error(&reordered, |pos| fm.approximate_at(pos), cap)?;
                json["dense_sq_error"] = serde_json::to_value(dense.sq_error)?;
                let rel = (dense.sq_error - sq_error).abs() / dense.sq_error.abs().max(1.0);
                if rel > 1e-8 {
                    bail!(
                        "sparse loss {} disagrees with dense oracle {} (relative {})",
                        sq_error,
                        dense.sq_error,
                        rel
                    );
                }
            }
            write_output(&out, &format!("{}\n", serde_json::to_string_pretty(&json)?))
        }

        Command::Export { perms, inverse, out } => {
            require_file(&perms)?;
            let orders = OrderState::from_text(&fs::read_to_string(&perms)?)?;
            let orders = if inverse { orders.inverse() } else { orders };
            write_output(&out, &orders.to_text())
        }

        Command::Generate {
            p,
            order,
            logdims,
            sum,
            seed,
            out,
        } => {
            if logdims.len() != order {
                bail!(UsageError(format!(
                    "--logdims has {} modes but --order is {}",
                    logdims.len(),
                    order
                )));
            }
            let config = RmatConfig {
                skew: p,
                log_dims: logdims,
                value_sum: sum,
                seed,
            };
            config
                .validate()
                .map_err(|e| anyhow!(UsageError(e.to_string())))?;
            let data = rmat_generate(&config)?;
            let mut text = String::new();
            for e in 0..data.nnz() {
                for &i in data.index(e) {
                    text.push_str(&i.to_string());
                    text.push(' ');
                }
                text.push_str(&format!("{}\n", data.value(e)));
            }
            write_output(&out, &text)
        }

        Command::Bench(BenchCommand::Inference {
            min_log,
            max_log,
            samples,
            reps,
            hidden,
            seed,
            out,
        }) => {
            let rows = bench_inference(min_log, max_log, samples, reps, hidden, seed);
            write_output(&out, &inference_tsv(&rows))
        }

        Command::Bench(BenchCommand::Epochs {
            input,
            fractions,
            hidden,
            lr,
            gamma,
            tp,
            epochs,
            seed,
            out,
        }) => {
            if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
                bail!(UsageError("fractions must lie in (0, 1]".into()));
            }
            let data = load_input(&input)?;
            let config = TrainConfig {
                hidden_dim: hidden,
                learning_rate: lr,
                gamma,
                order_rounds: tp,
                seed,
                ..TrainConfig::default()
            };
            let rows = bench_epoch_scaling(&data, &fractions, &config, epochs.max(1), Exec::Parallel)?;
            write_output(&out, &epochs_tsv(&rows))
        }
    }
}
