//! `blend` command-line driver.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blend_core::allocator::{bid_map, optimize_impression, VirtualBid};
use blend_core::ctr::predict_pointwise;
use blend_core::io::{read_log, write_log, write_text};
use blend_core::payments::{gsp_payments, vcg_outcome, AdPayment};
use blend_core::pipeline::end_to_end_pipeline;
use blend_core::sim::{run_experiment_suite, Environment, Scenario, SimConfig, SuiteInputs, TuningSummary};
use blend_core::tuner::{default_bracket, tune_virtual_bid, SpsaHyperparams, TuneMethod};
use blend_core::{Error, Impression, Scheme, SyntheticJointModel};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "blend", version, about = "Virtual-bid ad allocation, tuning and simulated experiments")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate every impression of a log and price the winners.
    Allocate {
        #[arg(long)]
        log: PathBuf,
        /// Click model TOML, as written by `simulate --model-out`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        v_a: f64,
        #[arg(long, default_value_t = 6)]
        n_prime: usize,
        #[arg(long, value_enum, default_value_t = SchemeArg::Gsp)]
        scheme: SchemeArg,
        /// GSP CTR exponent.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        /// JSON lines, one record per impression.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search the virtual bid whose frontier point is closest to the utopia point.
    TuneVb {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Golden)]
        method: MethodArg,
        /// `lo,hi`; defaults to `0,10 x largest bid`.
        #[arg(long, value_parser = parse_bracket)]
        bracket: Option<(f64, f64)>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// SPSA seed.
        #[arg(long, env = "BLEND_SEED", default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        n_prime: usize,
        /// Tune only on impressions whose page has this subcategory.
        #[arg(long)]
        subcategory: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic impression log.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "BLEND_SEED")]
        seed: Option<u64>,
        /// Epoch tag; logs with different tags are independent draws.
        #[arg(long, default_value = "eval")]
        tag: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the ground-truth click model as TOML.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Run one experiment scenario.
    Experiment {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "BLEND_SEED")]
        seed: Option<u64>,
        /// Evaluation log; generated from the config when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Use this virtual bid instead of tuning one.
        #[arg(long)]
        v_a: Option<f64>,
        /// JSON report; an aligned-text table goes next to it with a `.txt` extension.
        #[arg(long)]
        report: PathBuf,
        /// Per-subcategory revenue breakdown.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Tune on a simulated epoch, then run every scenario.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "BLEND_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Gsp,
    Vcg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Golden,
    Spsa,
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Allocate {
            log,
            model,
            v_a,
            n_prime,
            scheme,
            t,
            floor,
            out,
        } => {
            let model = SyntheticJointModel::from_toml_file(&model)?;
            let log = read_log(&log)?;
            let scheme = match scheme {
                SchemeArg::Gsp => Scheme::Gsp,
                SchemeArg::Vcg => Scheme::Vcg,
            };
            let v = VirtualBid::new(v_a);
            let records = log
                .par_iter()
                .map(|imp| allocate_one(imp, &model, &v, n_prime, scheme, t, floor))
                .collect::<Result<Vec<_>, _>>()?;
            write_records(&out, &records)
        }
        Command::TuneVb {
            log,
            model,
            method,
            bracket,
            tol,
            max_iter,
            seed,
            n_prime,
            subcategory,
            out,
        } => {
            let model = SyntheticJointModel::from_toml_file(&model)?;
            let mut log = read_log(&log)?;
            if let Some(sub) = &subcategory {
                log.retain(|imp| imp.page_subcategory.as_deref() == Some(sub.as_str()));
            }
            let bracket = bracket.unwrap_or_else(|| default_bracket(&log));
            let method = match method {
                MethodArg::Golden => TuneMethod::Golden { bracket, tol, max_iter },
                MethodArg::Spsa => TuneMethod::Spsa {
                    bracket,
                    theta0: vec![0.5 * (bracket.0 + bracket.1)],
                    hyper: SpsaHyperparams {
                        max_iter,
                        ..SpsaHyperparams::default()
                    },
                    seed,
                },
            };
            let outcome = tune_virtual_bid(&log, &model, n_prime, &method)?;
            let doc = json!({
                "v_a": outcome.v_a,
                "distance": outcome.distance,
                "utopia": outcome.utopia,
                "bracket": [bracket.0, bracket.1],
                "n_impressions": log.len(),
                "frontier_trace": outcome.frontier_trace,
            });
            write_text(&out, &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))
        }
        Command::Simulate {
            config,
            seed,
            tag,
            out,
            model_out,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let env = Environment::new(&config)?;
            let n = if tag == "tune" {
                config.n_tune_impressions
            } else {
                config.n_impressions
            };
            write_log(&out, &env.epoch(&tag, n))?;
            if let Some(path) = model_out {
                write_text(&path, &env.model.to_toml_string())?;
            }
            Ok(())
        }
        Command::Experiment {
            scenario,
            config,
            seed,
            log,
            v_a,
            report,
            csv,
        } => {
            let config = load_config(config.as_deref(), seed)?;
            let log = log.as_deref().map(read_log).transpose()?;
            let r = run_experiment_suite(
                &config,
                scenario,
                SuiteInputs {
                    log: log.as_deref(),
                    tuning: v_a.map(TuningSummary::fixed),
                },
            )?;
            write_text(&report, &r.to_json())?;
            write_text(&report.with_extension("txt"), &r.to_text())?;
            if let Some(path) = csv {
                write_text(&path, &r.category_csv())?;
            }
            Ok(())
        }
        Command::Pipeline { config, seed, report } => {
            let config = load_config(config.as_deref(), seed)?;
            let r = end_to_end_pipeline(&config)?;
            write_text(&report, &r.to_json())?;
            write_text(&report.with_extension("txt"), &r.to_text())
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SimConfig, Error> {
    let mut config = match path {
        Some(p) => SimConfig::from_toml_file(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn allocate_one(
    imp: &Impression,
    model: &SyntheticJointModel,
    v: &VirtualBid,
    n_prime: usize,
    scheme: Scheme,
    t: f64,
    floor: f64,
) -> Result<Value, Error> {
    let (allocation, payments): (_, Vec<AdPayment>) = match scheme {
        Scheme::Gsp => {
            let a = optimize_impression(imp, model, v, n_prime)?;
            let pw = predict_pointwise(model, imp, &a.chosen)?;
            let s = gsp_payments(imp, &a, &pw, &bid_map(imp), t, floor)?;
            (a, s.payments)
        }
        Scheme::Vcg => {
            let o = vcg_outcome(imp, model, v, n_prime)?;
            (o.allocation, o.schedule.payments)
        }
    };
    let slots: Vec<Option<&str>> = (0..allocation.chosen.slots.len())
        .map(|p| allocation.chosen.item_id(imp, p))
        .collect();
    Ok(json!({
        "impression_id": imp.impression_id,
        "tuple": slots,
        "ctrs": allocation.ctrs.as_slice(),
        "objective_value": allocation.objective_value,
        "v_ia": allocation.v_ia,
        "v_ir": allocation.v_ir,
        "ad_ctr_sum": allocation.ad_ctr_sum,
        "org_ctr_sum": allocation.org_ctr_sum,
        "payments": payments
            .iter()
            .map(|p| json!({
                "ad_id": p.ad_id,
                "scheme": p.scheme,
                "price_per_click": p.price_per_click,
                "expected_payment": p.expected_payment,
            }))
            .collect::<Vec<_>>(),
    }))
}

fn write_records(path: &Path, records: &[Value]) -> Result<(), Error> {
    let io_err = |e| Error::Io {
        path: path.to_owned(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
