//! The `projlab` command-line front door: config parsing, dispatch to the
//! experiments, deterministic JSON report emission.
//!
//! Exit codes: 0 when every hard assertion passes (or a report-only command
//! finishes), 1 when a hard assertion fails, 2 on usage errors.

use crate::circuits::{build_sipser, truncate_sipser, AddressSpace, Polarity, TwoLevelFormula};
use crate::error::{Error, Result};
use crate::experiments::{
    approximator_collapse, base_case_from_config, bias_experiment, correlation_experiment,
    influence_check, load_approximator, typicality_experiment, verify_target_collapse,
    verify_uniform_completion, CollapseRoute, ExperimentConfig, Mode, Report,
};
use crate::params::{check_tk_bounds, derive_paper_params, sweep};
use crate::restrictions::Restriction;
use crate::samplers::{sample_psi, RngStream, StageDist};
use crate::switching::{estimate_switch_failure, exact_switch_failure};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

/// Default seed when neither --seed nor PROJLAB_SEED is given.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Parser)]
#[command(
    name = "projlab",
    version,
    about = "Random projections of small-depth circuits at desk scale"
)]
struct Cli {
    /// Seed for every randomized subcommand
    #[arg(long, global = true, env = "PROJLAB_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derive, check, and sweep the parameter system
    Params {
        #[command(subcommand)]
        cmd: ParamsCmd,
    },
    /// Build the layered formula family
    Sipser {
        #[command(subcommand)]
        cmd: SipserCmd,
    },
    /// Draw or enumerate the restriction distributions
    Sample {
        #[command(subcommand)]
        cmd: SampleCmd,
    },
    /// Switching-failure estimation, exact or Monte Carlo
    Switch {
        #[command(subcommand)]
        cmd: SwitchCmd,
    },
    /// End-to-end verification experiments
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
}

#[derive(Subcommand)]
enum ParamsCmd {
    /// Derive the parameter set at a given m, d, precision
    Derive(ParamsArgs),
    /// Derive and check the deviation bounds on interval endpoints
    Check(ParamsArgs),
    /// Report feasibility across a range of m
    Sweep {
        #[arg(long)]
        m_min: u32,
        #[arg(long)]
        m_max: u32,
        /// depths to sweep (repeatable)
        #[arg(long, default_values_t = vec![2, 3])]
        d: Vec<usize>,
        #[arg(long, default_value_t = 128)]
        bits: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 128)]
    bits: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SipserCmd {
    /// Build the formula for a fan-in profile and write its JSON form
    Build {
        /// comma-separated fan-ins, e.g. 2,2,2
        #[arg(long, value_delimiter = ',')]
        fan_ins: Vec<usize>,
        /// truncation level (defaults to the full depth)
        #[arg(long)]
        truncate: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// also print the truth table as hex (small formulas only)
        #[arg(long)]
        table: bool,
    },
}

#[derive(Subcommand)]
enum SampleCmd {
    /// Draw whole projection chains, one JSON line each
    Psi {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate one block's support with exact masses
    Block {
        #[arg(long)]
        config: Option<PathBuf>,
        /// init or tau
        #[arg(long, default_value = "init")]
        stage: String,
        /// restriction in text format (required for --stage tau)
        #[arg(long)]
        tau: Option<String>,
        #[arg(long, default_value_t = 0)]
        block: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SwitchCmd {
    /// Monte-Carlo failure estimate
    Estimate(SwitchArgs),
    /// Exact failure mass by enumeration
    Exact(SwitchArgs),
}

#[derive(Args)]
struct SwitchArgs {
    /// formula file, one term per line of signed block.index literals
    #[arg(long)]
    dnf: PathBuf,
    /// dnf or cnf
    #[arg(long, default_value = "dnf")]
    polarity: String,
    /// init or tau
    #[arg(long, default_value = "init")]
    stage: String,
    /// restriction file in text format (for --stage tau)
    #[arg(long)]
    tau: Option<PathBuf>,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    /// force exact mode
    #[arg(long)]
    exact: bool,
    /// force Monte Carlo mode
    #[arg(long)]
    monte_carlo: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// also write long-format CSV rows
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Completion-to-uniform identities
    Uniform(VerifyArgs),
    /// Target-collapse truth-table identities
    Collapse(VerifyArgs),
    /// Typicality rates
    Typicality(VerifyArgs),
    /// Bias of the projected target
    Bias(VerifyArgs),
    /// Exhaustive base-case bound
    Basecase(VerifyArgs),
    /// Two-way correlation identity
    Correlation(VerifyArgs),
    /// Total influence
    Influence(VerifyArgs),
}

/// Parse and run; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match dispatch(cli.cmd, seed) {
        Ok(all_passed) => {
            if all_passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(text.as_bytes())?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit_report(report: &Report, out: &Option<PathBuf>, csv: &Option<PathBuf>) -> Result<bool> {
    if let Some(path) = csv {
        std::fs::write(path, report.to_csv())?;
    }
    if out.is_some() {
        print!("{}", report.verdict_lines());
    }
    write_output(out, &report.to_json_string())?;
    Ok(report.all_passed())
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::toy_d3()),
    }
}

fn effective_config(args: &VerifyArgs, seed: u64) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&args.config)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.exact {
        cfg.mode = Mode::Exact;
    } else if args.monte_carlo {
        cfg.mode = Mode::MonteCarlo;
    }
    if cfg.seed.is_none() {
        cfg.seed = Some(seed);
    }
    Ok(cfg)
}

fn dispatch(cmd: Cmd, seed: u64) -> Result<bool> {
    match cmd {
        Cmd::Params { cmd } => params_cmd(cmd),
        Cmd::Sipser { cmd } => sipser_cmd(cmd),
        Cmd::Sample { cmd } => sample_cmd(cmd, seed),
        Cmd::Switch { cmd } => switch_cmd(cmd, seed),
        Cmd::Verify { cmd } => verify_cmd(cmd, seed),
    }
}

fn params_cmd(cmd: ParamsCmd) -> Result<bool> {
    match cmd {
        ParamsCmd::Derive(a) => {
            let doc = match derive_paper_params(a.m, a.d, a.bits) {
                Ok(p) => json!({"feasible": true, "params": p.summary()}),
                Err(Error::Infeasible { k, reason }) => {
                    json!({"feasible": false, "k": k, "reason": reason})
                }
                Err(e) => return Err(e),
            };
            write_output(&a.out, &serde_json::to_string_pretty(&doc)?)?;
            Ok(true)
        }
        ParamsCmd::Check(a) => {
            let doc = match derive_paper_params(a.m, a.d, a.bits) {
                Ok(p) => {
                    let rep = check_tk_bounds(&p);
                    json!({"feasible": true, "params": p.summary(), "bounds": rep})
                }
                Err(Error::Infeasible { k, reason }) => {
                    json!({"feasible": false, "k": k, "reason": reason})
                }
                Err(e) => return Err(e),
            };
            write_output(&a.out, &serde_json::to_string_pretty(&doc)?)?;
            Ok(true)
        }
        ParamsCmd::Sweep {
            m_min,
            m_max,
            d,
            bits,
            out,
        } => {
            let rep = sweep(m_min, m_max, &d, bits);
            write_output(&out, &serde_json::to_string_pretty(&rep)?)?;
            Ok(true)
        }
    }
}

fn sipser_cmd(cmd: SipserCmd) -> Result<bool> {
    match cmd {
        SipserCmd::Build {
            fan_ins,
            truncate,
            out,
            table,
        } => {
            let space = AddressSpace::new(fan_ins)?;
            let circuit = match truncate {
                Some(k) => truncate_sipser(&space, k)?,
                None => build_sipser(&space)?,
            };
            if table {
                eprintln!(
                    "vars {} depth {} size {} table {}",
                    circuit.num_vars(),
                    circuit.depth(),
                    circuit.size(),
                    circuit.truth_table()?.to_hex()
                );
            }
            write_output(&out, &circuit.to_json()?)?;
            Ok(true)
        }
    }
}

fn sample_cmd(cmd: SampleCmd, seed: u64) -> Result<bool> {
    match cmd {
        SampleCmd::Psi {
            config,
            trials,
            out,
        } => {
            let cfg = load_config(&config)?;
            let params = cfg.toy_params()?;
            let space = params.space();
            let widths: Vec<usize> = (1..space.depth())
                .rev()
                .map(|k| space.fan_in(k))
                .collect();
            let mut lines = String::new();
            for trial in 0..trials {
                let mut rng = RngStream::child(cfg.seed.unwrap_or(seed), trial);
                let psi = sample_psi(&params, &mut rng)?;
                let levels: Vec<String> = psi
                    .rho
                    .iter()
                    .zip(&widths)
                    .map(|(r, w)| r.format(*w))
                    .collect();
                lines.push_str(&serde_json::to_string(&json!({
                    "seed": cfg.seed.unwrap_or(seed),
                    "trial": trial,
                    "levels": levels,
                    "final_lift": psi.final_lift().format(space.fan_in(0)),
                }))?);
                lines.push('\n');
            }
            write_output(&out, lines.trim_end())?;
            Ok(true)
        }
        SampleCmd::Block {
            config,
            stage,
            tau,
            block,
            out,
        } => {
            let cfg = load_config(&config)?;
            let params = cfg.toy_params()?;
            let dist = match stage.as_str() {
                "init" => StageDist::init(&params)?,
                "tau" => {
                    let text = tau
                        .ok_or_else(|| Error::Parse("--stage tau requires --tau".into()))?;
                    let (tau, _) = Restriction::parse(&text)?;
                    StageDist::subsequent(&params, &tau)?
                }
                other => return Err(Error::Parse(format!("unknown stage {other:?}"))),
            };
            let d = dist.enumerate_block(block, crate::samplers::DEFAULT_BLOCK_ENUM_CAP)?;
            let outcomes: Vec<serde_json::Value> = d
                .outcomes
                .iter()
                .map(|(syms, mass)| {
                    json!({
                        "block": syms.iter().map(|s| s.to_char()).collect::<String>(),
                        "mass": mass.to_string(),
                    })
                })
                .collect();
            let doc = json!({
                "block": d.block,
                "width": d.width,
                "outcomes": outcomes,
                "total": d.total_mass().to_string(),
            });
            write_output(&out, &serde_json::to_string_pretty(&doc)?)?;
            Ok(true)
        }
    }
}

fn switch_cmd(cmd: SwitchCmd, seed: u64) -> Result<bool> {
    let (args, exact) = match cmd {
        SwitchCmd::Estimate(a) => (a, false),
        SwitchCmd::Exact(a) => (a, true),
    };
    let cfg = load_config(&args.config)?;
    let params = cfg.toy_params()?;
    let space = params.space();
    let polarity = match args.polarity.as_str() {
        "dnf" => Polarity::Dnf,
        "cnf" => Polarity::Cnf,
        other => return Err(Error::Parse(format!("unknown polarity {other:?}"))),
    };
    let (stage, width, blocks) = match args.stage.as_str() {
        "init" => {
            let d = space.depth();
            (
                StageDist::init(&params)?,
                space.fan_in(d - 1),
                space.level_size(d - 1),
            )
        }
        "tau" => {
            let path = args
                .tau
                .as_ref()
                .ok_or_else(|| Error::Parse("--stage tau requires --tau".into()))?;
            let (tau, _) = Restriction::parse(&std::fs::read_to_string(path)?)?;
            let k = tau.level();
            let stage = StageDist::subsequent(&params, &tau)?;
            (stage, space.fan_in(k - 1), space.level_size(k - 1))
        }
        other => return Err(Error::Parse(format!("unknown stage {other:?}"))),
    };
    let text = std::fs::read_to_string(&args.dnf)?;
    let f = TwoLevelFormula::parse(&text, polarity, width, blocks)?;
    let doc = if exact {
        let mass = exact_switch_failure(&stage, &f, args.s)?;
        json!({
            "mode": "exact",
            "s": args.s,
            "r": f.width(),
            "failure_mass": mass.to_string(),
            "failure_mass_f64": num::ToPrimitive::to_f64(&mass),
        })
    } else {
        let mut rng = RngStream::child(cfg.seed.unwrap_or(seed), 0);
        let rep = estimate_switch_failure(&stage, &f, args.s, args.trials, &mut rng)?;
        serde_json::to_value(&rep)?
    };
    write_output(&args.out, &serde_json::to_string_pretty(&doc)?)?;
    Ok(true)
}

fn verify_cmd(cmd: VerifyCmd, seed: u64) -> Result<bool> {
    let (args, which) = match cmd {
        VerifyCmd::Uniform(a) => (a, "uniform"),
        VerifyCmd::Collapse(a) => (a, "collapse"),
        VerifyCmd::Typicality(a) => (a, "typicality"),
        VerifyCmd::Bias(a) => (a, "bias"),
        VerifyCmd::Basecase(a) => (a, "basecase"),
        VerifyCmd::Correlation(a) => (a, "correlation"),
        VerifyCmd::Influence(a) => (a, "influence"),
    };
    let cfg = effective_config(&args, seed)?;
    let report = match which {
        "uniform" => verify_uniform_completion(&cfg)?,
        "collapse" => verify_target_collapse(&cfg)?,
        "typicality" => typicality_experiment(&cfg)?,
        "bias" => bias_experiment(&cfg)?,
        "basecase" => base_case_from_config(&cfg)?,
        "correlation" => {
            let c = load_approximator(&cfg)?;
            correlation_experiment(&cfg, &c)?
        }
        "influence" => influence_check(&cfg)?,
        _ => unreachable!(),
    };
    // a configured approximator also runs the collapse pipeline alongside
    // the target-collapse checks
    if which == "collapse" && cfg.approximator.is_some() {
        let c = load_approximator(&cfg)?;
        let extra =
            approximator_collapse(&cfg, &c, c.num_vars(), CollapseRoute::BottomFanin)?;
        let ok = emit_report(&extra, &None, &None)?;
        let main_ok = emit_report(&report, &args.out, &args.csv)?;
        return Ok(ok && main_ok);
    }
    emit_report(&report, &args.out, &args.csv)
}
