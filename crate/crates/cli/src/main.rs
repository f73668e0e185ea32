//! Command-line interface: evaluate schemes on structures, optimize the
//! adversary's reply, emit named constructions, simulate the many-expert
//! counting scheme, and reproduce the full reference table.
//!
//! Exit codes: 0 success, 1 a numeric check failed, 2 invalid input.

mod rational;
mod reproduce;

use clap::{Args, Parser, Subcommand};
use forecast_agg::adversary::{
    explore_iid, optimize_blackwell, optimize_ci, BlackwellOptions, CiOptions, DummyPrior,
    IidOptions,
};
use forecast_agg::constructions::{parse_construction, Construction};
use forecast_agg::loss::{
    min_loss_against_mixture, monte_carlo_loss, CiMixture, LossError, MixedAdversary,
};
use forecast_agg::many_experts::{counting_scheme_error, regret_curve};
use forecast_agg::model::{CondIndepStructure, InformationStructure, ModelError};
use forecast_agg::relative_loss;
use forecast_agg::schemes::AggregationScheme;
use rational::as_fraction;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

const LISTING: &str = "\
Schemes (--scheme):
  precision       precision-weighted mean of two forecasts, 0.4 split
  degroot         arithmetic mean of two forecasts
  minentropy      adopt the more extreme of two forecasts
  avgprior        Bayes aggregation around the mean forecast
  shiftedprior    Bayes aggregation around the shifted dummy prior
  const:<c>       the constant forecast c, any number of experts
  bayes:<mu>      Bayes aggregation with known prior mu, any number of experts

Constructions (--construct, construct --name):
  xor                uninformative marginals, the pair reveals the state
  degroot-witness    one uninformed expert, one perfectly informed expert
  fig1               two-branch martingale with jumps to {0, 0.7} and {0.3, 1}
  blackwell:<x>      worst-case mixture for nested experts, noise level x
  ci:<x>             worst-case mixture of independent-signal structures
  delta:<d>          correlated pair confusable across atoms at scale d
  chain:<k>,<m>,<n>  chain member m (scale k) with n independent experts
  sigma:<k>,<n>      full chain mixture at scale k with n experts";

#[derive(Parser)]
#[command(
    name = "forecast-agg",
    about = "Forecast aggregation schemes and their worst-case losses",
    after_help = LISTING,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected losses of a scheme on a structure or mixture
    Evaluate(EvaluateArgs),
    /// Worst case of a scheme over a structure family
    Optimize(OptimizeArgs),
    /// Emit a named construction as JSON
    Construct(ConstructArgs),
    /// Simulate the many-expert counting scheme (CSV)
    SimulateMany(SimulateArgs),
    /// Implied regret floor as the number of experts grows (CSV)
    RegretCurve(RegretCurveArgs),
    /// Recompute every reference value and check it at its tolerance
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Scheme name (see the listing in the top-level help)
    #[arg(long)]
    scheme: String,
    /// Named construction to evaluate on
    #[arg(long)]
    construct: Option<String>,
    /// JSON file with a joint structure
    #[arg(long, value_name = "PATH")]
    structure_file: Option<PathBuf>,
    /// JSON file with a conditionally independent structure
    #[arg(long, value_name = "PATH")]
    ci_file: Option<PathBuf>,
    /// Sample count for structures too large to enumerate
    #[arg(long)]
    samples: Option<u64>,
    /// RNG seed; required whenever sampling is used
    #[arg(long)]
    seed: Option<u64>,
    /// Include the per-profile breakdown
    #[arg(long)]
    verbose: bool,
    /// Write the output here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Structure family: blackwell, ci, or iid
    #[arg(long)]
    family: String,
    /// Scheme name; the ci and iid families take avgprior or shiftedprior
    #[arg(long)]
    scheme: String,
    /// Grid resolution (points per unit interval)
    #[arg(long)]
    grid: Option<usize>,
    /// Number of refinement starts from the best grid cells
    #[arg(long)]
    restarts: Option<usize>,
    /// Convergence tolerance of the simplex refinement
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    /// Construction name (see the listing in the top-level help)
    #[arg(long)]
    name: String,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Chain scale
    #[arg(long)]
    k: usize,
    /// Number of experts
    #[arg(long)]
    n: usize,
    /// Simulation trials
    #[arg(long)]
    trials: u64,
    /// RNG seed (one substream per trial)
    #[arg(long)]
    seed: u64,
    /// Chain member; all of 1..=k when omitted
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegretCurveArgs {
    /// Comma-separated expert counts, e.g. 1000,10000,100000
    #[arg(long, value_name = "LIST")]
    n: String,
    /// Add an empirical counting-error column with this many trials
    #[arg(long)]
    trials: Option<u64>,
    /// RNG seed; required with --trials
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Only rows whose name contains this substring
    #[arg(long, default_value = "")]
    only: String,
    /// table, csv, or json
    #[arg(long, default_value = "table")]
    format: String,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Validation failures exit with 2; numeric check failures with 1.
enum CmdError {
    Validation(String),
}

impl<E: std::error::Error> From<E> for CmdError {
    fn from(e: E) -> Self {
        CmdError::Validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Construct(args) => cmd_construct(args),
        Command::SimulateMany(args) => cmd_simulate(args),
        Command::RegretCurve(args) => cmd_regret_curve(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    };
    match result {
        Ok(code) => code,
        Err(CmdError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Writes the primary output to stdout or to `--out`; relative paths are
/// resolved against FORECAST_AGG_OUT_DIR when it is set.
fn emit(text: &str, out: Option<PathBuf>) -> Result<(), CmdError> {
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => {
            let path = match std::env::var_os("FORECAST_AGG_OUT_DIR") {
                Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
                _ => path,
            };
            std::fs::write(&path, text)
                .map_err(|e| CmdError::Validation(format!("cannot write {}: {e}", path.display())))
        }
    }
}

fn parse_scheme(name: &str) -> Result<AggregationScheme, CmdError> {
    name.parse::<AggregationScheme>().map_err(|e| CmdError::Validation(e.to_string()))
}

enum Target {
    Joint(InformationStructure),
    Mixture(MixedAdversary),
    Ci(CiMixture),
}

fn load_target(args: &EvaluateArgs) -> Result<(Target, String), CmdError> {
    let sources = [
        args.construct.is_some(),
        args.structure_file.is_some(),
        args.ci_file.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(CmdError::Validation(
            "pass exactly one of --construct, --structure-file, --ci-file".into(),
        ));
    }
    if let Some(name) = &args.construct {
        let target = match parse_construction(name).map_err(|e| CmdError::Validation(e.to_string()))? {
            Construction::Joint(s) => Target::Joint(s),
            Construction::JointMixture(m) => Target::Mixture(m),
            Construction::CiMixture(m) => Target::Ci(m),
        };
        return Ok((target, name.clone()));
    }
    if let Some(path) = &args.structure_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let s = InformationStructure::from_json(&text)?;
        return Ok((Target::Joint(s), path.display().to_string()));
    }
    let path = args.ci_file.as_ref().expect("checked above");
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let ci = CondIndepStructure::from_json(&text)?;
    Ok((Target::Ci(CiMixture::from(ci)), path.display().to_string()))
}

fn loss_value(x: f64) -> Value {
    json!({ "value": x, "rational": as_fraction(x) })
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode, CmdError> {
    let scheme = parse_scheme(&args.scheme)?;
    let (target, source) = load_target(&args)?;
    let config = json!({
        "command": "evaluate",
        "scheme": args.scheme,
        "source": source,
        "samples": args.samples,
        "seed": args.seed,
    });

    let body = match target {
        Target::Joint(s) => exact_single(&s, &scheme, args.verbose)?,
        Target::Mixture(m) => exact_mixture(&m, &scheme, args.verbose)?,
        Target::Ci(mix) => match mix.expand() {
            // a lone structure reads better as a plain report
            Ok(expanded) if expanded.atoms().len() == 1 => {
                exact_single(&expanded.atoms()[0].1, &scheme, args.verbose)?
            }
            Ok(expanded) => exact_mixture(&expanded, &scheme, args.verbose)?,
            Err(LossError::Model(ModelError::TooLarge)) => {
                let (samples, seed) = match (args.samples, args.seed) {
                    (Some(s), Some(seed)) => (s, seed),
                    _ => {
                        return Err(CmdError::Validation(
                            "structure too large to enumerate: pass --samples and --seed".into(),
                        ))
                    }
                };
                let est = monte_carlo_loss(&mix, &scheme, samples, seed)?;
                json!({ "exact": false, "estimate": est })
            }
            Err(e) => return Err(e.into()),
        },
    };
    let mut output = json!({ "provenance": config });
    merge(&mut output, body);
    emit(&serde_json::to_string_pretty(&output).expect("serializable"), args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn exact_single(
    s: &InformationStructure,
    scheme: &AggregationScheme,
    verbose: bool,
) -> Result<Value, CmdError> {
    let report = relative_loss(s, scheme)?;
    let mut body = json!({
        "exact": true,
        "scheme_loss": loss_value(report.scheme_loss),
        "omniscient_loss": loss_value(report.omniscient_loss),
        "relative_loss": loss_value(report.relative_loss),
    });
    if verbose {
        merge(&mut body, json!({ "per_profile": report.per_profile }));
    }
    Ok(body)
}

fn exact_mixture(
    m: &MixedAdversary,
    scheme: &AggregationScheme,
    verbose: bool,
) -> Result<Value, CmdError> {
    let mut atoms = Vec::new();
    let mut average = 0.0;
    for (w, s) in m.atoms() {
        let report = relative_loss(s, scheme)?;
        average += w * report.relative_loss;
        let mut atom = json!({ "weight": w, "relative_loss": loss_value(report.relative_loss) });
        if verbose {
            merge(&mut atom, json!({ "per_profile": report.per_profile }));
        }
        atoms.push(atom);
    }
    let floor = min_loss_against_mixture(m)?;
    Ok(json!({
        "exact": true,
        "atoms": atoms,
        "mixture_relative_loss": loss_value(average),
        "min_loss_against_mixture": loss_value(floor),
    }))
}

fn cmd_optimize(args: OptimizeArgs) -> Result<ExitCode, CmdError> {
    let config = json!({
        "command": "optimize",
        "family": args.family,
        "scheme": args.scheme,
        "grid": args.grid,
        "restarts": args.restarts,
        "tol": args.tol,
    });
    let dummy_for = |name: &str| -> Result<DummyPrior, CmdError> {
        match name {
            "avgprior" => Ok(DummyPrior::Average),
            "shiftedprior" => Ok(DummyPrior::Shifted),
            other => Err(CmdError::Validation(format!(
                "family {} takes --scheme avgprior or shiftedprior, got {other}",
                args.family
            ))),
        }
    };
    let body = match args.family.as_str() {
        "blackwell" => {
            let scheme = parse_scheme(&args.scheme)?;
            let mut opts = BlackwellOptions::default();
            if let Some(g) = args.grid {
                opts.grid = g.max(2);
            }
            if let Some(r) = args.restarts {
                opts.refine_starts = r;
            }
            if let Some(t) = args.tol {
                opts.nm_f_tol = t;
            }
            let res = optimize_blackwell(&scheme, &opts)?;
            serde_json::to_value(&res).expect("serializable")
        }
        "ci" => {
            let dummy = dummy_for(&args.scheme)?;
            let mut opts = CiOptions::default();
            if let Some(g) = args.grid {
                opts.grid = g.max(2);
            }
            if let Some(r) = args.restarts {
                opts.refine_starts = r;
            }
            if let Some(t) = args.tol {
                opts.nm_f_tol = t;
            }
            let res = optimize_ci(dummy, &opts)?;
            serde_json::to_value(&res).expect("serializable")
        }
        "iid" => {
            let dummy = dummy_for(&args.scheme)?;
            let mut opts = IidOptions::default();
            if let Some(g) = args.grid {
                opts.grid = g.max(2);
            }
            if let Some(r) = args.restarts {
                opts.refine_starts = r;
            }
            if let Some(t) = args.tol {
                opts.nm_f_tol = t;
            }
            let res = explore_iid(dummy, &opts)?;
            serde_json::to_value(&res).expect("serializable")
        }
        other => {
            return Err(CmdError::Validation(format!(
                "unknown family {other}: expected blackwell, ci, or iid"
            )))
        }
    };
    let output = json!({ "provenance": config, "result": body });
    emit(&serde_json::to_string_pretty(&output).expect("serializable"), args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_construct(args: ConstructArgs) -> Result<ExitCode, CmdError> {
    let text = match parse_construction(&args.name).map_err(|e| CmdError::Validation(e.to_string()))? {
        Construction::Joint(s) => s.to_json(),
        Construction::JointMixture(m) => {
            let atoms: Vec<Value> = m
                .atoms()
                .iter()
                .map(|(w, s)| {
                    json!({
                        "weight": w,
                        "structure": serde_json::from_str::<Value>(&s.to_json()).expect("own JSON"),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&json!({ "atoms": atoms })).expect("serializable")
        }
        Construction::CiMixture(m) => {
            let atoms: Vec<Value> = m
                .atoms()
                .iter()
                .map(|(w, ci)| {
                    json!({
                        "weight": w,
                        "ci": serde_json::from_str::<Value>(&ci.to_json()).expect("own JSON"),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&json!({ "atoms": atoms })).expect("serializable")
        }
    };
    emit(&text, args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, CmdError> {
    if args.k == 0 || args.n == 0 || args.trials == 0 {
        return Err(CmdError::Validation("k, n, and trials must be positive".into()));
    }
    let members: Vec<usize> = match args.m {
        Some(m) if m >= 1 && m <= args.k => vec![m],
        Some(m) => {
            return Err(CmdError::Validation(format!("m={m} outside 1..={}", args.k)));
        }
        None => (1..=args.k).collect(),
    };
    let mut csv =
        String::from("k,m,n_experts,trials,errors,rate,standard_error,hoeffding_bound,seed,pass\n");
    let mut all_pass = true;
    for m in members {
        let r = counting_scheme_error(args.k, m, args.n, args.trials, args.seed);
        let pass = r.rate <= r.hoeffding_bound + 3.0 * r.standard_error;
        all_pass &= pass;
        csv.push_str(&format!(
            "{},{},{},{},{},{:.10},{:.10},{:.10e},{},{}\n",
            r.k, r.m, r.n_experts, r.trials, r.errors, r.rate, r.standard_error,
            r.hoeffding_bound, r.seed, pass
        ));
    }
    emit(csv.trim_end(), args.out)?;
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_regret_curve(args: RegretCurveArgs) -> Result<ExitCode, CmdError> {
    let n_values: Vec<u64> = args
        .n
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u64>()
                .map_err(|_| CmdError::Validation(format!("bad expert count: {tok}")))
        })
        .collect::<Result<_, _>>()?;
    if n_values.iter().any(|&n| n < 3) {
        return Err(CmdError::Validation("expert counts must be at least 3".into()));
    }
    let empirical = match (args.trials, args.seed) {
        (Some(t), Some(seed)) => Some((t, seed)),
        (Some(_), None) => {
            return Err(CmdError::Validation("--trials needs --seed (no implicit entropy)".into()))
        }
        _ => None,
    };
    let rows = regret_curve(&n_values);
    let mut csv = String::from(
        "n,k,floor,hoeffding_bound,implied_floor,asymptotic_floor,degenerate,chain_ok",
    );
    csv.push_str(if empirical.is_some() { ",empirical_error\n" } else { "\n" });
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{:.12},{:.10e},{:.12},{:.12},{},{}",
            row.n_experts,
            row.k,
            row.floor,
            row.hoeffding_bound,
            row.implied_floor,
            row.asymptotic_floor,
            row.degenerate,
            row.chain_ok
        ));
        if let Some((trials, seed)) = empirical {
            let worst = (1..=row.k)
                .map(|m| counting_scheme_error(row.k, m, row.n_experts as usize, trials, seed).rate)
                .fold(0.0f64, f64::max);
            csv.push_str(&format!(",{worst:.10}"));
        }
        csv.push('\n');
    }
    emit(csv.trim_end(), args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<ExitCode, CmdError> {
    let rows = reproduce::build_rows(&args.only);
    if rows.is_empty() {
        return Err(CmdError::Validation(format!("no reference rows match '{}'", args.only)));
    }
    let text = match args.format.as_str() {
        "table" => reproduce::to_table(&rows),
        "csv" => reproduce::to_csv(&rows),
        "json" => reproduce::to_json(&rows, &args.only),
        other => return Err(CmdError::Validation(format!("unknown format {other}"))),
    };
    emit(text.trim_end(), args.out)?;
    if rows.iter().all(|r| r.pass()) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} reference row(s) failed", rows.iter().filter(|r| !r.pass()).count());
        Ok(ExitCode::from(1))
    }
}
