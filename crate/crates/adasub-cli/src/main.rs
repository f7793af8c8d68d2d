//! Command-line front end: run policies on instances, verify the library's
//! guarantees, and generate instance files.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use adasub::analysis::{exact_favg, mc_favg_jobs, EvalMode, EvalReport};
use adasub::objectives::{
    cut_from_edges, generate_coverage, generate_cut, generate_mixed, load_instance, save_instance,
    Instance,
};
use adasub::verify::{run_suite, Suite};
use adasub::{Error, ItemId, Limits, PartitionMatroid, Policy};

#[derive(Parser)]
#[command(
    name = "adasub",
    about = "Adaptive submodular maximization: policies, evaluators, verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate policies on an instance and emit CSV rows.
    Run(RunArgs),
    /// Run a verification suite and report PASS/FAIL per check.
    Verify(VerifyArgs),
    /// Generate an instance file.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Instance file path, or an inline generator spec such as
    /// `coverage:sensors=5,targets=8,density=0.5,p=0.6`,
    /// `cut:vertices=5,density=0.7`, or
    /// `mixed:items=5,targets=6,density=0.5,p=0.6,edges=0.7`.
    #[arg(long)]
    instance: String,
    /// Comma-separated list drawn from: greedy, arg, lt, asg, local, gasg.
    #[arg(long)]
    policy: String,
    /// Cardinality budget; required for greedy, arg, lt, and asg.
    #[arg(long)]
    k: Option<usize>,
    /// Accuracy parameter; required for lt, asg, and gasg.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Root seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo trials (mc mode).
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Evaluation mode: exact or mc.
    #[arg(long, default_value = "exact")]
    mode: String,
    /// Worker threads for mc trials; the output is identical for any value.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: ratios, properties, queries, sampling, or all.
    #[arg(default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    kind: GenerateKind,
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Sensor-coverage instance.
    Coverage {
        #[arg(long)]
        sensors: usize,
        #[arg(long)]
        targets: usize,
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 0.5)]
        p_normal: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Partition-matroid blocks, e.g. `0,1|2,3`.
        #[arg(long)]
        blocks: Option<String>,
        /// Per-block limits, e.g. `1,2`.
        #[arg(long)]
        limits: Option<String>,
    },
    /// Graph-cut instance.
    Cut {
        #[arg(long)]
        vertices: usize,
        /// Explicit weighted edge list, e.g. `0-1:1.0,1-2:2.0`.
        #[arg(long)]
        edges: Option<String>,
        /// Random edge probability when no explicit list is given.
        #[arg(long)]
        edge_density: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        blocks: Option<String>,
        #[arg(long)]
        limits: Option<String>,
    },
    /// Coverage-plus-cut instance.
    Mixed {
        #[arg(long)]
        items: usize,
        #[arg(long)]
        targets: usize,
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 0.5)]
        p_normal: f64,
        #[arg(long)]
        edge_density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        blocks: Option<String>,
        #[arg(long)]
        limits: Option<String>,
    },
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Failure {
        let code = match err {
            Error::EnumerationCapExceeded { .. } | Error::BranchCapExceeded { .. } => 2,
            _ => 1,
        };
        let message = if code == 2 {
            format!("{err}; use --mode mc for instances beyond the exact caps")
        } else {
            err.to_string()
        };
        Failure { code, message }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Generate(args) => cmd_generate(args.kind),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// The enumeration cap, honoring the ADASUB_ENUM_CAP override.
fn effective_limits() -> Result<Limits, Failure> {
    let mut limits = Limits::default();
    if let Ok(raw) = std::env::var("ADASUB_ENUM_CAP") {
        limits.enum_cap = raw.parse().map_err(|_| {
            Failure::config(format!("ADASUB_ENUM_CAP must be a positive integer, got `{raw}`"))
        })?;
    }
    Ok(limits)
}

fn parse_spec_fields(spec: &str) -> Result<std::collections::BTreeMap<String, f64>, Failure> {
    let mut out = std::collections::BTreeMap::new();
    for field in spec.split(',') {
        let (key, value) = field.split_once('=').ok_or_else(|| {
            Failure::config(format!("--instance generator field `{field}` is not key=value"))
        })?;
        let value: f64 = value.parse().map_err(|_| {
            Failure::config(format!("--instance generator field `{field}` has a non-numeric value"))
        })?;
        out.insert(key.to_string(), value);
    }
    Ok(out)
}

fn resolve_instance(spec: &str, seed: u64) -> Result<Instance, Failure> {
    let Some((kind, rest)) = spec.split_once(':') else {
        return load_instance(std::path::Path::new(spec)).map_err(|e| {
            let mut failure = Failure::from(e);
            failure.message = format!("{spec}: {}", failure.message);
            failure
        });
    };
    let fields = parse_spec_fields(rest)?;
    let get = |key: &str| -> Result<f64, Failure> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Failure::config(format!("--instance generator spec is missing `{key}`")))
    };
    let inst = match kind {
        "coverage" => generate_coverage(
            get("sensors")? as usize,
            get("targets")? as usize,
            get("density")?,
            get("p")?,
            seed,
        )?,
        "cut" => generate_cut(get("vertices")? as usize, get("density")?, seed)?,
        "mixed" => generate_mixed(
            get("items")? as usize,
            get("targets")? as usize,
            get("density")?,
            get("p")?,
            get("edges")?,
            seed,
        )?,
        other => {
            return Err(Failure::config(format!(
                "--instance generator kind `{other}` is not coverage, cut, or mixed"
            )))
        }
    };
    Ok(inst)
}

struct PolicyChoice {
    name: &'static str,
    policy: Policy,
    k_label: String,
    epsilon_label: String,
}

fn build_policy(name: &str, args: &RunArgs, inst: &Instance) -> Result<PolicyChoice, Failure> {
    let need_k = || {
        args.k.ok_or_else(|| {
            Failure::config(format!("--k is required for the `{name}` policy"))
        })
    };
    let need_eps = || {
        args.epsilon.ok_or_else(|| {
            Failure::config(format!("--epsilon is required for the `{name}` policy"))
        })
    };
    let need_matroid = || {
        inst.matroid.clone().ok_or_else(|| {
            Failure::config(format!(
                "the `{name}` policy needs a [matroid] section in the instance (--instance)"
            ))
        })
    };
    let k_label = args.k.map(|k| k.to_string()).unwrap_or_default();
    let eps_label = args.epsilon.map(|e| e.to_string()).unwrap_or_default();
    let (policy, name): (Policy, &'static str) = match name {
        "greedy" => (Policy::adaptive_greedy(need_k()?)?, "greedy"),
        "arg" => (Policy::adaptive_random_greedy(need_k()?)?, "arg"),
        "lt" => (Policy::linear_time(need_k()?, need_eps()?)?, "lt"),
        "asg" => (
            Policy::adaptive_stochastic_greedy(need_k()?, need_eps()?)?,
            "asg",
        ),
        "local" => (Policy::locally_greedy(need_matroid()?), "local"),
        "gasg" => (
            Policy::generalized_stochastic_greedy(need_matroid()?, need_eps()?)?,
            "gasg",
        ),
        other => {
            return Err(Failure::config(format!(
                "--policy `{other}` is not one of greedy, arg, lt, asg, local, gasg"
            )))
        }
    };
    let uses_k = matches!(name, "greedy" | "arg" | "lt" | "asg");
    let uses_eps = matches!(name, "lt" | "asg" | "gasg");
    Ok(PolicyChoice {
        name,
        policy,
        k_label: if uses_k { k_label } else { String::new() },
        epsilon_label: if uses_eps { eps_label } else { String::new() },
    })
}

/// Quote a CSV field when it contains a separator or quote.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render with 9 significant digits; stable across runs.
fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Failure> {
    let limits = effective_limits()?;
    let inst = resolve_instance(&args.instance, args.seed)?;
    let mode = match args.mode.as_str() {
        "exact" => EvalMode::Exact,
        "mc" => EvalMode::MonteCarlo,
        other => {
            return Err(Failure::config(format!(
                "--mode `{other}` is not exact or mc"
            )))
        }
    };

    let mut rows = String::from("instance,policy,k,epsilon,seed,trials,mode,favg,stderr,queries_mean,wall_ms\n");
    for name in args.policy.split(',') {
        let choice = build_policy(name.trim(), &args, &inst)?;
        let started = Instant::now();
        let report: EvalReport = match mode {
            EvalMode::Exact => exact_favg(&choice.policy, &inst, &limits)?,
            EvalMode::MonteCarlo => mc_favg_jobs(
                &choice.policy,
                &inst,
                args.trials,
                args.seed,
                args.jobs,
                &limits,
            )?,
        };
        let wall_ms = started.elapsed().as_millis();
        rows.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&args.instance),
            choice.name,
            choice.k_label,
            choice.epsilon_label,
            args.seed,
            report.trials,
            match report.mode {
                EvalMode::Exact => "exact",
                EvalMode::MonteCarlo => "mc",
            },
            fmt_sig(report.favg),
            fmt_sig(report.stderr),
            fmt_sig(report.mean_queries),
            wall_ms,
        ));
    }

    match &args.out {
        Some(path) => std::fs::write(path, rows).map_err(|e| Failure::config(e.to_string()))?,
        None => print!("{rows}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Failure> {
    let suite = Suite::from_str(&args.suite).map_err(Failure::config)?;
    let reports = run_suite(suite, args.seed)?;
    let mut all_pass = true;
    for report in &reports {
        print!("{}", report.render());
        all_pass &= report.pass();
    }
    if all_pass {
        println!("all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("some checks FAILED");
        Ok(ExitCode::from(3))
    }
}

fn parse_matroid(
    blocks: &Option<String>,
    limits: &Option<String>,
) -> Result<Option<PartitionMatroid>, Failure> {
    match (blocks, limits) {
        (None, None) => Ok(None),
        (Some(blocks), Some(limits)) => {
            let blocks: Vec<Vec<ItemId>> = blocks
                .split('|')
                .map(|group| {
                    group
                        .split(',')
                        .map(|id| {
                            id.trim()
                                .parse::<usize>()
                                .map(ItemId)
                                .map_err(|_| Failure::config(format!("--blocks entry `{id}` is not an item id")))
                        })
                        .collect()
                })
                .collect::<Result<_, _>>()?;
            let limits: Vec<usize> = limits
                .split(',')
                .map(|d| {
                    d.trim()
                        .parse()
                        .map_err(|_| Failure::config(format!("--limits entry `{d}` is not an integer")))
                })
                .collect::<Result<_, _>>()?;
            Ok(Some(PartitionMatroid::new(blocks, limits)?))
        }
        _ => Err(Failure::config(
            "--blocks and --limits must be given together",
        )),
    }
}

fn parse_edges(raw: &str) -> Result<Vec<(usize, usize, f64)>, Failure> {
    raw.split(',')
        .map(|edge| {
            let bad = || Failure::config(format!("--edges entry `{edge}` is not u-v:w"));
            let (pair, w) = edge.split_once(':').ok_or_else(bad)?;
            let (u, v) = pair.split_once('-').ok_or_else(bad)?;
            Ok((
                u.trim().parse().map_err(|_| bad())?,
                v.trim().parse().map_err(|_| bad())?,
                w.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

fn cmd_generate(kind: GenerateKind) -> Result<ExitCode, Failure> {
    let (inst, out) = match &kind {
        GenerateKind::Coverage {
            sensors,
            targets,
            density,
            p_normal,
            seed,
            out,
            blocks,
            limits,
        } => {
            let mut inst = generate_coverage(*sensors, *targets, *density, *p_normal, *seed)?;
            inst.matroid = parse_matroid(blocks, limits)?;
            (inst, out.clone())
        }
        GenerateKind::Cut {
            vertices,
            edges,
            edge_density,
            seed,
            out,
            blocks,
            limits,
        } => {
            let mut inst = match (edges, edge_density) {
                (Some(list), None) => cut_from_edges(*vertices, parse_edges(list)?)?,
                (None, Some(density)) => generate_cut(*vertices, *density, *seed)?,
                _ => {
                    return Err(Failure::config(
                        "give exactly one of --edges or --edge-density",
                    ))
                }
            };
            inst.matroid = parse_matroid(blocks, limits)?;
            (inst, out.clone())
        }
        GenerateKind::Mixed {
            items,
            targets,
            density,
            p_normal,
            edge_density,
            seed,
            out,
            blocks,
            limits,
        } => {
            let mut inst =
                generate_mixed(*items, *targets, *density, *p_normal, *edge_density, *seed)?;
            inst.matroid = parse_matroid(blocks, limits)?;
            (inst, out.clone())
        }
    };
    inst.validate()?;
    save_instance(&inst, &out)?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig(1.0), "1.00000000");
        assert_eq!(fmt_sig(0.5), "0.500000000");
        assert_eq!(fmt_sig(123.456), "123.456000");
        assert_eq!(fmt_sig(0.0), "0");
    }
}
