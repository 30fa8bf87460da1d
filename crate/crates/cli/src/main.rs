//! Experiment runner and audit harness for collective tree exploration.
//!
//! Subcommands: `run` (execute a scenario into an artifact directory),
//! `audit` (replay an artifact and check every claim), `fractional`
//! (certificate pipeline over a layered instance), `sweep` (one-axis
//! parameter sweeps to CSV), `gen` (emit a tree file).
//!
//! Exit codes: 0 pass, 2 invariant or certificate violation, 3 budget or
//! protocol failure.

mod artifact;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cotex_core::audit::audit_run;
use cotex_core::config::Configuration;
use cotex_core::fractional::{
    delta_of, reduce, verify_certificates, z_step, FractionalTrace,
};
use cotex_core::dacte::DacteAgent;
use cotex_core::generators::GeneratorSpec;
use cotex_core::lgt::LgtInstance;
use cotex_core::num::q_str;
use cotex_core::scenario::{execute_on, AgentSpec, Scenario, TreeSource};
use cotex_core::traverse::TraverserKind;
use cotex_core::tree::{ExplorationTree, PortPath};

use artifact::{load_artifact, write_artifact, TOOL_TAG};

#[derive(Parser)]
#[command(name = "cotex", version, about = "collective tree exploration laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write a run artifact.
    Run(RunArgs),
    /// Replay a run artifact and audit all claims.
    Audit { artifact: PathBuf },
    /// Run the fractional certificate pipeline.
    Fractional(FractionalArgs),
    /// Run a scenario template across one parameter axis, emitting CSV.
    Sweep(SweepArgs),
    /// Emit a tree file from a generator spec.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (key=value lines).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Artifact output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inline key=value overrides (applied after the file).
    overrides: Vec<String>,
}

#[derive(Args)]
struct FractionalArgs {
    /// Scenario file: the instance is extracted from a fresh run.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Instance file in the layered-instance text format.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Team size for the reduction.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Maximum admissible instance width.
    #[arg(long, default_value_t = 5)]
    width_cap: usize,
    /// Cross-check each small discretized step against the grid oracle.
    #[arg(long)]
    oracle: bool,
    /// Directory for trace dumps and the cost table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inline key=value overrides for the scenario.
    overrides: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario template file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Axis: key=value1,value2,...
    #[arg(long)]
    axis: String,
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep sweeping past failed runs.
    #[arg(long)]
    keep_going: bool,
    /// Inline key=value overrides for the template.
    overrides: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec tokens, e.g. family=comb D=40.
    spec: Vec<String>,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Audit { artifact } => cmd_audit(&artifact),
        Command::Fractional(args) => cmd_fractional(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn load_scenario(path: &Option<PathBuf>, overrides: &[String]) -> Result<Scenario> {
    let mut text = String::new();
    if let Some(path) = path {
        text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    for token in overrides {
        text.push('\n');
        text.push_str(token);
    }
    Ok(Scenario::parse(&text)?)
}

fn resolve_tree(scenario: &Scenario) -> Result<ExplorationTree> {
    match &scenario.tree {
        TreeSource::Generator(g) => Ok(g.build()?),
        TreeSource::File(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            Ok(ExplorationTree::parse(&text)?)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let scenario = load_scenario(&args.scenario, &args.overrides)?;
    let tree = resolve_tree(&scenario)?;
    let run = match execute_on(&scenario, tree.clone()) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("protocol failure: {e}");
            return Ok(ExitCode::from(3));
        }
    };
    if let Some(dir) = &args.out {
        write_artifact(dir, &scenario, &tree, &run)?;
    }
    println!("{}", run.summary_line());
    if !run.completed {
        eprintln!("budget exhausted before full visitation");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(dir: &Path) -> Result<ExitCode> {
    let artifact = load_artifact(dir)?;
    let AgentSpec::Dacte {
        traverser,
        team_size: None,
    } = &artifact.scenario.agent
    else {
        bail!("audit replays plain exploration runs (algorithm=dacte)");
    };
    let report = audit_run(
        &artifact.tree,
        traverser,
        artifact.scenario.k.max(1),
        &artifact.log,
        artifact.instance.as_ref(),
    );
    print!("{}", report.render());
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}

fn cmd_fractional(args: FractionalArgs) -> Result<ExitCode> {
    let (inst, k) = if let Some(path) = &args.instance {
        let text = fs::read_to_string(path)?;
        (LgtInstance::parse(&text)?, args.k)
    } else {
        // Extract the instance from a fresh scenario run.
        let scenario = load_scenario(&args.scenario, &args.overrides)?;
        let tree = resolve_tree(&scenario)?;
        let run = execute_on(&scenario, tree)?;
        let Some(inst) = run.instance().cloned() else {
            bail!("scenario algorithm records no instance; use algorithm=dacte");
        };
        (inst, scenario.k.max(1))
    };
    inst.validate()
        .map_err(|e| anyhow::anyhow!("invalid instance: {e}"))?;
    if inst.width() > args.width_cap {
        bail!(
            "instance width {} exceeds the cap {}",
            inst.width(),
            args.width_cap
        );
    }

    let agent = DacteAgent::new(TraverserKind::work_function_default());
    let reduction = match reduce(&agent, &inst, k, 10_000_000) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("reduction failed: {e}");
            return Ok(ExitCode::from(3));
        }
    };
    let x = reduction.trace;

    // Conversion with optional per-step oracle cross-checks.
    let mut z_configs = vec![Configuration::point(&PortPath::root())];
    let mut oracle_checked = 0usize;
    for t in 1..x.configs.len() {
        let layer = &inst.layers[t];
        let delta = delta_of(&inst, t + 1);
        let step = z_step(z_configs.last().unwrap(), &x.configs[t], &delta, layer);
        if args.oracle && layer.len() <= 3 {
            if let Some(denom) =
                common_denominator([&z_configs[t - 1], &x.configs[t], &delta], layer, 60)
            {
                let (obj, up) = cotex_core::oracles::grid_z_oracle(
                    &z_configs[t - 1],
                    &x.configs[t],
                    &delta,
                    layer,
                    denom,
                );
                if step.objective != obj || step.up_value < up {
                    eprintln!("oracle mismatch at step {}", t + 1);
                    return Ok(ExitCode::from(2));
                }
                oracle_checked += 1;
            }
        }
        z_configs.push(step.z);
    }
    let z = FractionalTrace { configs: z_configs };
    let report = verify_certificates(&inst, &x, &z);
    print!("{}", report.render());
    if args.oracle {
        println!("oracle-checked steps: {}", oracle_checked);
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("x.csv"), format!("{}{}", TOOL_TAG, x.to_csv()))?;
        fs::write(dir.join("z.csv"), format!("{}{}", TOOL_TAG, z.to_csv()))?;
        let deltas = FractionalTrace {
            configs: (1..=x.configs.len()).map(|t| delta_of(&inst, t)).collect(),
        };
        fs::write(
            dir.join("delta.csv"),
            format!("{}{}", TOOL_TAG, deltas.to_csv()),
        )?;
        let t = &report.totals;
        let margin = cotex_core::num::q(9) * t.cost_x - t.cost_z;
        fs::write(
            dir.join("costs.csv"),
            format!(
                "{}cost_x,cost_up_z,cost_down_z,cost_z,nine_cost_x_margin\n{},{},{},{},{}\n",
                TOOL_TAG,
                q_str(&t.cost_x),
                q_str(&t.cost_up_z),
                q_str(&t.cost_down_z),
                q_str(&t.cost_z),
                q_str(&margin),
            ),
        )?;
    }

    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}

/// Least common denominator of all leaf masses, capped.
fn common_denominator(
    configs: [&Configuration; 3],
    layer: &cotex_core::tree::Layer,
    cap: i64,
) -> Option<i64> {
    let mut lcm: i128 = 1;
    for c in configs {
        for l in layer.iter() {
            let d = *c.mass(l).denom();
            lcm = num_integer::lcm(lcm, d);
            if lcm > cap as i128 {
                return None;
            }
        }
    }
    Some(lcm as i64)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let (key, values) = args
        .axis
        .split_once('=')
        .context("axis must be key=v1,v2,...")?;
    let values: Vec<&str> = if values.is_empty() {
        Vec::new()
    } else {
        values.split(',').collect()
    };
    let mut csv = format!("{}{},moves,bound,makespan\n", TOOL_TAG, key);
    let mut failure: Option<ExitCode> = None;
    for value in values {
        let mut overrides = args.overrides.clone();
        overrides.push(format!("{key}={value}"));
        let scenario = load_scenario(&args.scenario, &overrides)?;
        let tree = resolve_tree(&scenario)?;
        let run = execute_on(&scenario, tree)?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            value,
            run.moves,
            run.bound
                .map(|b| b.to_string())
                .unwrap_or_else(|| "-".into()),
            run.makespan
                .map(|m| m.to_string())
                .unwrap_or_else(|| "-".into()),
        ));
        if !run.completed && failure.is_none() {
            failure = Some(ExitCode::from(3));
            if !args.keep_going {
                break;
            }
        }
    }
    match &args.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(failure.unwrap_or(ExitCode::SUCCESS))
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let spec = GeneratorSpec::parse(&args.spec.join(" "))?;
    let tree = spec.build()?;
    let text = tree.to_text();
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
