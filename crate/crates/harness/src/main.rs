use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ndt_core::ndt::{overload_index, predict_instance};
use ndt_core::optimizer::{loss_from_overload, optimize_priorities, PolicyBundle};
use ndt_core::simulator::SimConfig;
use ndt_core::{Instance, PriorityVector};
use ndt_harness::accuracy::{ndt_config, run_accuracy_sweep};
use ndt_harness::bench::run_runtime_benchmark;
use ndt_harness::compare::{run_policy_comparison, simulate_policy, summarize_policies};
use ndt_harness::export::{
    ensure_dir, write_json, write_table, Manifest, ACCURACY_CSV, POLICIES_CSV, POLICY_SUMMARY_CSV, RUNTIME_CSV,
};
use ndt_harness::plan::InstanceKey;
use ndt_harness::{ExperimentSpec, Policy};
use serde::Serialize;

/// Analytical digital twin for multi-hop wireless networks under weighted
/// Luby contention.
#[derive(Debug, Parser)]
#[command(name = "ndt", version)]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one instance and write `instance.json`.
    Generate(GenerateArgs),
    /// Simulate a saved instance and write `simulation.json`.
    Simulate(SimulateArgs),
    /// Predict duty cycles for a saved instance and write `prediction.json`.
    Predict(PredictArgs),
    /// Optimize priorities for a saved instance and write `policy.json`.
    Optimize(OptimizeArgs),
    /// Model accuracy sweep, writes `accuracy.csv`.
    Accuracy(SweepArgs),
    /// Policy comparison sweep, writes `policies.csv` and `policy_summary.csv`.
    Compare(SweepArgs),
    /// Runtime benchmark, writes `runtime.csv`.
    Bench(SweepArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// ExperimentSpec JSON file; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    loads: Option<Vec<f64>>,
    #[arg(long)]
    topologies: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Simulation horizon in slots.
    #[arg(long)]
    slots: Option<usize>,
    /// Contention rounds to evaluate.
    #[arg(long, value_delimiter = ',')]
    rounds: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<Policy>>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Network size (defaults to the first configured size).
    #[arg(long)]
    size: Option<usize>,
    /// Load factor (defaults to the first configured load).
    #[arg(long)]
    load: Option<f64>,
    #[arg(long, default_value_t = 0)]
    topology: usize,
    #[arg(long, default_value_t = 0)]
    realization: usize,
}

#[derive(Debug, Args)]
struct InstanceArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Instance JSON written by `generate`.
    #[arg(long)]
    instance: PathBuf,
    /// Contention rounds (defaults to the first configured value).
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: InstanceArgs,
    #[arg(long, default_value = "baseline")]
    policy: Policy,
    /// Policy bundle from `optimize`; computed on the fly when absent.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    slots: Option<usize>,
    /// Also write the bit-packed schedule trace to `trace.bin`.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Use the priorities of a policy bundle instead of uniform ones.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Optimizer steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Serialize)]
struct PredictionRecord {
    duty_cycles: Vec<f64>,
    overload: Vec<f64>,
    loss: f64,
    last_change: f64,
    trace: Option<ndt_core::ndt::NdtTrace>,
}

fn load_spec(cli: &Cli, config: &ConfigArg) -> anyhow::Result<ExperimentSpec> {
    let mut spec = match &config.config {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn sweep_spec(cli: &Cli, args: &SweepArgs) -> anyhow::Result<ExperimentSpec> {
    let mut spec = load_spec(cli, &args.config)?;
    if let Some(v) = &args.sizes {
        spec.sizes = v.clone();
    }
    if let Some(v) = &args.loads {
        spec.loads = v.clone();
    }
    if let Some(v) = args.topologies {
        spec.topologies = v;
    }
    if let Some(v) = args.realizations {
        spec.realizations = v;
    }
    if let Some(v) = args.slots {
        spec.slots = v;
    }
    if let Some(v) = &args.rounds {
        spec.rounds = v.clone();
    }
    if let Some(v) = &args.policies {
        spec.policies = v.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    Instance::load_file(path).with_context(|| format!("reading instance {}", path.display()))
}

fn read_bundle(path: &Path) -> anyhow::Result<PolicyBundle> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing policy bundle {}", path.display()))
}

fn rounds_of(spec: &ExperimentSpec, flag: Option<usize>) -> anyhow::Result<usize> {
    let rounds = flag.unwrap_or(spec.rounds[0]);
    if rounds == 0 {
        bail!("--rounds must be at least 1");
    }
    Ok(rounds)
}

fn written(path: &Path) {
    eprintln!("wrote {}", path.display());
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    ensure_dir(&cli.out)?;
    let out = |name: &str| cli.out.join(name);

    match &cli.command {
        Command::Generate(args) => {
            let spec = load_spec(cli, &args.config)?;
            let size = args.size.unwrap_or(spec.sizes[0]);
            let load = args.load.unwrap_or(spec.loads[0]);
            let inst = InstanceKey::new(spec.seed, size, args.topology, args.realization).instance(load)?;
            let path = out("instance.json");
            inst.save(&path)?;
            written(&path);
        }
        Command::Simulate(args) => {
            let spec = load_spec(cli, &args.common.config)?;
            let inst = read_instance(&args.common.instance)?;
            let rounds = rounds_of(&spec, args.common.rounds)?;
            let spec = ExperimentSpec { slots: args.slots.unwrap_or(spec.slots), ..spec };
            let bundle = match (&args.bundle, args.policy) {
                (_, Policy::Baseline) => None,
                (Some(path), _) => Some(read_bundle(path)?),
                (None, _) => Some(optimize_priorities(&inst, &ndt_config(&spec, rounds), &spec.optimizer)?),
            };
            let bundle = bundle.map(|b| PolicyBundle { gating: spec.gating, ..b });
            let seed = spec.seed;
            let result = if args.trace {
                // simulate_policy builds its own config, so run the traced case directly
                let cfg = SimConfig {
                    rounds,
                    slots: spec.slots,
                    rate_std: spec.rate_std,
                    record_trace: true,
                    ..Default::default()
                };
                let z = match &bundle {
                    Some(b) => b.priorities()?,
                    None => PriorityVector::uniform(inst.num_links()),
                };
                let gating = match (&bundle, args.policy) {
                    (Some(b), Policy::PriorityGating) => Some(b.gating.with_targets(b.x_tilde.clone())?),
                    _ => None,
                };
                ndt_core::simulator::run_simulation(&inst, &z, &cfg, gating.as_ref(), seed)?
            } else {
                simulate_policy(&spec, &inst, args.policy, bundle.as_ref(), rounds, seed)?
            };
            if let Some(trace) = &result.trace {
                let path = out("trace.bin");
                std::fs::write(&path, trace).with_context(|| format!("writing {}", path.display()))?;
                written(&path);
            }
            let path = out("simulation.json");
            write_json(&path, &result.to_record(&inst.conflicts))?;
            written(&path);
        }
        Command::Predict(args) => {
            let spec = load_spec(cli, &args.common.config)?;
            let inst = read_instance(&args.common.instance)?;
            let rounds = rounds_of(&spec, args.common.rounds)?;
            let z = match &args.bundle {
                Some(path) => read_bundle(path)?.priorities()?,
                None => PriorityVector::uniform(inst.num_links()),
            };
            let prediction = predict_instance(&inst, &z, &ndt_config(&spec, rounds))?;
            let overload = overload_index(&prediction.duty_cycles, &inst.link_loads(), &inst.rates);
            let record = PredictionRecord {
                loss: loss_from_overload(&overload),
                duty_cycles: prediction.duty_cycles,
                overload,
                last_change: prediction.last_change,
                trace: prediction.trace,
            };
            let path = out("prediction.json");
            write_json(&path, &record)?;
            written(&path);
        }
        Command::Optimize(args) => {
            let spec = load_spec(cli, &args.common.config)?;
            let inst = read_instance(&args.common.instance)?;
            let rounds = rounds_of(&spec, args.common.rounds)?;
            let mut opt = spec.optimizer.clone();
            if let Some(steps) = args.steps {
                opt.steps = steps;
            }
            let bundle = optimize_priorities(&inst, &ndt_config(&spec, rounds), &opt)?;
            let bundle = PolicyBundle { gating: spec.gating, ..bundle };
            let path = out("policy.json");
            write_json(&path, &bundle)?;
            written(&path);
        }
        Command::Accuracy(args) => {
            let spec = sweep_spec(cli, args)?;
            let rows = run_accuracy_sweep(&spec);
            let path = out(ACCURACY_CSV);
            write_table(&path, &rows)?;
            written(&path);
            report_failures(rows.iter().filter_map(|r| r.error.as_deref()));
            written(&Manifest::new("accuracy", &spec, &[ACCURACY_CSV]).write(&cli.out)?);
        }
        Command::Compare(args) => {
            let spec = sweep_spec(cli, args)?;
            let rows = run_policy_comparison(&spec);
            let path = out(POLICIES_CSV);
            write_table(&path, &rows)?;
            written(&path);
            let path = out(POLICY_SUMMARY_CSV);
            write_table(&path, &summarize_policies(&rows))?;
            written(&path);
            report_failures(rows.iter().filter_map(|r| r.error.as_deref()));
            written(&Manifest::new("compare", &spec, &[POLICIES_CSV, POLICY_SUMMARY_CSV]).write(&cli.out)?);
        }
        Command::Bench(args) => {
            let spec = sweep_spec(cli, args)?;
            let rows = run_runtime_benchmark(&spec)?;
            for r in &rows {
                eprintln!(
                    "size {:>3}  load {:>4}  M {}  ndt {:.3e} s  sim {:.3e} s  speedup {:.1}",
                    r.size, r.load, r.rounds, r.ndt_mean_s, r.sim_mean_s, r.speedup
                );
            }
            let path = out(RUNTIME_CSV);
            write_table(&path, &rows)?;
            written(&path);
            written(&Manifest::new("bench", &spec, &[RUNTIME_CSV]).write(&cli.out)?);
        }
    }
    Ok(())
}

fn report_failures<'a>(errors: impl Iterator<Item = &'a str>) {
    let errors: Vec<&str> = errors.collect();
    if let Some(first) = errors.first() {
        eprintln!("{} rows failed; first error: {first}", errors.len());
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
