use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use specsched::builtin::{self, BUILTIN_PREFIX};
use specsched::config::{cost_table, ConfigBuilder, ExperimentConfig};
use specsched::policies::PolicyKind;
use specsched::report::{
    compare_policies, estimator_accuracy, provenance_line, run_one, runs_csv, sweep_k, RunRow,
    WorkloadSource,
};
use specsched::workload::{generate_workload, load_trace, trace_to_string};

#[derive(Parser)]
#[command(name = "specsched", version, about = "Speculative-decoding scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a request trace from a workload profile.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trace file to write. Prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        num_requests: Option<usize>,
    },
    /// Simulate one policy on one trace.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        input: TraceArgs,
        #[arg(long, value_parser = parse_policy)]
        policy: PolicyKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the LAPS-SD queue count.
    SweepK {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        input: TraceArgs,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 10)]
        k_max: usize,
        #[command(flatten)]
        fanout: FanoutArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare policies across seeds.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        input: TraceArgs,
        /// Comma-separated policy names.
        #[arg(long, value_delimiter = ',', value_parser = parse_policy, default_value = "fcfs,lp-sjf,las,laps-sd")]
        policies: Vec<PolicyKind>,
        #[command(flatten)]
        fanout: FanoutArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare LAPS-SD execution-time estimates with actual service.
    Accuracy {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        input: TraceArgs,
        #[command(flatten)]
        fanout: FanoutArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config layer. Later files override earlier ones.
    #[arg(long = "config")]
    configs: Vec<PathBuf>,
    /// Built-in workload profile: chat, code or reasoning.
    #[arg(long)]
    profile: Option<String>,
    /// TOML file of cost keys, with or without a `[cost]` header.
    #[arg(long)]
    cost: Option<PathBuf>,
    /// Override a config key, e.g. `--set stability.delta=0.02`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TraceArgs {
    /// Trace file, or `builtin:<name>`. Without it the workload is
    /// generated from the config for every seed.
    #[arg(long)]
    trace: Option<String>,
}

#[derive(Args)]
struct FanoutArgs {
    /// Seeds as a comma-separated list; `a..b` expands to an inclusive range.
    #[arg(long, default_value = "1..5", value_parser = parse_seeds)]
    seeds: Seeds,
    /// Worker threads. Defaults to SPECSCHED_THREADS, then the core count.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse()
        .map_err(|_| format!("unknown policy `{s}` (valid: {})", PolicyKind::valid_names()))
}

#[derive(Debug, Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = |_| format!("invalid seed `{part}`");
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse().map_err(bad)?, b.parse().map_err(bad)?);
                if a > b {
                    return Err(format!("empty seed range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(bad)?),
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(Seeds(out))
}

type Failure = Box<dyn std::error::Error>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

/// Resolves the workload source and config. A built-in trace's own cost
/// model sits below every user layer.
fn resolve(args: &ConfigArgs, trace: Option<&str>) -> Result<(ExperimentConfig, Option<WorkloadSource>), Failure> {
    let mut builder = ConfigBuilder::new();
    let mut source = None;
    if let Some(t) = trace {
        if t.starts_with(BUILTIN_PREFIX) {
            let b = builtin::builtin(t).ok_or_else(|| {
                format!("unknown built-in trace `{t}` (valid: {})", builtin::NAMES.join(", "))
            })?;
            if let Some(cost) = &b.cost {
                builder = builder.layer(cost_table(cost));
            }
            source = Some(WorkloadSource::Fixed(b.requests));
        } else {
            source = Some(WorkloadSource::Fixed(load_trace(t)?));
        }
    }
    if let Some(p) = &args.profile {
        builder = builder.set(&format!("profile={}", toml::Value::String(p.clone())))?;
    }
    for path in &args.configs {
        builder = builder.layer_str(&read(path)?)?;
    }
    if let Some(path) = &args.cost {
        builder = builder.cost_layer_str(&read(path)?)?;
    }
    for o in &args.overrides {
        builder = builder.set(o)?;
    }
    Ok((builder.build()?, source))
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("SPECSCHED_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("SPECSCHED_THREADS must be a positive integer, got `{v}`").into()),
        Err(_) => Ok(None),
    }
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

/// JSON document wrapped with the provenance fields.
fn json_with_provenance(hash: &str, body: impl serde::Serialize) -> String {
    let doc = serde_json::json!({
        "tool": "specsched",
        "version": env!("CARGO_PKG_VERSION"),
        "defaults_version": specsched::config::defaults_version(),
        "config_hash": hash,
        "result": body,
    });
    serde_json::to_string_pretty(&doc).expect("json value serializes")
}

fn requests_csv(rep: &specsched::SimReport) -> String {
    let na = |v: Option<String>| v.unwrap_or_else(|| "n/a".into());
    let mut out = String::new();
    let _ = writeln!(out, "{}", provenance_line(&rep.config_hash));
    let _ = writeln!(
        out,
        "id,arrival_us,first_service_us,completion_us,latency_us,rounds,tokens_proposed,tokens_accepted,preemptions,service_us,predicted_accept_rate,estimated_total_us"
    );
    for r in &rep.requests {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.id,
            r.arrival_us,
            r.first_service_us,
            r.completion_us,
            r.latency_us,
            r.rounds,
            r.tokens_proposed,
            r.tokens_accepted,
            r.preemptions,
            r.service_us,
            na(r.predicted_accept_rate.map(|v| v.to_string())),
            na(r.estimated_total_us.map(|v| v.to_string())),
        );
    }
    out
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate { config, out, seed, num_requests } => {
            let (mut cfg, _) = resolve(&config, None)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(n) = num_requests {
                cfg.workload.num_requests = n;
                cfg.workload.validate()?;
            }
            let trace = trace_to_string(&generate_workload(&cfg.workload)?);
            match out {
                Some(path) => fs::write(&path, trace).map_err(|e| format!("{}: {e}", path.display()))?,
                None => print!("{trace}"),
            }
        }
        Command::Run { config, input, policy, seed, out } => {
            let (cfg, source) = resolve(&config, input.trace.as_deref())?;
            let source = source.unwrap_or_else(|| WorkloadSource::Generated(cfg.workload.clone()));
            let requests = source.requests(seed)?;
            let rep = run_one(&requests, policy, &cfg, seed)?;
            let k = if policy.uses_queues() { cfg.laps_sd.queues.k } else { 0 };
            let row = RunRow::new(&rep, k);
            write_outputs(
                &out,
                &[
                    ("summary.csv", runs_csv(&[row], &rep.config_hash)),
                    ("requests.csv", requests_csv(&rep)),
                    ("report.json", json_with_provenance(&rep.config_hash, &rep)),
                ],
            )?;
            println!(
                "{} avg_latency_us={} p95_us={} switch_overhead_us={}",
                rep.policy, rep.avg_latency_us, rep.p95_us, rep.switch_overhead_us
            );
        }
        Command::SweepK { config, input, k_min, k_max, fanout, out } => {
            let (cfg, source) = resolve(&config, input.trace.as_deref())?;
            let source = source.unwrap_or_else(|| WorkloadSource::Generated(cfg.workload.clone()));
            let c = sweep_k(&source, &cfg, k_min, k_max, &fanout.seeds.0, threads(fanout.threads)?)?;
            write_outputs(
                &out,
                &[
                    ("sweep_k.csv", runs_csv(&c.rows, &c.config_hash)),
                    ("sweep_k.json", json_with_provenance(&c.config_hash, &c)),
                ],
            )?;
            for s in &c.stats {
                println!("K={} mean_avg_latency_us={:.1}", s.k, s.mean_avg_latency_us);
            }
        }
        Command::Compare { config, input, policies, fanout, out } => {
            let (cfg, source) = resolve(&config, input.trace.as_deref())?;
            let source = source.unwrap_or_else(|| WorkloadSource::Generated(cfg.workload.clone()));
            let c = compare_policies(&source, &cfg, &policies, &fanout.seeds.0, threads(fanout.threads)?)?;
            write_outputs(
                &out,
                &[
                    ("compare.csv", runs_csv(&c.rows, &c.config_hash)),
                    ("compare.json", json_with_provenance(&c.config_hash, &c)),
                ],
            )?;
            for s in &c.stats {
                let imp = s
                    .laps_sd_improvement
                    .map(|v| format!(" laps_sd_improvement={:.4}", v))
                    .unwrap_or_default();
                println!(
                    "{} mean_avg_latency_us={:.1} stdev={:.1}{imp}",
                    s.policy, s.mean_avg_latency_us, s.stdev_avg_latency_us
                );
            }
        }
        Command::Accuracy { config, input, fanout, out } => {
            let (cfg, source) = resolve(&config, input.trace.as_deref())?;
            let source = source.unwrap_or_else(|| WorkloadSource::Generated(cfg.workload.clone()));
            let t = estimator_accuracy(&source, &cfg, &fanout.seeds.0, threads(fanout.threads)?)?;
            write_outputs(
                &out,
                &[
                    ("accuracy.csv", t.to_csv()),
                    ("accuracy.json", json_with_provenance(&t.config_hash, &t)),
                ],
            )?;
            let pct = |v: Option<f64>| v.map_or("n/a".into(), |v| format!("{v:.2}%"));
            println!(
                "stabilized={}/{} mape={} mean_signed_error={}",
                t.stabilized,
                t.rows.len(),
                pct(t.mape),
                pct(t.mean_signed_error)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
