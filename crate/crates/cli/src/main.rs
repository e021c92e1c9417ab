use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pseudochain::io::{load_system, load_trajectory, read_json, write_json, SystemFile};
use pseudochain::measures::{
    pi_bar_periodic, rho_bar_markov_upper, rho_bar_periodic, w1_distance, weakstar_proxy, AnyMeasure,
    MarkovMeasure, MeasureFile,
};
use pseudochain::pipeline::{density_demo, emit_report, load_config, run_pipeline, PipelineConfig};
use pseudochain::shadowing::{besicovitch_pi, besicovitch_rho, hat_pi, hat_rho};
use pseudochain::{
    build_chain_graph, mixing_certificate, trace_specification, verify_trace, Error, FiniteMetricSystem,
    SpacedSpecification,
};

/// Chain-subshift analysis of finite dynamical systems.
#[derive(Parser)]
#[command(name = "pseudochain", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write report.json, CSV tables and plot data.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sigmund approximants of the configured target at each block scale.
    DensityDemo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Level `n` (δ = 1/n); defaults to the config's density level.
        #[arg(long)]
        level: Option<usize>,
    },
    /// Glue a spaced specification into a periodic chain and verify it.
    TraceSpec {
        #[arg(long)]
        system: PathBuf,
        /// JSON file `{"segments": [{"a", "b", "source"}]}`.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise distance matrix between measures, as CSV.
    Distances {
        #[arg(long)]
        system: PathBuf,
        /// JSON array of measure descriptions.
        #[arg(long)]
        measures: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::RhoBar)]
        metric: Metric,
        #[arg(long, default_value_t = 10)]
        radius: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in system as JSON.
    Generate {
        #[command(subcommand)]
        system: GenerateCommand,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Emit the δ-chain graph of a system.
    ChainGraph {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Emit::Adj)]
        emit: Emit,
    },
    /// Finite-horizon Besicovitch distance between two trajectories.
    Besicovitch {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 10)]
        radius: usize,
    },
}

#[derive(Subcommand)]
enum GenerateCommand {
    CircleDoubling {
        #[arg(long)]
        n: usize,
    },
    CircleRotation {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    RandomMetric {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Dot,
    Adj,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    W1,
    RhoBar,
    RhoBarLower,
    PiBar,
    Weakstar,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    RhoB,
    PiB,
    HatRho,
    HatPi,
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_pipeline_config(path: &Path, seed: Option<u64>) -> anyhow::Result<(PipelineConfig, FiniteMetricSystem)> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sys = cfg.load_system(path.parent())?;
    Ok((cfg, sys))
}

fn analyze(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<()> {
    let (cfg, sys) = load_pipeline_config(config, seed)?;
    let report = run_pipeline(&cfg, &sys)?;
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("pseudochain-out"));
    let files = emit_report(&report, &dir)?;
    for l in &report.levels {
        println!(
            "level {:>3}  δ = {:<8.4}  edges {:>6}  M = {:<6}  ergodic {}{}",
            l.n,
            l.delta,
            l.edge_count,
            l.certificate.mixing_constant.map_or("-".to_string(), |m| m.to_string()),
            l.ergodic_count,
            if l.ergodic_truncated { " (truncated)" } else { "" }
        );
    }
    if let Some(d) = &report.density {
        println!("density: L* = {:?}, fitted c = {:?}", d.l_star, d.fitted_c);
    }
    for e in &report.errors {
        eprintln!("note [{}]: {}", e.stage, e.message);
    }
    println!("report written to {}", files.report.display());
    Ok(())
}

fn density(config: &Path, out: Option<PathBuf>, seed: Option<u64>, level: Option<usize>) -> anyhow::Result<()> {
    let (cfg, sys) = load_pipeline_config(config, seed)?;
    let level = level.unwrap_or_else(|| cfg.density_level());
    let report = density_demo(&cfg, &sys, level)?;
    println!("{:>6} {:>8} {:>12} {:>12}", "L", "period", "weakstar", "pi_bar");
    for r in &report.rows {
        println!("{:>6} {:>8} {:>12.6} {:>12.6}", r.scale, r.period, r.weakstar, r.pi_bar);
    }
    println!("L* = {:?}, fitted c = {:?}", report.l_star, report.fitted_c);
    if let Some(dir) = out.or_else(|| cfg.output.clone()) {
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join("density.json"), &report)?;
    }
    Ok(())
}

fn trace_spec(system: &Path, spec: &Path, eps: f64, delta: f64, out: Option<PathBuf>) -> anyhow::Result<()> {
    let sys = load_system(system)?;
    let g = build_chain_graph(&sys, delta)?;
    mixing_certificate(&g).require_mixing()?;
    let spec: SpacedSpecification = read_json(spec)?;
    let chain = trace_specification(&spec, &g, eps)?;
    let check = verify_trace(&chain, &spec, &g, eps)?;
    let doc = serde_json::json!({ "chain": chain, "verification": check });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_output(out.as_deref(), &text)?;
    if !check.ok {
        bail!("traced chain failed verification");
    }
    Ok(())
}

fn distances(
    system: &Path,
    measures: &Path,
    metric: Metric,
    radius: usize,
    depth: usize,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let sys = load_system(system)?;
    let files: Vec<MeasureFile> = read_json(measures)?;
    let ms = files.into_iter().map(|f| f.into_measure(&sys)).collect::<Result<Vec<_>, _>>()?;
    let cost = sys.metric();
    let n = ms.len();
    let as_markov = |m: &AnyMeasure| match m {
        AnyMeasure::Periodic(p) => MarkovMeasure::from_periodic(p),
        AnyMeasure::Markov(m) => m.clone(),
    };
    let mut w = csv_writer(out.as_deref())?;
    let mut header = vec!["id".to_string()];
    header.extend((0..n).map(|j| j.to_string()));
    w.write_record(&header)?;
    for i in 0..n {
        let mut row = vec![i.to_string()];
        for j in 0..n {
            let v = match (metric, &ms[i], &ms[j]) {
                (Metric::RhoBar | Metric::RhoBarLower, AnyMeasure::Periodic(a), AnyMeasure::Periodic(b)) => {
                    rho_bar_periodic(a, b, cost).value
                }
                (Metric::RhoBar, a, b) => rho_bar_markov_upper(&as_markov(a), &as_markov(b), cost)?.value,
                (Metric::RhoBarLower, a, b) => {
                    rho_bar_markov_upper(&as_markov(a), &as_markov(b), cost)?.lower_bound.unwrap_or(0.0)
                }
                (Metric::W1, a, b) => {
                    w1_distance(&as_markov(a).marginal(sys.len()), &as_markov(b).marginal(sys.len()), cost)?.value
                }
                (Metric::PiBar, AnyMeasure::Periodic(a), AnyMeasure::Periodic(b)) => {
                    pi_bar_periodic(a, b, cost, radius).value
                }
                (Metric::Weakstar, AnyMeasure::Periodic(a), AnyMeasure::Periodic(b)) => {
                    weakstar_proxy(&a.cylinders(depth)?, &b.cylinders(depth)?, cost, depth)?
                }
                _ => bail!("metric is only available between periodic measures"),
            };
            row.push(format!("{v}"));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_writer(out: Option<&Path>) -> anyhow::Result<csv::Writer<Box<dyn std::io::Write>>> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn generate(system: GenerateCommand, out: Option<PathBuf>) -> anyhow::Result<()> {
    let sys = match system {
        GenerateCommand::CircleDoubling { n } => FiniteMetricSystem::circle_doubling(n)?,
        GenerateCommand::CircleRotation { n, k } => FiniteMetricSystem::circle_rotation(n, k)?,
        GenerateCommand::RandomMetric { n, seed } => FiniteMetricSystem::random_metric(n, seed)?,
    };
    let mut text = serde_json::to_string_pretty(&SystemFile::from_system(&sys))?;
    text.push('\n');
    write_output(out.as_deref(), &text)
}

fn chain_graph(system: &Path, delta: f64, emit: Emit) -> anyhow::Result<()> {
    let sys = load_system(system)?;
    let g = build_chain_graph(&sys, delta)?;
    match emit {
        Emit::Dot => print!("{}", g.to_dot()),
        Emit::Adj => print!("{}", g.to_adjacency_list()),
    }
    Ok(())
}

fn besicovitch(
    system: &Path,
    x: &Path,
    y: &Path,
    variant: Variant,
    horizon: usize,
    radius: usize,
) -> anyhow::Result<()> {
    let sys = load_system(system)?;
    let (x, y) = (load_trajectory(x)?, load_trajectory(y)?);
    let est = match variant {
        Variant::RhoB => besicovitch_rho(&sys, &x, &y, horizon)?,
        Variant::PiB => besicovitch_pi(&sys, &x, &y, horizon, radius)?,
        Variant::HatRho => hat_rho(&sys, &x, &y, horizon)?,
        Variant::HatPi => hat_pi(&sys, &x, &y, horizon, radius)?,
    };
    println!("{}", serde_json::to_string_pretty(&est)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze { config, out, seed } => analyze(&config, out, seed),
        Command::DensityDemo { config, out, seed, level } => density(&config, out, seed, level),
        Command::TraceSpec { system, spec, eps, delta, out } => trace_spec(&system, &spec, eps, delta, out),
        Command::Distances { system, measures, metric, radius, depth, out } => {
            distances(&system, &measures, metric, radius, depth, out)
        }
        Command::Generate { system, out } => generate(system, out),
        Command::ChainGraph { system, delta, emit } => chain_graph(&system, delta, emit),
        Command::Besicovitch { system, x, y, variant, horizon, radius } => {
            besicovitch(&system, &x, &y, variant, horizon, radius)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Schema { .. }) => 2,
        Some(Error::NotMixing { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
