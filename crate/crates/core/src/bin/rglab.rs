use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rglab::error::{Error, Result};
use rglab::graph::sample_graph_with;
use rglab::harness::{emit_report, run_suite, ExperimentConfig, Suite};
use rglab::rng::{stream, Purpose};

#[derive(Parser)]
#[command(name = "rglab", version, about = "Convergence experiments for GNNs on random graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; the metadata sidecar goes next to it. Prints to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated graph sizes.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one graph at the first scheduled size and write edges and latents.
    Sample(Common),
    /// Shift-operator concentration.
    Assumption(Common),
    /// Sampled vs limit SignNet eigenvectors.
    Signnet(Common),
    /// Filtered distance encodings.
    Distpe(Common),
    /// Spectral filter fitting.
    Filter(Common),
    /// Regression and generalization with and without normalization.
    Fig1(Common),
    /// Exact checks on the reference block models.
    Fixtures(Common),
    /// Smoothed noisy features.
    Smoothing(Common),
    /// Random message-passing networks.
    Mpnn(Common),
}

fn load(common: &Common, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => base,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(s) = &common.schedule {
        cfg.schedule = s.clone();
    }
    if common.out.is_some() {
        cfg.output = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sample(cfg: &ExperimentConfig) -> Result<()> {
    let model = cfg.build_model()?;
    let n = cfg.schedule[0];
    let mut rng = stream(cfg.seed, n as u64, 0, Purpose::Graph);
    let g = sample_graph_with(&model, n, cfg.alpha.alpha(n), &mut rng)?;
    let edges = cfg.output.clone().ok_or_else(|| Error::Config("sample requires --out".into()))?;
    let latents = edges.with_extension("latents");
    g.write_files(&edges, &latents)?;
    eprintln!("n={} edges={} isolated={}", g.n(), g.edge_count(), g.zero_degree_count());
    Ok(())
}

fn run(suite: Suite, cfg: &ExperimentConfig) -> Result<bool> {
    let outcome = run_suite(suite, cfg)?;
    match &cfg.output {
        Some(p) => emit_report(&outcome.report, p)?,
        None => outcome.report.write_csv(&mut std::io::stdout().lock())?,
    }
    for a in &outcome.assertions {
        eprintln!("{a}");
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (suite, common, base) = match &cli.command {
        Command::Sample(c) => (None, c, ExperimentConfig::default()),
        Command::Assumption(c) => (Some(Suite::Assumption), c, ExperimentConfig::default()),
        Command::Signnet(c) => (Some(Suite::Signnet), c, ExperimentConfig::default()),
        Command::Distpe(c) => (Some(Suite::Distpe), c, ExperimentConfig::default()),
        Command::Filter(c) => (Some(Suite::Filter), c, ExperimentConfig::default()),
        Command::Fig1(c) => (Some(Suite::Fig1), c, ExperimentConfig::fig1()),
        Command::Fixtures(c) => (Some(Suite::Fixtures), c, ExperimentConfig::default()),
        Command::Smoothing(c) => (Some(Suite::Smoothing), c, ExperimentConfig::default()),
        Command::Mpnn(c) => (Some(Suite::Mpnn), c, ExperimentConfig::default()),
    };
    let result = load(common, base).and_then(|cfg| match suite {
        None => sample(&cfg).map(|_| true),
        Some(s) => run(s, &cfg),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
