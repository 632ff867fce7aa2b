use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rotor_floquet::cli::config::ParityChoice;
use rotor_floquet::cli::{self, CliError, RunConfig, Scenario};

#[derive(Parser)]
#[command(name = "rotor-floquet", version, about = "Quasienergy states and pulse-train dynamics of kicked 3D rotors")]
struct Cli {
    #[command(subcommand)]
    scenario: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasienergy table and state profiles at one kick strength.
    States(Overrides),
    /// Quasienergies and density histogram over a kick-strength grid.
    SpectrumScan(Overrides),
    /// Populations and energy after each pulse.
    Dynamics(Overrides),
    /// Edge-state overlap of basis states over a kick-strength grid.
    OverlapScan(Overrides),
    /// Alignment traces and their spectra.
    AlignmentFt(Overrides),
    /// Quasienergies of the kicked planar rotor.
    PlanarRef(Overrides),
}

impl Command {
    fn split(self) -> (Scenario, Overrides) {
        match self {
            Command::States(o) => (Scenario::States, o),
            Command::SpectrumScan(o) => (Scenario::SpectrumScan, o),
            Command::Dynamics(o) => (Scenario::Dynamics, o),
            Command::OverlapScan(o) => (Scenario::OverlapScan, o),
            Command::AlignmentFt(o) => (Scenario::AlignmentFt, o),
            Command::PlanarRef(o) => (Scenario::PlanarRef, o),
        }
    }
}

/// Flags override the matching keys of the config file.
#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    kick_strength: Option<f64>,
    /// Comma-separated kick strengths.
    #[arg(long, value_delimiter = ',')]
    kick_strengths: Option<Vec<f64>>,
    /// Pulse period as p/q of the revival time.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    pulses: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    m: Option<i32>,
    #[arg(long, value_enum)]
    parity: Option<ParityArg>,
    #[arg(long)]
    j_max: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    /// Kelvin.
    #[arg(long)]
    temperature: Option<f64>,
    /// Comma-separated initial J values.
    #[arg(long, value_delimiter = ',')]
    initial_j: Option<Vec<u32>>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ParityArg {
    Even,
    Odd,
    Both,
}

impl Overrides {
    fn apply(self, scenario: Scenario, mut cfg: RunConfig) -> Result<RunConfig, CliError> {
        if let Some(s) = cfg.scenario {
            if s != scenario {
                return Err(CliError::Config {
                    key: "scenario".into(),
                    message: format!("config says {} but the subcommand is {}", s.name(), scenario.name()),
                });
            }
        }
        cfg.scenario = Some(scenario);
        if self.out.is_some() {
            cfg.output = self.out;
        }
        if let Some(p) = self.kick_strength {
            cfg.train = rotor_floquet::cli::config::TrainConfig {
                kick_strength: Some(p),
                kick_strengths: None,
                kick_grid: None,
                peak_intensity: None,
                ..cfg.train
            };
        }
        if let Some(ps) = self.kick_strengths {
            cfg.train = rotor_floquet::cli::config::TrainConfig {
                kick_strength: None,
                kick_strengths: Some(ps),
                kick_grid: None,
                peak_intensity: None,
                ..cfg.train
            };
        }
        if let Some(t) = self.tau {
            cfg.train.tau = t;
        }
        if let Some(n) = self.pulses {
            cfg.train.pulses = n;
        }
        if let Some(m) = self.m {
            cfg.basis.m = m;
        }
        if let Some(p) = self.parity {
            cfg.basis.parity = match p {
                ParityArg::Even => ParityChoice::Even,
                ParityArg::Odd => ParityChoice::Odd,
                ParityArg::Both => ParityChoice::Both,
            };
        }
        if let Some(j) = self.j_max {
            cfg.basis.j_max = j;
        }
        if self.eps.is_some() {
            cfg.rotor.eps = self.eps;
        }
        if self.temperature.is_some() {
            cfg.temperature = self.temperature;
        }
        if let Some(js) = self.initial_j {
            cfg.sampling.initial_j = js;
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<cli::RunSummary, CliError> {
    let (scenario, overrides) = command.split();
    if let Some(n) = overrides.threads {
        if n == 0 {
            return Err(CliError::Config { key: "threads".into(), message: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is built once");
    }
    let base = match &overrides.config {
        Some(path) => cli::load_config(path)?,
        None => RunConfig::default(),
    };
    let cfg = overrides.apply(scenario, base)?;
    cli::run(&cfg)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match execute(args.scenario) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", summary.output.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
