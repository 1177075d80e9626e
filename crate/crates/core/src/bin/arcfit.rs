use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use arcfit::config::{ConfigError, RunConfig};
use arcfit::data::{self, ArcDataset, DataError};
use arcfit::fitting::{self, FitError, FitMethod, FitResult};
use arcfit::integrate::{self, IntegrationError};
use arcfit::kinetics::celsius_to_kelvin;
use arcfit::report::{self, ReportError, RunSummary};

#[derive(Parser)]
#[command(name = "arcfit", version, about = "Fit and simulate multi-stage Arrhenius thermal-runaway models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to an ARC dataset.
    Fit(RunArgs),
    /// Adiabatic and oven-test simulations of a model.
    Simulate(RunArgs),
    /// Write a synthetic ARC dataset from a model.
    Generate(RunArgs),
    /// Fit one dataset with two methods and compare the losses.
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    /// Bad configuration or input: exit 2.
    Input(String),
    /// Numerical or runtime failure: exit 1.
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Integration(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<IntegrationError> for Failure {
    fn from(e: IntegrationError) -> Self {
        match e {
            IntegrationError::Config(_) => Failure::Input(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Data(d) => d.into(),
            FitError::Space(_) | FitError::Pso(_) => Failure::Input(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
}

impl Run {
    fn prepare(args: &RunArgs) -> Result<Self, Failure> {
        let mut cfg = RunConfig::load(&args.config)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        cfg.pso.seed = cfg.seed;
        let out = args
            .out
            .clone()
            .or_else(|| cfg.output_dir.as_ref().map(|p| cfg.resolve_path(p)))
            .unwrap_or_else(|| PathBuf::from("arcfit-out"));
        std::fs::create_dir_all(&out).map_err(|e| Failure::Input(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self { cfg, out })
    }

    fn write_manifest(&self) -> Result<(), Failure> {
        let mut resolved = self.cfg.clone();
        resolved.output_dir = Some(self.out.clone());
        report::write_text(&self.out.join("manifest.toml"), &resolved.to_toml())?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<ArcDataset, Failure> {
    let path = cfg.dataset_path()?;
    let ds = data::load_arc_csv(&path, &cfg.csv_options())?;
    if ds.rate.is_some() {
        return Ok(ds);
    }
    let window = cfg.dataset.as_ref().map_or(5, |d| d.rate_window);
    Ok(data::estimate_heat_rate(&ds, window)?)
}

fn run_fit(cfg: &RunConfig, method: FitMethod, dataset: &ArcDataset, particles: usize) -> Result<FitResult, Failure> {
    let staging = cfg.staging()?;
    let spaces = cfg.search_spaces(&staging)?;
    let heat_capacity = cfg.heat_capacity_or(dataset.heat_capacity_hint)?;
    let pso_cfg = arcfit::PsoConfig {
        n_particles: particles,
        ..cfg.pso.clone()
    };
    let result = match method {
        FitMethod::Layered => fitting::fit_layered(
            dataset,
            &staging,
            &spaces,
            &cfg.loss,
            &pso_cfg,
            &cfg.integrator,
            heat_capacity,
        ),
        FitMethod::BruteForce => fitting::fit_brute_force(
            dataset,
            &staging,
            &spaces,
            &cfg.loss,
            &pso_cfg,
            &cfg.integrator,
            heat_capacity,
        ),
        FitMethod::Linearized => {
            let etas = cfg
                .fit
                .eta_defaults
                .clone()
                .unwrap_or_else(|| vec![1.0; staging.num_stages()]);
            fitting::fit_linearized(dataset, &staging, heat_capacity, &etas, &cfg.loss, &cfg.integrator)
        }
    };
    Ok(result?)
}

fn cmd_fit(run: &Run) -> Result<(), Failure> {
    let dataset = load_dataset(&run.cfg)?;
    let fit = run_fit(&run.cfg, run.cfg.fit.method, &dataset, run.cfg.pso.n_particles)?;
    run.write_manifest()?;
    report::write_fit_outputs(&run.out, "fit", &fit, run.cfg.seed, run.cfg.report.svg)?;
    println!(
        "{} fit: {} stages, final loss {:.6e}, {} evaluations, {:.1} s",
        fit.method,
        fit.model.num_stages(),
        fit.final_loss,
        fit.evaluations,
        fit.wall_time_s
    );
    println!("outputs in {}", run.out.display());
    Ok(())
}

fn cmd_simulate(run: &Run) -> Result<(), Failure> {
    let sim_cfg = run
        .cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Failure::Input("missing [simulate] section".into()))?;
    let model = run.cfg.load_model(&sim_cfg.source())?;
    let icfg = &run.cfg.integrator;
    let mut rows = Vec::new();
    if sim_cfg.adiabatic {
        let t0 = sim_cfg
            .initial_temperature_C
            .map_or(model.staging_temperatures[0], celsius_to_kelvin);
        let sim = integrate::simulate_adiabatic_arc(&model, t0, sim_cfg.t_end_s, icfg)?;
        let file = "adiabatic.csv".to_string();
        sim.save_csv(&run.path(&file))
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        rows.push(RunSummary::new("adiabatic".into(), None, &sim, file));
    }
    if let Some(ovens) = &sim_cfg.oven_temperatures_C {
        let ua = sim_cfg.conv_coefficient_area_W_per_K.unwrap_or_default();
        let t_init = celsius_to_kelvin(sim_cfg.oven_initial_temperature_C);
        for &oven_c in ovens {
            let sim = integrate::simulate_oven_test(&model, t_init, celsius_to_kelvin(oven_c), ua, sim_cfg.t_end_s, icfg)?;
            let file = format!("oven_{oven_c}C.csv");
            sim.save_csv(&run.path(&file))
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            rows.push(RunSummary::new("oven".into(), Some(oven_c), &sim, file));
        }
    }
    run.write_manifest()?;
    report::write_summary_csv(&run.path("summary.csv"), &rows)?;
    report::write_json(&run.path("summary.json"), &rows)?;
    print!("{}", report::format_summary(&rows));
    Ok(())
}

fn cmd_generate(run: &Run) -> Result<(), Failure> {
    let gen = run
        .cfg
        .generate
        .as_ref()
        .ok_or_else(|| Failure::Input("missing [generate] section".into()))?;
    let model = run.cfg.load_model(&gen.source())?;
    let t_start = gen.t_start_C.map_or(model.staging_temperatures[0], celsius_to_kelvin);
    let opts = run.cfg.synthetic_options()?;
    let ds = data::generate_synthetic(&model, t_start, &opts)?;
    let path = run.path(&gen.file_name);
    ds.save_csv(&path)?;
    report::write_model_toml(&run.path("generator_model.toml"), &model)?;
    run.write_manifest()?;
    println!(
        "wrote {} samples ({:.2} to {:.2} K) to {}",
        ds.len(),
        ds.min_temperature(),
        ds.max_temperature(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MethodOutcome {
    method: FitMethod,
    particles: usize,
    final_loss: f64,
    evaluations: u64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct Comparison {
    n_stages: usize,
    layered_particles: usize,
    parity_particles: usize,
    parity_multiplier: f64,
    brute_cost_multiplier: f64,
    outcomes: Vec<MethodOutcome>,
    winner: FitMethod,
}

fn cmd_compare(run: &Run) -> Result<(), Failure> {
    let cmp = run.cfg.compare.clone().unwrap_or_default();
    let dataset = load_dataset(&run.cfg)?;
    let n = run.cfg.staging()?.num_stages();
    let layered = cmp.layered_particles.unwrap_or(run.cfg.pso.n_particles);
    let parity = fitting::brute_force_parity_particles(n, layered);
    let brute = cmp.brute_particles.unwrap_or(parity);
    if brute < parity {
        log::warn!("brute-force particles {brute} below the parity count {parity}");
    }
    let mut outcomes = Vec::new();
    for method in cmp.methods {
        let particles = match method {
            FitMethod::BruteForce => brute,
            _ => layered,
        };
        let fit = run_fit(&run.cfg, method, &dataset, particles)?;
        report::write_fit_outputs(&run.out, &method.to_string(), &fit, run.cfg.seed, run.cfg.report.svg)?;
        outcomes.push(MethodOutcome {
            method,
            particles,
            final_loss: fit.final_loss,
            evaluations: fit.evaluations,
            wall_time_s: fit.wall_time_s,
        });
    }
    let winner = outcomes
        .iter()
        .min_by(|a, b| a.final_loss.total_cmp(&b.final_loss))
        .map(|o| o.method)
        .expect("two methods");
    let comparison = Comparison {
        n_stages: n,
        layered_particles: layered,
        parity_particles: parity,
        parity_multiplier: (n + 1) as f64 / 2.0,
        brute_cost_multiplier: fitting::brute_force_cost_multiplier(n, layered, brute),
        outcomes,
        winner,
    };
    run.write_manifest()?;
    report::write_json(&run.path("comparison.json"), &comparison)?;
    for o in &comparison.outcomes {
        println!(
            "{:<11} particles {:>6}  loss {:.6e}  evaluations {:>9}  {:.1} s",
            o.method.to_string(),
            o.particles,
            o.final_loss,
            o.evaluations,
            o.wall_time_s
        );
    }
    println!(
        "parity: {} brute-force particles (x{}), configured cost x{:.2}; winner: {}",
        comparison.parity_particles, comparison.parity_multiplier, comparison.brute_cost_multiplier, comparison.winner
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let (args, cmd): (&RunArgs, fn(&Run) -> Result<(), Failure>) = match &cli.command {
        Command::Fit(a) => (a, cmd_fit),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Generate(a) => (a, cmd_generate),
        Command::Compare(a) => (a, cmd_compare),
    };
    let run = Run::prepare(args)?;
    cmd(&run)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("arcfit: {e}");
            ExitCode::from(e.code())
        }
    }
}
