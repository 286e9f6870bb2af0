use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nafd_core::netgen::write_topology_csv;
use nafd_core::opt::write_solution_csv;
use nafd_core::NetworkRealization;
use nafd_harness::experiment::write_csv;
use nafd_harness::spec::parse_algorithms;
use nafd_harness::{run_experiment, validate_closed_forms, Axis, ExperimentSpec, Scenario};

#[derive(Parser)]
#[command(name = "nafd", version, about = "NAFD cell-free massive MIMO planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one network realization and write its gain matrices.
    Gen(Common),
    /// Optimize one realization with each algorithm.
    Solve(Common),
    /// Run a scenario sweep.
    Sweep(Common),
    /// Compare the closed-form SE against Monte Carlo simulation.
    Validate(Common),
    /// Run the multi-slot scheduler.
    Schedule(Common),
}

#[derive(Args)]
struct Common {
    /// Sectioned config file ([network], [optimizer], [experiment], [schedule], [validation]).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated algorithms, e.g. `chde,ga,pso,random-nafd`.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
}

impl Common {
    fn spec(&self, fallback: Scenario) -> Result<ExperimentSpec> {
        let scenario = self.scenario.as_deref().map(str::parse).transpose()?;
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_file(path, scenario)?,
            None => ExperimentSpec::new(scenario.unwrap_or(fallback), Default::default()),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(out) = &self.out {
            spec.out_dir = out.clone();
        }
        if let Some(list) = &self.algo {
            spec.algorithms = parse_algorithms(list)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn gen(spec: &ExperimentSpec) -> Result<()> {
    let dir = &spec.out_dir;
    fs::create_dir_all(dir)?;
    let (topo, real) = NetworkRealization::draw(&spec.network, spec.seed)?;
    real.write_csv_dir(dir)?;
    write_topology_csv(create(&dir.join("topology.csv"))?, &topo)?;
    fs::write(dir.join("network.toml"), spec.network.to_toml_string())?;
    println!("wrote realization for seed {} to {}", spec.seed, dir.display());
    Ok(())
}

fn solve(mut spec: ExperimentSpec) -> Result<()> {
    spec.axis = Axis::None;
    spec.values = vec![0.0];
    spec.antenna_product = None;
    spec.n_realizations = 1;
    spec.write_history = true;
    let out = run_experiment(&spec)?;
    for t in &out.outcomes {
        let algo = t.run.algorithm;
        let eval = &t.run.eval;
        write_solution_csv(create(&spec.out_dir.join(format!("solution_{algo}.csv")))?, &eval.solution)?;
        eval.report.write_csv(create(&spec.out_dir.join(format!("se_report_{algo}.csv")))?)?;
        println!(
            "{algo}: total SE {:.4} bits/s/Hz, served {}/{}",
            eval.fitness,
            eval.report.served_count(),
            eval.served_ul.len() + eval.served_dl.len()
        );
    }
    for r in out.runs.iter().filter(|r| r.status != "ok") {
        println!("{}: {}", r.algorithm, r.status);
    }
    Ok(())
}

fn sweep(spec: &ExperimentSpec) -> Result<()> {
    let out = run_experiment(spec)?;
    for s in &out.summary {
        println!(
            "{} {}={} {}: {:.3} ± {:.3} bits/s/Hz over {} runs",
            s.scenario, s.axis, s.axis_value, s.algorithm, s.mean_total_se, s.std_total_se, s.runs
        );
    }
    println!("wrote {}", spec.out_dir.display());
    Ok(())
}

fn validate(spec: &ExperimentSpec) -> Result<bool> {
    fs::create_dir_all(&spec.out_dir)?;
    let report = validate_closed_forms(&spec.network, spec.mode, &spec.validation, spec.seed)?;
    write_csv(&spec.out_dir.join("validation.csv"), &report.rows)?;
    println!(
        "max relative error {:.4} over {} UE values (tolerance {})",
        report.max_rel_err(),
        report.rows.len(),
        report.tolerance
    );
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen(c) => gen(&c.spec(Scenario::SePerUe)?)?,
        Command::Solve(c) => solve(c.spec(Scenario::SePerUe)?)?,
        Command::Sweep(c) => sweep(&c.spec(Scenario::SumSeCompare)?)?,
        Command::Validate(c) => return validate(&c.spec(Scenario::SePerUe)?),
        Command::Schedule(c) => {
            let mut spec = c.spec(Scenario::MultiSlot)?;
            spec.scenario = Scenario::MultiSlot;
            run_experiment(&spec)?;
            println!("wrote {}", spec.out_dir.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
