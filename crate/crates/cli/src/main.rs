//! `hrdme` command-line front end.

mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use hrdme::bundled;
use hrdme::model::Model;
use hrdme::modelio::parse_document;
use hrdme::solver::{in_pool, run_timeseries, EnsembleConfig, EnsembleOutput, Solver};
use hrdme::stats::{rebind_harness, speedup, time_series_error};

#[derive(Parser, Debug)]
#[command(name = "hrdme", version, about = "Hierarchical reaction-diffusion master equation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a model.
    Run(RunArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Ensemble mean time series.
    Timeseries,
    /// Rebinding-time sample for one reactant pair.
    Rebind,
    /// Cost and error of single-level solvers and hrdme against the finest level.
    Benchmark,
    /// Time series with index checks after every event.
    Audit,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Model file, or `bundled:<name>` for a model shipped with the library.
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value_t = Mode::Timeseries)]
    mode: Mode,
    #[arg(long, default_value_t = 5.0)]
    tfinal: f64,
    /// Number of equidistant sample points, both ends included.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Trajectories (time series) or episodes (rebind).
    #[arg(long, default_value_t = 200)]
    traj: usize,
    /// hrdme, wellmixed or single-level:<L>
    #[arg(long, default_value = "hrdme")]
    solver: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, env = "HRDME_WORKERS", default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Transfer constant C; `inf` disables transfers.
    #[arg(long)]
    transfer_c: Option<f64>,
    /// Reactant pair for rebind mode, `A,B`; defaults to the first association.
    #[arg(long)]
    pair: Option<String>,
    /// Cut rebind episodes off after this time (written as `inf`).
    #[arg(long)]
    horizon: Option<f64>,
}

/// Failure classes, mapped to exit codes.
enum Failure {
    Diagnostics,
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run(args) = cli.command;
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diagnostics) => ExitCode::from(2),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_model(args: &RunArgs) -> Result<Model, Failure> {
    let (label, text) = match args.model.strip_prefix("bundled:") {
        Some(name) => {
            let src = bundled::ALL
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, s)| s.to_string())
                .ok_or_else(|| Failure::Runtime(format!("no bundled model '{name}'")))?;
            (args.model.clone(), src)
        }
        None => {
            let text = std::fs::read_to_string(&args.model)
                .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", args.model)))?;
            (args.model.clone(), text)
        }
    };
    let doc = parse_document(&text);
    for d in &doc.diagnostics {
        eprintln!("{label}:{d}");
    }
    let mut model = doc.model.ok_or(Failure::Diagnostics)?;
    if let Some(e) = args.epsilon {
        model.epsilon = e;
    }
    if let Some(c) = args.transfer_c {
        model.transfer_c = c;
    }
    if let Err(diags) = model.validate() {
        for d in diags {
            eprintln!("{label}: error: {d}");
        }
        return Err(Failure::Diagnostics);
    }
    Ok(model)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let model = load_model(args)?;
    let solver: Solver = args.solver.parse()?;
    let cfg = EnsembleConfig {
        t_final: args.tfinal,
        samples: args.samples,
        trajectories: args.traj,
        seed: args.seed,
        workers: args.workers,
        audit: args.mode == Mode::Audit,
    };
    if !(args.tfinal >= 0.0 && args.tfinal.is_finite()) {
        return Err(Failure::Runtime(format!("--tfinal must be finite and non-negative, got {}", args.tfinal)));
    }
    match args.mode {
        Mode::Timeseries | Mode::Audit => {
            let out = run_timeseries(&model, solver, &cfg)?;
            warn_levels(&model, &out);
            match &args.out {
                Some(p) => output::emit_csv(&out.ensemble, p)
                    .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?,
                None => output::write_series(&out.ensemble, io::stdout().lock())?,
            }
            if args.mode == Mode::Audit {
                eprintln!(
                    "audit passed: {} trajectories, {} events",
                    out.series.len(),
                    out.total_metrics().events.total()
                );
            }
        }
        Mode::Rebind => rebind(args, &model, solver)?,
        Mode::Benchmark => benchmark(args, &model, &cfg)?,
    }
    Ok(())
}

fn warn_levels(model: &Model, out: &EnsembleOutput) {
    for w in &out.warnings {
        eprintln!(
            "warning: no level meets epsilon for '{}'; using level {} (relative error {:.3})",
            model.channels[w.channel], w.level, w.error
        );
    }
}

fn rebind(args: &RunArgs, model: &Model, solver: Solver) -> Result<(), Failure> {
    let (a, b) = match &args.pair {
        Some(p) => {
            let (a, b) = p
                .split_once(',')
                .ok_or_else(|| Failure::Runtime(format!("--pair expects A,B, got '{p}'")))?;
            (a.trim().to_string(), b.trim().to_string())
        }
        None => model
            .channels
            .iter()
            .find(|c| c.order() == 2 && c.k > 0.0 && c.reactants[0] != c.reactants[1])
            .map(|c| (c.reactants[0].clone(), c.reactants[1].clone()))
            .ok_or_else(|| Failure::Runtime("model has no association between two species".into()))?,
    };
    let (configured, _) = solver.configure(model)?;
    let start = Instant::now();
    let sample = in_pool(args.workers, || rebind_harness(&configured, (&a, &b), args.traj, args.seed, args.horizon))??;
    let (m, se) = sample.mean_se();
    eprintln!(
        "{} episodes of {a} + {b} with {solver}: mean {m:.6} +- {se:.6}, {} censored, {:.2} s",
        sample.len(),
        sample.censored(),
        start.elapsed().as_secs_f64()
    );
    output::write_rebind(&sample, open_out(&args.out)?)?;
    Ok(())
}

fn benchmark(args: &RunArgs, model: &Model, cfg: &EnsembleConfig) -> Result<(), Failure> {
    let lmax = model.lmax;
    let mut solvers: Vec<Solver> = (lmax.min(3)..=lmax).map(Solver::SingleLevel).collect();
    solvers.push(Solver::Hierarchical);
    let mut runs = Vec::new();
    for &s in &solvers {
        eprintln!("running {s} ...");
        let out = run_timeseries(model, s, cfg)?;
        if s == Solver::Hierarchical {
            warn_levels(model, &out);
        }
        runs.push(out);
    }
    let reference = &runs[solvers.len() - 2];
    let ref_metrics = reference.total_metrics();
    let names = &reference.ensemble.mean.species;

    let mut header: Vec<String> = ["solver", "events", "wall_s", "event_speedup", "wall_speedup"]
        .map(String::from)
        .to_vec();
    header.extend(names.iter().map(|n| format!("err_{n}")));
    let mut rows = Vec::new();
    for (s, run) in solvers.iter().zip(&runs) {
        let m = run.total_metrics();
        let (wall_x, event_x) = speedup(&ref_metrics, &m);
        let mut row = vec![
            s.to_string(),
            m.events.total().to_string(),
            format!("{:.3}", m.wall.as_secs_f64()),
            format!("{event_x:.1}"),
            format!("{wall_x:.1}"),
        ];
        for i in 0..names.len() {
            row.push(match time_series_error(&run.ensemble.mean, &reference.ensemble.mean, i) {
                Ok(e) => format!("{:.4}", e.normalized),
                Err(_) => String::new(),
            });
        }
        rows.push(row);
    }
    println!("reference: single-level:{lmax}; errors are normalized L1 over the sample grid");
    print!("{}", output::format_table(&header, &rows));
    if let Some(p) = &args.out {
        output::write_table(&header, &rows, open_out(&Some(p.clone()))?)?;
    }
    Ok(())
}
