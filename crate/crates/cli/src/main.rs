//! `euler-poisson`: identity checks, time integration, equilibrium analysis and
//! tensor export for the truncated Fourier-vorticity Euler system.
//!
//! Exit codes: 0 success, 1 identity or analysis failure, 2 configuration
//! error, 3 blow-up during integration.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use euler_poisson::dynamics::{advance, measure_reduced, FullField, ReducedField, VectorField};
use euler_poisson::equilibria::{corank_comparison, equilibrium_residual, gradient_span_test, shear_state};
use euler_poisson::frames::{FrameBuilder, FrameSet};
use euler_poisson::io::{write_snapshot, CsvWriter};
use euler_poisson::observables::DiagnosticsRecord;
use euler_poisson::state::{ReducedState, VorticityState};
use euler_poisson::structures::{assemble_global, Structure};
use euler_poisson::verify::{run_suite, SuiteConfig};
use euler_poisson::{Anisotropy, Error, ModeSet, Truncation};
use serde_json::json;

use config::{Config, Initial};

#[derive(Parser)]
#[command(name = "euler-poisson", version, about = "Poisson structures of the truncated 3D Euler equations")]
struct Cli {
    /// JSON configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key (`key=value`, dotted keys for nested objects).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the identity suite and print a JSON report.
    Verify,
    /// Integrate in time, writing diagnostics CSV and snapshots.
    Simulate,
    /// Equilibrium residuals and gradient analysis at the configured shear flow.
    Shear,
    /// Kernel dimension at the shear flow against generic baselines.
    Rank,
    /// Write the assembled Poisson tensor of the initial state.
    Export,
}

enum Failure {
    /// Checks ran but did not pass.
    Check(String),
    Config(String),
    BlowUp(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) | Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::BlowUp(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Config(m) | Failure::BlowUp(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidMode(_)
            | Error::OutOfRange { .. }
            | Error::InvalidParameter(_)
            | Error::TruncationTooSmall { .. }
            | Error::InvalidShear(_)
            | Error::ModeSetMismatch
            | Error::Json(_) => Failure::Config(e.to_string()),
            Error::BlowUp { .. } => Failure::BlowUp(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Lattice, frames and the reference vector built from a validated config.
struct Setup {
    modes: Arc<ModeSet>,
    frames: FrameSet,
}

impl Setup {
    fn new(cfg: &Config) -> Result<Setup, Failure> {
        let trunc = Truncation::new(cfg.n)?;
        let aniso = Anisotropy::new(cfg.aniso)?;
        let builder = FrameBuilder::new(cfg.n_vector.into())?;
        let modes = Arc::new(ModeSet::build(trunc, aniso));
        let frames = FrameSet::new(&modes, builder);
        Ok(Setup { modes, frames })
    }
}

fn shear_spec(cfg: &Config) -> Result<&euler_poisson::equilibria::ShearFlowSpec, Failure> {
    cfg.shear.as_ref().ok_or_else(|| Failure::Config("this command needs a 'shear' specification".into()))
}

fn initial_state(cfg: &Config, setup: &Setup) -> Result<VorticityState, Failure> {
    let modes = setup.modes.clone();
    Ok(match &cfg.initial {
        Initial::Random => VorticityState::random_divfree(modes, cfg.seed, cfg.amplitude)?,
        Initial::Zero => VorticityState::zeros(modes),
        Initial::Shear => shear_state(shear_spec(cfg)?, modes)?,
        Initial::Snapshot { path } => euler_poisson::io::read_snapshot(path, modes)
            .map_err(|e| Failure::Config(format!("cannot load snapshot {}: {e}", path.display())))?,
    })
}

/// Prints the report and writes it to the configured file, if any.
fn emit(cfg: &Config, report: &serde_json::Value) -> Outcome {
    let text = serde_json::to_string_pretty(report).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    if let Some(name) = &cfg.output.report {
        std::fs::create_dir_all(&cfg.output.dir)?;
        std::fs::write(cfg.output.path(name), format!("{text}\n"))?;
    }
    Ok(())
}

fn cmd_verify(cfg: &Config) -> Outcome {
    let suite = SuiteConfig {
        n: Truncation::new(cfg.n)?,
        aniso: Anisotropy::new(cfg.aniso)?,
        n_vector: cfg.n_vector,
        cases: cfg.cases,
        seed: cfg.seed,
        identity_tol: cfg.tolerances.identity,
        block_tol: cfg.tolerances.block,
        fault: cfg.fault,
    };
    let report = run_suite(&suite)?;
    emit(cfg, &serde_json::to_value(&report).map_err(|e| Failure::Runtime(e.to_string()))?)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Check(format!("identity checks failed: {}", report.failed.join(", "))))
    }
}

/// Running maxima of the conservation errors.
struct Drift {
    first: Option<DiagnosticsRecord>,
    last: Option<DiagnosticsRecord>,
    energy: f64,
    helicity: f64,
    divergence: f64,
}

impl Drift {
    fn new() -> Self {
        Drift { first: None, last: None, energy: 0.0, helicity: 0.0, divergence: 0.0 }
    }

    fn record(&mut self, r: DiagnosticsRecord) {
        let first = *self.first.get_or_insert(r);
        let e_scale = if first.energy != 0.0 { first.energy.abs() } else { 1.0 };
        self.energy = self.energy.max((r.energy - first.energy).abs() / e_scale);
        self.helicity = self.helicity.max((r.helicity - first.helicity).abs() / first.helicity.abs().max(1.0));
        let d = if r.amp_max > 0.0 { r.div_max / r.amp_max } else { r.div_max };
        self.divergence = self.divergence.max(d);
        self.last = Some(r);
    }
}

fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:08}.json")
}

/// Integrates with `field`, streaming diagnostics and snapshots. On blow-up the
/// last finite state is written to `last_good.json`.
fn run<F, M, T>(cfg: &Config, mut state: F::State, field: &F, measure: M, to_full: T) -> Outcome
where
    F: VectorField,
    M: Fn(&F::State) -> euler_poisson::Result<DiagnosticsRecord>,
    T: Fn(&F::State) -> VorticityState,
{
    let out = &cfg.output;
    std::fs::create_dir_all(&out.dir)?;
    let mut csv = CsvWriter::new(BufWriter::new(File::create(out.path(&out.diagnostics))?))?;
    let mut drift = Drift::new();
    let every = cfg.record_every.max(1);
    let snap_every = out.snapshot_every;
    let result = advance(&mut state, cfg.dt, cfg.steps, field, 1, |step, s| {
        if step % every == 0 || step == cfg.steps {
            let r = measure(s)?;
            csv.write(&r)?;
            drift.record(r);
        }
        if snap_every > 0 && step % snap_every == 0 {
            write_snapshot(&out.path(&snapshot_name(step)), &to_full(s))?;
        }
        Ok(())
    });
    csv.flush()?;
    if let Err(e) = result {
        if matches!(e, Error::BlowUp { .. }) {
            let path = out.path("last_good.json");
            write_snapshot(&path, &to_full(&state))?;
            return Err(Failure::BlowUp(format!("{e}; last finite state saved to {}", path.display())));
        }
        return Err(e.into());
    }
    write_snapshot(&out.path("final.json"), &to_full(&state))?;
    let first = drift.first.expect("initial record");
    let last = drift.last.expect("final record");
    emit(
        cfg,
        &json!({
            "structure": cfg.structure.name(),
            "steps": cfg.steps,
            "dt": cfg.dt,
            "t_final": last.t,
            "energy_initial": first.energy,
            "helicity_initial": first.helicity,
            "energy_drift_rel": drift.energy,
            "helicity_drift": drift.helicity,
            "divergence_max_rel": drift.divergence,
            "diagnostics": out.path(&out.diagnostics),
        }),
    )
}

fn cmd_simulate(cfg: &Config) -> Outcome {
    let setup = Setup::new(cfg)?;
    let state = initial_state(cfg, &setup)?;
    if cfg.structure == Structure::Reduced {
        let reduced = state.to_reduced(&setup.frames, cfg.tolerances.divergence)?;
        let field = ReducedField::new(setup.modes.clone(), &setup.frames)?;
        let frames = &setup.frames;
        run(cfg, reduced, &field, |s: &ReducedState| Ok(measure_reduced(s)), |s: &ReducedState| s.to_full(frames))
    } else {
        let field = FullField::new(setup.modes.clone(), cfg.structure)?;
        run(cfg, state, &field, DiagnosticsRecord::measure, |s: &VorticityState| s.clone())
    }
}

/// Structure used for kernel analyses; `direct` has no Poisson tensor.
fn tensor_structure(cfg: &Config) -> Result<Structure, Failure> {
    match cfg.structure {
        Structure::Direct => {
            Err(Failure::Config("structure 'direct' has no Poisson tensor; use simple, projected or reduced".into()))
        }
        s => Ok(s),
    }
}

fn cmd_shear(cfg: &Config) -> Outcome {
    let setup = Setup::new(cfg)?;
    let spec = shear_spec(cfg)?;
    let which = tensor_structure(cfg)?;
    let state = shear_state(spec, setup.modes.clone())?;
    let mut residuals = serde_json::Map::new();
    for s in [Structure::Direct, Structure::Simple, Structure::Projected, Structure::Reduced] {
        residuals.insert(s.name().into(), json!(equilibrium_residual(&state, s, &setup.frames)?));
    }
    let tensor = assemble_global(&state, which, &setup.frames)?;
    let span = gradient_span_test(&state, &tensor, &setup.frames, cfg.tolerances.kernel, cfg.tolerances.equilibrium)?;
    let ok = span.degenerate || span.in_kernel;
    emit(
        cfg,
        &json!({
            "spec": spec,
            "N": cfg.n,
            "equilibrium_residuals": residuals,
            "gradient_span": span,
        }),
    )?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check("grad H is not in the kernel at the shear state".into()))
    }
}

fn cmd_rank(cfg: &Config) -> Outcome {
    let setup = Setup::new(cfg)?;
    let spec = shear_spec(cfg)?;
    let which = tensor_structure(cfg)?;
    let comparison =
        corank_comparison(spec, setup.modes.clone(), which, &setup.frames, &cfg.baseline_seeds, cfg.tolerances.rank)?;
    let state = shear_state(spec, setup.modes.clone())?;
    let tensor = assemble_global(&state, which, &setup.frames)?;
    let span = gradient_span_test(&state, &tensor, &setup.frames, cfg.tolerances.kernel, cfg.tolerances.equilibrium)?;
    emit(
        cfg,
        &json!({
            "spec": spec,
            "N": cfg.n,
            "corank_comparison": comparison,
            "gradient_span": span,
        }),
    )
}

fn cmd_export(cfg: &Config) -> Outcome {
    let setup = Setup::new(cfg)?;
    let which = tensor_structure(cfg)?;
    let state = initial_state(cfg, &setup)?;
    let tensor = assemble_global(&state, which, &setup.frames)?;
    let out = &cfg.output;
    std::fs::create_dir_all(&out.dir)?;
    let bin = out.path(&out.tensor);
    let mut w = BufWriter::new(File::create(&bin)?);
    tensor.write_binary(&mut w)?;
    w.flush()?;
    let header_path = bin.with_extension("json");
    let mut header = tensor.header_json();
    header["data"] = json!(file_name(&bin));
    std::fs::write(&header_path, format!("{}\n", serde_json::to_string_pretty(&header).expect("JSON value")))?;
    emit(
        cfg,
        &json!({
            "structure": which.name(),
            "rows": tensor.dim(),
            "tensor": bin,
            "header": header_path,
            "antisymmetry_defect": tensor.antisymmetry_defect(),
        }),
    )
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn dispatch(command: Command, cfg: &Config) -> Outcome {
    match command {
        Command::Verify => cmd_verify(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Shear => cmd_shear(cfg),
        Command::Rank => cmd_rank(cfg),
        Command::Export => cmd_export(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match Config::load(cli.config.as_deref(), &cli.set) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| dispatch(cli.command, &cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
