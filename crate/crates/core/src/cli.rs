//! Command-line front end: `circle-table`, `converge` and `evolve`.
//!
//! Exit codes: 0 ok, 1 numerical failure, 2 usage or configuration error.
//! `HBMO_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::circle::{self, HalfTimeEntry};
use crate::config::{RunConfig, ShapeSpec, TargetSpec};
use crate::distance::{average_radius, Interface};
use crate::error::{HbmoError, Result};
use crate::experiments::{self, DistanceMode, ExperimentSpec};
use crate::flow::{self, FlowConfig, InitialShape};
use crate::grid::{make_grid, Grid2D, ScalarField};
use crate::io::{self, CSV_HEADER};
use crate::multiphase::{self, MultiphaseState, PhaseSet, SimplexBasis, DEFAULT_EPS_CELLS};
use crate::volume::{self, VolumeTargets, DEFAULT_RELATIVE_TOL};

#[derive(Debug, Parser)]
#[command(name = "hbmo", version, about = "Hyperbolic MBO threshold dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Idealized circle recursion against the exact radius at t_e/2.
    CircleTable {
        #[arg(long, default_value_t = 1.0)]
        r0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        v0: f64,
        #[arg(long, default_value_t = 10)]
        base_n: usize,
        #[arg(long, default_value_t = 8)]
        levels: usize,
        #[arg(long, default_value_t = 4)]
        refinement: usize,
        /// Compare r_{N/2} instead of the one-based N/2-th entry.
        #[arg(long)]
        zero_based: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Grid convergence of the shrinking-circle experiment.
    Converge {
        #[arg(long, default_value = "ideal")]
        mode: DistanceMode,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [16usize, 32, 64, 128, 256])]
        grids: Vec<usize>,
        #[arg(long, default_value_t = 0.3)]
        r0: f64,
        /// Threshold steps per extinction time.
        #[arg(long, default_value_t = 512)]
        divisions: usize,
        /// Leapfrog steps per threshold step.
        #[arg(long, default_value_t = 64)]
        substeps: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the configured evolution and write frames and logs.
    Evolve { config: PathBuf },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads(std::env::var("HBMO_THREADS").ok().as_deref()) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let HbmoError::Config(list) = &e {
                for item in list {
                    eprintln!("  {item}");
                }
            }
            e.exit_code()
        }
    }
}

fn configure_threads(var: Option<&str>) -> Result<()> {
    let Some(v) = var.filter(|v| !v.trim().is_empty()) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HbmoError::config(format!("HBMO_THREADS: expected a positive integer, got {v:?}")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::CircleTable {
            r0,
            v0,
            base_n,
            levels,
            refinement,
            zero_based,
            output,
        } => {
            let entry = if *zero_based {
                HalfTimeEntry::ZeroBased
            } else {
                HalfTimeEntry::OneBased
            };
            let (csv, ok) = cmd_circle_table(*r0, *v0, *base_n, *levels, *refinement, entry)?;
            emit(output.as_deref(), &csv)?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Converge {
            mode,
            grids,
            r0,
            divisions,
            substeps,
            output,
        } => {
            let mut base = ExperimentSpec::new(grids.first().copied().unwrap_or(16), *mode);
            base.r0 = *r0;
            base.divisions = *divisions;
            base.substeps = *substeps;
            let csv = cmd_converge(&base, grids)?;
            emit(output.as_deref(), &csv)?;
            Ok(0)
        }
        Command::Evolve { config } => {
            let summary = cmd_evolve(config)?;
            log::info!(
                "{} steps, {} frames{}",
                summary.steps,
                summary.frames_written,
                summary
                    .extinct_at
                    .map(|t| format!(", extinct at t = {t:.6}"))
                    .unwrap_or_default()
            );
            Ok(0)
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => io::write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// The circle table as CSV, and whether every order from the third level
/// on is at least 0.9.
pub fn cmd_circle_table(
    r0: f64,
    v0: f64,
    base_n: usize,
    levels: usize,
    refinement: usize,
    entry: HalfTimeEntry,
) -> Result<(String, bool)> {
    let mut errs = Vec::new();
    if !(r0 > 0.0 && r0.is_finite()) {
        errs.push(format!("--r0: must be positive, got {r0}"));
    }
    if !v0.is_finite() {
        errs.push(format!("--v0: must be finite, got {v0}"));
    }
    if base_n < 2 || !base_n.is_multiple_of(2) {
        errs.push(format!("--base-n: must be even and at least 2, got {base_n}"));
    }
    if levels == 0 {
        errs.push("--levels: must be positive".into());
    }
    if refinement < 2 {
        errs.push(format!("--refinement: must be at least 2, got {refinement}"));
    }
    if !errs.is_empty() {
        return Err(HbmoError::Config(errs));
    }
    let rows = circle::convergence_table(r0, v0, base_n, levels, refinement, entry);
    let ok = rows.iter().skip(2).all(|r| r.order.is_some_and(|o| o >= 0.9));
    Ok((circle::table_csv(&rows), ok))
}

pub fn cmd_converge(base: &ExperimentSpec, grids: &[usize]) -> Result<String> {
    if grids.is_empty() {
        return Err(HbmoError::config("--grids: need at least one resolution"));
    }
    let rows = experiments::convergence_study(base, grids)?;
    Ok(experiments::convergence_csv(&rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveSummary {
    pub steps: usize,
    pub frames_written: usize,
    pub extinct_at: Option<f64>,
    /// Largest absolute volume residual over the run, for constrained runs.
    pub max_volume_residual: Option<f64>,
}

fn frame_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("frame_{step:05}.csv"))
}

fn labels_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("phases_{step:05}.csv"))
}

/// Loads the config, validates it completely, then runs it.
pub fn cmd_evolve(config_path: &Path) -> Result<EvolveSummary> {
    let cfg = RunConfig::load(config_path)?;
    run_config(&cfg)
}

pub fn run_config(cfg: &RunConfig) -> Result<EvolveSummary> {
    if cfg.shape.is_multiphase() || cfg.volume.is_some() {
        run_multiphase(cfg)
    } else {
        run_two_phase(cfg)
    }
}

fn grid_of(cfg: &RunConfig) -> Result<Grid2D> {
    make_grid(cfg.grid_n, cfg.domain)
}

fn load_mask(path: &Path, grid: Grid2D) -> Result<ScalarField> {
    let f = io::read_field(path)?;
    if f.grid.nx != grid.nx || f.grid.ny != grid.ny {
        return Err(HbmoError::config(format!(
            "initial.file: {} is {}x{}, grid.n is {}",
            path.display(),
            f.grid.nx,
            f.grid.ny,
            grid.nx
        )));
    }
    ScalarField::from_values(grid, f.values)
}

fn two_phase_shape(cfg: &RunConfig, grid: Grid2D) -> Result<InitialShape> {
    if let Some(s) = cfg.shape.analytic() {
        return Ok(s);
    }
    match &cfg.shape {
        ShapeSpec::PolylineFile(p) => {
            let (iface, _) = io::read_interface(p)?;
            if iface.is_empty() {
                return Err(HbmoError::config(format!("initial.file: {} has no segments", p.display())));
            }
            Ok(InitialShape::Polyline(iface))
        }
        ShapeSpec::MaskFile(p) => Ok(InitialShape::Mask(load_mask(p, grid)?)),
        _ => unreachable!("multiphase shapes are handled separately"),
    }
}

fn run_two_phase(cfg: &RunConfig) -> Result<EvolveSummary> {
    let grid = grid_of(cfg)?;
    let flow_cfg = FlowConfig {
        grid_n: cfg.grid_n,
        domain: cfg.domain,
        shape: two_phase_shape(cfg, grid)?,
        velocity: cfg.initial_velocity()?,
        threshold_dt: cfg.threshold_dt,
        steps: cfg.steps,
        settings: cfg.settings,
        smoothing_time: cfg.smoothing_time,
        radius_weighting: cfg.radius_weighting,
    };
    let traj = flow::run(&flow_cfg)?;

    let out = &cfg.output;
    if let Some(dir) = &out.frames_dir {
        for (n, f) in traj.frames.iter().enumerate() {
            io::write_interface(&frame_path(dir, n + 1), &f.interface, f.time)?;
        }
    }
    if let Some(p) = &out.summary_csv {
        let mut s = format!("{CSV_HEADER}\nstep,time,segments,length,area\n");
        for (n, f) in traj.frames.iter().enumerate() {
            writeln!(
                s,
                "{},{:.9},{},{:.9},{:.9}",
                n + 1,
                f.time,
                f.interface.len(),
                f.interface.length(),
                f.interface.enclosed_area()
            )
            .unwrap();
        }
        io::write_atomic(p, s.as_bytes())?;
    }
    if let (Some(p), Some(radii)) = (&out.radii_csv, &traj.radii) {
        io::write_atomic(p, io::series_csv("radius", radii).as_bytes())?;
    }
    Ok(EvolveSummary {
        steps: traj.frames.len(),
        frames_written: if out.frames_dir.is_some() { traj.frames.len() } else { 0 },
        extinct_at: traj.extinct_at,
        max_volume_residual: None,
    })
}

fn initial_phases(cfg: &RunConfig, grid: Grid2D) -> Result<(PhaseSet, Option<[f64; 2]>)> {
    Ok(match &cfg.shape {
        ShapeSpec::Bubbles(discs) => (multiphase::bubbles(grid, discs)?, None),
        ShapeSpec::Voronoi(seeds) => (multiphase::voronoi(grid, seeds)?, None),
        ShapeSpec::PhaseFile { path, phases } => {
            let labels = io::read_labels(path, &grid)?;
            (PhaseSet::from_labels(&SimplexBasis::new(*phases)?, grid, &labels)?, None)
        }
        _ => {
            // Two-phase shape under a volume constraint: phase 0 is the inside.
            let shape = two_phase_shape(cfg, grid)?;
            let mut level = shape.level_function(grid);
            if cfg.smoothing_time > 0.0 {
                level = flow::smooth_indicator(&level, cfg.smoothing_time);
            }
            let outside = level.map(|v| -v);
            let basis = SimplexBasis::new(2)?;
            (PhaseSet::from_scores(&basis, &[level, outside])?, shape.center())
        }
    })
}

fn phase_frame(phases: &PhaseSet) -> Interface {
    Interface::new(
        phases
            .boundaries
            .iter()
            .flat_map(|b| b.segments.iter().copied())
            .collect(),
    )
}

fn run_multiphase(cfg: &RunConfig) -> Result<EvolveSummary> {
    let grid = grid_of(cfg)?;
    let (phases, center) = initial_phases(cfg, grid)?;
    let n = phases.phases();
    let area = grid.area();
    let targets = match &cfg.volume {
        None => None,
        Some(v) => {
            let tol = v.tol.unwrap_or(DEFAULT_RELATIVE_TOL * area);
            let mut t = match &v.targets {
                TargetSpec::FromInitial => {
                    let mut t = VolumeTargets::from_phases(&phases);
                    t.tol = tol;
                    t
                }
                TargetSpec::Areas(a) => {
                    if a.len() != n {
                        return Err(HbmoError::config(format!(
                            "volume.targets: {} areas for {n} phases",
                            a.len()
                        )));
                    }
                    VolumeTargets::new(a.clone(), area, tol)?
                }
            };
            t.max_sweeps = v.max_sweeps;
            Some(t)
        }
    };
    let eps = cfg.eps.unwrap_or(DEFAULT_EPS_CELLS * grid.h());
    let mut state = MultiphaseState::at_rest(phases, eps, cfg.threshold_dt)?;

    let out = &cfg.output;
    let mut volumes_log = Vec::new();
    let mut residual_log = Vec::new();
    let mut radii = Vec::new();
    let mut max_residual: Option<f64> = None;
    let mut frames_written = 0;
    let record = |state: &MultiphaseState, frames_written: &mut usize| -> Result<()> {
        if let Some(dir) = &out.frames_dir {
            io::write_interface(&frame_path(dir, state.step_index), &phase_frame(&state.phases), state.time())?;
            io::write_labels(&labels_path(dir, state.step_index), &grid, &state.phases.labels)?;
            *frames_written += 1;
        }
        Ok(())
    };
    let radius_of = |state: &MultiphaseState| {
        center.map(|c| average_radius(&state.phases.boundaries[0], c, cfg.radius_weighting).radius)
    };
    record(&state, &mut frames_written)?;
    volumes_log.push((state.time(), state.phases.volumes()));
    if let Some(r) = radius_of(&state) {
        radii.push((state.time(), r));
    }

    for _ in 0..cfg.steps {
        state = match &targets {
            None => multiphase::multiphase_step(&state, &cfg.settings)?,
            Some(t) => {
                let (next, report) = volume::constrained_step(&state, t, &cfg.settings)?;
                let worst = report.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
                max_residual = Some(max_residual.map_or(worst, |m| m.max(worst)));
                residual_log.push((next.time(), t.residuals(&next.phases.volumes())));
                next
            }
        };
        log::debug!("step {} t = {:.6}", state.step_index, state.time());
        record(&state, &mut frames_written)?;
        volumes_log.push((state.time(), state.phases.volumes()));
        if let Some(r) = radius_of(&state) {
            radii.push((state.time(), r));
        }
    }

    if let Some(p) = &out.summary_csv {
        let mut s = format!("{CSV_HEADER}\nstep,time");
        for i in 0..n {
            write!(s, ",volume_{i}").unwrap();
        }
        s.push('\n');
        for (step, (t, v)) in volumes_log.iter().enumerate() {
            write!(s, "{step},{t:.9}").unwrap();
            for x in v {
                write!(s, ",{x:.9}").unwrap();
            }
            s.push('\n');
        }
        io::write_atomic(p, s.as_bytes())?;
    }
    if let Some(p) = &out.volumes_csv {
        io::write_atomic(p, volume::residual_csv(&residual_log).as_bytes())?;
    }
    if let Some(p) = &out.radii_csv {
        if radii.is_empty() {
            log::warn!("output.radii_csv ignored: the initial shape has no centre");
        } else {
            io::write_atomic(p, io::series_csv("radius", &radii).as_bytes())?;
        }
    }
    let vanished = state.phases.vanished();
    if !vanished.is_empty() {
        log::warn!("phases {vanished:?} vanished");
    }
    Ok(EvolveSummary {
        steps: state.step_index,
        frames_written,
        extinct_at: None,
        max_volume_residual: max_residual,
    })
}
