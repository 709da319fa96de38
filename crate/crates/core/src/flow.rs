//! The two-phase threshold loop for hyperbolic mean curvature flow.
//!
//! A step solves the wave equation for one threshold interval, takes the
//! zero level set of the result as the new interface, and rebuilds an exact
//! signed distance to it. The first step starts from `d_0` with the
//! prescribed normal velocity and `c² = 1`; every later step starts from
//! rest at `2 d_n - d_{n-1}` with `c² = 2`, which carries the interface
//! velocity forward without ever computing it.

use log::warn;

use crate::distance::{
    average_radius, extract_interface, signed_distance_field, velocity_extension, Interface, Point,
    RadiusWeighting,
};
use crate::error::{HbmoError, Result};
use crate::grid::{laplacian_into, make_grid, Grid2D, ScalarField};
use crate::wave::{solve, solve_at_rest, WaveParams, DEFAULT_CFL_SAFETY, DEFAULT_SUBSTEPS};

pub const FIRST_STEP_C2: f64 = 1.0;
pub const TWO_HISTORY_C2: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Inner leapfrog steps per threshold step (refined if CFL demands).
    pub substeps: usize,
    pub cfl_safety: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            substeps: DEFAULT_SUBSTEPS,
            cfl_safety: DEFAULT_CFL_SAFETY,
        }
    }
}

impl SolverSettings {
    pub fn wave_params(&self, grid: &Grid2D, c2: f64, duration: f64) -> Result<WaveParams> {
        WaveParams::with_safety(grid, c2, duration, self.substeps, self.cfl_safety)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbmoState {
    pub d_curr: ScalarField,
    pub d_prev: ScalarField,
    pub interface: Interface,
    pub threshold_dt: f64,
    pub step_index: usize,
}

impl HbmoState {
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.threshold_dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Advanced(HbmoState),
    /// The zero level set vanished at the end of the step ending at `time`.
    Extinct { time: f64 },
}

impl StepOutcome {
    pub fn state(self) -> Option<HbmoState> {
        match self {
            StepOutcome::Advanced(s) => Some(s),
            StepOutcome::Extinct { .. } => None,
        }
    }
}

fn check_walls(iface: &Interface, grid: &Grid2D, c2: f64, tau: f64) {
    let reach = 2.0 * c2.sqrt() * tau;
    let clearance = iface.wall_clearance(grid);
    if clearance < reach {
        warn!("interface within {clearance:.3e} of a wall (wave reach {reach:.3e}); wall reflections alter the motion");
    }
}

/// Band width for the first-step velocity extension.
pub fn default_velocity_band(tau: f64, grid: &Grid2D) -> f64 {
    2.0 * FIRST_STEP_C2.sqrt() * tau + 4.0 * grid.h()
}

/// Steps 1-3 of the scheme: distance to `gamma0` (signed by `sign_source`),
/// velocity extension, one wave solve with `u_t(0) = v` and `c² = 1`.
/// `v0` holds the outward normal velocity per chord of `gamma0`.
pub fn first_step(
    gamma0: &Interface,
    sign_source: &ScalarField,
    v0: &[f64],
    tau: f64,
    settings: &SolverSettings,
) -> Result<StepOutcome> {
    if gamma0.is_empty() {
        return Err(HbmoError::PhaseExtinct);
    }
    if !(tau > 0.0) {
        return Err(HbmoError::InvalidParams(format!("threshold step must be positive, got {tau}")));
    }
    let grid = sign_source.grid;
    check_walls(gamma0, &grid, FIRST_STEP_C2, tau);
    let d0 = signed_distance_field(gamma0, sign_source)?;
    let velocity = velocity_extension(gamma0, v0, grid, default_velocity_band(tau, &grid))?;
    // Inside-positive distances grow where the interface moves outward.
    let params = settings.wave_params(&grid, FIRST_STEP_C2, tau)?;
    let u = solve(&d0, &velocity.map(|v| -v), &params)?;
    let gamma1 = extract_interface(&u);
    if gamma1.is_empty() {
        return Ok(StepOutcome::Extinct { time: tau });
    }
    let d1 = signed_distance_field(&gamma1, &u)?;
    Ok(StepOutcome::Advanced(HbmoState {
        d_curr: d1,
        d_prev: d0,
        interface: gamma1,
        threshold_dt: tau,
        step_index: 1,
    }))
}

/// State whose two histories coincide: the interface at rest.
pub fn state_at_rest(gamma0: &Interface, sign_source: &ScalarField, tau: f64) -> Result<HbmoState> {
    let d0 = signed_distance_field(gamma0, sign_source)?;
    Ok(HbmoState {
        d_curr: d0.clone(),
        d_prev: d0,
        interface: gamma0.clone(),
        threshold_dt: tau,
        step_index: 0,
    })
}

/// Step 4: solve from rest at `2 d_n - d_{n-1}` with `c² = 2`, take the zero
/// level set, redistance exactly.
pub fn step(state: &HbmoState, settings: &SolverSettings) -> Result<StepOutcome> {
    let grid = state.d_curr.grid;
    check_walls(&state.interface, &grid, TWO_HISTORY_C2, state.threshold_dt);
    let u0 = state.d_curr.lincomb(2.0, &state.d_prev, -1.0)?;
    let params = settings.wave_params(&grid, TWO_HISTORY_C2, state.threshold_dt)?;
    let u = solve_at_rest(&u0, &params)?;
    let next = extract_interface(&u);
    let time = (state.step_index + 1) as f64 * state.threshold_dt;
    if next.is_empty() {
        return Ok(StepOutcome::Extinct { time });
    }
    let d_next = signed_distance_field(&next, &u)?;
    Ok(StepOutcome::Advanced(HbmoState {
        d_curr: d_next,
        d_prev: state.d_curr.clone(),
        interface: next,
        threshold_dt: state.threshold_dt,
        step_index: state.step_index + 1,
    }))
}

/// Heat flow of an indicator-like field by forward Euler for
/// `smoothing_time`, with `dt <= h²/4`.
pub fn smooth_indicator(field: &ScalarField, smoothing_time: f64) -> ScalarField {
    if !(smoothing_time > 0.0) {
        return field.clone();
    }
    let grid = field.grid;
    let h2 = grid.hx.min(grid.hy).powi(2);
    let steps = (smoothing_time / (0.25 * h2)).ceil().max(1.0) as usize;
    let dt = smoothing_time / steps as f64;
    let mut u = field.values.clone();
    let mut lap = vec![0.0; grid.len()];
    for _ in 0..steps {
        laplacian_into(&grid, &u, &mut lap);
        for (v, l) in u.iter_mut().zip(&lap) {
            *v += dt * l;
        }
    }
    ScalarField { grid, values: u }
}

/// One short heat-flow step on a `±1` phase indicator, then its zero set.
pub fn smooth_initial(phase_mask: &ScalarField, smoothing_time: f64) -> Interface {
    extract_interface(&smooth_indicator(phase_mask, smoothing_time))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialShape {
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, semi_axes: [f64; 2] },
    /// Two discs joined by a horizontal bar.
    Dumbbell {
        centers: [Point; 2],
        radius: f64,
        bar_half_width: f64,
    },
    Polyline(Interface),
    /// `±1` indicator of the phase.
    Mask(ScalarField),
}

impl InitialShape {
    /// A field whose zero set is the initial interface, positive inside.
    pub fn level_function(&self, grid: Grid2D) -> ScalarField {
        match self {
            InitialShape::Circle { center, radius } => {
                ScalarField::from_fn(grid, |x, y| radius - (x - center[0]).hypot(y - center[1]))
            }
            InitialShape::Ellipse { center, semi_axes } => ScalarField::from_fn(grid, |x, y| {
                let q = ((x - center[0]) / semi_axes[0]).hypot((y - center[1]) / semi_axes[1]);
                (1.0 - q) * semi_axes[0].min(semi_axes[1])
            }),
            InitialShape::Dumbbell {
                centers,
                radius,
                bar_half_width,
            } => {
                let [a, b] = *centers;
                let (x_lo, x_hi) = (a[0].min(b[0]), a[0].max(b[0]));
                let ym = 0.5 * (a[1] + b[1]);
                ScalarField::from_fn(grid, |x, y| {
                    let da = radius - (x - a[0]).hypot(y - a[1]);
                    let db = radius - (x - b[0]).hypot(y - b[1]);
                    let bar = (bar_half_width - (y - ym).abs())
                        .min(x - x_lo)
                        .min(x_hi - x);
                    da.max(db).max(bar)
                })
            }
            InitialShape::Polyline(iface) => iface.sign_field(grid),
            InitialShape::Mask(mask) => mask.clone(),
        }
    }

    pub fn center(&self) -> Option<Point> {
        match self {
            InitialShape::Circle { center, .. } | InitialShape::Ellipse { center, .. } => Some(*center),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialVelocity {
    Constant(f64),
    PerSegment(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub grid_n: usize,
    pub domain: f64,
    pub shape: InitialShape,
    pub velocity: InitialVelocity,
    pub threshold_dt: f64,
    pub steps: usize,
    pub settings: SolverSettings,
    /// Heat-flow pre-smoothing time for rough initial data; zero disables.
    pub smoothing_time: f64,
    pub radius_weighting: RadiusWeighting,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.grid_n < 3 {
            errs.push(format!("grid.n: need at least 3 nodes, got {}", self.grid_n));
        }
        if !(self.domain > 0.0) {
            errs.push(format!("domain: must be positive, got {}", self.domain));
        }
        if !(self.threshold_dt > 0.0) {
            errs.push(format!("hbmo.threshold_dt: must be positive, got {}", self.threshold_dt));
        }
        if self.steps == 0 {
            errs.push("hbmo.steps: need at least one step".into());
        }
        if self.settings.substeps == 0 {
            errs.push("solver.inner_substeps: must be positive".into());
        }
        if self.smoothing_time < 0.0 {
            errs.push("initial.smoothing_time: must be non-negative".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HbmoError::Config(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub interface: Interface,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    /// `(time, mean radius)` for runs started from a circle; zero after
    /// extinction.
    pub radii: Option<Vec<(f64, f64)>>,
    pub extinct_at: Option<f64>,
}

/// First step, then two-history steps until `steps` frames or extinction.
pub fn run(config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    let grid = make_grid(config.grid_n, config.domain)?;
    let level = config.shape.level_function(grid);
    let sign_source = if config.smoothing_time > 0.0 {
        smooth_indicator(&level, config.smoothing_time)
    } else {
        level
    };
    let gamma0 = match &config.shape {
        InitialShape::Polyline(iface) if config.smoothing_time == 0.0 => iface.clone(),
        _ => extract_interface(&sign_source),
    };
    if gamma0.is_empty() {
        return Err(HbmoError::config("initial.shape: the initial interface is empty"));
    }
    let v0 = match &config.velocity {
        InitialVelocity::Constant(v) => vec![*v; gamma0.len()],
        InitialVelocity::PerSegment(v) => {
            if v.len() != gamma0.len() {
                return Err(HbmoError::config(format!(
                    "initial.velocity: {} samples for {} segments",
                    v.len(),
                    gamma0.len()
                )));
            }
            v.clone()
        }
    };

    let center = config.shape.center();
    let mut traj = Trajectory {
        radii: center.map(|_| Vec::with_capacity(config.steps)),
        ..Default::default()
    };
    let tau = config.threshold_dt;
    let record = |traj: &mut Trajectory, state: &HbmoState| {
        if let (Some(radii), Some(c)) = (traj.radii.as_mut(), center) {
            radii.push((state.time(), average_radius(&state.interface, c, config.radius_weighting).radius));
        }
        traj.frames.push(Frame {
            time: state.time(),
            interface: state.interface.clone(),
        });
    };

    let mut state = match first_step(&gamma0, &sign_source, &v0, tau, &config.settings)? {
        StepOutcome::Advanced(s) => s,
        StepOutcome::Extinct { time } => {
            traj.extinct_at = Some(time);
            pad_radii(&mut traj, config.steps, tau, 1);
            return Ok(traj);
        }
    };
    record(&mut traj, &state);
    while state.step_index < config.steps {
        match step(&state, &config.settings)? {
            StepOutcome::Advanced(s) => {
                state = s;
                record(&mut traj, &state);
            }
            StepOutcome::Extinct { time } => {
                traj.extinct_at = Some(time);
                pad_radii(&mut traj, config.steps, tau, state.step_index + 1);
                break;
            }
        }
    }
    Ok(traj)
}

fn pad_radii(traj: &mut Trajectory, steps: usize, tau: f64, from: usize) {
    if let Some(radii) = traj.radii.as_mut() {
        for n in from..=steps {
            radii.push((n as f64 * tau, 0.0));
        }
    }
}
