//! Grid convergence study of a collapsing circle.
//!
//! A circle of radius `r0` centred in the unit square starts at rest
//! (`d_1 = d_0`), and every threshold step solves the wave equation from
//! `2 d_n - d_{n-1}`, extracts the zero level set and records its mean
//! radius. The `Ideal` pipeline then replaces the field by the exact
//! distance to a circle of that radius; `Reconstructed` uses the exact
//! distance to the extracted segments instead.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{exact_radius, extinction_time, CircleParams};
use crate::distance::{
    average_radius, circle_distance, extract_interface, signed_distance_field, Point, RadiusWeighting,
};
use crate::error::{HbmoError, Result};
use crate::grid::make_grid;
use crate::wave::{solve_at_rest, WaveParams, DEFAULT_CFL_SAFETY};

/// Wave speed squared used by the convergence pipelines.
pub const EXPERIMENT_C2: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    Ideal,
    Reconstructed,
}

impl std::str::FromStr for DistanceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ideal" | "ideal_distance" => Ok(DistanceMode::Ideal),
            "reconstructed" | "reconstructed_distance" => Ok(DistanceMode::Reconstructed),
            other => Err(format!("unknown mode {other:?} (expected ideal or reconstructed)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub grid_n: usize,
    pub r0: f64,
    pub center: Point,
    /// Threshold step is `t_e / divisions`.
    pub divisions: usize,
    pub substeps: usize,
    pub mode: DistanceMode,
    pub c2: f64,
    pub weighting: RadiusWeighting,
}

impl ExperimentSpec {
    pub fn new(grid_n: usize, mode: DistanceMode) -> Self {
        ExperimentSpec {
            grid_n,
            r0: 0.3,
            center: [0.5, 0.5],
            divisions: 512,
            substeps: 64,
            mode,
            c2: EXPERIMENT_C2,
            weighting: RadiusWeighting::Endpoints,
        }
    }

    pub fn circle(&self) -> CircleParams {
        CircleParams::new(self.r0, 0.0)
    }

    pub fn threshold_dt(&self) -> f64 {
        extinction_time(&self.circle()) / self.divisions as f64
    }

    fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.grid_n < 3 {
            errs.push(format!("grid_n: need at least 3 nodes, got {}", self.grid_n));
        }
        if !(self.r0 > 0.0) {
            errs.push(format!("r0: must be positive, got {}", self.r0));
        }
        if self.divisions < 2 {
            errs.push(format!("divisions: need at least 2, got {}", self.divisions));
        }
        if self.substeps == 0 {
            errs.push("substeps: must be positive".into());
        }
        if !(self.c2 > 0.0) {
            errs.push(format!("c2: must be positive, got {}", self.c2));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HbmoError::Config(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub grid_n: usize,
    /// `(t, r̄)` with `r̄_1 = r0` at `t = 0`; zero after extinction.
    pub radii: Vec<(f64, f64)>,
    pub extinct_at: Option<f64>,
    pub l2_error: f64,
}

/// Number of radius samples entering the error: the largest `N_e` with
/// `N_e dt <= t_e`.
pub fn sample_count(t_e: f64, dt: f64) -> usize {
    (t_e / dt * (1.0 + 1e-12)).floor() as usize
}

/// `sqrt(dt Σ_{n=1}^{N_e} (r((n-1) dt) - r̄_n)²)`; missing entries count as
/// zero radius.
pub fn l2_radius_error(series: &[(f64, f64)], params: &CircleParams, dt: f64) -> f64 {
    let n_e = sample_count(extinction_time(params), dt);
    let sum: f64 = (0..n_e)
        .map(|k| {
            let exact = exact_radius(k as f64 * dt, params).radius;
            let approx = series.get(k).map_or(0.0, |s| s.1);
            (exact - approx).powi(2)
        })
        .sum();
    (dt * sum).sqrt()
}

pub fn run_ideal(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run_mode(&ExperimentSpec {
        mode: DistanceMode::Ideal,
        ..spec.clone()
    })
}

pub fn run_reconstructed(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    run_mode(&ExperimentSpec {
        mode: DistanceMode::Reconstructed,
        ..spec.clone()
    })
}

/// Runs the pipeline selected by `spec.mode`.
pub fn run_mode(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let grid = make_grid(spec.grid_n, 1.0)?;
    let circle = spec.circle();
    let dt = spec.threshold_dt();
    let n_e = sample_count(extinction_time(&circle), dt);
    let params = WaveParams::with_safety(&grid, spec.c2, dt, spec.substeps, DEFAULT_CFL_SAFETY)?;

    let d0 = circle_distance(spec.center, spec.r0, grid);
    let mut d_prev = d0.clone();
    let mut d_curr = d0;
    let mut radii = Vec::with_capacity(n_e);
    radii.push((0.0, spec.r0));
    let mut extinct_at = None;
    for n in 1..n_e {
        let t = n as f64 * dt;
        let u0 = d_curr.lincomb(2.0, &d_prev, -1.0)?;
        let u = solve_at_rest(&u0, &params)?;
        let iface = extract_interface(&u);
        if iface.is_empty() {
            extinct_at = Some(t);
            radii.extend((n..n_e).map(|k| (k as f64 * dt, 0.0)));
            break;
        }
        let r_bar = average_radius(&iface, spec.center, spec.weighting).radius;
        radii.push((t, r_bar));
        let d_next = match spec.mode {
            DistanceMode::Ideal => circle_distance(spec.center, r_bar, grid),
            DistanceMode::Reconstructed => signed_distance_field(&iface, &u)?,
        };
        d_prev = std::mem::replace(&mut d_curr, d_next);
    }
    let l2_error = l2_radius_error(&radii, &circle, dt);
    Ok(ExperimentResult {
        grid_n: spec.grid_n,
        radii,
        extinct_at,
        l2_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceEntry {
    pub grid_n: usize,
    pub l2_error: f64,
    /// `log2(e_prev / e)` against the previous resolution; grids are
    /// expected to double.
    pub order: Option<f64>,
}

/// Runs every resolution (in parallel) and attaches successive orders.
/// A failing resolution is reported together with its `N`.
pub fn convergence_study(base: &ExperimentSpec, grids: &[usize]) -> Result<Vec<ConvergenceEntry>> {
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HbmoError::config("grids: resolutions must be strictly ascending"));
    }
    let results: Vec<Result<f64>> = grids
        .par_iter()
        .map(|&n| {
            run_mode(&ExperimentSpec {
                grid_n: n,
                ..base.clone()
            })
            .map(|r| r.l2_error)
            .map_err(|e| HbmoError::InvalidParams(format!("N={n}: {e}")))
        })
        .collect();
    let mut rows: Vec<ConvergenceEntry> = Vec::with_capacity(grids.len());
    for (&n, res) in grids.iter().zip(results) {
        let err = res?;
        let order = rows.last().map(|prev| {
            (prev.l2_error / err).ln() / (n as f64 / prev.grid_n as f64).ln()
        });
        rows.push(ConvergenceEntry {
            grid_n: n,
            l2_error: err,
            order,
        });
    }
    Ok(rows)
}

/// CSV with columns `N,l2_error,order`.
pub fn convergence_csv(rows: &[ConvergenceEntry]) -> String {
    let mut s = String::from("# hbmo-csv v1\nN,l2_error,order\n");
    for row in rows {
        match row.order {
            Some(o) => writeln!(s, "{},{:.6},{:.6}", row.grid_n, row.l2_error, o),
            None => writeln!(s, "{},{:.6},", row.grid_n, row.l2_error),
        }
        .unwrap();
    }
    s
}
