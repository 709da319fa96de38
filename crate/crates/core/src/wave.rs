//! Explicit leapfrog integration of `u_tt = c² Δu` with zero-Neumann walls.

use rayon::prelude::*;

use crate::error::{HbmoError, Result};
use crate::grid::{gradient_pairing, laplacian_into, Grid2D, ScalarField, VectorField};

pub const DEFAULT_CFL_SAFETY: f64 = 0.9;
pub const DEFAULT_SUBSTEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    /// Wave speed squared.
    pub c2: f64,
    pub solver_dt: f64,
    pub duration: f64,
    pub cfl_safety: f64,
}

impl WaveParams {
    /// Integration over `duration` with `duration / substeps` as inner step,
    /// or the next finer equal split when that violates CFL.
    pub fn for_duration(grid: &Grid2D, c2: f64, duration: f64, substeps: usize) -> Result<Self> {
        Self::with_safety(grid, c2, duration, substeps, DEFAULT_CFL_SAFETY)
    }

    pub fn with_safety(
        grid: &Grid2D,
        c2: f64,
        duration: f64,
        substeps: usize,
        cfl_safety: f64,
    ) -> Result<Self> {
        if !(c2 > 0.0) || !(duration >= 0.0) || substeps == 0 || !(cfl_safety > 0.0) {
            return Err(HbmoError::InvalidParams(format!(
                "c2={c2}, duration={duration}, substeps={substeps}, cfl_safety={cfl_safety}"
            )));
        }
        let max_dt = max_stable_dt(grid, c2, cfl_safety);
        let mut steps = substeps;
        if duration / steps as f64 > max_dt {
            steps = (duration / max_dt).ceil() as usize;
            while duration / steps as f64 > max_dt {
                steps += 1;
            }
        }
        let params = WaveParams {
            c2,
            solver_dt: if duration > 0.0 {
                duration / steps as f64
            } else {
                max_dt.min(1.0)
            },
            duration,
            cfl_safety,
        };
        params.validate(grid)?;
        Ok(params)
    }

    pub fn validate(&self, grid: &Grid2D) -> Result<()> {
        let max_dt = max_stable_dt(grid, self.c2, self.cfl_safety);
        if self.solver_dt > max_dt * (1.0 + 1e-12) {
            return Err(HbmoError::Cfl {
                dt: self.solver_dt,
                max_dt,
            });
        }
        if !(self.solver_dt > 0.0) {
            return Err(HbmoError::InvalidParams("solver dt must be positive".into()));
        }
        let ratio = self.duration / self.solver_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(HbmoError::InvalidParams(format!(
                "duration {} is not an integer multiple of solver dt {}",
                self.duration, self.solver_dt
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.solver_dt).round() as usize
    }
}

/// Largest inner step with `sqrt(c2)·dt·sqrt(1/hx² + 1/hy²) <= safety`.
pub fn max_stable_dt(grid: &Grid2D, c2: f64, safety: f64) -> f64 {
    let s = (1.0 / (grid.hx * grid.hx) + 1.0 / (grid.hy * grid.hy)).sqrt();
    safety / (c2.sqrt() * s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u_prev: ScalarField,
    pub u_curr: ScalarField,
    pub t: f64,
}

/// Taylor start `u1 = u0 - dt·v0 + ½c²dt²Δu0`; the wave's initial rate is
/// `u_t(0) = -v0`.
pub fn first_leap(u0: &ScalarField, v0: &ScalarField, params: &WaveParams) -> Result<WaveState> {
    u0.check_grid(v0)?;
    params.validate(&u0.grid)?;
    let grid = u0.grid;
    let dt = params.solver_dt;
    let mut lap = vec![0.0; grid.len()];
    laplacian_into(&grid, &u0.values, &mut lap);
    let half = 0.5 * params.c2 * dt * dt;
    let values = u0
        .values
        .iter()
        .zip(&v0.values)
        .zip(&lap)
        .map(|((&u, &v), &l)| u - dt * v + half * l)
        .collect();
    Ok(WaveState {
        u_prev: u0.clone(),
        u_curr: ScalarField { grid, values },
        t: dt,
    })
}

/// `u_next = 2u_curr - u_prev + c²dt²Δu_curr`.
pub fn leapfrog_step(state: &WaveState, params: &WaveParams) -> WaveState {
    let grid = state.u_curr.grid;
    let mut lap = vec![0.0; grid.len()];
    let mut next = state.u_prev.values.clone();
    advance(&grid, params.c2 * params.solver_dt * params.solver_dt, &state.u_curr.values, &mut next, &mut lap);
    WaveState {
        u_prev: state.u_curr.clone(),
        u_curr: ScalarField { grid, values: next },
        t: state.t + params.solver_dt,
    }
}

/// Overwrites `prev` with the next time level.
#[inline]
fn advance(grid: &Grid2D, k2: f64, curr: &[f64], prev: &mut [f64], lap: &mut [f64]) {
    laplacian_into(grid, curr, lap);
    let update = |(p, (&c, &l)): (&mut f64, (&f64, &f64))| *p = 2.0 * c - *p + k2 * l;
    if grid.len() >= 1 << 14 {
        prev.par_iter_mut().zip(curr.par_iter().zip(lap.par_iter())).for_each(update);
    } else {
        prev.iter_mut().zip(curr.iter().zip(lap.iter())).for_each(update);
    }
}

/// Runs `k` leapfrog steps in place.
pub fn advance_steps(state: &mut WaveState, params: &WaveParams, k: usize) {
    let grid = state.u_curr.grid;
    let k2 = params.c2 * params.solver_dt * params.solver_dt;
    let mut lap = vec![0.0; grid.len()];
    for _ in 0..k {
        advance(&grid, k2, &state.u_curr.values, &mut state.u_prev.values, &mut lap);
        std::mem::swap(&mut state.u_prev, &mut state.u_curr);
        state.t += params.solver_dt;
    }
}

/// `u(duration)` for initial data `u(0) = u0`, `u_t(0) = -v0`.
pub fn solve(u0: &ScalarField, v0: &ScalarField, params: &WaveParams) -> Result<ScalarField> {
    u0.check_grid(v0)?;
    params.validate(&u0.grid)?;
    let steps = params.steps();
    if steps == 0 {
        return Ok(u0.clone());
    }
    let mut state = first_leap(u0, v0, params)?;
    advance_steps(&mut state, params, steps - 1);
    Ok(state.u_curr)
}

/// [`solve`] from rest.
pub fn solve_at_rest(u0: &ScalarField, params: &WaveParams) -> Result<ScalarField> {
    solve(u0, &ScalarField::zeros(u0.grid), params)
}

/// Channelwise solve from rest. Channels are independent under the
/// Laplacian, so each is integrated exactly as a scalar field would be.
pub fn solve_vector_at_rest(u0: &VectorField, params: &WaveParams) -> Result<VectorField> {
    let channels = u0
        .channels
        .par_iter()
        .map(|c| solve_at_rest(c, params))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(channels)
}

/// Discrete energy conserved by leapfrog:
/// `‖(u_curr - u_prev)/dt‖² + c²⟨∇u_curr, ∇u_prev⟩`, both in the trapezoid
/// inner product (the gradient pairing is the one whose gradient is the
/// stencil Laplacian).
pub fn discrete_energy(state: &WaveState, params: &WaveParams) -> f64 {
    let grid = state.u_curr.grid;
    let dt = params.solver_dt;
    let kinetic: f64 = state
        .u_curr
        .values
        .iter()
        .zip(&state.u_prev.values)
        .enumerate()
        .map(|(k, (c, p))| grid.weight(k) * ((c - p) / dt).powi(2))
        .sum();
    kinetic + params.c2 * gradient_pairing(&state.u_curr, &state.u_prev)
}

/// Coefficients of the local interface expansion in the frame where the
/// interface point is the origin and the outer normal is `+x2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalExpansion {
    pub kappa: f64,
    /// Derivative of the curvature along the interface.
    pub kappa_s: f64,
    pub v0: f64,
    /// Derivative of the initial velocity along the interface.
    pub v0_s: f64,
}

/// Closed-form small-time solution of the wave equation started from an
/// outside-positive signed distance with `u_t(0) = -v0`, valid up to fourth
/// order in `(t, x)`.
pub fn poisson_reference(e: &LocalExpansion, c2: f64, t: f64, x: [f64; 2]) -> f64 {
    let [x1, x2] = x;
    let ct2 = c2 * t * t;
    x2 + 0.5 * e.kappa * (ct2 + x1 * x1)
        + e.kappa_s * x1 / 6.0 * (3.0 * ct2 + x1 * x1)
        - 0.5 * e.kappa * e.kappa * x2 * (ct2 + x1 * x1)
        - e.v0 * t
        - e.v0_s * t * x1
}
