//! Volume-constrained multiphase steps.
//!
//! The production path solves the unconstrained wave step and then adds a
//! per-phase score offset `μ_i` before thresholding, each found by bisection
//! so that every phase keeps its target area. The penalized
//! minimizing-movements functional is available as [`functional_value`] and
//! [`functional_descent`] for cross-checks.

use std::fmt::Write as _;

use crate::error::{HbmoError, Result};
use crate::flow::SolverSettings;
use crate::grid::{dirichlet_energy, laplacian_neumann, ScalarField, VectorField};
use crate::multiphase::{evolve_field, threshold_labels, threshold_shifted, MultiphaseState, PhaseSet, SimplexBasis};

pub const DEFAULT_MAX_SWEEPS: usize = 50;
/// Default tolerance relative to the domain area.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-4;
const BISECTION_ITERS: usize = 80;
const BRACKET_WIDENINGS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeTargets {
    pub areas: Vec<f64>,
    /// Penalty weight `ε` of the functional; `f64::INFINITY` disables it.
    pub penalty_eps: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl VolumeTargets {
    pub fn new(areas: Vec<f64>, domain_area: f64, tol: f64) -> Result<Self> {
        let mut errs = Vec::new();
        for (i, a) in areas.iter().enumerate() {
            if !(*a > 0.0) {
                errs.push(format!("volume.targets[{i}]: must be positive, got {a}"));
            }
        }
        if !(tol > 0.0) {
            errs.push(format!("volume.tol: must be positive, got {tol}"));
        }
        let total: f64 = areas.iter().sum();
        if (total - domain_area).abs() > tol.max(0.0) * areas.len() as f64 {
            errs.push(format!(
                "volume.targets: sum {total} differs from the domain area {domain_area}"
            ));
        }
        if !errs.is_empty() {
            return Err(HbmoError::Config(errs));
        }
        Ok(VolumeTargets {
            areas,
            penalty_eps: f64::INFINITY,
            tol,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        })
    }

    /// Current volumes as targets, with tolerance `1e-4 |Ω|`.
    pub fn from_phases(phases: &PhaseSet) -> Self {
        let area = phases.grid.area();
        VolumeTargets {
            areas: phases.volumes(),
            penalty_eps: f64::INFINITY,
            tol: DEFAULT_RELATIVE_TOL * area,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    pub fn with_penalty(mut self, eps: f64) -> Self {
        self.penalty_eps = eps;
        self
    }

    pub fn residuals(&self, volumes: &[f64]) -> Vec<f64> {
        volumes.iter().zip(&self.areas).map(|(v, a)| v - a).collect()
    }
}

fn label_volumes(labels: &[usize], u: &VectorField, phases: usize) -> Vec<f64> {
    let mut v = vec![0.0; phases];
    for (k, &l) in labels.iter().enumerate() {
        v[l] += u.grid.weight(k);
    }
    v
}

/// Phase volumes of `argmax_i (u · p_i + offsets_i)`.
pub fn shifted_volumes(u: &VectorField, basis: &SimplexBasis, offsets: &[f64]) -> Vec<f64> {
    label_volumes(&threshold_labels(u, basis, offsets), u, basis.phases())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeReport {
    pub offsets: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sweeps: usize,
}

/// Offsets `μ` with `|vol_i(μ) - A_i| <= tol` for every phase, by
/// Gauss-Seidel sweeps of per-phase bisections. Scores of the interpolated
/// fields span `[-1, 1]` across one band, so the initial bracket is
/// `μ_i ± 1`, doubled up to four times if the target is not enclosed.
pub fn balance_offsets(u: &VectorField, basis: &SimplexBasis, targets: &VolumeTargets) -> Result<VolumeReport> {
    let n = basis.phases();
    if targets.areas.len() != n {
        return Err(HbmoError::InvalidParams(format!(
            "{} volume targets for {n} phases",
            targets.areas.len()
        )));
    }
    let mut mu = vec![0.0; n];
    let mut residuals = targets.residuals(&shifted_volumes(u, basis, &mu));
    let worst = |r: &[f64]| {
        r.iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc })
    };
    let mut sweeps = 0;
    while worst(&residuals).1 > targets.tol && sweeps < targets.max_sweeps {
        sweeps += 1;
        for i in 0..n {
            if residuals[i].abs() <= targets.tol {
                continue;
            }
            mu[i] = bisect_phase(u, basis, &mu, i, targets.areas[i], targets.tol);
            residuals = targets.residuals(&shifted_volumes(u, basis, &mu));
        }
    }
    let (phase, residual) = worst(&residuals);
    if residual > targets.tol {
        return Err(HbmoError::VolumeNonConvergence {
            phase,
            residual,
            tol: targets.tol,
        });
    }
    Ok(VolumeReport {
        offsets: mu,
        residuals,
        sweeps,
    })
}

/// Offset of phase `i` whose volume is closest to `target`; the volume of a
/// phase is non-decreasing in its own offset.
fn bisect_phase(u: &VectorField, basis: &SimplexBasis, mu: &[f64], i: usize, target: f64, tol: f64) -> f64 {
    let mut trial = mu.to_vec();
    let mut volume_at = |m: f64| {
        trial[i] = m;
        shifted_volumes(u, basis, &trial)[i] - target
    };
    let mut half = 1.0;
    let (mut lo, mut hi) = (mu[i] - half, mu[i] + half);
    let (mut f_lo, mut f_hi) = (volume_at(lo), volume_at(hi));
    for _ in 0..BRACKET_WIDENINGS {
        if f_lo <= 0.0 && f_hi >= 0.0 {
            break;
        }
        half *= 2.0;
        lo = mu[i] - half;
        hi = mu[i] + half;
        f_lo = volume_at(lo);
        f_hi = volume_at(hi);
    }
    if f_lo > 0.0 {
        return lo;
    }
    if f_hi < 0.0 {
        return hi;
    }
    for _ in 0..BISECTION_ITERS {
        if f_lo.abs() <= tol || f_hi.abs() <= tol || hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = volume_at(mid);
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if f_lo.abs() <= f_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Unconstrained wave step followed by the volume correction.
pub fn constrained_step(
    state: &MultiphaseState,
    targets: &VolumeTargets,
    settings: &SolverSettings,
) -> Result<(MultiphaseState, VolumeReport)> {
    let u = evolve_field(state, settings)?;
    let basis = &state.phases.basis;
    let report = balance_offsets(&u, basis, targets)?;
    let phases = threshold_shifted(&u, basis, &report.offsets)?;
    Ok((state.advance(phases)?, report))
}

/// CSV of per-step volume residuals, one column per phase.
pub fn residual_csv(rows: &[(f64, Vec<f64>)]) -> String {
    let phases = rows.first().map_or(0, |r| r.1.len());
    let mut s = String::from("# hbmo-csv v1\ntime");
    for i in 0..phases {
        write!(s, ",residual_{i}").unwrap();
    }
    s.push('\n');
    for (t, r) in rows {
        write!(s, "{t:.9}").unwrap();
        for v in r {
            write!(s, ",{v:.6e}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// `∫|u - 2u₁ + u₂|²/(2h²) + ½∫|∇u|² + (1/ε) Σ_i (A_i - |P_i(u)|)²`.
pub fn functional_value(
    u: &VectorField,
    u_nm1: &VectorField,
    u_nm2: &VectorField,
    h: f64,
    basis: &SimplexBasis,
    targets: &VolumeTargets,
) -> Result<f64> {
    let b = u_nm1.lincomb(2.0, u_nm2, -1.0)?;
    let diff = u.lincomb(1.0, &b, -1.0)?;
    let kinetic: f64 = diff
        .channels
        .iter()
        .map(|c| c.map(|v| v * v).integrate())
        .sum::<f64>()
        / (2.0 * h * h);
    let potential: f64 = u.channels.iter().map(dirichlet_energy).sum();
    Ok(kinetic + potential + penalty(u, basis, targets))
}

fn penalty(u: &VectorField, basis: &SimplexBasis, targets: &VolumeTargets) -> f64 {
    if !targets.penalty_eps.is_finite() {
        return 0.0;
    }
    let vols = shifted_volumes(u, basis, &vec![0.0; basis.phases()]);
    targets
        .areas
        .iter()
        .zip(&vols)
        .map(|(a, v)| (a - v).powi(2))
        .sum::<f64>()
        / targets.penalty_eps
}

/// Gradient descent on [`functional_value`] in the trapezoid inner
/// product. The quadratic part has gradient `(u - b)/h² - L u`; the
/// penalty, piecewise constant in `u`, gets a generalized gradient from
/// central differences under constant channel shifts of size `shift`.
/// Stops after `steps` iterations or once the functional stagnates; fails
/// if it rises five times in a row.
#[allow(clippy::too_many_arguments)]
pub fn functional_descent(
    u_init: &VectorField,
    u_nm1: &VectorField,
    u_nm2: &VectorField,
    h: f64,
    basis: &SimplexBasis,
    targets: &VolumeTargets,
    steps: usize,
    rate: f64,
    shift: f64,
) -> Result<VectorField> {
    if !(h > 0.0) || !(rate > 0.0) || !(shift > 0.0) {
        return Err(HbmoError::InvalidParams(format!(
            "functional descent needs positive h, rate and shift (got {h}, {rate}, {shift})"
        )));
    }
    let b = u_nm1.lincomb(2.0, u_nm2, -1.0)?;
    let area = u_init.grid.area();
    let mut u = u_init.clone();
    let mut value = functional_value(&u, u_nm1, u_nm2, h, basis, targets)?;
    let mut rises = 0;
    for _ in 0..steps {
        let mut grad: Vec<ScalarField> = u
            .channels
            .iter()
            .zip(&b.channels)
            .map(|(uc, bc)| {
                let lap = laplacian_neumann(uc);
                let mut g = uc.lincomb(1.0 / (h * h), bc, -1.0 / (h * h))?;
                for (gv, lv) in g.values.iter_mut().zip(&lap.values) {
                    *gv -= lv;
                }
                Ok(g)
            })
            .collect::<Result<_>>()?;
        if targets.penalty_eps.is_finite() {
            for (c, g) in grad.iter_mut().enumerate() {
                let mut w = vec![0.0; u.dim()];
                w[c] = shift;
                let plus = penalty(&u.shifted(&w), basis, targets);
                w[c] = -shift;
                let minus = penalty(&u.shifted(&w), basis, targets);
                let slope = (plus - minus) / (2.0 * shift) / area;
                for v in g.values.iter_mut() {
                    *v += slope;
                }
            }
        }
        let next = VectorField::new(
            u.channels
                .iter()
                .zip(&grad)
                .map(|(uc, g)| uc.lincomb(1.0, g, -rate))
                .collect::<Result<_>>()?,
        )?;
        let next_value = functional_value(&next, u_nm1, u_nm2, h, basis, targets)?;
        if next_value > value {
            rises += 1;
            if rises >= 5 {
                return Err(HbmoError::Divergence { iterations: rises });
            }
        } else {
            rises = 0;
        }
        let stalled = (value - next_value).abs() <= 1e-15 * value.abs().max(1e-300);
        u = next;
        value = next_value;
        if stalled {
            break;
        }
    }
    Ok(u)
}
