//! N-phase threshold dynamics with a vector-valued wave equation.
//!
//! Phase `i` is labelled by the vertex `p_i` of a regular simplex in
//! `R^{N-1}`. The state is a pair of interpolated fields `z`, each equal to
//! `p_i` deep inside phase `i` and ramping linearly across a band of width
//! `eps` around every interface. A step solves the wave equation
//! channelwise from `2 z_0 - z_{-1}` and assigns every node to the phase
//! with the largest score `u · p_i`.

use rayon::prelude::*;

use crate::distance::{extract_interface, signed_distance_field, Interface, Point};
use crate::error::{HbmoError, Result};
use crate::flow::{SolverSettings, TWO_HISTORY_C2};
use crate::grid::{Grid2D, ScalarField, VectorField};
use crate::wave::solve_vector_at_rest;

/// Default interpolation band, in grid spacings.
pub const DEFAULT_EPS_CELLS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexBasis {
    vectors: Vec<Vec<f64>>,
}

impl SimplexBasis {
    /// `p_1 = e_1` and `p_k = (-1/(N-1), sqrt(1 - 1/(N-1)²) q_{k-1})`, where
    /// `q` is the basis for `N - 1` phases one dimension down.
    pub fn new(phases: usize) -> Result<Self> {
        if phases < 2 {
            return Err(HbmoError::InvalidParams(format!("need at least 2 phases, got {phases}")));
        }
        Ok(SimplexBasis {
            vectors: simplex(phases),
        })
    }

    pub fn phases(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.len() - 1
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|a| self.vectors.iter().map(|b| dot(a, b)).collect())
            .collect()
    }

    /// Vector `w` with `w · p_i = offsets_i - mean(offsets)`.
    pub fn shift_for_offsets(&self, offsets: &[f64]) -> Vec<f64> {
        let n = self.phases() as f64;
        let scale = (n - 1.0) / n;
        let mut w = vec![0.0; self.dim()];
        for (p, &mu) in self.vectors.iter().zip(offsets) {
            for (wc, pc) in w.iter_mut().zip(p) {
                *wc += scale * mu * pc;
            }
        }
        w
    }
}

fn simplex(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![Vec::new()];
    }
    let d = n - 1;
    let a = -1.0 / d as f64;
    let s = (1.0 - a * a).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut first = vec![0.0; d];
    first[0] = 1.0;
    out.push(first);
    for q in simplex(n - 1) {
        let mut p = Vec::with_capacity(d);
        p.push(a);
        p.extend(q.iter().map(|v| s * v));
        out.push(p);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Distance magnitude assigned to a phase that is empty or fills the grid.
fn far_distance(grid: &Grid2D) -> f64 {
    10.0 * grid.lx().hypot(grid.ly())
}

/// A partition of the nodes into phases, with per-phase boundaries and
/// signed distances (positive inside the phase).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSet {
    pub basis: SimplexBasis,
    pub grid: Grid2D,
    /// Phase index of every node.
    pub labels: Vec<usize>,
    pub boundaries: Vec<Interface>,
    pub distances: Vec<ScalarField>,
}

impl PhaseSet {
    /// Partition by largest score (lowest index on ties). The boundary of
    /// phase `i` is the zero set of `s_i - max_{k≠i} s_k`.
    pub fn from_scores(basis: &SimplexBasis, scores: &[ScalarField]) -> Result<Self> {
        let n = basis.phases();
        if scores.len() != n {
            return Err(HbmoError::InvalidParams(format!(
                "{} score fields for {n} phases",
                scores.len()
            )));
        }
        let grid = scores[0].grid;
        if scores.iter().any(|s| s.grid != grid) {
            return Err(HbmoError::GridMismatch);
        }
        let labels: Vec<usize> = (0..grid.len())
            .into_par_iter()
            .map(|k| argmax((0..n).map(|i| scores[i].values[k])))
            .collect();
        let per_phase: Vec<(Interface, ScalarField)> = (0..n)
            .into_par_iter()
            .map(|i| phase_boundary(i, scores, &labels, grid))
            .collect::<Result<Vec<_>>>()?;
        let (boundaries, distances) = per_phase.into_iter().unzip();
        Ok(PhaseSet {
            basis: basis.clone(),
            grid,
            labels,
            boundaries,
            distances,
        })
    }

    /// Partition from node labels; scores are the `±1` phase indicators.
    pub fn from_labels(basis: &SimplexBasis, grid: Grid2D, labels: &[usize]) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(HbmoError::GridMismatch);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= basis.phases()) {
            return Err(HbmoError::InvalidParams(format!("phase label {bad} out of range")));
        }
        let scores: Vec<ScalarField> = (0..basis.phases())
            .map(|i| ScalarField {
                grid,
                values: labels.iter().map(|&l| if l == i { 1.0 } else { -1.0 }).collect(),
            })
            .collect();
        Self::from_scores(basis, &scores)
    }

    pub fn phases(&self) -> usize {
        self.basis.phases()
    }

    pub fn mask(&self, i: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == i).collect()
    }

    /// Measure of every phase with the trapezoid node weights, so the
    /// volumes add up to the domain area.
    pub fn volumes(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.phases()];
        for (k, &l) in self.labels.iter().enumerate() {
            v[l] += self.grid.weight(k);
        }
        v
    }

    pub fn node_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.phases()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Phases without any node.
    pub fn vanished(&self) -> Vec<usize> {
        self.node_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn phase_boundary(
    i: usize,
    scores: &[ScalarField],
    labels: &[usize],
    grid: Grid2D,
) -> Result<(Interface, ScalarField)> {
    let gap: Vec<f64> = (0..grid.len())
        .map(|k| {
            let own = scores[i].values[k];
            let rival = scores
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != i)
                .map(|(_, s)| s.values[k])
                .fold(f64::NEG_INFINITY, f64::max);
            own - rival
        })
        .collect();
    let scale = gap.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nudge = 1e-14 * scale.max(f64::MIN_POSITIVE);
    // Exact ties go to the phase that won the argmax.
    let gap = ScalarField {
        grid,
        values: gap
            .iter()
            .zip(labels)
            .map(|(&g, &l)| match (g == 0.0, l == i) {
                (true, true) => nudge,
                (true, false) => -nudge,
                _ => g,
            })
            .collect(),
    };
    let iface = extract_interface(&gap);
    let far = far_distance(&grid);
    let dist = if iface.is_empty() {
        let sign = if labels.contains(&i) { 1.0 } else { -1.0 };
        ScalarField::constant(grid, sign * far)
    } else {
        signed_distance_field(&iface, &gap)?
    };
    Ok((iface, dist))
}

/// `z = Σ_i p_i [χ{d_i > ε/2} + (ε/2 + d_i)/ε · χ{|d_i| <= ε/2}]`.
pub fn build_z_field(phases: &PhaseSet, eps: f64) -> Result<VectorField> {
    let grid = phases.grid;
    if !(eps > 2.0 * grid.h()) {
        return Err(HbmoError::config(format!(
            "multiphase.eps: {eps} does not exceed two cells ({})",
            2.0 * grid.h()
        )));
    }
    let half = 0.5 * eps;
    let weights: Vec<Vec<f64>> = phases
        .distances
        .iter()
        .map(|d| {
            d.values
                .iter()
                .map(|&v| {
                    if v > half {
                        1.0
                    } else if v >= -half {
                        (half + v) / eps
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let channels = (0..phases.basis.dim())
        .map(|c| {
            let values = (0..grid.len())
                .map(|k| {
                    phases
                        .basis
                        .vectors()
                        .iter()
                        .zip(&weights)
                        .map(|(p, w)| p[c] * w[k])
                        .sum()
                })
                .collect();
            ScalarField { grid, values }
        })
        .collect();
    VectorField::new(channels)
}

/// Scores `u · p_i`.
pub fn scores(u: &VectorField, basis: &SimplexBasis) -> Vec<ScalarField> {
    basis.vectors().iter().map(|p| u.dot(p)).collect()
}

/// Nodewise argmax of `u · p_i`, ties to the lowest index.
pub fn threshold(u: &VectorField, basis: &SimplexBasis) -> Result<PhaseSet> {
    PhaseSet::from_scores(basis, &scores(u, basis))
}

/// Argmax of `u · p_i + offsets_i`; equivalent to thresholding `u + w`
/// with `w` from [`SimplexBasis::shift_for_offsets`].
pub fn threshold_shifted(u: &VectorField, basis: &SimplexBasis, offsets: &[f64]) -> Result<PhaseSet> {
    let s: Vec<ScalarField> = scores(u, basis)
        .into_iter()
        .zip(offsets)
        .map(|(s, &mu)| s.map(|v| v + mu))
        .collect();
    PhaseSet::from_scores(basis, &s)
}

/// Labels only, without boundaries or distances.
pub fn threshold_labels(u: &VectorField, basis: &SimplexBasis, offsets: &[f64]) -> Vec<usize> {
    let vectors = basis.vectors();
    (0..u.grid.len())
        .into_par_iter()
        .map(|k| {
            let x = u.at(k);
            argmax(vectors.iter().zip(offsets).map(|(p, &mu)| dot(&x, p) + mu))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiphaseState {
    pub z_curr: VectorField,
    pub z_prev: VectorField,
    pub phases: PhaseSet,
    pub eps: f64,
    pub threshold_dt: f64,
    pub step_index: usize,
}

impl MultiphaseState {
    /// Start at rest: `z_{-Δt} = z_0`.
    pub fn at_rest(phases: PhaseSet, eps: f64, threshold_dt: f64) -> Result<Self> {
        if !(threshold_dt > 0.0) {
            return Err(HbmoError::InvalidParams(format!(
                "threshold step must be positive, got {threshold_dt}"
            )));
        }
        let z = build_z_field(&phases, eps)?;
        Ok(MultiphaseState {
            z_prev: z.clone(),
            z_curr: z,
            phases,
            eps,
            threshold_dt,
            step_index: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.threshold_dt
    }

    /// Replaces the partition, shifting the history.
    pub(crate) fn advance(&self, phases: PhaseSet) -> Result<Self> {
        let z_next = build_z_field(&phases, self.eps)?;
        Ok(MultiphaseState {
            z_prev: self.z_curr.clone(),
            z_curr: z_next,
            phases,
            eps: self.eps,
            threshold_dt: self.threshold_dt,
            step_index: self.step_index + 1,
        })
    }
}

/// Wave solve over one threshold step from `2 z_0 - z_{-Δt}` at rest.
pub fn evolve_field(state: &MultiphaseState, settings: &SolverSettings) -> Result<VectorField> {
    let grid = state.z_curr.grid;
    let u0 = state.z_curr.lincomb(2.0, &state.z_prev, -1.0)?;
    let params = settings.wave_params(&grid, TWO_HISTORY_C2, state.threshold_dt)?;
    solve_vector_at_rest(&u0, &params)
}

/// One unconstrained step: wave solve, threshold, rebuild distances and z.
pub fn multiphase_step(state: &MultiphaseState, settings: &SolverSettings) -> Result<MultiphaseState> {
    let u = evolve_field(state, settings)?;
    let phases = threshold(&u, &state.phases.basis)?;
    state.advance(phases)
}

/// Discs in a background phase. Phase 0 is the background, phase `k` the
/// `k`-th disc.
pub fn bubbles(grid: Grid2D, discs: &[(Point, f64)]) -> Result<PhaseSet> {
    let basis = SimplexBasis::new(discs.len() + 1)?;
    let mut scores: Vec<ScalarField> = discs
        .iter()
        .map(|&(c, r)| ScalarField::from_fn(grid, |x, y| r - (x - c[0]).hypot(y - c[1])))
        .collect();
    let background = ScalarField {
        grid,
        values: (0..grid.len())
            .map(|k| -scores.iter().map(|s| s.values[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
    };
    scores.insert(0, background);
    PhaseSet::from_scores(&basis, &scores)
}

/// Voronoi partition of the seeds.
pub fn voronoi(grid: Grid2D, seeds: &[Point]) -> Result<PhaseSet> {
    let basis = SimplexBasis::new(seeds.len())?;
    let scores: Vec<ScalarField> = seeds
        .iter()
        .map(|&c| ScalarField::from_fn(grid, |x, y| -(x - c[0]).hypot(y - c[1])))
        .collect();
    PhaseSet::from_scores(&basis, &scores)
}
