//! Zero level set extraction on a triangulated lattice and exact
//! signed-distance reconstruction.
//!
//! Each grid cell `(i, j)` is split into two triangles along the diagonal
//! from node `(i, j)` to `(i+1, j+1)` when `i + j` is even and along the
//! other diagonal when it is odd. The checkerboard is invariant under the
//! transpose `x <-> y`. The interface is the zero set of the piecewise-linear
//! interpolant, one chord per sign-changing triangle. Crossing points on a
//! shared edge are computed from the lower-indexed node, so neighbouring
//! chords meet in bit-identical vertices.
//!
//! Signs follow the inside-positive convention: a signed distance is
//! positive inside the phase whose boundary is the interface.

use rayon::prelude::*;

use crate::error::{HbmoError, Result};
use crate::grid::{Grid2D, ScalarField};

pub type Point = [f64; 2];

/// Relative size of the perturbation applied to nodal zeros.
pub const ZERO_PERTURBATION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub p: Point,
    pub q: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.q[0] - self.p[0]).hypot(self.q[1] - self.p[1])
    }

    pub fn midpoint(&self) -> Point {
        [0.5 * (self.p[0] + self.q[0]), 0.5 * (self.p[1] + self.q[1])]
    }

    /// Euclidean distance from `x` to the closed segment.
    #[inline]
    pub fn distance(&self, x: Point) -> f64 {
        self.distance_sq(x).sqrt()
    }

    #[inline]
    pub fn distance_sq(&self, x: Point) -> f64 {
        let dx = self.q[0] - self.p[0];
        let dy = self.q[1] - self.p[1];
        let wx = x[0] - self.p[0];
        let wy = x[1] - self.p[1];
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            ((wx * dx + wy * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let ex = wx - t * dx;
        let ey = wy - t * dy;
        ex * ex + ey * ey
    }
}

/// Oriented chords of the zero level set. The positive side of the source
/// field lies to the left of each `p -> q`, so closed curves around a
/// positive region run counter-clockwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interface {
    pub segments: Vec<Segment>,
}

impl Interface {
    pub fn new(segments: Vec<Segment>) -> Self {
        Interface { segments }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Area enclosed on the left of the oriented chords (shoelace formula).
    /// Meaningful for closed curves that do not touch the walls.
    pub fn enclosed_area(&self) -> f64 {
        0.5 * self
            .segments
            .iter()
            .map(|s| s.p[0] * s.q[1] - s.q[0] * s.p[1])
            .sum::<f64>()
    }

    /// Distance from `x` to the nearest chord.
    pub fn distance(&self, x: Point) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_sq(x))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Even-odd inside test against the chords treated as a closed polygon.
    pub fn contains(&self, x: Point) -> bool {
        let mut inside = false;
        for s in &self.segments {
            let (a, b) = (s.p, s.q);
            if (a[1] > x[1]) != (b[1] > x[1]) {
                let xc = a[0] + (x[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if x[0] < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// `+1` inside, `-1` outside, by [`Interface::contains`]. Serves as the
    /// sign source for curves given without a field.
    pub fn sign_field(&self, grid: Grid2D) -> ScalarField {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| if self.contains(grid.position(k)) { 1.0 } else { -1.0 })
            .collect();
        ScalarField { grid, values }
    }

    /// Symmetric Hausdorff distance between chord sets, sampled at chord
    /// end and mid points.
    pub fn hausdorff(&self, other: &Interface) -> f64 {
        fn one_way(a: &Interface, b: &Interface) -> f64 {
            a.segments
                .iter()
                .flat_map(|s| [s.p, s.q, s.midpoint()])
                .map(|x| b.distance(x))
                .fold(0.0, f64::max)
        }
        one_way(self, other).max(one_way(other, self))
    }

    /// Smallest distance from any chord endpoint to the domain walls.
    pub fn wall_clearance(&self, grid: &Grid2D) -> f64 {
        let (x0, y0) = (grid.origin[0], grid.origin[1]);
        let (x1, y1) = (x0 + grid.lx(), y0 + grid.ly());
        self.segments
            .iter()
            .flat_map(|s| [s.p, s.q])
            .map(|p| (p[0] - x0).min(x1 - p[0]).min(p[1] - y0).min(y1 - p[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

#[inline]
fn classify(v: f64, bump: f64) -> f64 {
    if v == 0.0 {
        bump
    } else {
        v
    }
}

/// Zero set of the piecewise-linear interpolant of `f`. Returns an empty
/// interface when `f` has no sign change.
pub fn extract_interface(f: &ScalarField) -> Interface {
    let grid = f.grid;
    let max_abs = f.max_abs();
    if max_abs == 0.0 {
        return Interface::default();
    }
    let bump = ZERO_PERTURBATION * max_abs;
    let min_len = 1e-12 * grid.h();
    let nx = grid.nx;

    let rows: Vec<Vec<Segment>> = (0..grid.ny - 1)
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::new();
            for i in 0..nx - 1 {
                let a = grid.index(i, j);
                let b = a + 1;
                let c = a + nx + 1;
                let d = a + nx;
                // Diagonals alternate in a checkerboard so neither diagonal
                // direction is preferred.
                let tris = if (i + j) % 2 == 0 {
                    [[a, b, c], [a, c, d]]
                } else {
                    [[a, b, d], [b, c, d]]
                };
                for tri in tris {
                    triangle_chord(&grid, f, bump, tri, min_len, &mut out);
                }
            }
            out
        })
        .collect();
    Interface::new(rows.into_iter().flatten().collect())
}

fn triangle_chord(
    grid: &Grid2D,
    f: &ScalarField,
    bump: f64,
    tri: [usize; 3],
    min_len: f64,
    out: &mut Vec<Segment>,
) {
    let vals = tri.map(|k| classify(f.values[k], bump));
    let pos = vals.map(|v| v > 0.0);
    let n_pos = pos.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == 3 {
        return;
    }
    // The odd vertex is the one whose sign differs from the other two.
    let odd = (0..3).find(|&m| (n_pos == 1) == pos[m]).unwrap();
    let others = [(odd + 1) % 3, (odd + 2) % 3];
    let mut p = crossing(grid, tri[odd], vals[odd], tri[others[0]], vals[others[0]]);
    let mut q = crossing(grid, tri[odd], vals[odd], tri[others[1]], vals[others[1]]);
    let seg = Segment { p, q };
    if seg.length() <= min_len {
        return;
    }
    // Put the positive side on the left.
    let positive_vertex = if pos[odd] { tri[odd] } else { tri[others[0]] };
    let v = grid.position(positive_vertex);
    let cross = (q[0] - p[0]) * (v[1] - p[1]) - (q[1] - p[1]) * (v[0] - p[0]);
    if cross < 0.0 {
        std::mem::swap(&mut p, &mut q);
    }
    out.push(Segment { p, q });
}

#[inline]
fn crossing(grid: &Grid2D, ka: usize, fa: f64, kb: usize, fb: f64) -> Point {
    let (k0, f0, k1, f1) = if ka < kb { (ka, fa, kb, fb) } else { (kb, fb, ka, fa) };
    let t = f0 / (f0 - f1);
    let a = grid.position(k0);
    let b = grid.position(k1);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Buckets of chords over the grid for nearest-chord queries at nodes.
///
/// Every bucket keeps the chords that can be nearest to some point inside
/// it: with `m` the smallest chord distance from the bucket centre and `R`
/// the bucket half-diagonal, any chord farther than `m + 2R` from the centre
/// loses to the nearest one everywhere in the bucket.
struct NodeBuckets {
    cells: usize,
    bx: usize,
    by: usize,
    candidates: Vec<Vec<u32>>,
}

impl NodeBuckets {
    fn build(grid: &Grid2D, iface: &Interface) -> Self {
        let target = 32usize;
        let cells = ((grid.nx.max(grid.ny) - 1) / target).max(1);
        let bx = (grid.nx - 1).div_ceil(cells);
        let by = (grid.ny - 1).div_ceil(cells);
        let half_diag = 0.5 * ((cells as f64 * grid.hx).hypot(cells as f64 * grid.hy));
        let candidates = (0..bx * by)
            .into_par_iter()
            .map(|b| {
                let (ib, jb) = (b % bx, b / bx);
                let c = [
                    grid.origin[0] + (ib as f64 + 0.5) * cells as f64 * grid.hx,
                    grid.origin[1] + (jb as f64 + 0.5) * cells as f64 * grid.hy,
                ];
                let dists: Vec<f64> = iface.segments.iter().map(|s| s.distance(c)).collect();
                let m = dists.iter().copied().fold(f64::INFINITY, f64::min);
                let cutoff = m + 2.0 * half_diag * (1.0 + 1e-12) + 1e-15;
                dists
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d <= cutoff)
                    .map(|(s, _)| s as u32)
                    .collect()
            })
            .collect();
        NodeBuckets {
            cells,
            bx,
            by,
            candidates,
        }
    }

    #[inline]
    fn bucket_of(&self, i: usize, j: usize) -> usize {
        let ib = (i / self.cells).min(self.bx - 1);
        let jb = (j / self.cells).min(self.by - 1);
        ib + jb * self.bx
    }
}

/// Nearest chord (lowest index on ties) and its squared distance, per node.
fn nearest_chords(grid: &Grid2D, iface: &Interface) -> Vec<(u32, f64)> {
    let buckets = NodeBuckets::build(grid, iface);
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid.coords(k);
            let x = grid.position(k);
            let mut best = (u32::MAX, f64::INFINITY);
            for &s in &buckets.candidates[buckets.bucket_of(i, j)] {
                let d = iface.segments[s as usize].distance_sq(x);
                if d < best.1 {
                    best = (s, d);
                }
            }
            best
        })
        .collect()
}

/// Exact distance from every node to the nearest chord, signed by
/// `sign_source` (nodal zeros count as positive).
pub fn signed_distance_field(iface: &Interface, sign_source: &ScalarField) -> Result<ScalarField> {
    if iface.is_empty() {
        return Err(HbmoError::PhaseExtinct);
    }
    let grid = sign_source.grid;
    let nearest = nearest_chords(&grid, iface);
    let values = nearest
        .iter()
        .zip(&sign_source.values)
        .map(|(&(_, d2), &s)| if s >= 0.0 { d2.sqrt() } else { -d2.sqrt() })
        .collect();
    Ok(ScalarField { grid, values })
}

/// Brute-force reference for [`signed_distance_field`] without bucketing.
pub fn signed_distance_brute_force(iface: &Interface, sign_source: &ScalarField) -> Result<ScalarField> {
    if iface.is_empty() {
        return Err(HbmoError::PhaseExtinct);
    }
    ScalarField::from_values(
        sign_source.grid,
        (0..sign_source.grid.len())
            .map(|k| {
                let d = iface.distance(sign_source.grid.position(k));
                if sign_source.values[k] >= 0.0 {
                    d
                } else {
                    -d
                }
            })
            .collect(),
    )
}

/// `r - |x - center|`, positive inside the circle.
pub fn circle_distance(center: Point, r: f64, grid: Grid2D) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| r - (x - center[0]).hypot(y - center[1]))
}

/// Extends per-chord velocities to the grid: each node takes the value of
/// its nearest chord (lowest index wins ties). Nodes outside `band` get the
/// same nearest-chord value, which is the value found where their normal
/// ray enters the band.
pub fn velocity_extension(
    iface: &Interface,
    v_on_iface: &[f64],
    grid: Grid2D,
    band: f64,
) -> Result<ScalarField> {
    if iface.is_empty() {
        return Err(HbmoError::PhaseExtinct);
    }
    if v_on_iface.len() != iface.len() {
        return Err(HbmoError::InvalidParams(format!(
            "{} velocity samples for {} segments",
            v_on_iface.len(),
            iface.len()
        )));
    }
    if !(band >= 0.0) {
        return Err(HbmoError::InvalidParams(format!("band must be non-negative, got {band}")));
    }
    let nearest = nearest_chords(&grid, iface);
    let values = nearest.iter().map(|&(s, _)| v_on_iface[s as usize]).collect();
    Ok(ScalarField { grid, values })
}

/// How [`average_radius`] averages the distance to the centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusWeighting {
    /// Plain mean over chord endpoints, i.e. over the crossing points on
    /// triangle edges. Endpoints sit on the interpolant's zero set, so they
    /// avoid the inward sagitta bias of chord midpoints.
    #[default]
    Endpoints,
    /// Plain mean over chord midpoints.
    Uniform,
    /// Chord-length weighted mean over chord midpoints.
    LengthWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEstimate {
    pub radius: f64,
    pub extinct: bool,
}

/// Mean distance from `center` to the interface; zero and flagged extinct
/// for an empty interface.
pub fn average_radius(iface: &Interface, center: Point, weighting: RadiusWeighting) -> RadiusEstimate {
    if iface.is_empty() {
        return RadiusEstimate {
            radius: 0.0,
            extinct: true,
        };
    }
    let dist = |x: Point| (x[0] - center[0]).hypot(x[1] - center[1]);
    let (num, den) = iface.segments.iter().fold((0.0, 0.0), |(n, d), s| match weighting {
        RadiusWeighting::Endpoints => (n + dist(s.p) + dist(s.q), d + 2.0),
        RadiusWeighting::Uniform => (n + dist(s.midpoint()), d + 1.0),
        RadiusWeighting::LengthWeighted => {
            let w = s.length();
            (n + w * dist(s.midpoint()), d + w)
        }
    });
    RadiusEstimate {
        radius: num / den,
        extinct: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn circle_polyline_length() {
        let g = make_grid(256, 1.0).unwrap();
        let iface = extract_interface(&circle_distance([0.5, 0.5], 0.3, g));
        assert!((iface.length() - 2.0 * PI * 0.3).abs() < 2.0 * g.hx);
        assert!((iface.enclosed_area() - PI * 0.09).abs() < 1e-3);
    }

    #[test]
    fn positive_field_has_no_interface() {
        let g = make_grid(16, 1.0).unwrap();
        assert!(extract_interface(&ScalarField::constant(g, 1.0)).is_empty());
        assert!(extract_interface(&ScalarField::zeros(g)).is_empty());
    }

    #[test]
    fn horizontal_line_is_reproduced() {
        let g = make_grid(16, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |_, y| y - 0.5);
        let iface = extract_interface(&f);
        assert!(!iface.is_empty());
        for s in &iface.segments {
            assert!((s.p[1] - 0.5).abs() < 1e-15 && (s.q[1] - 0.5).abs() < 1e-15);
            // positive side (y > 0.5) on the left means the chord runs in +x
            assert!(s.q[0] > s.p[0]);
        }
        assert!((iface.length() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nodal_zero_is_perturbed_positive() {
        let g = make_grid(5, 1.0).unwrap();
        // zero exactly on the row y = 0.5
        let f = ScalarField::from_fn(g, |_, y| y - 0.5);
        assert!(f.at(2, 2) == 0.0);
        let iface = extract_interface(&f);
        for s in &iface.segments {
            assert!(s.p[1] < 0.5 && s.p[1] > 0.5 - 1e-12);
        }
    }

    #[test]
    fn distance_to_line() {
        let g = make_grid(5, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |_, y| y - 0.5 + 1e-3);
        let line = Interface::new(vec![Segment { p: [0.0, 0.5], q: [1.0, 0.5] }]);
        let d = signed_distance_field(&line, &f).unwrap();
        assert!((d.at(2, 3) - 0.25).abs() < 1e-15);
        assert!((d.at(2, 1) + 0.25).abs() < 1e-15);
        let neg = signed_distance_field(&line, &f.map(|v| -v)).unwrap();
        assert!((neg.at(2, 3) + 0.25).abs() < 1e-15);
        // node on the segment
        let on = Interface::new(vec![Segment { p: [0.0, 0.5], q: [1.0, 0.5] }]);
        let d = signed_distance_field(&on, &ScalarField::constant(g, 1.0)).unwrap();
        assert!(d.at(1, 2).abs() < 1e-12);
    }

    #[test]
    fn empty_interface_is_extinct() {
        let g = make_grid(5, 1.0).unwrap();
        let err = signed_distance_field(&Interface::default(), &ScalarField::zeros(g));
        assert!(matches!(err, Err(HbmoError::PhaseExtinct)));
        assert!(velocity_extension(&Interface::default(), &[], g, 0.1).is_err());
    }

    #[test]
    fn center_distance_of_polygonal_circle() {
        let g = make_grid(65, 1.0).unwrap();
        let exact = circle_distance([0.5, 0.5], 0.3, g);
        let iface = extract_interface(&exact);
        let d = signed_distance_field(&iface, &exact).unwrap();
        assert!((d.at(32, 32) - 0.3).abs() < g.hx * g.hx);
    }

    #[test]
    fn circle_distance_samples() {
        let g = make_grid(11, 1.0).unwrap();
        let d = circle_distance([0.5, 0.5], 0.3, g);
        assert!((d.at(5, 5) - 0.3).abs() < 1e-15);
        assert!(d.at(5, 8).abs() < 1e-15);
        assert!((d.at(5, 9) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn bucketed_matches_brute_force() {
        let g = make_grid(97, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y| {
            let a = 0.2 - (x - 0.35).hypot(y - 0.4);
            let b = 0.15 - (x - 0.7).hypot(y - 0.65);
            a.max(b)
        });
        let iface = extract_interface(&f);
        let fast = signed_distance_field(&iface, &f).unwrap();
        let slow = signed_distance_brute_force(&iface, &f).unwrap();
        assert_eq!(fast, slow);
    }

    #[test]
    fn velocity_extension_cases() {
        let g = make_grid(129, 1.0).unwrap();
        let iface = extract_interface(&circle_distance([0.5, 0.5], 0.25, g));
        let c = velocity_extension(&iface, &vec![0.7; iface.len()], g, 0.1).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.7));
        let z = velocity_extension(&iface, &vec![0.0; iface.len()], g, 0.1).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        let cosines: Vec<f64> = iface
            .segments
            .iter()
            .map(|s| {
                let m = s.midpoint();
                (m[1] - 0.5).atan2(m[0] - 0.5).cos()
            })
            .collect();
        let v = velocity_extension(&iface, &cosines, g, 0.2).unwrap();
        // node on the outward normal at angle 0, distance ~0.1 from the circle
        let i = ((0.85) / g.hx).round() as usize;
        assert!((v.at(i, 64) - 1.0).abs() < 1e-3, "{}", v.at(i, 64));
    }

    #[test]
    fn average_radius_cases() {
        let g = make_grid(257, 1.0).unwrap();
        let iface = extract_interface(&circle_distance([0.5, 0.5], 0.3, g));
        for w in [RadiusWeighting::Endpoints, RadiusWeighting::LengthWeighted] {
            let r = average_radius(&iface, [0.5, 0.5], w);
            assert!(!r.extinct);
            assert!((r.radius - 0.3).abs() < g.hx * g.hx, "{w:?}: {}", r.radius - 0.3);
        }
        let one = Interface::new(vec![Segment { p: [0.4, 0.7], q: [0.6, 0.7] }]);
        let r = average_radius(&one, [0.5, 0.5], RadiusWeighting::Uniform);
        assert!((r.radius - 0.2).abs() < 1e-15);
        let e = average_radius(&Interface::default(), [0.5, 0.5], RadiusWeighting::default());
        assert_eq!(e, RadiusEstimate { radius: 0.0, extinct: true });
    }

    #[test]
    fn orientation_encloses_positive_area() {
        let g = make_grid(64, 1.0).unwrap();
        let iface = extract_interface(&circle_distance([0.5, 0.5], 0.2, g));
        assert!(iface.enclosed_area() > 0.0);
        let flipped = extract_interface(&circle_distance([0.5, 0.5], 0.2, g).map(|v| -v));
        assert!(flipped.enclosed_area() < 0.0);
        assert!(iface.contains([0.5, 0.5]));
        assert!(!iface.contains([0.9, 0.9]));
    }
}
