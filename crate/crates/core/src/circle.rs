//! Closed-form radius of a circle under `r'' = -1/r`, the scalar recursion
//! the threshold scheme induces on concentric circles, and the point-mass
//! consistency check.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::distance::RadiusEstimate;
use crate::special::{erf, erf_inv, erfc};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleParams {
    pub r0: f64,
    /// Initial normal velocity, outward positive.
    pub v0: f64,
}

impl CircleParams {
    pub fn new(r0: f64, v0: f64) -> Self {
        assert!(r0 > 0.0, "initial radius must be positive");
        CircleParams { r0, v0 }
    }

    /// First integral: `r'² + 2 log r = C1`.
    pub fn c1(&self) -> f64 {
        2.0 * self.r0.ln() + self.v0 * self.v0
    }

    pub fn c2(&self) -> f64 {
        self.r0 * (PI / 2.0).sqrt() * (0.5 * self.v0 * self.v0).exp() * erf(self.v0 / 2f64.sqrt())
    }
}

pub fn extinction_time(p: &CircleParams) -> f64 {
    // 1 + erf(v0/√2), written so fast-shrinking circles keep their digits
    p.r0 * (PI / 2.0).sqrt() * (0.5 * p.v0 * p.v0).exp() * erfc(-p.v0 / 2f64.sqrt())
}

/// `r(t) = exp(C1/2 - erf⁻¹(√(2/π) e^{-C1/2} (t - C2))²)`. Past extinction
/// the radius is zero and flagged.
pub fn exact_radius(t: f64, p: &CircleParams) -> RadiusEstimate {
    let c1 = p.c1();
    let arg = (2.0 / PI).sqrt() * (-0.5 * c1).exp() * (t - p.c2());
    if arg >= 1.0 {
        return RadiusEstimate {
            radius: 0.0,
            extinct: true,
        };
    }
    let e = erf_inv(arg);
    RadiusEstimate {
        radius: (0.5 * c1 - e * e).exp(),
        extinct: false,
    }
}

/// Radii `r_0..r_N` of the idealized scheme with `τ = t_e / N`:
/// `r_1 = r_0 + v_0 τ - τ²/(2 r_0)` and
/// `r_n = R - τ²/R` with `R = 2 r_{n-1} - r_{n-2}`.
/// Once `R <= τ` (the next radius would be non-positive) the circle is
/// extinct and the remaining entries are zero.
pub fn idealized_recursion(r0: f64, v0: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two divisions");
    let tau = extinction_time(&CircleParams::new(r0, v0)) / n as f64;
    let mut r = Vec::with_capacity(n + 1);
    r.push(r0);
    r.push((r0 + v0 * tau - tau * tau / (2.0 * r0)).max(0.0));
    let mut extinct = r[1] == 0.0;
    for k in 2..=n {
        if extinct {
            r.push(0.0);
            continue;
        }
        let virt = 2.0 * r[k - 1] - r[k - 2];
        if virt <= tau {
            extinct = true;
            r.push(0.0);
        } else {
            r.push(virt - tau * tau / virt);
        }
    }
    r
}

/// Which recursion entry is compared against `r(t_e/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HalfTimeEntry {
    /// Entries labelled from 1 (the first entry is `r_0`), so the `N/2`-th
    /// label is `r_{N/2-1}`. This is the labelling of the published table
    /// and of the grid experiments' error sums.
    #[default]
    OneBased,
    /// `r_{N/2}`, the entry at exactly `t_e/2`.
    ZeroBased,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error: f64,
    pub order: Option<f64>,
}

/// Errors at half extinction time for `N = base_n · refinement^k`.
pub fn convergence_table(
    r0: f64,
    v0: f64,
    base_n: usize,
    levels: usize,
    refinement: usize,
    entry: HalfTimeEntry,
) -> Vec<ConvergenceRow> {
    let p = CircleParams::new(r0, v0);
    let reference = exact_radius(0.5 * extinction_time(&p), &p).radius;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    let mut n = base_n;
    for _ in 0..levels {
        let r = idealized_recursion(r0, v0, n);
        let idx = match entry {
            HalfTimeEntry::OneBased => n / 2 - 1,
            HalfTimeEntry::ZeroBased => n / 2,
        };
        let error = (r[idx] - reference).abs();
        let order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (refinement as f64).ln());
        rows.push(ConvergenceRow { n, error, order });
        n *= refinement;
    }
    rows
}

/// CSV with columns `N,error,order`; the first row has an empty order.
pub fn table_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("# hbmo-csv v1\nN,error,order\n");
    for row in rows {
        match row.order {
            Some(o) => writeln!(s, "{},{:.6},{:.6}", row.n, row.error, o),
            None => writeln!(s, "{},{:.6},", row.n, row.error),
        }
        .unwrap();
    }
    s
}

/// Displacement of a point mass with `x'' = -κ(t)`, `x'(0) = v0` over
/// `[0, T]`: the threshold scheme's accumulated per-step displacements
/// against the exact `v0 T - ∫₀ᵀ∫₀ˢ κ(u) du ds`.
///
/// The per-step update is `δ_k = δ_{k-1} - κ(kτ) τ²`, curvature taken at
/// the level being predicted as in the circle recursion. That makes the
/// scheme first order; sampling at `(k-1)τ` instead would sum to a
/// second-order rule.
pub fn pointmass_check(kappa: impl Fn(f64) -> f64, v0: f64, t_end: f64, n: usize) -> (f64, f64) {
    let tau = t_end / n as f64;
    let mut delta = v0 * tau - 0.5 * kappa(0.0) * tau * tau;
    let mut approx = delta;
    for k in 2..=n {
        delta -= kappa(k as f64 * tau) * tau * tau;
        approx += delta;
    }
    let inner = |s: f64| adaptive_simpson(&kappa, 0.0, s, 1e-12);
    let exact = v0 * t_end - adaptive_simpson(&inner, 0.0, t_end, 1e-10);
    (approx, exact)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
