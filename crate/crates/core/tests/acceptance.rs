//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test --release -p hbmo --test acceptance`.

use std::time::Instant;

use hbmo::circle::{self, extinction_time, pointmass_check, CircleParams, HalfTimeEntry};
use hbmo::cli::cmd_circle_table;
use hbmo::distance::{circle_distance, extract_interface, Interface};
use hbmo::experiments::{convergence_study, ConvergenceEntry, DistanceMode, ExperimentSpec};
use hbmo::flow::{first_step, state_at_rest, step, HbmoState, SolverSettings, StepOutcome};
use hbmo::grid::{make_grid, ScalarField};
use hbmo::multiphase::{bubbles, multiphase_step, MultiphaseState, PhaseSet, SimplexBasis};
use hbmo::volume::{constrained_step, VolumeTargets};
use hbmo::wave::{
    advance_steps, discrete_energy, first_leap, poisson_reference, solve, LocalExpansion, WaveParams,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const TABLE1: [(usize, f64, Option<f64>); 8] = [
    (10, 0.073199, None),
    (40, 0.019332, Some(0.960)),
    (160, 0.004884, Some(0.992)),
    (640, 0.001224, Some(0.998)),
    (2560, 0.000306, Some(1.000)),
    (10240, 0.000076, Some(1.000)),
    (40960, 0.000019, Some(1.000)),
    (163840, 0.000004, Some(1.000)),
];

fn table1() -> Outcome {
    let start = Instant::now();
    let rows = circle::convergence_table(1.0, 0.0, 10, 8, 4, HalfTimeEntry::OneBased);
    let (_, exit_ok) = cmd_circle_table(1.0, 0.0, 10, 8, 4, HalfTimeEntry::OneBased).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst_err: f64 = 0.0;
    let mut worst_order: f64 = 0.0;
    for (row, (n, e, o)) in rows.iter().zip(TABLE1) {
        if row.n != n {
            return Err(format!("row N={} where {n} expected", row.n));
        }
        worst_err = worst_err.max((row.error - e).abs());
        if let (Some(a), Some(b)) = (row.order, o) {
            worst_order = worst_order.max((a - b).abs());
        }
    }
    check(
        rows.len() == 8 && worst_err <= 1e-6 && worst_order <= 1e-3 && exit_ok && elapsed < 5.0,
        format!("max error dev {worst_err:.1e}, max order dev {worst_order:.1e}, {elapsed:.2}s"),
    )
}

fn extinction() -> Outcome {
    let a = extinction_time(&CircleParams::new(0.3, 0.0));
    let b = extinction_time(&CircleParams::new(1.0, 0.0));
    let exact = (std::f64::consts::PI / 2.0).sqrt();
    check(
        (a - 0.376).abs() < 5e-4 && (b - exact).abs() <= 1e-12,
        format!("t_e(0.3) = {a:.6}, |t_e(1) - sqrt(pi/2)| = {:.1e}", (b - exact).abs()),
    )
}

const GRIDS: [usize; 5] = [16, 32, 64, 128, 256];
const TABLE2: [f64; 5] = [0.132320, 0.126222, 0.113587, 0.088544, 0.051558];
const TABLE3: [f64; 5] = [0.131575, 0.124060, 0.109666, 0.084465, 0.044312];

fn table_check(rows: &[ConvergenceEntry], reference: &[f64]) -> (bool, String) {
    let mut ok = rows.len() == reference.len();
    let mut parts = Vec::new();
    for (r, &want) in rows.iter().zip(reference) {
        let rel = r.l2_error / want - 1.0;
        ok &= rel.abs() <= 0.15;
        parts.push(format!("{}:{:.6}({:+.0}%)", r.grid_n, r.l2_error, 100.0 * rel));
    }
    let decreasing = rows.windows(2).all(|w| w[1].l2_error < w[0].l2_error);
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    let increasing = orders.windows(2).all(|w| w[1] > w[0]);
    ok &= decreasing && increasing;
    (
        ok,
        format!(
            "{} decreasing={decreasing} orders_increasing={increasing}",
            parts.join(" ")
        ),
    )
}

fn run_table(mode: DistanceMode) -> Result<Vec<ConvergenceEntry>, String> {
    convergence_study(&ExperimentSpec::new(GRIDS[0], mode), &GRIDS).map_err(|e| e.to_string())
}

fn table2(ideal: &Result<Vec<ConvergenceEntry>, String>) -> Outcome {
    let rows = ideal.as_ref().map_err(Clone::clone)?;
    let (ok, detail) = table_check(rows, &TABLE2);
    check(ok, detail)
}

fn table3(
    recon: &Result<Vec<ConvergenceEntry>, String>,
    ideal: &Result<Vec<ConvergenceEntry>, String>,
) -> Outcome {
    let rows = recon.as_ref().map_err(Clone::clone)?;
    let ideal = ideal.as_ref().map_err(Clone::clone)?;
    let (mut ok, detail) = table_check(rows, &TABLE3);
    let worst = rows
        .iter()
        .zip(ideal)
        .map(|(r, i)| (r.l2_error / i.l2_error - 1.0).abs())
        .fold(0.0, f64::max);
    ok &= worst <= 0.2;
    check(ok, format!("{detail} max|recon/ideal-1|={worst:.3}"))
}

fn advanced(o: hbmo::Result<StepOutcome>) -> Result<HbmoState, String> {
    match o.map_err(|e| e.to_string())? {
        StepOutcome::Advanced(s) => Ok(s),
        StepOutcome::Extinct { time } => Err(format!("unexpected extinction at {time}")),
    }
}

fn front_height(iface: &Interface) -> (f64, f64) {
    iface
        .segments
        .iter()
        .flat_map(|s| [s.p[1], s.q[1]])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)))
}

fn flat_fronts() -> Outcome {
    let g = make_grid(128, 1.0).map_err(|e| e.to_string())?;
    let h = g.h();
    let tau = 0.01;
    let settings = SolverSettings::default();
    let y0 = 0.5 + 0.3 * h;
    let f = ScalarField::from_fn(g, |_, y| y0 - y);
    let gamma0 = extract_interface(&f);

    let mut s = advanced(first_step(&gamma0, &f, &vec![0.0; gamma0.len()], tau, &settings))?;
    let mut still: f64 = 0.0;
    for n in 0..20 {
        if n > 0 {
            s = advanced(step(&s, &settings))?;
        }
        let (lo, hi) = front_height(&s.interface);
        still = still.max((lo - y0).abs()).max((hi - y0).abs());
    }

    let v = -0.1;
    let mut s = advanced(first_step(&gamma0, &f, &vec![v; gamma0.len()], tau, &settings))?;
    let tol = 10.0 * (tau.powi(3) + h * h);
    let mut prev = y0;
    let mut worst: f64 = 0.0;
    for n in 0..20 {
        if n > 0 {
            s = advanced(step(&s, &settings))?;
        }
        let (lo, hi) = front_height(&s.interface);
        worst = worst.max((hi - lo).abs()).max(((lo - prev) - v * tau).abs());
        prev = lo;
    }
    check(
        still <= 1e-12 && worst <= tol,
        format!("stationary drift {still:.1e}; translating displacement dev {worst:.1e} (tol {tol:.1e})"),
    )
}

fn mode_error(n: usize) -> Result<f64, String> {
    let g = make_grid(n + 1, 1.0).map_err(|e| e.to_string())?;
    let t_end = 0.5;
    let params = WaveParams::for_duration(&g, 1.0, t_end, 2 * n).map_err(|e| e.to_string())?;
    let pi = std::f64::consts::PI;
    let u0 = ScalarField::from_fn(g, |x, y| (pi * x).cos() * (pi * y).cos());
    let u = solve(&u0, &ScalarField::zeros(g), &params).map_err(|e| e.to_string())?;
    let amp = (2f64.sqrt() * pi * t_end).cos();
    Ok(u.values.iter().zip(&u0.values).map(|(a, b)| (a - amp * b).abs()).fold(0.0, f64::max))
}

fn wave_oracles() -> Outcome {
    let errs: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| mode_error(n)).collect::<Result<_, _>>()?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);

    let g = make_grid(129, 1.0).map_err(|e| e.to_string())?;
    let pi = std::f64::consts::PI;
    let u0 = ScalarField::from_fn(g, |x, y| (pi * x).cos() * (2.0 * pi * y).cos() + 0.5 * (3.0 * pi * x).cos());
    let v0 = ScalarField::from_fn(g, |x, y| 0.3 * (pi * y).cos() * x.powi(2) * (1.0 - x).powi(2));
    let params = WaveParams::for_duration(&g, 2.0, 0.01, 64).map_err(|e| e.to_string())?;
    let mut state = first_leap(&u0, &v0, &params).map_err(|e| e.to_string())?;
    let e0 = discrete_energy(&state, &params);
    advance_steps(&mut state, &params, params.steps() - 1);
    let drift = (discrete_energy(&state, &params) / e0 - 1.0).abs();

    let start = first_leap(&u0, &v0, &params).map_err(|e| e.to_string())?;
    let mut s = start.clone();
    advance_steps(&mut s, &params, 500);
    std::mem::swap(&mut s.u_prev, &mut s.u_curr);
    advance_steps(&mut s, &params, 500);
    let back = s
        .u_curr
        .values
        .iter()
        .zip(&start.u_prev.values)
        .chain(s.u_prev.values.iter().zip(&start.u_curr.values))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    check(
        min_order >= 1.9 && drift <= 1e-6 && back <= 1e-10,
        format!(
            "eigenmode errors {:?} orders {:?}; energy drift {drift:.1e}; reversal {back:.1e}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn poisson() -> Outcome {
    let g = make_grid(512, 1.0).map_err(|e| e.to_string())?;
    let h = g.h();
    let (c, r) = ([0.5, 0.5], 0.3);
    // Outside-positive distance, frame at the top point with normal +y.
    let d = circle_distance(c, r, g).map(|v| -v);
    let top = [c[0], c[1] + r];
    let window = 4.0 * h;
    let mut worst_ratio: f64 = 0.0;
    for &(c2, v0) in &[(1.0, 0.0), (2.0, 0.0), (1.0, 0.3)] {
        for &t in &[0.005, 0.01, 0.02] {
            let params = WaveParams::for_duration(&g, c2, t, 64).map_err(|e| e.to_string())?;
            let u = solve(&d, &ScalarField::constant(g, v0), &params).map_err(|e| e.to_string())?;
            let e = LocalExpansion {
                kappa: 1.0 / r,
                v0,
                ..Default::default()
            };
            let tol = 5.0 * h * h + 5.0 * t * t * t;
            for (k, &val) in u.values.iter().enumerate() {
                let p = g.position(k);
                let x = [p[0] - top[0], p[1] - top[1]];
                if x[0].abs() <= window && x[1].abs() <= window {
                    let diff = (val - poisson_reference(&e, c2, t, x)).abs();
                    worst_ratio = worst_ratio.max(diff / tol);
                }
            }
        }
    }
    check(
        worst_ratio <= 1.0,
        format!("max |u - reference| / (5h^2 + 5t^3) = {worst_ratio:.3}"),
    )
}

fn is_partition(p: &PhaseSet) -> bool {
    let masks: Vec<Vec<bool>> = (0..p.phases()).map(|i| p.mask(i)).collect();
    (0..p.grid.len()).all(|k| masks.iter().filter(|m| m[k]).count() == 1)
}

fn multiphase() -> Outcome {
    let g = make_grid(96, 1.0).map_err(|e| e.to_string())?;
    let settings = SolverSettings::default();
    let discs = [
        ([0.3, 0.3], 0.12),
        ([0.7, 0.3], 0.1),
        ([0.5, 0.68], 0.15),
        ([0.22, 0.72], 0.08),
        ([0.78, 0.72], 0.1),
    ];
    let phases = bubbles(g, &discs).map_err(|e| e.to_string())?;
    let mut state = MultiphaseState::at_rest(phases, 6.0 * g.h(), 0.002).map_err(|e| e.to_string())?;
    let mut partition = is_partition(&state.phases);
    for _ in 0..10 {
        state = multiphase_step(&state, &settings).map_err(|e| e.to_string())?;
        partition &= is_partition(&state.phases);
    }

    // Two phases with an interpolation band wider than the domain: the
    // vector field is the scalar distance itself.
    let g = make_grid(65, 1.0).map_err(|e| e.to_string())?;
    let tau = 0.01;
    let d = circle_distance([0.47, 0.52], 0.3, g);
    let gamma0 = extract_interface(&d);
    let basis = SimplexBasis::new(2).map_err(|e| e.to_string())?;
    let two = PhaseSet::from_scores(&basis, &[d.clone(), d.map(|v| -v)]).map_err(|e| e.to_string())?;
    let mut m = MultiphaseState::at_rest(two, 2.0, tau).map_err(|e| e.to_string())?;
    let mut s = state_at_rest(&gamma0, &d, tau).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut same_count = true;
    for _ in 0..10 {
        m = multiphase_step(&m, &settings).map_err(|e| e.to_string())?;
        s = advanced(step(&s, &settings))?;
        same_count &= m.phases.boundaries[0].len() == s.interface.len();
        worst = worst.max(m.phases.boundaries[0].hausdorff(&s.interface));
    }
    check(
        partition && same_count && worst <= 1e-10,
        format!("partition exact={partition}; N=2 vs scalar over 10 steps: max Hausdorff {worst:.1e}"),
    )
}

fn volume() -> Outcome {
    let g = make_grid(256, 1.0).map_err(|e| e.to_string())?;
    let settings = SolverSettings::default();
    let d = circle_distance([0.46, 0.53], 0.25, g);
    let basis = SimplexBasis::new(2).map_err(|e| e.to_string())?;
    let phases = PhaseSet::from_scores(&basis, &[d.clone(), d.map(|v| -v)]).map_err(|e| e.to_string())?;
    let targets = VolumeTargets::from_phases(&phases);
    let mut state = MultiphaseState::at_rest(phases, 6.0 * g.h(), 0.005).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        state = constrained_step(&state, &targets, &settings).map_err(|e| e.to_string())?.0;
        let v = state.phases.volumes();
        worst = worst.max((v[0] - targets.areas[0]).abs());
    }
    let tol = 1e-4 * g.area();
    check(worst <= tol, format!("max |area - A| over 50 steps = {worst:.2e} (tol {tol:.0e})"))
}

fn pointmass() -> Outcome {
    let ns = [100usize, 1_000, 10_000, 100_000];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let (a, e) = pointmass_check(|t| t, 0.0, 1.0, n);
            (a - e).abs()
        })
        .collect();
    // Least-squares slope of log error against log N.
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let c = ns.iter().zip(&errs).map(|(&n, e)| e * n as f64).fold(0.0, f64::max);
    check(
        (-slope - 1.0).abs() <= 0.1,
        format!("errors {:?}, fitted order {:.4}, max N*err {c:.4}", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(), -slope),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {id:>2} {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failures += 1;
                println!("FAIL {id:>2} {name}: {d} [{secs:.1}s]");
            }
        }
    };

    let t = Instant::now();
    report(1, "circle table", t, table1());
    let t = Instant::now();
    report(2, "extinction time", t, extinction());
    let t = Instant::now();
    let (ideal, recon) = rayon::join(|| run_table(DistanceMode::Ideal), || run_table(DistanceMode::Reconstructed));
    report(3, "grid convergence, ideal distances", t, table2(&ideal));
    report(4, "grid convergence, reconstructed distances", t, table3(&recon, &ideal));
    let t = Instant::now();
    report(5, "flat fronts", t, flat_fronts());
    let t = Instant::now();
    report(6, "wave solver oracles", t, wave_oracles());
    let t = Instant::now();
    report(7, "local closed-form cross-check", t, poisson());
    let t = Instant::now();
    report(8, "multiphase partition and reduction", t, multiphase());
    let t = Instant::now();
    report(9, "volume preservation", t, volume());
    let t = Instant::now();
    report(10, "point-mass consistency", t, pointmass());

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
