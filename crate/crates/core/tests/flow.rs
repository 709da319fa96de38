use hbmo::circle::{extinction_time, CircleParams};
use hbmo::distance::{extract_interface, Interface, RadiusWeighting, Segment};
use hbmo::flow::{run, FlowConfig, InitialShape, InitialVelocity, SolverSettings};
use hbmo::HbmoError;

fn config(n: usize, shape: InitialShape, tau: f64, steps: usize) -> FlowConfig {
    FlowConfig {
        grid_n: n,
        domain: 1.0,
        shape,
        velocity: InitialVelocity::Constant(0.0),
        threshold_dt: tau,
        steps,
        settings: SolverSettings::default(),
        smoothing_time: 0.0,
        radius_weighting: RadiusWeighting::Endpoints,
    }
}

fn circle(r: f64) -> InitialShape {
    InitialShape::Circle {
        center: [0.5, 0.5],
        radius: r,
    }
}

#[test]
fn circle_radius_decreases_until_extinction() {
    let t_e = extinction_time(&CircleParams::new(0.3, 0.0));
    let tau = t_e / 64.0;
    let traj = run(&config(129, circle(0.3), tau, 80)).unwrap();
    let radii = traj.radii.unwrap();
    assert_eq!(radii.len(), 80);
    let alive: Vec<f64> = radii.iter().map(|r| r.1).take_while(|&r| r > 0.0).collect();
    assert!(alive.windows(2).all(|w| w[1] < w[0]));
    let t = traj.extinct_at.expect("circle must vanish");
    assert!((t / t_e - 1.0).abs() < 0.15, "extinct at {t}, oracle {t_e}");
}

fn transpose(iface: &Interface) -> Interface {
    Interface::new(
        iface
            .segments
            .iter()
            .map(|s| Segment {
                p: [s.q[1], s.q[0]],
                q: [s.p[1], s.p[0]],
            })
            .collect(),
    )
}

#[test]
fn evolution_commutes_with_transpose() {
    let a = InitialShape::Ellipse {
        center: [0.45, 0.55],
        semi_axes: [0.3, 0.18],
    };
    let b = InitialShape::Ellipse {
        center: [0.55, 0.45],
        semi_axes: [0.18, 0.3],
    };
    let ta = run(&config(65, a, 0.01, 6)).unwrap();
    let tb = run(&config(65, b, 0.01, 6)).unwrap();
    for (fa, fb) in ta.frames.iter().zip(&tb.frames) {
        let d = transpose(&fa.interface).hausdorff(&fb.interface);
        assert!(d < 1e-12, "{d}");
        assert_eq!(fa.interface.len(), fb.interface.len());
    }
}

#[test]
fn outward_velocity_first_grows_the_circle() {
    let mut cfg = config(129, circle(0.2), 0.01, 3);
    cfg.velocity = InitialVelocity::Constant(0.5);
    let traj = run(&cfg).unwrap();
    let r = traj.radii.unwrap();
    assert!(r[0].1 > 0.2 && r[1].1 > r[0].1, "{r:?}");
}

#[test]
fn per_segment_velocity_length_is_checked() {
    let mut cfg = config(33, circle(0.3), 0.01, 2);
    cfg.velocity = InitialVelocity::PerSegment(vec![0.0; 3]);
    assert!(matches!(run(&cfg), Err(HbmoError::Config(_))));
}

#[test]
fn dumbbell_runs_and_loses_area() {
    let shape = InitialShape::Dumbbell {
        centers: [[0.3, 0.5], [0.7, 0.5]],
        radius: 0.13,
        bar_half_width: 0.03,
    };
    let traj = run(&config(129, shape, 0.004, 20)).unwrap();
    assert_eq!(traj.frames.len(), 20);
    assert!(traj.radii.is_none());
    let first = traj.frames[0].interface.enclosed_area();
    let last = traj.frames[19].interface.enclosed_area();
    assert!(last < first && last > 0.0, "{first} -> {last}");
}

#[test]
fn polyline_start_matches_level_set_start() {
    let g = hbmo::grid::make_grid(65, 1.0).unwrap();
    let level = circle(0.3).level_function(g);
    let gamma = extract_interface(&level);
    let a = run(&config(65, circle(0.3), 0.01, 3)).unwrap();
    let b = run(&config(65, InitialShape::Polyline(gamma), 0.01, 3)).unwrap();
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        assert!(fa.interface.hausdorff(&fb.interface) < 1e-12);
    }
}
