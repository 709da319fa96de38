use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hbmo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbmo"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn circle_table_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbmo(&["circle-table"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "# hbmo-csv v1");
    assert_eq!(lines[1], "N,error,order");
    assert_eq!(lines.len(), 10);
    assert!(lines[2].starts_with("10,0.073199"));
}

#[test]
fn circle_table_single_level_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbmo(&["circle-table", "--levels", "1", "-o", "t.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hbmo(&["circle-table", "--r0", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(hbmo(&["converge", "--grids", "32,16"], dir.path()).status.code(), Some(2));
    assert_eq!(hbmo(&["frobnicate"], dir.path()).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_hbmo"))
        .args(["circle-table", "--levels", "1"])
        .env("HBMO_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn converge_single_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let o = hbmo(&["converge", "--mode", "reconstructed", "--grids", "16", "--divisions", "128", "--substeps", "16"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[1], "N,l2_error,order");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("16,") && lines[2].ends_with(','));
}

const CIRCLE: &str = r#"
grid.n = 65
initial.shape = "circle"
initial.center = [0.5, 0.5]
initial.radius = 0.3
hbmo.threshold_dt = 0.01
hbmo.steps = 8
output.frames_dir = "frames"
output.radii_csv = "radii.csv"
output.summary_csv = "summary.csv"
"#;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn evolve_circle_writes_frames_deterministically() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            fs::write(dir.path().join("run.toml"), CIRCLE).unwrap();
            let o = hbmo(&["evolve", "run.toml"], dir.path());
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            files(dir.path())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let frames = runs[0].iter().filter(|(n, _)| n.starts_with("frames")).count();
    assert_eq!(frames, 8);
    for (_, bytes) in &runs[0] {
        assert!(bytes.starts_with(b"# hbmo-csv v1\n"));
    }
    let radii = &runs[0].iter().find(|(n, _)| n == "radii.csv").unwrap().1;
    assert_eq!(String::from_utf8_lossy(radii).lines().count(), 10);
}

#[test]
fn evolve_volume_bubbles_logs_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
grid.n = 65
initial.shape = "bubbles"
initial.bubbles = [[0.3, 0.3, 0.12], [0.7, 0.35, 0.1], [0.5, 0.72, 0.14]]
hbmo.threshold_dt = 0.004
hbmo.steps = 5
volume.targets = "from-initial"
output.frames_dir = "out"
output.volumes_csv = "out/volumes.csv"
"#;
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let o = hbmo(&["evolve", "run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/volumes.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "time,residual_0,residual_1,residual_2,residual_3");
    assert_eq!(lines.len(), 7);
    for l in &lines[2..] {
        for v in l.split(',').skip(1) {
            assert!(v.parse::<f64>().unwrap().abs() <= 1e-4);
        }
    }
    assert!(dir.path().join("out/phases_00005.csv").exists());
    assert!(dir.path().join("out/frame_00000.csv").exists());
}

#[test]
fn invalid_config_lists_every_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "grid.n = 1\ninitial.shape = \"hexagon\"\nhbmo.threshold_dt = -1\nhbmo.steps = 3\noutput.colour = \"red\"\n",
    )
    .unwrap();
    let o = hbmo(&["evolve", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for key in ["grid.n", "initial.shape", "hbmo.threshold_dt", "output.colour"] {
        assert!(err.contains(key), "{key} not reported in {err}");
    }
}

#[test]
fn mask_and_velocity_files_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    fs::create_dir(&sub).unwrap();
    let g = hbmo::grid::make_grid(33, 1.0).unwrap();
    let mask = hbmo::grid::ScalarField::from_fn(g, |x, y| {
        if (x - 0.5).abs() < 0.25 && (y - 0.5).abs() < 0.2 { 1.0 } else { -1.0 }
    });
    hbmo::io::write_field(&sub.join("mask.txt"), &mask).unwrap();
    let cfg = r#"
grid.n = 33
initial.shape = "mask-file"
initial.file = "mask.txt"
initial.smoothing_time = 0.001
hbmo.threshold_dt = 0.01
hbmo.steps = 3
output.summary_csv = "summary.csv"
"#;
    fs::write(sub.join("run.toml"), cfg).unwrap();
    let o = hbmo(&["evolve", "cfg/run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(sub.join("summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
}
