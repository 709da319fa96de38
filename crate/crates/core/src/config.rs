//! TOML run configuration for `hbmo evolve`.
//!
//! Keys may be written as sections or dotted (`grid.n = 128`). Every
//! problem is collected with its key path before anything runs, and
//! unknown keys are rejected. Relative file paths resolve against the
//! config file's directory.
//!
//! ```toml
//! grid.n = 128
//! domain = 1.0
//! initial.shape = "circle"        # circle | ellipse | dumbbell | polyline-file
//! initial.center = [0.5, 0.5]     # | mask-file | bubbles | voronoi | phase-file
//! initial.radius = 0.3
//! initial.velocity = 0.0          # number, or a per-segment file path
//! hbmo.threshold_dt = 0.002
//! hbmo.steps = 100                # or hbmo.final_time
//! solver.inner_substeps = 64
//! output.frames_dir = "frames"
//! output.radii_csv = "radii.csv"
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::distance::{Point, RadiusWeighting};
use crate::error::{HbmoError, Result};
use crate::flow::{InitialShape, InitialVelocity, SolverSettings};
use crate::wave::{DEFAULT_CFL_SAFETY, DEFAULT_SUBSTEPS};

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, semi_axes: [f64; 2] },
    Dumbbell { centers: [Point; 2], radius: f64, bar_half_width: f64 },
    PolylineFile(PathBuf),
    MaskFile(PathBuf),
    Bubbles(Vec<(Point, f64)>),
    Voronoi(Vec<Point>),
    PhaseFile { path: PathBuf, phases: usize },
}

impl ShapeSpec {
    pub fn is_multiphase(&self) -> bool {
        matches!(self, ShapeSpec::Bubbles(_) | ShapeSpec::Voronoi(_) | ShapeSpec::PhaseFile { .. })
    }

    /// Shapes given in closed form.
    pub fn analytic(&self) -> Option<InitialShape> {
        Some(match self {
            ShapeSpec::Circle { center, radius } => InitialShape::Circle {
                center: *center,
                radius: *radius,
            },
            ShapeSpec::Ellipse { center, semi_axes } => InitialShape::Ellipse {
                center: *center,
                semi_axes: *semi_axes,
            },
            ShapeSpec::Dumbbell {
                centers,
                radius,
                bar_half_width,
            } => InitialShape::Dumbbell {
                centers: *centers,
                radius: *radius,
                bar_half_width: *bar_half_width,
            },
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocitySpec {
    Constant(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    FromInitial,
    Areas(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSpec {
    pub targets: TargetSpec,
    /// Absolute tolerance; `None` means `1e-4 |Ω|`.
    pub tol: Option<f64>,
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSpec {
    pub frames_dir: Option<PathBuf>,
    pub radii_csv: Option<PathBuf>,
    pub summary_csv: Option<PathBuf>,
    pub volumes_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid_n: usize,
    pub domain: f64,
    pub shape: ShapeSpec,
    pub velocity: VelocitySpec,
    pub smoothing_time: f64,
    pub threshold_dt: f64,
    pub steps: usize,
    pub settings: SolverSettings,
    /// Multiphase interpolation width; `None` means six grid spacings.
    pub eps: Option<f64>,
    pub volume: Option<VolumeSpec>,
    pub radius_weighting: RadiusWeighting,
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HbmoError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            HbmoError::Parse { msg, .. } => HbmoError::Parse {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| HbmoError::Parse {
            path: PathBuf::from("<config>"),
            msg: e.to_string(),
        })?;
        let mut r = Reader::new(&table, base_dir);
        let cfg = r.run_config();
        r.reject_unknown();
        match cfg {
            Some(c) if r.errors.is_empty() => Ok(c),
            _ => Err(HbmoError::Config(r.errors)),
        }
    }

    pub fn grid_spacing(&self) -> f64 {
        self.domain / (self.grid_n - 1) as f64
    }

    pub fn initial_velocity(&self) -> Result<InitialVelocity> {
        Ok(match &self.velocity {
            VelocitySpec::Constant(v) => InitialVelocity::Constant(*v),
            VelocitySpec::File(p) => InitialVelocity::PerSegment(crate::io::read_velocities(p)?),
        })
    }
}

struct Reader<'a> {
    root: &'a Table,
    base: &'a Path,
    errors: Vec<String>,
    seen: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(root: &'a Table, base: &'a Path) -> Self {
        Reader {
            root,
            base,
            errors: Vec::new(),
            seen: BTreeSet::new(),
        }
    }

    fn lookup(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        let mut parts = key.split('.');
        let mut v = self.root.get(parts.next()?)?;
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    fn err(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{key}: {msg}"));
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        match self.lookup(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(key, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let v = self.f64(key)?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.err(key, format!("must be positive, got {v}"));
            None
        }
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        match self.lookup(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            other => {
                self.err(key, format!("expected a non-negative integer, got {other}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.lookup(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.err(key, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.string(key).map(|s| self.base.join(s))
    }

    fn numbers(&mut self, key: &str, value: &Value) -> Option<Vec<f64>> {
        let arr = match value.as_array() {
            Some(a) => a,
            None => {
                self.err(key, "expected an array of numbers");
                return None;
            }
        };
        let out: Option<Vec<f64>> = arr
            .iter()
            .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
            .collect();
        if out.is_none() {
            self.err(key, "expected an array of numbers");
        }
        out
    }

    fn tuple<const N: usize>(&mut self, key: &str, value: &Value) -> Option<[f64; N]> {
        let v = self.numbers(key, value)?;
        match <[f64; N]>::try_from(v.as_slice()) {
            Ok(a) => Some(a),
            Err(_) => {
                self.err(key, format!("expected {N} numbers, got {}", v.len()));
                None
            }
        }
    }

    fn point(&mut self, key: &str) -> Option<Point> {
        let v = self.lookup(key)?;
        self.tuple::<2>(key, v)
    }

    fn tuples<const N: usize>(&mut self, key: &str) -> Option<Vec<[f64; N]>> {
        let v = self.lookup(key)?;
        let Some(arr) = v.as_array() else {
            self.err(key, "expected an array of arrays");
            return None;
        };
        arr.iter()
            .enumerate()
            .map(|(i, item)| self.tuple::<N>(&format!("{key}[{i}]"), item))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    fn required<T>(&mut self, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && self.lookup(key).is_none() {
            self.err(key, "missing");
        }
        v
    }

    fn run_config(&mut self) -> Option<RunConfig> {
        let n = self.usize("grid.n");
        let grid_n = self.required("grid.n", n);
        if let Some(n) = grid_n.filter(|&n| n < 3) {
            self.err("grid.n", format!("need at least 3 nodes, got {n}"));
        }
        let domain = if self.lookup("domain").is_some() {
            self.positive("domain")
        } else {
            Some(1.0)
        };
        let shape = self.shape();
        let velocity = self.velocity();
        if let (Some(s), Some(VelocitySpec::Constant(v))) = (&shape, &velocity) {
            if s.is_multiphase() && *v != 0.0 {
                self.err("initial.velocity", "multiphase runs start at rest");
            }
        }
        if let (Some(s), Some(VelocitySpec::File(_))) = (&shape, &velocity) {
            if s.is_multiphase() {
                self.err("initial.velocity", "multiphase runs start at rest");
            }
        }
        let smoothing_time = match self.lookup("initial.smoothing_time") {
            Some(_) => self.f64("initial.smoothing_time").and_then(|t| {
                if t >= 0.0 {
                    Some(t)
                } else {
                    self.err("initial.smoothing_time", "must be non-negative");
                    None
                }
            }),
            None => Some(0.0),
        };

        let dt = self.positive("hbmo.threshold_dt");
        let threshold_dt = self.required("hbmo.threshold_dt", dt);
        let steps = match (self.lookup("hbmo.steps"), self.lookup("hbmo.final_time")) {
            (Some(_), Some(_)) => {
                self.err("hbmo.steps", "give either hbmo.steps or hbmo.final_time, not both");
                None
            }
            (Some(_), None) => self.usize("hbmo.steps").and_then(|s| {
                if s == 0 {
                    self.err("hbmo.steps", "need at least one step");
                    None
                } else {
                    Some(s)
                }
            }),
            (None, Some(_)) => {
                let t = self.positive("hbmo.final_time");
                match (t, threshold_dt) {
                    (Some(t), Some(dt)) => Some(((t / dt) * (1.0 + 1e-12)).floor().max(1.0) as usize),
                    _ => None,
                }
            }
            (None, None) => {
                self.err("hbmo.steps", "missing (or give hbmo.final_time)");
                None
            }
        };

        let substeps = match self.lookup("solver.inner_substeps") {
            Some(_) => self.usize("solver.inner_substeps").and_then(|s| {
                if s == 0 {
                    self.err("solver.inner_substeps", "must be positive");
                    None
                } else {
                    Some(s)
                }
            }),
            None => Some(DEFAULT_SUBSTEPS),
        };
        let cfl_safety = match self.lookup("solver.cfl_safety") {
            Some(_) => self.positive("solver.cfl_safety"),
            None => Some(DEFAULT_CFL_SAFETY),
        };
        let eps = match self.lookup("multiphase.eps") {
            Some(_) => self.positive("multiphase.eps").map(Some),
            None => Some(None),
        };
        if let (Some(Some(e)), Some(n), Some(d)) = (eps, grid_n, domain) {
            if n >= 3 && e <= 2.0 * d / (n - 1) as f64 {
                self.err("multiphase.eps", format!("{e} does not exceed two grid spacings"));
            }
        }
        let volume = self.volume();
        let radius_weighting = match self.lookup("output.radius_weighting") {
            Some(_) => match self.string("output.radius_weighting").as_deref() {
                Some("endpoints") => Some(RadiusWeighting::Endpoints),
                Some("uniform") => Some(RadiusWeighting::Uniform),
                Some("length_weighted") => Some(RadiusWeighting::LengthWeighted),
                Some(other) => {
                    self.err(
                        "output.radius_weighting",
                        format!("unknown value {other:?} (endpoints | uniform | length_weighted)"),
                    );
                    None
                }
                None => None,
            },
            None => Some(RadiusWeighting::default()),
        };
        let output = OutputSpec {
            frames_dir: self.optional_path("output.frames_dir"),
            radii_csv: self.optional_path("output.radii_csv"),
            summary_csv: self.optional_path("output.summary_csv"),
            volumes_csv: self.optional_path("output.volumes_csv"),
        };

        Some(RunConfig {
            grid_n: grid_n?,
            domain: domain?,
            shape: shape?,
            velocity: velocity?,
            smoothing_time: smoothing_time?,
            threshold_dt: threshold_dt?,
            steps: steps?,
            settings: SolverSettings {
                substeps: substeps?,
                cfl_safety: cfl_safety?,
            },
            eps: eps?,
            volume: volume?,
            radius_weighting: radius_weighting?,
            output,
        })
    }

    fn optional_path(&mut self, key: &str) -> Option<PathBuf> {
        self.lookup(key)?;
        self.path(key)
    }

    fn shape(&mut self) -> Option<ShapeSpec> {
        let s = self.string("initial.shape");
        let kind = self.required("initial.shape", s)?;
        match kind.as_str() {
            "circle" => {
                let c = self.point("initial.center");
                let center = self.required("initial.center", c);
                let r = self.positive("initial.radius");
                let radius = self.required("initial.radius", r);
                Some(ShapeSpec::Circle {
                    center: center?,
                    radius: radius?,
                })
            }
            "ellipse" => {
                let c = self.point("initial.center");
                let center = self.required("initial.center", c);
                let a = self.point("initial.semi_axes");
                let semi_axes = self.required("initial.semi_axes", a);
                if let Some(a) = semi_axes.filter(|a| !(a[0] > 0.0 && a[1] > 0.0)) {
                    self.err("initial.semi_axes", format!("must be positive, got {a:?}"));
                    return None;
                }
                Some(ShapeSpec::Ellipse {
                    center: center?,
                    semi_axes: semi_axes?,
                })
            }
            "dumbbell" => {
                let c = self.tuples::<2>("initial.centers");
                let centers = self.required("initial.centers", c).and_then(|c| {
                    if c.len() == 2 {
                        Some([c[0], c[1]])
                    } else {
                        self.err("initial.centers", format!("expected 2 centres, got {}", c.len()));
                        None
                    }
                });
                let r = self.positive("initial.radius");
                let radius = self.required("initial.radius", r);
                let w = self.positive("initial.bar_half_width");
                let bar = self.required("initial.bar_half_width", w);
                Some(ShapeSpec::Dumbbell {
                    centers: centers?,
                    radius: radius?,
                    bar_half_width: bar?,
                })
            }
            "polyline-file" => {
                let p = self.path("initial.file");
                self.required("initial.file", p).map(ShapeSpec::PolylineFile)
            }
            "mask-file" => {
                let p = self.path("initial.file");
                self.required("initial.file", p).map(ShapeSpec::MaskFile)
            }
            "phase-file" => {
                let p = self.path("initial.file");
                let path = self.required("initial.file", p);
                let n = self.usize("initial.phases");
                let phases = self.required("initial.phases", n);
                if let Some(n) = phases.filter(|&n| n < 2) {
                    self.err("initial.phases", format!("need at least 2 phases, got {n}"));
                    return None;
                }
                Some(ShapeSpec::PhaseFile {
                    path: path?,
                    phases: phases?,
                })
            }
            "bubbles" => {
                let b = self.tuples::<3>("initial.bubbles");
                let list = self.required("initial.bubbles", b)?;
                if list.is_empty() {
                    self.err("initial.bubbles", "need at least one bubble");
                    return None;
                }
                if let Some((i, _)) = list.iter().enumerate().find(|(_, b)| !(b[2] > 0.0)) {
                    self.err(&format!("initial.bubbles[{i}]"), "radius must be positive");
                    return None;
                }
                Some(ShapeSpec::Bubbles(list.iter().map(|b| ([b[0], b[1]], b[2])).collect()))
            }
            "voronoi" => {
                let s = self.tuples::<2>("initial.seeds");
                let seeds = self.required("initial.seeds", s)?;
                if seeds.len() < 2 {
                    self.err("initial.seeds", format!("need at least 2 seeds, got {}", seeds.len()));
                    return None;
                }
                Some(ShapeSpec::Voronoi(seeds))
            }
            other => {
                self.err(
                    "initial.shape",
                    format!(
                        "unknown shape {other:?} (circle | ellipse | dumbbell | polyline-file | mask-file | bubbles | voronoi | phase-file)"
                    ),
                );
                None
            }
        }
    }

    fn velocity(&mut self) -> Option<VelocitySpec> {
        match self.lookup("initial.velocity") {
            None => Some(VelocitySpec::Constant(0.0)),
            Some(Value::String(_)) => self.path("initial.velocity").map(VelocitySpec::File),
            Some(_) => self.f64("initial.velocity").map(VelocitySpec::Constant),
        }
    }

    fn volume(&mut self) -> Option<Option<VolumeSpec>> {
        if self.lookup("volume").is_none() {
            return Some(None);
        }
        let targets = match self.lookup("volume.targets") {
            None => Some(TargetSpec::FromInitial),
            Some(Value::String(s)) if s == "from-initial" => Some(TargetSpec::FromInitial),
            Some(Value::String(s)) => {
                let msg = format!("expected \"from-initial\" or a list of areas, got {s:?}");
                self.err("volume.targets", msg);
                None
            }
            Some(v) => self.numbers("volume.targets", v).map(TargetSpec::Areas),
        };
        let tol = match self.lookup("volume.tol") {
            Some(_) => self.positive("volume.tol").map(Some),
            None => Some(None),
        };
        let max_sweeps = match self.lookup("volume.max_sweeps") {
            Some(_) => self.usize("volume.max_sweeps").and_then(|s| {
                if s == 0 {
                    self.err("volume.max_sweeps", "must be positive");
                    None
                } else {
                    Some(s)
                }
            }),
            None => Some(crate::volume::DEFAULT_MAX_SWEEPS),
        };
        Some(Some(VolumeSpec {
            targets: targets?,
            tol: tol?,
            max_sweeps: max_sweeps?,
        }))
    }

    fn reject_unknown(&mut self) {
        let mut unknown = Vec::new();
        collect_keys(self.root, "", &mut |k| {
            if !self.seen.contains(k) {
                unknown.push(k.to_string());
            }
        });
        for k in unknown {
            self.err(&k, "unknown key");
        }
    }
}

fn collect_keys(t: &Table, prefix: &str, f: &mut dyn FnMut(&str)) {
    for (k, v) in t {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(inner) => collect_keys(inner, &key, f),
            _ => f(&key),
        }
    }
}
