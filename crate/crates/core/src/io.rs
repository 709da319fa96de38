//! Plain-text artifacts: field snapshots, PGM rasters, interface frames,
//! phase-index grids and per-segment velocity lists.
//!
//! Field snapshots start with a header line `nx ny hx hy ox oy` followed by
//! one value per line with `i` running fastest. Every CSV starts with the
//! schema line [`CSV_HEADER`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::distance::{Interface, Segment};
use crate::error::{HbmoError, Result};
use crate::grid::{Grid2D, ScalarField};

pub const CSV_HEADER: &str = "# hbmo-csv v1";

fn parse_err(path: &Path, msg: impl Into<String>) -> HbmoError {
    HbmoError::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Writes text through a sibling temporary file so readers never see a
/// half-written artifact.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn field_to_string(f: &ScalarField) -> String {
    let g = &f.grid;
    let mut s = format!(
        "{} {} {:e} {:e} {:e} {:e}\n",
        g.nx, g.ny, g.hx, g.hy, g.origin[0], g.origin[1]
    );
    for v in &f.values {
        writeln!(s, "{v:e}").unwrap();
    }
    s
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    write_atomic(path, field_to_string(f).as_bytes())
}

pub fn parse_field(text: &str, path: &Path) -> Result<ScalarField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| parse_err(path, "empty field file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 {
        return Err(parse_err(path, "header must be `nx ny hx hy ox oy`"));
    }
    let nx: usize = h[0].parse().map_err(|_| parse_err(path, "bad nx"))?;
    let ny: usize = h[1].parse().map_err(|_| parse_err(path, "bad ny"))?;
    let nums: Vec<f64> = h[2..]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, "bad spacing or origin"))?;
    if nx < 2 || ny < 2 {
        return Err(parse_err(path, format!("grid {nx}x{ny} is too small")));
    }
    let grid = Grid2D::new(
        nx,
        ny,
        nums[0] * (nx - 1) as f64,
        nums[1] * (ny - 1) as f64,
        [nums[2], nums[3]],
    )?;
    let values: Vec<f64> = lines
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(path, format!("bad value on data line {}", i + 1)))
        })
        .collect::<Result<_>>()?;
    if values.len() != grid.len() {
        return Err(parse_err(
            path,
            format!("expected {} values, found {}", grid.len(), values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(path, "non-finite value"));
    }
    Ok(ScalarField { grid, values })
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    parse_field(&fs::read_to_string(path)?, path)
}

/// Binary PGM, `[min, max]` mapped linearly onto `[0, 255]`, top row is
/// the largest `y`.
pub fn field_to_pgm(f: &ScalarField) -> Vec<u8> {
    let g = &f.grid;
    let (lo, hi) = f.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let v = (f.at(i, j) - lo) / span;
            out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, f: &ScalarField) -> Result<()> {
    write_atomic(path, &field_to_pgm(f))
}

pub fn interface_to_csv(iface: &Interface, time: f64) -> String {
    let mut s = format!("{CSV_HEADER}\n# time={time:.12e}\nx1,y1,x2,y2\n");
    for seg in &iface.segments {
        writeln!(s, "{:e},{:e},{:e},{:e}", seg.p[0], seg.p[1], seg.q[0], seg.q[1]).unwrap();
    }
    s
}

pub fn write_interface(path: &Path, iface: &Interface, time: f64) -> Result<()> {
    write_atomic(path, interface_to_csv(iface, time).as_bytes())
}

/// Reads a frame file (or any `x1,y1,x2,y2` list). Returns the frame time
/// when present.
pub fn parse_interface(text: &str, path: &Path) -> Result<(Interface, Option<f64>)> {
    let mut time = None;
    let mut segments = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(t) = rest.trim().strip_prefix("time=") {
                time = Some(t.parse().map_err(|_| parse_err(path, "bad frame time"))?);
            }
            continue;
        }
        if line.starts_with("x1") {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(path, format!("bad number on line {}", n + 1)))?;
        if v.len() != 4 {
            return Err(parse_err(path, format!("line {} needs 4 values", n + 1)));
        }
        segments.push(Segment {
            p: [v[0], v[1]],
            q: [v[2], v[3]],
        });
    }
    Ok((Interface::new(segments), time))
}

pub fn read_interface(path: &Path) -> Result<(Interface, Option<f64>)> {
    parse_interface(&fs::read_to_string(path)?, path)
}

/// Phase indices as a CSV grid: one line per `j`, `nx` columns.
pub fn labels_to_csv(grid: &Grid2D, labels: &[usize]) -> String {
    let mut s = format!("{CSV_HEADER}\n# nx={} ny={}\n", grid.nx, grid.ny);
    for row in labels.chunks(grid.nx) {
        let cols: Vec<String> = row.iter().map(|l| l.to_string()).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

pub fn write_labels(path: &Path, grid: &Grid2D, labels: &[usize]) -> Result<()> {
    write_atomic(path, labels_to_csv(grid, labels).as_bytes())
}

pub fn parse_labels(text: &str, grid: &Grid2D, path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::with_capacity(grid.len());
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for t in line.split(',') {
            labels.push(
                t.trim()
                    .parse()
                    .map_err(|_| parse_err(path, format!("bad phase index on line {}", n + 1)))?,
            );
        }
    }
    if labels.len() != grid.len() {
        return Err(parse_err(
            path,
            format!("expected {} phase indices, found {}", grid.len(), labels.len()),
        ));
    }
    Ok(labels)
}

pub fn read_labels(path: &Path, grid: &Grid2D) -> Result<Vec<usize>> {
    parse_labels(&fs::read_to_string(path)?, grid, path)
}

/// One velocity per line, in segment order; `#` starts a comment line.
pub fn parse_velocities(text: &str, path: &Path) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            l.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, format!("bad velocity on line {}", n + 1)))
        })
        .collect()
}

pub fn read_velocities(path: &Path) -> Result<Vec<f64>> {
    parse_velocities(&fs::read_to_string(path)?, path)
}

/// `(time, value)` series as CSV with the given value column name.
pub fn series_csv(column: &str, rows: &[(f64, f64)]) -> String {
    let mut s = format!("{CSV_HEADER}\ntime,{column}\n");
    for (t, v) in rows {
        writeln!(s, "{t:.9},{v:.9}").unwrap();
    }
    s
}
