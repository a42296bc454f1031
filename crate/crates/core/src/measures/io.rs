//! CSV point clouds `x[,y[,z]],weight` and hierarchy manifests.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::hierarchy::{SourceHierarchy, TargetHierarchy};
use super::types::{SourceAtoms, TargetMeasure, MASS_TOL};
use crate::error::{Error, Result};
use crate::Point;

pub const MANIFEST: &str = "levels.txt";

/// Raw point cloud as read from disk, before any measure validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl PointCloud {
    pub fn into_target(self) -> Result<TargetMeasure> {
        TargetMeasure::new(self.dim, self.points, self.weights)
    }

    /// Target after rescaling the weights to unit mass.
    pub fn into_normalized_target(self) -> Result<TargetMeasure> {
        TargetMeasure::normalized(self.dim, self.points, self.weights)
    }

    pub fn into_source(self) -> Result<SourceAtoms> {
        SourceAtoms::from_masses(self.dim, self.points, self.weights)
    }
}

/// Parse a point cloud. A non-numeric first line is treated as a header.
pub fn parse_point_cloud(text: &str, path: &Path) -> Result<PointCloud> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut dim = 0;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse()).collect();
        let vals = match parsed {
            Ok(v) => v,
            Err(_) if points.is_empty() && dim == 0 => {
                dim = fields.len().saturating_sub(1);
                continue;
            }
            Err(e) => return Err(err(i + 1, format!("bad number: {e}"))),
        };
        let d = vals.len().saturating_sub(1);
        if !(1..=3).contains(&d) {
            return Err(err(i + 1, format!("expected 2 to 4 columns, found {}", vals.len())));
        }
        if points.is_empty() && (dim == 0 || dim == d) {
            dim = d;
        } else if d != dim {
            return Err(err(i + 1, format!("expected {} columns, found {}", dim + 1, vals.len())));
        }
        let mut p = [0.0; 3];
        p[..d].copy_from_slice(&vals[..d]);
        points.push(p);
        weights.push(vals[d]);
    }
    if points.is_empty() {
        return Err(err(0, "no points".into()));
    }
    Ok(PointCloud { dim, points, weights })
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_point_cloud(&text, path)
}

pub fn format_point_cloud(dim: usize, points: &[Point], weights: &[f64]) -> String {
    let mut s = String::new();
    for (p, w) in points.iter().zip(weights) {
        for c in &p[..dim] {
            let _ = write!(s, "{c:?},");
        }
        let _ = writeln!(s, "{w:?}");
    }
    s
}

pub fn write_point_cloud(
    path: impl AsRef<Path>,
    dim: usize,
    points: &[Point],
    weights: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_point_cloud(dim, points, weights)).map_err(|e| Error::io(path, e))
}

pub fn write_target(path: impl AsRef<Path>, t: &TargetMeasure) -> Result<()> {
    write_point_cloud(path, t.dim(), t.points(), t.weights())
}

pub fn write_source(path: impl AsRef<Path>, a: &SourceAtoms) -> Result<()> {
    write_point_cloud(path, a.dim(), a.points(), a.masses())
}

fn write_levels<'a>(
    dir: &Path,
    prefix: &str,
    levels: impl Iterator<Item = (usize, &'a [Point], &'a [f64])>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    let mut files = Vec::new();
    for (l, (dim, pts, w)) in levels.enumerate() {
        let name = format!("{prefix}_{l}.csv");
        let path = dir.join(&name);
        write_point_cloud(&path, dim, pts, w)?;
        manifest.push_str(&name);
        manifest.push('\n');
        files.push(path);
    }
    let m = dir.join(MANIFEST);
    fs::write(&m, manifest).map_err(|e| Error::io(&m, e))?;
    Ok(files)
}

/// Write `level_<l>.csv` files and a `levels.txt` manifest, coarsest first.
pub fn write_target_hierarchy(dir: impl AsRef<Path>, h: &TargetHierarchy) -> Result<Vec<PathBuf>> {
    write_levels(
        dir.as_ref(),
        "level",
        h.levels().iter().map(|t| (t.dim(), t.points(), t.weights())),
    )
}

pub fn write_source_hierarchy(dir: impl AsRef<Path>, h: &SourceHierarchy) -> Result<Vec<PathBuf>> {
    write_levels(
        dir.as_ref(),
        "level",
        h.levels().iter().map(|a| (a.dim(), a.points(), a.masses())),
    )
}

/// Level files named by a manifest, coarsest first.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let files: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect();
    if files.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "manifest lists no levels".into(),
        });
    }
    Ok(files)
}

pub fn load_target_hierarchy(manifest: impl AsRef<Path>) -> Result<TargetHierarchy> {
    let levels = read_manifest(manifest)?
        .iter()
        .map(|f| load_point_cloud(f)?.into_normalized_target())
        .collect::<Result<_>>()?;
    TargetHierarchy::from_levels(levels)
}

pub fn load_source_hierarchy(manifest: impl AsRef<Path>) -> Result<SourceHierarchy> {
    let levels = read_manifest(manifest)?
        .iter()
        .map(|f| load_point_cloud(f)?.into_source())
        .collect::<Result<_>>()?;
    SourceHierarchy::from_levels(levels)
}

/// Problems found in a candidate target measure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasureDiagnostics {
    /// `Σ ν_j − 1`.
    pub sum_deviation: f64,
    pub nonpositive: Vec<usize>,
    pub non_finite: Vec<usize>,
    /// Pairs `(first, later)` of points with identical coordinates.
    pub duplicates: Vec<(usize, usize)>,
}

impl MeasureDiagnostics {
    pub fn is_ok(&self) -> bool {
        self.sum_deviation.abs() <= MASS_TOL
            && self.nonpositive.is_empty()
            && self.non_finite.is_empty()
            && self.duplicates.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.sum_deviation.abs() > MASS_TOL {
            out.push(format!("weight sum deviates from 1 by {:e}", self.sum_deviation));
        }
        for &j in &self.nonpositive {
            out.push(format!("weight {j} is not positive"));
        }
        for &j in &self.non_finite {
            out.push(format!("point or weight {j} is not finite"));
        }
        for &(a, b) in &self.duplicates {
            out.push(format!("warning: points {a} and {b} coincide"));
        }
        out
    }
}

pub fn validate_measure(points: &[Point], weights: &[f64]) -> MeasureDiagnostics {
    let mut d = MeasureDiagnostics {
        sum_deviation: weights.iter().sum::<f64>() - 1.0,
        ..Default::default()
    };
    let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
    for (j, (p, &w)) in points.iter().zip(weights).enumerate() {
        if !w.is_finite() || p.iter().any(|c| !c.is_finite()) {
            d.non_finite.push(j);
        } else if w <= 0.0 {
            d.nonpositive.push(j);
        }
        // +0.0 normalizes -0.0 so both compare equal
        let key = p.map(|c| (c + 0.0).to_bits());
        if let Some(&first) = seen.get(&key) {
            d.duplicates.push((first, j));
        } else {
            seen.insert(key, j);
        }
    }
    d
}
