//! Simplicial meshes in one to three dimensions and the `smesh v1` text format.
//!
//! ```text
//! smesh 1 <d>
//! <nv> <nc>
//! <d floats per vertex line>
//! <d+1 vertex indices per cell line>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Point;

/// Volumes below this are treated as degenerate.
const MIN_CELL_VOLUME: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
}

/// Per-vertex nonnegative values of a piecewise-linear density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
}

impl SimplicialMesh {
    pub fn new(dim: usize, vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Validation(format!("mesh dimension {dim} not in 1..=3")));
        }
        if vertices.is_empty() || cells.is_empty() {
            return Err(Error::Empty("mesh"));
        }
        for v in &vertices {
            if v.iter().any(|c| !c.is_finite()) || v[dim..].iter().any(|&c| c != 0.0) {
                return Err(Error::Validation(format!(
                    "vertex {v:?} is not a finite point of dimension {dim}"
                )));
            }
        }
        let mesh = Self { dim, vertices, cells };
        for (k, cell) in mesh.cells.iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(Error::Validation(format!(
                    "cell {k} has {} vertices, expected {}",
                    cell.len(),
                    dim + 1
                )));
            }
            if let Some(&bad) = cell.iter().find(|&&i| i >= mesh.vertices.len()) {
                return Err(Error::Validation(format!(
                    "cell {k} references vertex {bad} of {}",
                    mesh.vertices.len()
                )));
            }
            if mesh.cell_volume(k) <= MIN_CELL_VOLUME {
                return Err(Error::Validation(format!("cell {k} has zero volume")));
            }
        }
        Ok(mesh)
    }

    /// Uniform partition of `[a, b]` into `n` segments.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(b > a) {
            return Err(Error::param("interval", "need n >= 1 and b > a"));
        }
        let h = (b - a) / n as f64;
        let vertices = (0..=n).map(|i| [a + h * i as f64, 0.0, 0.0]).collect();
        let cells = (0..n).map(|i| vec![i, i + 1]).collect();
        Self::new(1, vertices, cells)
    }

    /// `[x0, x1] × [y0, y1]` split into `n × n` squares of two triangles each.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, n: usize) -> Result<Self> {
        if n == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::param("rectangle", "need n >= 1 and positive extents"));
        }
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let x = x0 + (x1 - x0) * i as f64 / n as f64;
                let y = y0 + (y1 - y0) * j as f64 / n as f64;
                vertices.push([x, y, 0.0]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::new(2, vertices, cells)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rectangle(0.0, 1.0, 0.0, 1.0, n)
    }

    /// Unit cube split into `n³` cubes of six tetrahedra each.
    pub fn unit_cube(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("unit_cube", "need n >= 1"));
        }
        let m = n + 1;
        let mut vertices = Vec::with_capacity(m * m * m);
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    let s = 1.0 / n as f64;
                    vertices.push([i as f64 * s, j as f64 * s, k as f64 * s]);
                }
            }
        }
        let id = |i: usize, j: usize, k: usize| (k * m + j) * m + i;
        // Kuhn subdivision: one tetrahedron per permutation of the axes.
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut cells = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut c = [i, j, k];
                        let mut cell = vec![id(c[0], c[1], c[2])];
                        for axis in perm {
                            c[axis] += 1;
                            cell.push(id(c[0], c[1], c[2]));
                        }
                        cells.push(cell);
                    }
                }
            }
        }
        Self::new(3, vertices, cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        let c = &self.cells[k];
        let p0 = self.vertices[c[0]];
        let e = |i: usize, a: usize| self.vertices[c[i]][a] - p0[a];
        match self.dim {
            1 => e(1, 0).abs(),
            2 => 0.5 * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0)).abs(),
            _ => {
                let det = e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1))
                    - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
                    + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0));
                det.abs() / 6.0
            }
        }
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.cells.len()).map(|k| self.cell_volume(k)).sum()
    }

    pub fn to_smesh(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "smesh 1 {}", self.dim);
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.cells.len());
        for v in &self.vertices {
            let coords: Vec<String> = v[..self.dim].iter().map(|c| format!("{c:?}")).collect();
            let _ = writeln!(s, "{}", coords.join(" "));
        }
        for c in &self.cells {
            let idx: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{}", idx.join(" "));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_smesh()).map_err(|e| Error::io(path, e))
    }
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("density values must be finite and >= 0".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(mesh: &SimplicialMesh, value: f64) -> Result<Self> {
        Self::new(vec![value; mesh.vertices().len()])
    }

    pub fn from_fn(mesh: &SimplicialMesh, f: impl Fn(&Point) -> f64) -> Result<Self> {
        Self::new(mesh.vertices().iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Exact integral of the P1 interpolant over the mesh.
    pub fn integral(&self, mesh: &SimplicialMesh) -> f64 {
        mesh.cells()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let mean = c.iter().map(|&i| self.values[i]).sum::<f64>() / c.len() as f64;
                mean * mesh.cell_volume(k)
            })
            .sum()
    }
}

/// Parse a mesh in the `smesh v1` format.
pub fn parse_mesh(text: &str, path: &Path) -> Result<SimplicialMesh> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 || head[0] != "smesh" || head[1] != "1" {
        return Err(perr(ln, format!("expected 'smesh 1 <d>', found '{header}'")));
    }
    let dim: usize = head[2]
        .parse()
        .map_err(|_| perr(ln, format!("bad dimension '{}'", head[2])))?;
    if !(1..=3).contains(&dim) {
        return Err(perr(ln, format!("dimension {dim} not in 1..=3")));
    }

    let (ln, counts) = lines.next().ok_or_else(|| perr(ln + 1, "missing counts".into()))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| perr(ln, "counts must be two integers".into()))?;
    let [nv, nc] = counts[..] else {
        return Err(perr(ln, "counts must be two integers".into()));
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated vertex list".into()))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(ln, format!("bad vertex line '{l}'")))?;
        if vals.len() != dim {
            return Err(perr(ln, format!("expected {dim} coordinates, found {}", vals.len())));
        }
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&vals);
        vertices.push(p);
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated cell list".into()))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(ln, format!("bad cell line '{l}'")))?;
        if idx.len() != dim + 1 {
            return Err(perr(ln, format!("expected {} indices, found {}", dim + 1, idx.len())));
        }
        cells.push(idx);
    }
    if let Some((ln, l)) = lines.next() {
        return Err(perr(ln, format!("trailing content '{l}'")));
    }
    SimplicialMesh::new(dim, vertices, cells)
}

pub fn load_mesh(path: &Path) -> Result<SimplicialMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

/// One density value per line (or comma-separated), in vertex order.
pub fn load_density(path: &Path, mesh: &SimplicialMesh) -> Result<DensityField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for tok in line.split([',', ' ', '\t']).map(str::trim).filter(|t| !t.is_empty()) {
            let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad density value '{tok}'"),
            })?;
            values.push(v);
        }
    }
    if values.len() != mesh.vertices().len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertices().len(),
            got: values.len(),
        });
    }
    DensityField::new(values)
}
