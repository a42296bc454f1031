//! Meshes, quadrature-based atomization, and spatial indexing.

mod cost;
mod index;
mod mesh;
mod quadrature;

pub use cost::{dist2, geodesic, Cost};
pub use index::SpatialIndex;
pub use mesh::{load_density, load_mesh, parse_mesh, DensityField, SimplicialMesh};
pub use quadrature::{reference_volume, QuadratureSpec, SimplexRule};

use crate::error::{Error, Result};
use crate::measures::SourceAtoms;
use crate::Point;

/// Replace `ρ_h dx` by quadrature atoms, one per rule point per cell.
///
/// Masses `ρ_h(x_q) w_q` are renormalized to sum to one.
pub fn atomize(
    mesh: &SimplicialMesh,
    density: &DensityField,
    quad: QuadratureSpec,
) -> Result<SourceAtoms> {
    let rho = density.values();
    if rho.len() != mesh.vertices().len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertices().len(),
            got: rho.len(),
        });
    }
    let dim = mesh.dim();
    let rule = quad.rule(dim)?;
    let n = mesh.num_cells() * rule.len();
    let mut points = Vec::with_capacity(n);
    let mut volumes = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (k, cell) in mesh.cells().iter().enumerate() {
        let vol = mesh.cell_volume(k);
        for (lam, frac) in rule.barycentric.iter().zip(&rule.fractions) {
            let mut x = [0.0; 3];
            let mut r = 0.0;
            for (&l, &v) in lam.iter().zip(cell) {
                let p = mesh.vertices()[v];
                for a in 0..dim {
                    x[a] += l * p[a];
                }
                r += l * rho[v];
            }
            points.push(x);
            volumes.push(frac * vol);
            values.push(r);
        }
    }
    SourceAtoms::from_quadrature(dim, points, volumes, values)
}

/// `max_q min_j c(x_q, y_j)` over the atom set.
pub fn covering_cost(atoms: &[Point], targets: &[Point], cost: Cost) -> Result<f64> {
    if atoms.is_empty() || targets.is_empty() {
        return Err(Error::Empty("covering cost inputs"));
    }
    if cost.supports_ball_query() {
        let index = SpatialIndex::new(targets)?;
        Ok(covering_cost_indexed(atoms, &index, cost))
    } else {
        Ok(atoms
            .iter()
            .map(|x| {
                targets
                    .iter()
                    .map(|y| cost.eval(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max))
    }
}

pub(crate) fn covering_cost_indexed(atoms: &[Point], index: &SpatialIndex, cost: Cost) -> f64 {
    atoms
        .iter()
        .map(|x| cost.eval(x, &index.points()[index.nearest(x)]))
        .fold(0.0, f64::max)
}
