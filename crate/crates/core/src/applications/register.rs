//! Shape registration: solve, then extract maps, interpolants and a
//! transported field.

use crate::error::Result;
use crate::maps::{displacement_interpolate, transfer_field, FieldTransfer, MapSample, PlanView};
use crate::measures::{SourceAtoms, TargetMeasure};
use crate::solver::{solve, Solution, SolverConfig};
use crate::Point;

/// Interpolation times emitted by [`register`].
pub const SNAPSHOT_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone)]
pub struct Registration {
    pub solution: Solution,
    pub barycentric: MapSample,
    pub modal: MapSample,
    /// `(α, x_α)` for each of [`SNAPSHOT_TIMES`].
    pub snapshots: Vec<(f64, Vec<Point>)>,
    /// Field carried by the modal map.
    pub transfer: Option<FieldTransfer>,
}

pub fn register(
    atoms: &SourceAtoms,
    target: &TargetMeasure,
    cfg: &SolverConfig,
    field: Option<&[f64]>,
) -> Result<Registration> {
    let solution = solve(atoms, target, cfg, None)?;
    let cut = solution.report.cutoff_history.as_ref().and_then(|h| h.last().copied());
    let plan = PlanView::new(atoms, target, solution.potential.values(), cfg.epsilon, cfg.cost, cut)?
        .with_tolerance(cfg.tolerance);
    let barycentric = plan.barycentric_map();
    let modal = plan.modal_map();
    let snapshots = SNAPSHOT_TIMES
        .iter()
        .map(|&a| displacement_interpolate(&barycentric, a).map(|x| (a, x)))
        .collect::<Result<_>>()?;
    let transfer = field
        .map(|f| transfer_field(&modal, f, atoms.masses(), target.len()))
        .transpose()?;
    Ok(Registration {
        solution,
        barycentric,
        modal,
        snapshots,
        transfer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_target_displacements_point_to_it() {
        let pts: Vec<Point> = (0..20).map(|i| [i as f64 / 19.0, (i % 3) as f64 / 2.0, 0.0]).collect();
        let a = SourceAtoms::uniform(2, pts).unwrap();
        let y = [0.4, 0.2, 0.0];
        let t = TargetMeasure::new(2, vec![y], vec![1.0]).unwrap();
        let r = register(&a, &t, &SolverConfig::default(), Some(&[1.0; 20])).unwrap();
        assert!(r.solution.converged());
        for img in &r.barycentric.images {
            assert!((img[0] - y[0]).abs() < 1e-12 && (img[1] - y[1]).abs() < 1e-12);
        }
        assert_eq!(r.snapshots.len(), 5);
        assert_eq!(r.transfer.unwrap().mean_per_target.unwrap(), vec![Some(1.0)]);
    }
}
