//! Plans, conditional densities, and deterministic maps extracted from a
//! converged dual potential.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Cost;
use crate::measures::{SourceAtoms, TargetMeasure};
use crate::solver::{l1, log_sum_exp, Candidates, DualProblem};
use crate::Point;

/// Below this transported mass a target has no conditional density.
pub const STARVED_MASS: f64 = 1e-30;

/// The regularized plan `m_q p_j(x_q | ψ)` with per-atom normalizers cached.
#[derive(Debug)]
pub struct PlanView<'a> {
    problem: DualProblem<'a>,
    psi: Vec<f64>,
    epsilon: f64,
    cand: Candidates,
    ln_s: Vec<f64>,
    marginal: Vec<f64>,
    tolerance: f64,
}

/// Per-atom image of a deterministic map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSample {
    pub sources: Vec<Point>,
    pub images: Vec<Point>,
    /// Target index per atom, for the modal map.
    pub indices: Option<Vec<usize>>,
    /// `‖T(x) − x‖`.
    pub displacement: Vec<f64>,
}

impl MapSample {
    fn new(sources: Vec<Point>, images: Vec<Point>, indices: Option<Vec<usize>>) -> Self {
        let displacement = sources
            .iter()
            .zip(&images)
            .map(|(x, y)| crate::geometry::dist2(x, y).sqrt())
            .collect();
        Self {
            sources,
            images,
            indices,
            displacement,
        }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

impl<'a> PlanView<'a> {
    /// Plan for potential `psi`; `cutoff` restricts rows as in the solver.
    pub fn new(
        atoms: &'a SourceAtoms,
        target: &'a TargetMeasure,
        psi: &[f64],
        epsilon: f64,
        cost: Cost,
        cutoff: Option<f64>,
    ) -> Result<Self> {
        let problem = DualProblem::new(atoms, target, cost)?;
        let cand = problem.candidates(cutoff)?;
        let eval = problem.evaluate(psi, epsilon, &cand)?;
        let marginal = eval
            .gradient
            .iter()
            .zip(target.weights())
            .map(|(g, nu)| g + nu)
            .collect();
        let ln_s = problem.log_normalizers(psi, epsilon, &cand);
        Ok(Self {
            problem,
            psi: psi.to_vec(),
            epsilon,
            cand,
            ln_s,
            marginal,
            tolerance: 1e-3,
        })
    }

    /// Marginal error above which conditional quantities log a warning.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn atoms(&self) -> &'a SourceAtoms {
        self.problem.atoms()
    }

    pub fn target(&self) -> &'a TargetMeasure {
        self.problem.target()
    }

    pub fn potential(&self) -> &[f64] {
        &self.psi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Transported target masses `ν̃_j = Σ_q p_j(x_q) m_q`.
    pub fn target_marginal(&self) -> &[f64] {
        &self.marginal
    }

    /// `Σ_j |ν̃_j − ν_j|`.
    pub fn marginal_error(&self) -> f64 {
        let d: Vec<f64> = self
            .marginal
            .iter()
            .zip(self.target().weights())
            .map(|(a, b)| a - b)
            .collect();
        l1(&d)
    }

    fn score(&self, q: usize, j: usize) -> f64 {
        let x = &self.atoms().points()[q];
        self.problem.ln_weights()[j] + (self.psi[j] - self.problem.cost().eval(x, &self.target().points()[j])) / self.epsilon
    }

    fn for_each_candidate(&self, q: usize, mut f: impl FnMut(usize)) {
        match self.cand.targets_of(q) {
            Some(row) => row.iter().for_each(|&j| f(j as usize)),
            None => (0..self.target().len()).for_each(f),
        }
    }

    /// `p_j(x_q | ψ)` over the candidate targets of atom `q`.
    pub fn plan_density(&self, q: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_candidate(q, |j| out.push((j, (self.score(q, j) - self.ln_s[q]).exp())));
        out
    }

    fn check_feasible(&self) {
        let err = self.marginal_error();
        if err > self.tolerance {
            log::warn!("plan marginal error {err:e} exceeds {:e}; conditional densities are approximate", self.tolerance);
        }
    }

    fn transported(&self, j: usize) -> Result<f64> {
        let m = self.marginal[j];
        if !(m >= STARVED_MASS) {
            return Err(Error::TargetStarved { index: j, mass: m });
        }
        Ok(m)
    }

    /// `μ_j(x_q) = p_j(x_q) m_q / ν̃_j` at every atom.
    pub fn conditional_density(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.target().len() {
            return Err(Error::param("target index", format!("{j} out of range")));
        }
        self.check_feasible();
        let nu = self.transported(j)?;
        let masses = self.atoms().masses();
        Ok((0..self.atoms().len())
            .into_par_iter()
            .map(|q| {
                let member = match self.cand.targets_of(q) {
                    Some(row) => row.contains(&(j as u32)),
                    None => true,
                };
                if member && masses[q] > 0.0 {
                    (self.score(q, j) - self.ln_s[q]).exp() * masses[q] / nu
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// `T_j = Σ_q μ_j(x_q) x_q` for every target.
    pub fn conditional_barycenters(&self) -> Result<Vec<Point>> {
        self.check_feasible();
        let n = self.target().len();
        let masses = self.atoms().masses();
        let mut acc = vec![[0.0; 3]; n];
        for q in 0..self.atoms().len() {
            let x = self.atoms().points()[q];
            self.for_each_candidate(q, |j| {
                let w = (self.score(q, j) - self.ln_s[q]).exp() * masses[q];
                for d in 0..3 {
                    acc[j][d] += w * x[d];
                }
            });
        }
        (0..n)
            .map(|j| {
                let nu = self.transported(j)?;
                Ok(acc[j].map(|c| c / nu))
            })
            .collect()
    }

    pub fn conditional_barycenter(&self, j: usize) -> Result<Point> {
        let w = self.conditional_density(j)?;
        let mut t = [0.0; 3];
        for (x, wq) in self.atoms().points().iter().zip(&w) {
            for d in 0..3 {
                t[d] += wq * x[d];
            }
        }
        Ok(t)
    }

    /// `T(x_q) = Σ_j p_j(x_q) y_j`.
    pub fn barycentric_map(&self) -> MapSample {
        let ys = self.target().points();
        let images = (0..self.atoms().len())
            .into_par_iter()
            .map(|q| {
                let mut t = [0.0; 3];
                self.for_each_candidate(q, |j| {
                    let p = (self.score(q, j) - self.ln_s[q]).exp();
                    for d in 0..3 {
                        t[d] += p * ys[j][d];
                    }
                });
                t
            })
            .collect();
        MapSample::new(self.atoms().points().to_vec(), images, None)
    }

    /// `argmax_j ψ_j − c(x_q, y_j) + ε ln ν_j`, lowest index on ties.
    pub fn modal_map(&self) -> MapSample {
        let idx: Vec<usize> = (0..self.atoms().len())
            .into_par_iter()
            .map(|q| {
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                self.for_each_candidate(q, |j| {
                    let s = self.score(q, j);
                    if s > best.1 || (s == best.1 && j < best.0) {
                        best = (j, s);
                    }
                });
                best.0
            })
            .collect();
        let images = idx.iter().map(|&j| self.target().points()[j]).collect();
        MapSample::new(self.atoms().points().to_vec(), images, Some(idx))
    }

    /// Barycentric images of arbitrary points (e.g. mesh vertices), using all
    /// targets.
    pub fn barycentric_at(&self, points: &[Point]) -> Vec<Point> {
        let ys = self.target().points();
        let cost = self.problem.cost();
        let ln_nu = self.problem.ln_weights();
        points
            .par_iter()
            .map(|x| {
                let e: Vec<f64> = (0..ys.len())
                    .map(|j| ln_nu[j] + (self.psi[j] - cost.eval(x, &ys[j])) / self.epsilon)
                    .collect();
                let lse = log_sum_exp(e.iter().copied());
                let mut t = [0.0; 3];
                for (y, ej) in ys.iter().zip(&e) {
                    let p = (ej - lse).exp();
                    for d in 0..3 {
                        t[d] += p * y[d];
                    }
                }
                t
            })
            .collect()
    }
}

/// McCann interpolation `(1 − α) x + α T(x)`.
pub fn displacement_interpolate(map: &MapSample, alpha: f64) -> Result<Vec<Point>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} not in [0, 1]")));
    }
    Ok(map
        .sources
        .iter()
        .zip(&map.images)
        .map(|(x, t)| {
            if alpha == 0.0 {
                *x
            } else if alpha == 1.0 {
                *t
            } else {
                [0, 1, 2].map(|d| (1.0 - alpha) * x[d] + alpha * t[d])
            }
        })
        .collect())
}

/// A scalar field carried along a map.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTransfer {
    /// `field(x_q)` placed at `T(x_q)`.
    pub at_images: Vec<f64>,
    /// Modal maps only: value of the lowest-index atom sent to each target.
    pub first_per_target: Option<Vec<Option<f64>>>,
    /// Modal maps only: mass-weighted mean of the values sent to each target.
    pub mean_per_target: Option<Vec<Option<f64>>>,
}

pub fn transfer_field(map: &MapSample, field: &[f64], masses: &[f64], num_targets: usize) -> Result<FieldTransfer> {
    if field.len() != map.len() || masses.len() != map.len() {
        return Err(Error::DimensionMismatch {
            expected: map.len(),
            got: field.len().min(masses.len()),
        });
    }
    let (first, mean) = match &map.indices {
        None => (None, None),
        Some(idx) => {
            let mut first = vec![None; num_targets];
            let mut sum = vec![0.0; num_targets];
            let mut mass = vec![0.0; num_targets];
            for ((&j, &v), &m) in idx.iter().zip(field).zip(masses) {
                if j >= num_targets {
                    return Err(Error::param("map index", format!("{j} out of range")));
                }
                first[j].get_or_insert(v);
                sum[j] += m * v;
                mass[j] += m;
            }
            let mean = (0..num_targets)
                .map(|j| first[j].map(|f| if mass[j] > 0.0 { sum[j] / mass[j] } else { f }))
                .collect();
            (Some(first), Some(mean))
        }
    };
    Ok(FieldTransfer {
        at_images: field.to_vec(),
        first_per_target: first,
        mean_per_target: mean,
    })
}

/// CSV `x[,y[,z]],value`.
pub fn format_valued_points(dim: usize, points: &[Point], values: &[f64]) -> String {
    crate::measures::format_point_cloud(dim, points, values)
}

/// CSV `atom_index,weight`.
pub fn format_conditional_density(weights: &[f64]) -> String {
    let mut s = String::from("atom_index,weight\n");
    for (q, w) in weights.iter().enumerate() {
        let _ = writeln!(s, "{q},{w:?}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolverConfig};

    fn line_atoms(n: usize) -> SourceAtoms {
        SourceAtoms::uniform(1, (0..n).map(|i| [(i as f64 + 0.5) / n as f64, 0.0, 0.0]).collect()).unwrap()
    }

    fn two_by_two() -> (SourceAtoms, TargetMeasure) {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0]];
        (
            SourceAtoms::uniform(1, pts.clone()).unwrap(),
            TargetMeasure::new(1, pts, vec![0.75, 0.25]).unwrap(),
        )
    }

    #[test]
    fn plan_density_examples() {
        let (a, t) = two_by_two();
        let p = PlanView::new(&a, &t, &[0.0, 0.0], 1.0, Cost::Quadratic, None).unwrap();
        let row = p.plan_density(0);
        assert!((row[0].1 - 0.75 / 0.901633).abs() < 1e-6);
        assert!((row[0].1 - 0.83182).abs() < 5e-6);
        let p = PlanView::new(&a, &t, &[0.0, 0.0], 1e6, Cost::Quadratic, None).unwrap();
        for q in 0..2 {
            let row = p.plan_density(q);
            assert!((row[0].1 - 0.75).abs() < 1e-6 && (row[1].1 - 0.25).abs() < 1e-6);
        }
        let one = TargetMeasure::new(1, vec![[0.5, 0.0, 0.0]], vec![1.0]).unwrap();
        let p = PlanView::new(&a, &one, &[3.0], 0.01, Cost::Quadratic, None).unwrap();
        assert_eq!(p.plan_density(1), vec![(0, 1.0)]);
    }

    #[test]
    fn single_target_maps() {
        let a = line_atoms(10);
        let y = [0.3, 0.0, 0.0];
        let t = TargetMeasure::new(1, vec![y], vec![1.0]).unwrap();
        let p = PlanView::new(&a, &t, &[0.0], 0.1, Cost::Quadratic, None).unwrap();
        let mu = p.conditional_density(0).unwrap();
        for (m, w) in a.masses().iter().zip(&mu) {
            assert!((m - w).abs() < 1e-15);
        }
        assert!(p.barycentric_map().images.iter().all(|t| (t[0] - 0.3).abs() < 1e-15));
        assert!(p.modal_map().indices.unwrap().iter().all(|&j| j == 0));
    }

    #[test]
    fn flattened_plan_maps_to_mean() {
        let a = line_atoms(8);
        let t = TargetMeasure::new(1, vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![0.3, 0.7]).unwrap();
        let p = PlanView::new(&a, &t, &[0.0, 0.0], 1e6, Cost::Quadratic, None).unwrap();
        for img in p.barycentric_map().images {
            assert!((img[0] - 0.7).abs() < 1e-4);
        }
    }

    #[test]
    fn modal_ties_pick_lowest_index() {
        let a = SourceAtoms::uniform(1, vec![[0.5, 0.0, 0.0]]).unwrap();
        let t = TargetMeasure::uniform(1, vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let p = PlanView::new(&a, &t, &[0.0, 0.0], 0.1, Cost::Quadratic, None).unwrap();
        assert_eq!(p.modal_map().indices.unwrap(), vec![0]);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let a = line_atoms(5);
        let t = TargetMeasure::uniform(1, vec![[0.1, 0.0, 0.0], [0.9, 0.0, 0.0]]).unwrap();
        let p = PlanView::new(&a, &t, &[0.0, 0.0], 0.05, Cost::Quadratic, None).unwrap();
        let m = p.barycentric_map();
        assert_eq!(displacement_interpolate(&m, 0.0).unwrap(), m.sources);
        assert_eq!(displacement_interpolate(&m, 1.0).unwrap(), m.images);
        let half = displacement_interpolate(&m, 0.5).unwrap();
        for ((h, x), y) in half.iter().zip(&m.sources).zip(&m.images) {
            assert_eq!(h[0], 0.5 * x[0] + 0.5 * y[0]);
        }
        assert!(displacement_interpolate(&m, 1.5).is_err());
    }

    #[test]
    fn field_transfer_collisions() {
        let map = MapSample::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0]],
            vec![[0.5, 0.0, 0.0]; 2],
            Some(vec![0, 0]),
        );
        let r = transfer_field(&map, &[1.0, 3.0], &[0.25, 0.75], 2).unwrap();
        assert_eq!(r.first_per_target.as_ref().unwrap()[0], Some(1.0));
        assert_eq!(r.mean_per_target.as_ref().unwrap()[0], Some(2.5));
        assert_eq!(r.mean_per_target.unwrap()[1], None);
        let c = transfer_field(&map, &[4.0, 4.0], &[0.5, 0.5], 2).unwrap();
        assert!(c.at_images.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn identity_map_keeps_field() {
        let pts: Vec<Point> = (0..6).map(|i| [i as f64, 0.0, 0.0]).collect();
        let a = SourceAtoms::uniform(1, pts.clone()).unwrap();
        let t = TargetMeasure::uniform(1, pts).unwrap();
        let p = PlanView::new(&a, &t, &[0.0; 6], 1e-3, Cost::Quadratic, None).unwrap();
        let m = p.modal_map();
        assert_eq!(m.indices.as_ref().unwrap(), &(0..6).collect::<Vec<_>>());
        let field = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = transfer_field(&m, &field, a.masses(), 6).unwrap();
        let mean: Vec<f64> = r.mean_per_target.unwrap().into_iter().map(Option::unwrap).collect();
        assert_eq!(mean, field);
    }

    #[test]
    fn conditional_quantities_on_symmetric_instance() {
        let a = line_atoms(400);
        let t = TargetMeasure::uniform(1, vec![[0.25, 0.0, 0.0], [0.75, 0.0, 0.0]]).unwrap();
        let s = solve(&a, &t, &SolverConfig::new(1e-3), None).unwrap();
        let p = PlanView::new(&a, &t, s.potential.values(), 1e-3, Cost::Quadratic, None).unwrap();
        let b = p.conditional_barycenters().unwrap();
        assert!((b[0][0] - 0.25).abs() < 1e-2 && (b[1][0] - 0.75).abs() < 1e-2);
        for j in 0..2 {
            let w = p.conditional_density(j).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!((p.conditional_barycenter(j).unwrap()[0] - b[j][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_source() {
        let a = SourceAtoms::uniform(2, vec![[0.3, 0.6, 0.0]]).unwrap();
        let t = TargetMeasure::uniform(2, vec![[0.0; 3], [1.0, 1.0, 0.0]]).unwrap();
        let p = PlanView::new(&a, &t, &[0.0, 0.0], 0.5, Cost::Quadratic, None).unwrap();
        for b in p.conditional_barycenters().unwrap() {
            assert!((b[0] - 0.3).abs() < 1e-15 && (b[1] - 0.6).abs() < 1e-15);
        }
    }

    #[test]
    fn starved_target_is_an_error() {
        let a = SourceAtoms::uniform(1, vec![[0.0; 3]]).unwrap();
        let t = TargetMeasure::uniform(1, vec![[0.0; 3], [100.0, 0.0, 0.0]]).unwrap();
        let p = PlanView::new(&a, &t, &[0.0, 0.0], 1e-3, Cost::Quadratic, None).unwrap();
        assert!(matches!(p.conditional_density(1), Err(Error::TargetStarved { index: 1, .. })));
    }
}
