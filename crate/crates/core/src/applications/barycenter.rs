//! Wasserstein barycenters of several source measures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dist2, Cost};
use crate::maps::PlanView;
use crate::measures::{SourceAtoms, SourceHierarchy, TargetHierarchy, TargetMeasure};
use crate::solver::{solve, solve_multilevel, Solution, SolverConfig, Strategy};
use crate::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterConfig {
    /// Barycentric weights `λ_i`, one per source.
    pub lambda: Vec<f64>,
    /// Number of support points `N_b`.
    pub support_size: usize,
    /// Lloyd damping `θ`.
    pub damping: f64,
    /// Weight step of the general update.
    pub alpha: f64,
    /// Location step of the general update.
    pub beta: f64,
    pub tol_nu: f64,
    pub tol_y: f64,
    pub max_outer: usize,
    /// Lloyd stops once the RMS point movement falls to this.
    pub rms_tol: f64,
    pub solver: SolverConfig,
}

impl BarycenterConfig {
    /// Equal weights over `k` sources. Both general-update steps default to
    /// `N_b`, which makes the location step a full Lloyd step at uniform
    /// weights.
    pub fn new(k: usize, support_size: usize) -> Self {
        Self {
            lambda: vec![1.0 / k.max(1) as f64; k],
            support_size,
            damping: 0.5,
            alpha: support_size as f64,
            beta: support_size as f64,
            tol_nu: 1e-4,
            tol_y: 1e-4,
            max_outer: 100,
            rms_tol: 1e-4,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.lambda.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.lambda.len(),
            });
        }
        if self.lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::param("lambda", "weights must be positive"));
        }
        let s: f64 = self.lambda.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::param("lambda", format!("weights sum to {s}, not 1")));
        }
        if self.support_size == 0 {
            return Err(Error::param("support_size", "must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param("damping", format!("{} not in (0, 1]", self.damping)));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("tol_nu", self.tol_nu),
            ("tol_y", self.tol_y),
            ("rms_tol", self.rms_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        if self.solver.cost != Cost::Quadratic {
            return Err(Error::UnsupportedCost(format!(
                "barycenters need the quadratic cost, got {}",
                self.solver.cost
            )));
        }
        self.solver.validate()
    }
}

/// One input measure, optionally with a coarse-to-fine hierarchy used for the
/// first inner solve.
#[derive(Debug, Clone, Copy)]
pub struct BarycenterSource<'a> {
    atoms: &'a SourceAtoms,
    hierarchy: Option<&'a SourceHierarchy>,
}

impl<'a> BarycenterSource<'a> {
    pub fn new(atoms: &'a SourceAtoms) -> Self {
        Self { atoms, hierarchy: None }
    }

    pub fn with_hierarchy(hierarchy: &'a SourceHierarchy) -> Self {
        Self {
            atoms: hierarchy.finest(),
            hierarchy: Some(hierarchy),
        }
    }

    pub fn atoms(&self) -> &'a SourceAtoms {
        self.atoms
    }
}

impl<'a> From<&'a SourceAtoms> for BarycenterSource<'a> {
    fn from(a: &'a SourceAtoms) -> Self {
        Self::new(a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterIterate {
    pub iteration: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// `sqrt(mean_j ‖y_j' − y_j‖²)`.
    pub rms_movement: f64,
    /// `Σ_i λ_i W_ε(μ_i, ν)` from the inner dual values.
    pub objective: f64,
    pub inner_iterations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub trace: Vec<OuterIterate>,
    pub converged: bool,
    /// Last inner potentials, gauge-fixed.
    pub potentials: Vec<Vec<f64>>,
}

struct Inner {
    solution: Solution,
    barycenters: Vec<Point>,
}

fn inner_solves(
    sources: &[BarycenterSource],
    target: &TargetMeasure,
    cfg: &SolverConfig,
    warm: &[Option<Vec<f64>>],
) -> Result<Vec<Inner>> {
    sources
        .par_iter()
        .zip(warm)
        .enumerate()
        .map(|(i, (src, psi0))| {
            let solution = match (psi0, src.hierarchy) {
                (None, Some(h)) if h.num_levels() > 1 => {
                    let th = TargetHierarchy::from_levels(vec![target.clone()])?;
                    solve_multilevel(h, &th, cfg, Strategy::SourceOnly, Default::default())?
                }
                _ => solve(src.atoms, target, cfg, psi0.as_deref())?,
            };
            if !solution.converged() {
                log::warn!("inner solve {i} stopped at |g|_1={:e}", solution.grad_l1());
            }
            let cutoff = solution.report.cutoff_history.as_ref().and_then(|h| h.last().copied());
            let plan = PlanView::new(src.atoms, target, solution.potential.values(), cfg.epsilon, cfg.cost, cutoff)?
                .with_tolerance(cfg.tolerance);
            let barycenters = plan.conditional_barycenters()?;
            Ok(Inner { solution, barycenters })
        })
        .collect()
}

fn check_inputs(sources: &[BarycenterSource], cfg: &BarycenterConfig, y0: &[Point]) -> Result<usize> {
    if sources.is_empty() {
        return Err(Error::Empty("barycenter sources"));
    }
    cfg.validate(sources.len())?;
    if y0.len() != cfg.support_size {
        return Err(Error::DimensionMismatch {
            expected: cfg.support_size,
            got: y0.len(),
        });
    }
    let dim = sources[0].atoms.dim();
    if let Some(s) = sources.iter().find(|s| s.atoms.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: s.atoms.dim(),
        });
    }
    Ok(dim)
}

fn rms(a: &[Point], b: &[Point]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| dist2(x, y)).sum::<f64>() / a.len() as f64).sqrt()
}

fn objective(inner: &[Inner], lambda: &[f64]) -> f64 {
    inner.iter().zip(lambda).map(|(r, l)| -l * r.solution.value).sum()
}

/// `n_b` distinct atoms of `source` drawn with `seed`, in atom order.
pub fn sample_support(source: &SourceAtoms, n_b: usize, seed: u64) -> Result<Vec<Point>> {
    if n_b == 0 || n_b > source.len() {
        return Err(Error::param("n_b", format!("{n_b} not in 1..={}", source.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, source.len(), n_b).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|q| source.points()[q]).collect())
}

/// Fixed-weight barycenter by damped Lloyd iteration
/// `y_j ← (1 − θ) y_j + θ Σ_i λ_i T_{i,j}`.
pub fn barycenter_lloyd(
    sources: &[BarycenterSource],
    cfg: &BarycenterConfig,
    y0: Vec<Point>,
) -> Result<BarycenterResult> {
    let dim = check_inputs(sources, cfg, &y0)?;
    let mut y = y0;
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; sources.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    for t in 1..=cfg.max_outer {
        let target = TargetMeasure::uniform(dim, y.clone())?;
        let inner = inner_solves(sources, &target, &cfg.solver, &warm)?;
        let th = cfg.damping;
        let next: Vec<Point> = (0..y.len())
            .map(|j| {
                let mut avg = [0.0; 3];
                for (r, l) in inner.iter().zip(&cfg.lambda) {
                    for d in 0..3 {
                        avg[d] += l * r.barycenters[j][d];
                    }
                }
                [0, 1, 2].map(|d| (1.0 - th) * y[j][d] + th * avg[d])
            })
            .collect();
        let move_rms = rms(&y, &next);
        trace.push(OuterIterate {
            iteration: t,
            points: next.clone(),
            weights: target.weights().to_vec(),
            rms_movement: move_rms,
            objective: objective(&inner, &cfg.lambda),
            inner_iterations: inner.iter().map(|r| r.solution.report.iterations_per_level.iter().sum()).collect(),
        });
        log::info!("lloyd {t}: rms movement {move_rms:e}");
        warm = inner.into_iter().map(|r| Some(r.solution.potential.into_values())).collect();
        y = next;
        if move_rms <= cfg.rms_tol {
            converged = true;
            break;
        }
    }
    let n = y.len();
    Ok(BarycenterResult {
        points: y,
        weights: vec![1.0 / n as f64; n],
        trace,
        converged,
        potentials: warm.into_iter().flatten().collect(),
    })
}

/// One positivity-preserving update of weights and locations.
///
/// `potentials[i]` are the gauge-fixed duals of source `i` and
/// `barycenters[i][j]` its conditional barycenters `T_{i,j}`.
pub fn barycenter_general_step(
    points: &[Point],
    weights: &[f64],
    potentials: &[Vec<f64>],
    barycenters: &[Vec<Point>],
    lambda: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<(Vec<Point>, Vec<f64>)> {
    let n = points.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    if potentials.len() != lambda.len() || barycenters.len() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda.len(),
            got: potentials.len().min(barycenters.len()),
        });
    }
    if let Some(bad) = potentials.iter().map(Vec::len).chain(barycenters.iter().map(Vec::len)).find(|&l| l != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad });
    }
    let dnu: Vec<f64> = (0..n).map(|j| potentials.iter().zip(lambda).map(|(p, l)| l * p[j]).sum()).collect();
    let raw: Vec<f64> = weights.iter().zip(&dnu).map(|(w, d)| w * (-alpha * w * d).exp()).collect();
    let total: f64 = raw.iter().sum();
    let nu: Vec<f64> = raw.iter().map(|w| w / total).collect();
    if let Some(j) = nu.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::ZeroWeight(j));
    }
    let y = (0..n)
        .map(|j| {
            let mut dy = [0.0; 3];
            for (b, l) in barycenters.iter().zip(lambda) {
                for d in 0..3 {
                    dy[d] += l * weights[j] * (points[j][d] - b[j][d]);
                }
            }
            [0, 1, 2].map(|d| points[j][d] - beta * dy[d])
        })
        .collect();
    Ok((y, nu))
}

fn rel_change(new: impl Iterator<Item = f64> + Clone, old: impl Iterator<Item = f64> + Clone) -> f64 {
    let diff: f64 = new.zip(old.clone()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let base: f64 = old.map(|b| b * b).sum::<f64>().sqrt();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// Free-weight barycenter: repeat [`barycenter_general_step`] until both the
/// relative weight change and the relative location change are below their
/// tolerances.
pub fn barycenter_general(
    sources: &[BarycenterSource],
    cfg: &BarycenterConfig,
    y0: Vec<Point>,
    nu0: Option<Vec<f64>>,
) -> Result<BarycenterResult> {
    let dim = check_inputs(sources, cfg, &y0)?;
    let n = y0.len();
    let mut y = y0;
    let mut nu = nu0.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; sources.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    for t in 1..=cfg.max_outer {
        let target = TargetMeasure::normalized(dim, y.clone(), nu.clone())?;
        let inner = inner_solves(sources, &target, &cfg.solver, &warm)?;
        let pots: Vec<Vec<f64>> = inner.iter().map(|r| r.solution.potential.values().to_vec()).collect();
        let bars: Vec<Vec<Point>> = inner.iter().map(|r| r.barycenters.clone()).collect();
        let (y2, nu2) = barycenter_general_step(&y, target.weights(), &pots, &bars, &cfg.lambda, cfg.alpha, cfg.beta)?;
        let dn = rel_change(nu2.iter().copied(), target.weights().iter().copied());
        let dy = rel_change(y2.iter().flatten().copied(), y.iter().flatten().copied());
        trace.push(OuterIterate {
            iteration: t,
            points: y2.clone(),
            weights: nu2.clone(),
            rms_movement: rms(&y, &y2),
            objective: objective(&inner, &cfg.lambda),
            inner_iterations: inner.iter().map(|r| r.solution.report.iterations_per_level.iter().sum()).collect(),
        });
        log::info!("general {t}: dnu {dn:e} dy {dy:e}");
        warm = pots.into_iter().map(Some).collect();
        y = y2;
        nu = nu2;
        if dn <= cfg.tol_nu && dy <= cfg.tol_y {
            converged = true;
            break;
        }
    }
    Ok(BarycenterResult {
        points: y,
        weights: nu,
        trace,
        converged,
        potentials: warm.into_iter().flatten().collect(),
    })
}

/// CSV `iteration,rms_movement,objective`.
pub fn format_trace(trace: &[OuterIterate]) -> String {
    let mut s = String::from("iteration,rms_movement,objective\n");
    for it in trace {
        s.push_str(&format!("{},{:?},{:?}\n", it.iteration, it.rms_movement, it.objective));
    }
    s
}
