//! Coarse-to-fine solves over source and target hierarchies.

use std::time::Instant;

use rayon::prelude::*;

use super::config::SolverConfig;
use super::eval::{log_sum_exp, DualProblem};
use super::solve::{solve_problem, Solution, SolverReport};
use crate::error::{Error, Result};
use crate::geometry::Cost;
use crate::measures::{SourceAtoms, SourceHierarchy, TargetHierarchy, TargetMeasure};
use crate::Point;

/// Initial fine-level potential from a coarse solution:
/// `ψ_k = −ε ln Σ_q m_q e^{−c(x_q, y_k)/ε} / S(x_q)`, with `S` built from the
/// coarse targets and potential (truncated at `cutoff` when given).
pub fn softmax_refine(
    coarse: &TargetMeasure,
    coarse_psi: &[f64],
    fine_points: &[Point],
    atoms: &SourceAtoms,
    epsilon: f64,
    cost: Cost,
    cutoff: Option<f64>,
) -> Result<Vec<f64>> {
    let problem = DualProblem::new(atoms, coarse, cost)?;
    if coarse_psi.len() != coarse.len() {
        return Err(Error::DimensionMismatch {
            expected: coarse.len(),
            got: coarse_psi.len(),
        });
    }
    let ln_s = problem.log_normalizers(coarse_psi, epsilon, &problem.candidates(cutoff)?);
    let base: Vec<(Point, f64)> = atoms
        .points()
        .iter()
        .zip(atoms.masses())
        .zip(&ln_s)
        .filter(|((_, &m), _)| m > 0.0)
        .map(|((x, &m), &l)| (*x, m.ln() - l))
        .collect();
    let psi: Vec<f64> = fine_points
        .par_iter()
        .map(|y| -epsilon * log_sum_exp(base.iter().map(|(x, b)| b - cost.eval(x, y) / epsilon)))
        .collect();
    if psi.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("refined potential"));
    }
    Ok(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    SourceOnly,
    TargetOnly,
    Combined,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" | "source-only" => Ok(Strategy::SourceOnly),
            "target" | "target-only" => Ok(Strategy::TargetOnly),
            "combined" => Ok(Strategy::Combined),
            _ => Err(Error::param("strategy", format!("unknown strategy '{s}'"))),
        }
    }
}

/// Level pairs `(i_s, i_t)` and ε per multilevel step.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelSchedule {
    pub l_mu: usize,
    pub l_nu: usize,
    pub steps: Vec<(usize, usize)>,
    pub epsilons: Vec<f64>,
}

impl MultilevelSchedule {
    /// `L_μ`, `L_ν` are the finest level indices. ε falls log-linearly from
    /// `epsilon_start` (default `epsilon`) at step 0 to `epsilon` at the end.
    pub fn new(l_mu: usize, l_nu: usize, epsilon: f64, epsilon_start: Option<f64>) -> Self {
        let l_max = l_mu.max(l_nu);
        let e0 = epsilon_start.unwrap_or(epsilon);
        let steps = (0..=l_max)
            .map(|l| ((l + l_mu).saturating_sub(l_max), (l + l_nu).saturating_sub(l_max)))
            .collect();
        let epsilons = (0..=l_max)
            .map(|l| {
                if l_max == 0 || l == l_max || e0 == epsilon {
                    epsilon
                } else {
                    let t = l as f64 / l_max as f64;
                    (e0.ln() * (1.0 - t) + epsilon.ln() * t).exp()
                }
            })
            .collect();
        Self { l_mu, l_nu, steps, epsilons }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultilevelOptions {
    /// ε of the coarsest step; the final step always uses `cfg.epsilon`.
    pub epsilon_start: Option<f64>,
}

/// Solve level by level, transferring potentials between steps.
///
/// Potentials are refined by [`softmax_refine`] when the target level
/// changes and carried over unchanged otherwise. ε-scaling from the
/// configuration applies to the first step only.
pub fn solve_multilevel(
    source: &SourceHierarchy,
    target: &TargetHierarchy,
    cfg: &SolverConfig,
    strategy: Strategy,
    opts: MultilevelOptions,
) -> Result<Solution> {
    cfg.validate()?;
    let start = Instant::now();
    let (src_levels, tgt_levels): (Vec<&SourceAtoms>, Vec<&TargetMeasure>) = match strategy {
        Strategy::SourceOnly => (source.levels().iter().collect(), vec![target.finest()]),
        Strategy::TargetOnly => (vec![source.finest()], target.levels().iter().collect()),
        Strategy::Combined => (source.levels().iter().collect(), target.levels().iter().collect()),
    };
    let sched = MultilevelSchedule::new(src_levels.len() - 1, tgt_levels.len() - 1, cfg.epsilon, opts.epsilon_start);
    let mut psi: Vec<f64> = vec![0.0; tgt_levels[0].len()];
    let mut report: Option<SolverReport> = None;
    let mut result = None;
    let mut prev: Option<(usize, f64, Option<f64>)> = None;
    for (l, (&(is, it), &eps)) in sched.steps.iter().zip(&sched.epsilons).enumerate() {
        let atoms = src_levels[is];
        let tgt = tgt_levels[it];
        if let Some((pit, peps, pcut)) = prev {
            if it != pit {
                psi = softmax_refine(tgt_levels[pit], &psi, tgt.points(), atoms, peps, cfg.cost, pcut)?;
            }
        }
        let step_cfg = SolverConfig {
            epsilon: eps,
            scaling_steps: if l == 0 { cfg.scaling_steps } else { 0 },
            ..*cfg
        };
        let problem = DualProblem::new(atoms, tgt, cfg.cost)?;
        let mut sol = solve_problem(&problem, &step_cfg, Some(&psi))?;
        for s in &mut sol.report.epsilon_stages {
            s.level = l;
            s.source_level = is;
            s.target_level = it;
        }
        log::info!(
            "level {l} (source {is}, target {it}): {} iterations, |g|_1={:e}",
            sol.report.iterations_per_level[0],
            sol.report.grad_l1
        );
        let last_cut = sol.report.cutoff_history.as_ref().and_then(|h| h.last().copied());
        prev = Some((it, eps, last_cut));
        psi = sol.potential.values().to_vec();
        match report.as_mut() {
            None => report = Some(sol.report.clone()),
            Some(r) => r.append(sol.report.clone()),
        }
        result = Some(sol);
    }
    let mut sol = result.expect("schedule has at least one step");
    let mut report = report.expect("schedule has at least one step");
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    sol.report = report;
    Ok(sol)
}
