use std::time::Instant;

use serde::Serialize;

use super::config::SolverConfig;
use super::eval::{Candidates, DualProblem, EvalResult};
use super::lbfgs::{l1, lbfgs_minimize, Objective, Status};
use super::potential::DualPotential;
use super::truncation::{Truncation, TruncationState};
use crate::error::{Error, Result};
use crate::measures::{SourceAtoms, TargetMeasure};

/// `[ε·10^{N_s}, …, ε·10, ε]`.
pub fn epsilon_schedule(epsilon: f64, steps: usize) -> Vec<f64> {
    (0..=steps).rev().map(|k| epsilon * 10f64.powi(k as i32)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub level: usize,
    pub source_level: usize,
    pub target_level: usize,
    pub epsilon: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_l1: f64,
    pub value: f64,
    pub status: Status,
    pub num_atoms: usize,
    pub num_targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations_per_level: Vec<usize>,
    pub evaluations: usize,
    pub grad_l1: f64,
    pub wall_ms: f64,
    pub epsilon_stages: Vec<StageReport>,
    pub cutoff_history: Option<Vec<f64>>,
}

impl SolverReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn final_stage(&self) -> &StageReport {
        self.epsilon_stages.last().expect("at least one stage")
    }

    pub fn status(&self) -> Status {
        self.final_stage().status
    }

    pub(crate) fn append(&mut self, other: SolverReport) {
        self.converged = other.converged;
        self.iterations_per_level.extend(other.iterations_per_level);
        self.evaluations += other.evaluations;
        self.grad_l1 = other.grad_l1;
        self.wall_ms += other.wall_ms;
        self.epsilon_stages.extend(other.epsilon_stages);
        if let Some(h) = other.cutoff_history {
            self.cutoff_history.get_or_insert_with(Vec::new).extend(h);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Final potential, gauge-fixed to zero `ν`-mean.
    pub potential: DualPotential,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub report: SolverReport,
}

impl Solution {
    pub fn grad_l1(&self) -> f64 {
        l1(&self.gradient)
    }

    pub fn converged(&self) -> bool {
        self.report.converged
    }
}

/// The dual functional as an optimization objective with cutoff refresh.
pub(crate) struct DualObjective<'p, 'a> {
    problem: &'p DualProblem<'a>,
    epsilon: f64,
    truncation: Truncation,
    pub state: TruncationState,
    pub cand: Candidates,
    last: Option<(Vec<f64>, f64)>,
    pub cutoff_history: Vec<f64>,
}

impl<'p, 'a> DualObjective<'p, 'a> {
    pub fn new(problem: &'p DualProblem<'a>, epsilon: f64, truncation: Truncation, psi0: &[f64]) -> Result<Self> {
        let mut state = TruncationState::new(psi0, problem.target().weights(), problem.covering_cost());
        state.cutoff = truncation.bootstrap_cutoff(&state, epsilon)?;
        let cand = problem.candidates(state.cutoff)?;
        let mut cutoff_history = Vec::new();
        cutoff_history.extend(state.cutoff);
        Ok(Self {
            problem,
            epsilon,
            truncation,
            state,
            cand,
            last: None,
            cutoff_history,
        })
    }

    pub fn eval_full(&mut self, x: &[f64]) -> Result<EvalResult> {
        let r = self.problem.evaluate(x, self.epsilon, &self.cand)?;
        self.last = Some((x.to_vec(), r.ln_d));
        Ok(r)
    }
}

impl Objective for DualObjective<'_, '_> {
    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let r = self.eval_full(x)?;
        Ok((r.value, r.gradient))
    }

    fn accept(&mut self, x: &[f64], f: f64, _g: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        if self.truncation == Truncation::None {
            return Ok(None);
        }
        let ln_d = match &self.last {
            Some((lx, d)) if lx.as_slice() == x => *d,
            _ => self.eval_full(x)?.ln_d,
        };
        self.state.set_potential(x);
        self.state.abs_j = f.abs();
        self.state.ln_d = ln_d;
        let cutoff = self.truncation.cutoff(&self.state, self.epsilon)?;
        self.state.cutoff = cutoff;
        self.cutoff_history.extend(cutoff);
        let cand = self.problem.candidates(cutoff)?;
        if DualProblem::same_candidates(&cand, &self.cand) {
            return Ok(None);
        }
        self.cand = cand;
        let r = self.eval_full(x)?;
        Ok(Some((r.value, r.gradient)))
    }
}

pub(crate) struct StageOutcome {
    pub psi: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub report: StageReport,
    pub cutoffs: Vec<f64>,
}

/// One L-BFGS run at a fixed ε.
pub(crate) fn solve_stage(
    problem: &DualProblem,
    cfg: &SolverConfig,
    epsilon: f64,
    psi0: &[f64],
) -> Result<StageOutcome> {
    let mut obj = DualObjective::new(problem, epsilon, cfg.truncation, psi0)?;
    let out = lbfgs_minimize(&mut obj, psi0, &cfg.lbfgs())?;
    log::debug!(
        "stage eps={epsilon:e}: {} iterations, {} evaluations, |g|_1={:e}, {}",
        out.iterations,
        out.evaluations,
        l1(&out.gradient),
        out.status.as_str()
    );
    let stage = StageReport {
        level: 0,
        source_level: 0,
        target_level: 0,
        epsilon,
        iterations: out.iterations,
        evaluations: out.evaluations,
        grad_l1: l1(&out.gradient),
        value: out.value,
        status: out.status,
        num_atoms: problem.atoms().len(),
        num_targets: problem.num_targets(),
    };
    Ok(StageOutcome {
        psi: out.x,
        value: out.value,
        gradient: out.gradient,
        report: stage,
        cutoffs: obj.cutoff_history,
    })
}

/// Minimize the dual functional over the ε schedule, warm-starting each stage.
pub fn solve(
    atoms: &SourceAtoms,
    target: &TargetMeasure,
    cfg: &SolverConfig,
    psi0: Option<&[f64]>,
) -> Result<Solution> {
    cfg.validate()?;
    let problem = DualProblem::new(atoms, target, cfg.cost)?;
    solve_problem(&problem, cfg, psi0)
}

pub(crate) fn solve_problem(problem: &DualProblem, cfg: &SolverConfig, psi0: Option<&[f64]>) -> Result<Solution> {
    let start = Instant::now();
    let n = problem.num_targets();
    let mut psi = match psi0 {
        Some(p) if p.len() != n => {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        Some(p) => p.to_vec(),
        None => vec![0.0; n],
    };
    let mut stages = Vec::new();
    let mut history = Vec::new();
    let mut evaluations = 0;
    let mut iterations = 0;
    let mut value = f64::NAN;
    let mut grad = Vec::new();
    for eps in epsilon_schedule(cfg.epsilon, cfg.scaling_steps) {
        let st = solve_stage(problem, cfg, eps, &psi)?;
        psi = st.psi;
        value = st.value;
        grad = st.gradient;
        evaluations += st.report.evaluations;
        iterations += st.report.iterations;
        history.extend(st.cutoffs);
        stages.push(st.report);
    }
    let last = stages.last().expect("schedule is nonempty");
    let report = SolverReport {
        converged: last.status == Status::Converged,
        iterations_per_level: vec![iterations],
        evaluations,
        grad_l1: last.grad_l1,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        epsilon_stages: stages,
        cutoff_history: (cfg.truncation != Truncation::None).then_some(history),
    };
    Ok(Solution {
        potential: DualPotential::new(psi)?.gauge_fixed(problem.target().weights()),
        value,
        gradient: grad,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = epsilon_schedule(1e-6, 2);
        assert_eq!(s.len(), 3);
        for (a, b) in s.iter().zip([1e-4, 1e-5, 1e-6]) {
            assert!((a - b).abs() < 1e-18);
        }
        assert_eq!(epsilon_schedule(1e-2, 0), vec![1e-2]);
        assert_eq!(epsilon_schedule(1.0, 3), vec![1000.0, 100.0, 10.0, 1.0]);
    }
}
