//! Truncated evaluation of the discrete dual functional and its gradient.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{covering_cost_indexed, Cost, SpatialIndex};
use crate::measures::{SourceAtoms, TargetMeasure};
use crate::Point;

/// Atoms per parallel work item. Fixed so that the merge order, and hence
/// every floating-point sum, does not depend on the worker count.
pub(crate) const ATOM_CHUNK: usize = 256;
/// Chunks whose partial gradients are held in memory at once.
const CHUNK_BATCH: usize = 64;

/// Source atoms, target measure, and cost with the target index prebuilt.
#[derive(Debug)]
pub struct DualProblem<'a> {
    atoms: &'a SourceAtoms,
    target: &'a TargetMeasure,
    cost: Cost,
    index: SpatialIndex,
    ln_nu: Vec<f64>,
    c0: f64,
}

/// Per-atom candidate target lists for one cutoff, in CSR layout.
///
/// With no cutoff every target is a candidate and no lists are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    cutoff: Option<f64>,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    forced: usize,
}

impl Candidates {
    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn is_full(&self) -> bool {
        self.cutoff.is_none()
    }

    /// Atoms whose set was empty and received their nearest target.
    pub fn forced(&self) -> usize {
        self.forced
    }

    /// Stored candidate pairs; zero for full candidate sets.
    pub fn pairs(&self) -> usize {
        self.indices.len()
    }

    fn row(&self, q: usize) -> &[u32] {
        &self.indices[self.offsets[q]..self.offsets[q + 1]]
    }

    /// Candidate targets of atom `q`, or `None` when every target is one.
    pub fn targets_of(&self, q: usize) -> Option<&[u32]> {
        (!self.is_full()).then(|| self.row(q))
    }

    fn same_sets(&self, other: &Candidates) -> bool {
        self.offsets == other.offsets && self.indices == other.indices
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// `ln Σ_q m_q / S_trunc(x_q)`.
    pub ln_d: f64,
    pub atoms_visited: usize,
    pub candidate_pairs: usize,
    pub forced_atoms: usize,
}

impl EvalResult {
    pub fn grad_l1(&self) -> f64 {
        self.gradient.iter().map(|g| g.abs()).sum()
    }
}

struct Partial {
    value: f64,
    grad: Vec<f64>,
    lnd_max: f64,
    lnd_sum: f64,
    pairs: usize,
}

impl<'a> DualProblem<'a> {
    pub fn new(atoms: &'a SourceAtoms, target: &'a TargetMeasure, cost: Cost) -> Result<Self> {
        if atoms.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: atoms.dim(),
            });
        }
        let index = SpatialIndex::new(target.points())?;
        let c0 = if cost.supports_ball_query() {
            covering_cost_indexed(atoms.points(), &index, cost)
        } else {
            atoms
                .points()
                .par_iter()
                .map(|x| nearest_by_scan(target.points(), x, cost).1)
                .reduce(|| 0.0, f64::max)
        };
        Ok(Self {
            atoms,
            target,
            cost,
            index,
            ln_nu: target.weights().iter().map(|w| w.ln()).collect(),
            c0,
        })
    }

    pub fn atoms(&self) -> &'a SourceAtoms {
        self.atoms
    }

    pub fn target(&self) -> &'a TargetMeasure {
        self.target
    }

    pub fn cost(&self) -> Cost {
        self.cost
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    /// Covering cost over the atom set.
    pub fn covering_cost(&self) -> f64 {
        self.c0
    }

    pub(crate) fn ln_weights(&self) -> &[f64] {
        &self.ln_nu
    }

    pub fn num_targets(&self) -> usize {
        self.target.len()
    }

    /// Candidate sets `{j : c(x_q, y_j) < C}`, each made nonempty by adding
    /// the nearest target where needed.
    pub fn candidates(&self, cutoff: Option<f64>) -> Result<Candidates> {
        let Some(cut) = cutoff else {
            return Ok(Candidates {
                cutoff: None,
                offsets: Vec::new(),
                indices: Vec::new(),
                forced: 0,
            });
        };
        if !cut.is_finite() {
            return Err(Error::NonFinite("truncation cutoff"));
        }
        let pts = self.atoms.points();
        let rows: Vec<(Vec<u32>, bool)> = pts
            .par_chunks(ATOM_CHUNK)
            .flat_map_iter(|chunk| {
                let mut buf = Vec::new();
                chunk
                    .iter()
                    .map(|x| self.candidate_row(x, cut, &mut buf))
                    .collect::<Vec<_>>()
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(pts.len() + 1);
        offsets.push(0);
        let total = rows.iter().map(|r| r.0.len()).sum();
        let mut indices = Vec::with_capacity(total);
        let mut forced = 0;
        for (row, f) in rows {
            indices.extend_from_slice(&row);
            offsets.push(indices.len());
            forced += f as usize;
        }
        Ok(Candidates {
            cutoff,
            offsets,
            indices,
            forced,
        })
    }

    fn candidate_row(&self, x: &Point, cut: f64, buf: &mut Vec<usize>) -> Result<(Vec<u32>, bool)> {
        if self.cost.supports_ball_query() {
            self.index.range_query_into(x, cut, self.cost, buf)?;
        } else {
            buf.clear();
            buf.extend(
                (0..self.target.len()).filter(|&j| self.cost.eval(x, &self.target.points()[j]) < cut),
            );
        }
        if buf.is_empty() {
            Ok((vec![self.nearest(x) as u32], true))
        } else {
            Ok((buf.iter().map(|&j| j as u32).collect(), false))
        }
    }

    fn nearest(&self, x: &Point) -> usize {
        if self.cost.supports_ball_query() {
            self.index.nearest(x)
        } else {
            nearest_by_scan(self.target.points(), x, self.cost).0
        }
    }

    /// `J(ψ)` and `∇J(ψ)` over the given candidate sets.
    pub fn evaluate(&self, psi: &[f64], epsilon: f64, cand: &Candidates) -> Result<EvalResult> {
        let n = self.target.len();
        if psi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: psi.len(),
            });
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("dual potential"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("{epsilon} must be positive")));
        }
        if !cand.is_full() && cand.offsets.len() != self.atoms.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.atoms.len() + 1,
                got: cand.offsets.len(),
            });
        }
        let nq = self.atoms.len();
        let n_chunks = nq.div_ceil(ATOM_CHUNK);
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        let (mut lnd_max, mut lnd_sum) = (f64::NEG_INFINITY, 0.0);
        let mut pairs = 0;
        for batch_start in (0..n_chunks).step_by(CHUNK_BATCH) {
            let batch_end = (batch_start + CHUNK_BATCH).min(n_chunks);
            let parts: Vec<Partial> = (batch_start..batch_end)
                .into_par_iter()
                .map(|c| self.eval_chunk(psi, epsilon, cand, c * ATOM_CHUNK..((c + 1) * ATOM_CHUNK).min(nq)))
                .collect();
            for p in parts {
                value += p.value;
                for (g, pg) in grad.iter_mut().zip(&p.grad) {
                    *g += pg;
                }
                (lnd_max, lnd_sum) = merge_lse(lnd_max, lnd_sum, p.lnd_max, p.lnd_sum);
                pairs += p.pairs;
            }
        }
        let mut lin = 0.0;
        for ((g, &nu), &p) in grad.iter_mut().zip(self.target.weights()).zip(psi) {
            *g -= nu;
            lin += p * nu;
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("dual functional"));
        }
        Ok(EvalResult {
            value: value - lin,
            gradient: grad,
            ln_d: lnd_max + lnd_sum.ln(),
            atoms_visited: nq,
            candidate_pairs: pairs,
            forced_atoms: cand.forced,
        })
    }

    fn eval_chunk(&self, psi: &[f64], eps: f64, cand: &Candidates, range: std::ops::Range<usize>) -> Partial {
        let n = self.target.len();
        let ys = self.target.points();
        let mut grad = vec![0.0; n];
        let mut value = 0.0;
        let (mut lnd_max, mut lnd_sum) = (f64::NEG_INFINITY, 0.0);
        let mut pairs = 0;
        let mut expo: Vec<f64> = Vec::new();
        let all: Vec<u32> = if cand.is_full() { (0..n as u32).collect() } else { Vec::new() };
        for q in range {
            let m = self.atoms.masses()[q];
            let x = &self.atoms.points()[q];
            let row = if cand.is_full() { &all[..] } else { cand.row(q) };
            pairs += row.len();
            expo.clear();
            let mut emax = f64::NEG_INFINITY;
            for &j in row {
                let j = j as usize;
                let e = self.ln_nu[j] + (psi[j] - self.cost.eval(x, &ys[j])) / eps;
                emax = emax.max(e);
                expo.push(e);
            }
            let mut s = 0.0;
            for e in expo.iter_mut() {
                *e = (*e - emax).exp();
                s += *e;
            }
            let ln_s = emax + s.ln();
            if m > 0.0 {
                value += m * eps * ln_s;
                for (&j, &e) in row.iter().zip(&expo) {
                    grad[j as usize] += m * e / s;
                }
                (lnd_max, lnd_sum) = merge_lse(lnd_max, lnd_sum, m.ln() - ln_s, 1.0);
            }
        }
        Partial {
            value,
            grad,
            lnd_max,
            lnd_sum,
            pairs,
        }
    }

    /// `ln S(x_q)` at every atom.
    pub fn log_normalizers(&self, psi: &[f64], epsilon: f64, cand: &Candidates) -> Vec<f64> {
        let ys = self.target.points();
        let n = self.target.len();
        (0..self.atoms.len())
            .into_par_iter()
            .with_min_len(ATOM_CHUNK)
            .map(|q| {
                let x = &self.atoms.points()[q];
                let term = |j: usize| self.ln_nu[j] + (psi[j] - self.cost.eval(x, &ys[j])) / epsilon;
                if cand.is_full() {
                    log_sum_exp((0..n).map(term))
                } else {
                    log_sum_exp(cand.row(q).iter().map(|&j| term(j as usize)))
                }
            })
            .collect()
    }

    /// Row `q` of the plan as `(target, p_j(x_q))` pairs over the candidates.
    pub fn plan_row(&self, psi: &[f64], epsilon: f64, cand: &Candidates, q: usize) -> Vec<(usize, f64)> {
        let x = &self.atoms.points()[q];
        let ys = self.target.points();
        let idx: Vec<usize> = if cand.is_full() {
            (0..self.target.len()).collect()
        } else {
            cand.row(q).iter().map(|&j| j as usize).collect()
        };
        let e: Vec<f64> = idx
            .iter()
            .map(|&j| self.ln_nu[j] + (psi[j] - self.cost.eval(x, &ys[j])) / epsilon)
            .collect();
        let lse = log_sum_exp(e.iter().copied());
        idx.into_iter().zip(e).map(|(j, e)| (j, (e - lse).exp())).collect()
    }

    pub(crate) fn same_candidates(a: &Candidates, b: &Candidates) -> bool {
        a.cutoff.is_none() == b.cutoff.is_none() && a.same_sets(b)
    }
}

fn nearest_by_scan(ys: &[Point], x: &Point, cost: Cost) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, y) in ys.iter().enumerate() {
        let c = cost.eval(x, y);
        if c < best.1 {
            best = (j, c);
        }
    }
    best
}

/// Stable `ln Σ exp(a_i)`; `-∞` for an empty sequence.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Combine two scaled sums `e^{m}·s`.
fn merge_lse(m1: f64, s1: f64, m2: f64, s2: f64) -> (f64, f64) {
    if m2 == f64::NEG_INFINITY {
        (m1, s1)
    } else if m1 == f64::NEG_INFINITY {
        (m2, s2)
    } else if m1 >= m2 {
        (m1, s1 + s2 * (m2 - m1).exp())
    } else {
        (m2, s2 + s1 * (m1 - m2).exp())
    }
}

/// Untruncated `J(ψ)` and `∇J(ψ)`.
pub fn evaluate_dual(
    atoms: &SourceAtoms,
    target: &TargetMeasure,
    cost: Cost,
    psi: &[f64],
    epsilon: f64,
) -> Result<EvalResult> {
    let p = DualProblem::new(atoms, target, cost)?;
    p.evaluate(psi, epsilon, &p.candidates(None)?)
}
