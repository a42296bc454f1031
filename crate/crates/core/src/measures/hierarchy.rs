//! Coarse-to-fine hierarchies of target measures and source atom clouds.
//!
//! Level 0 is the coarsest; the last level is the input measure.

use super::kmeans::{kmeans, means};
use super::types::{SourceAtoms, TargetMeasure};
use crate::error::{Error, Result};
use crate::geometry::SpatialIndex;

#[derive(Debug, Clone)]
pub struct TargetHierarchy {
    levels: Vec<TargetMeasure>,
    parents: Vec<Vec<usize>>,
}

impl TargetHierarchy {
    pub fn levels(&self) -> &[TargetMeasure] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &TargetMeasure {
        &self.levels[l]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &TargetMeasure {
        self.levels.last().expect("hierarchy has at least one level")
    }

    /// Cluster in level `l` of each point in level `l + 1`.
    pub fn parents(&self, l: usize) -> &[usize] {
        &self.parents[l]
    }

    /// Hierarchy from already-built levels, e.g. loaded from disk.
    pub fn from_levels(levels: Vec<TargetMeasure>) -> Result<Self> {
        check_counts(levels.iter().map(TargetMeasure::len))?;
        let parents = levels
            .windows(2)
            .map(|w| nearest_parents(w[0].points(), w[1].points()))
            .collect::<Result<_>>()?;
        Ok(Self { levels, parents })
    }
}

#[derive(Debug, Clone)]
pub struct SourceHierarchy {
    levels: Vec<SourceAtoms>,
    parents: Vec<Vec<usize>>,
}

impl SourceHierarchy {
    pub fn levels(&self) -> &[SourceAtoms] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &SourceAtoms {
        &self.levels[l]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &SourceAtoms {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn parents(&self, l: usize) -> &[usize] {
        &self.parents[l]
    }

    pub fn from_levels(levels: Vec<SourceAtoms>) -> Result<Self> {
        check_counts(levels.iter().map(SourceAtoms::len))?;
        let parents = levels
            .windows(2)
            .map(|w| nearest_parents(w[0].points(), w[1].points()))
            .collect::<Result<_>>()?;
        Ok(Self { levels, parents })
    }
}

fn nearest_parents(coarse: &[crate::Point], fine: &[crate::Point]) -> Result<Vec<usize>> {
    let index = SpatialIndex::new(coarse)?;
    Ok(fine.iter().map(|p| index.nearest(p)).collect())
}

fn check_counts(counts: impl Iterator<Item = usize>) -> Result<()> {
    let counts: Vec<usize> = counts.collect();
    if counts.is_empty() {
        return Err(Error::Empty("hierarchy levels"));
    }
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(
            "level sizes",
            format!("{counts:?} must strictly increase toward the finest level"),
        ));
    }
    Ok(())
}

fn check_sizes(level_sizes: &[usize], n: usize) -> Result<()> {
    if level_sizes.contains(&0) {
        return Err(Error::param("level sizes", "sizes must be positive"));
    }
    if let Some(&big) = level_sizes.iter().find(|&&s| s > n) {
        return Err(Error::param(
            "level sizes",
            format!("requested {big} points but the finest level has {n}"),
        ));
    }
    check_counts(level_sizes.iter().copied())?;
    if level_sizes.last() != Some(&n) {
        return Err(Error::param(
            "level sizes",
            format!("last size must equal the input size {n}"),
        ));
    }
    Ok(())
}

/// Coarsen `target` by repeated k-means, finest to coarsest.
///
/// Coarse points are plain cluster centroids; coarse weights are member sums
/// accumulated in ascending child order. The level built from level `l + 1`
/// uses seed `seed + l`.
pub fn build_target_hierarchy(
    target: &TargetMeasure,
    level_sizes: &[usize],
    seed: u64,
) -> Result<TargetHierarchy> {
    check_sizes(level_sizes, target.len())?;
    let mut levels = vec![target.clone()];
    let mut parents = Vec::new();
    for l in (0..level_sizes.len() - 1).rev() {
        let fine = levels.last().unwrap();
        let k = level_sizes[l];
        let cl = kmeans(fine.points(), None, k, seed.wrapping_add(l as u64))?;
        let mut w = vec![0.0; k];
        for (&a, &wi) in cl.assignment.iter().zip(fine.weights()) {
            w[a] += wi;
        }
        let coarse = TargetMeasure::new(fine.dim(), cl.centroids, w)?;
        levels.push(coarse);
        parents.push(cl.assignment);
    }
    levels.reverse();
    parents.reverse();
    Ok(TargetHierarchy { levels, parents })
}

/// Coarsen a source atom cloud.
///
/// Coarse locations are mass-weighted cluster centroids, coarse quadrature
/// volumes sum the member volumes, and the coarse density is the fine density
/// at the fine atom nearest to the coarse location.
pub fn build_source_hierarchy(
    fine: &SourceAtoms,
    level_sizes: &[usize],
    seed: u64,
) -> Result<SourceHierarchy> {
    check_sizes(level_sizes, fine.len())?;
    let fine_index = SpatialIndex::new(fine.points())?;
    let mut levels = vec![fine.clone()];
    let mut parents = Vec::new();
    for l in (0..level_sizes.len() - 1).rev() {
        let prev = levels.last().unwrap();
        let k = level_sizes[l];
        let cl = kmeans(prev.points(), Some(prev.masses()), k, seed.wrapping_add(l as u64))?;
        let m = prev.masses();
        let centroids = means(prev.points(), &|i| m[i], &cl.assignment, k);
        let mut vol = vec![0.0; k];
        for (&a, &v) in cl.assignment.iter().zip(prev.volumes()) {
            vol[a] += v;
        }
        let rho = centroids
            .iter()
            .map(|c| fine.density()[fine_index.nearest(c)])
            .collect();
        let coarse = SourceAtoms::from_quadrature(fine.dim(), centroids, vol, rho)?;
        levels.push(coarse);
        parents.push(cl.assignment);
    }
    levels.reverse();
    parents.reverse();
    Ok(SourceHierarchy { levels, parents })
}
