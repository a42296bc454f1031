//! Exact ball and nearest-neighbour queries over a fixed point set.

use rstar::primitives::GeomWithData;
use rstar::RTree;

use super::cost::{dist2, Cost};
use crate::error::{Error, Result};
use crate::Point;

type Entry = GeomWithData<Point, usize>;

/// Immutable R-tree over a point set. Query results are sorted by point index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    tree: RTree<Entry>,
    points: Vec<Point>,
}

impl SpatialIndex {
    pub fn new(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("spatial index point set"));
        }
        let entries = points
            .iter()
            .enumerate()
            .map(|(i, p)| GeomWithData::new(*p, i))
            .collect();
        Ok(Self {
            tree: RTree::bulk_load(entries),
            points: points.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Indices with `‖p − center‖ < radius`, ascending.
    pub fn within(&self, center: &Point, radius: f64) -> Vec<usize> {
        if !(radius > 0.0) {
            return Vec::new();
        }
        let r2 = radius * radius;
        // Pad the tree query, then filter with the exact predicate.
        let pad = r2 * (1.0 + 1e-9) + 1e-300;
        let mut out: Vec<usize> = self
            .tree
            .locate_within_distance(*center, pad)
            .map(|e| e.data)
            .filter(|&i| dist2(center, &self.points[i]) < r2)
            .collect();
        out.sort_unstable();
        out
    }

    /// Exactly `{j : cost(center, p_j) < cutoff}`, ascending.
    pub fn range_query(&self, center: &Point, cutoff: f64, cost: Cost) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.range_query_into(center, cutoff, cost, &mut out)?;
        Ok(out)
    }

    pub(crate) fn range_query_into(
        &self,
        center: &Point,
        cutoff: f64,
        cost: Cost,
        out: &mut Vec<usize>,
    ) -> Result<()> {
        out.clear();
        if !(cutoff > 0.0) {
            return Ok(());
        }
        let radius = cost.ball_radius(cutoff)?;
        let pad = radius * radius * (1.0 + 1e-9) + 1e-300;
        out.extend(
            self.tree
                .locate_within_distance(*center, pad)
                .map(|e| e.data)
                .filter(|&i| cost.eval(center, &self.points[i]) < cutoff),
        );
        out.sort_unstable();
        Ok(())
    }

    /// Nearest point in Euclidean distance; ties go to the lowest index.
    pub fn nearest(&self, center: &Point) -> usize {
        let mut iter = self.tree.nearest_neighbor_iter_with_distance_2(center);
        let (first, d0) = iter.next().expect("index is nonempty");
        let mut best = first.data;
        for (e, d) in iter {
            if d > d0 {
                break;
            }
            best = best.min(e.data);
        }
        best
    }
}
