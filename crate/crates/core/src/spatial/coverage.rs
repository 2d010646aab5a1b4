use std::collections::HashSet;

use crate::model::Point3;
use crate::spatial::voxel::{cell_of, CellKey};

/// Cells of space that a session actually sensed: every cell containing a ray
/// endpoint or a free-space sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGrid {
    cell: f64,
    observed: HashSet<CellKey>,
}

impl CoverageGrid {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0, "coverage cell must be positive");
        CoverageGrid {
            cell,
            observed: HashSet::new(),
        }
    }

    pub fn build<'a>(samples: impl IntoIterator<Item = &'a Point3>, cell: f64) -> Self {
        let mut grid = CoverageGrid::new(cell);
        grid.extend(samples);
        grid
    }

    pub fn extend<'a>(&mut self, samples: impl IntoIterator<Item = &'a Point3>) {
        for p in samples {
            self.observed.insert(cell_of(p, self.cell));
        }
    }

    /// Adds every cell of `other`, which must use the same cell size.
    pub fn union_with(&mut self, other: &CoverageGrid) {
        assert_eq!(self.cell, other.cell, "coverage cell sizes differ");
        self.observed.extend(other.observed.iter().copied());
    }

    pub fn mark_cell(&mut self, key: CellKey) {
        self.observed.insert(key);
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.observed.contains(&cell_of(p, self.cell))
    }

    pub fn contains_cell(&self, key: &CellKey) -> bool {
        self.observed.contains(key)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// Observed cells in lexicographic order.
    pub fn sorted_cells(&self) -> Vec<CellKey> {
        let mut cells: Vec<CellKey> = self.observed.iter().copied().collect();
        cells.sort_unstable();
        cells
    }
}

pub fn build_coverage(samples: &[Point3], cell: f64) -> CoverageGrid {
    CoverageGrid::build(samples, cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_distinct_cells() {
        let samples = [
            Point3::new(0.2, 0.2, 0.2),
            Point3::new(0.7, 0.1, 0.3),
            Point3::new(1.5, 0.0, 0.0),
            Point3::new(-0.5, 0.0, 0.0),
        ];
        let grid = build_coverage(&samples, 1.0);
        assert_eq!(grid.len(), 3);
    }

    #[test]
    fn empty_samples_give_empty_grid() {
        assert!(build_coverage(&[], 1.0).is_empty());
    }

    #[test]
    fn distant_query_not_covered() {
        let grid = build_coverage(&[Point3::new(0.5, 0.5, 0.5)], 1.0);
        assert!(grid.contains(&Point3::new(0.9, 0.1, 0.1)));
        assert!(!grid.contains(&Point3::new(10.5, 0.5, 0.5)));
    }

    proptest! {
        #[test]
        fn marks_exactly_sample_cells_and_is_monotone(
            a in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0, -3.0f64..3.0), 0..100),
            b in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0, -3.0f64..3.0), 0..100),
        ) {
            let pa: Vec<Point3> = a.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let pb: Vec<Point3> = b.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let grid = build_coverage(&pa, 1.0);
            let expected: HashSet<CellKey> = pa.iter().map(|p| cell_of(p, 1.0)).collect();
            prop_assert_eq!(grid.len(), expected.len());
            for p in &pa {
                prop_assert!(grid.contains(p));
            }
            let mut bigger = grid.clone();
            bigger.extend(&pb);
            for key in grid.sorted_cells() {
                prop_assert!(bigger.contains_cell(&key));
            }
        }
    }
}
