use std::collections::HashMap;

use crate::model::{AttributedPoint, AttributedPointCloud, Point3};

pub type CellKey = [i64; 3];

#[inline]
pub fn cell_of(p: &Point3, cell: f64) -> CellKey {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

#[derive(Clone, Copy)]
struct Accumulator {
    sum: [f64; 3],
    lo: [f64; 3],
    hi: [f64; 3],
    count: usize,
    eps_l: f64,
    eps_g: f64,
}

impl Accumulator {
    fn new(p: &AttributedPoint) -> Self {
        let c = [p.position.x, p.position.y, p.position.z];
        Accumulator {
            sum: c,
            lo: c,
            hi: c,
            count: 1,
            eps_l: p.eps_l,
            eps_g: p.eps_g,
        }
    }

    fn add(&mut self, p: &AttributedPoint) {
        for a in 0..3 {
            let v = p.position[a];
            self.sum[a] += v;
            self.lo[a] = self.lo[a].min(v);
            self.hi[a] = self.hi[a].max(v);
        }
        self.count += 1;
        self.eps_l = self.eps_l.max(p.eps_l);
        self.eps_g = self.eps_g.max(p.eps_g);
    }

    fn finish(&self) -> AttributedPoint {
        let n = self.count as f64;
        // Clamping to the member bounding box keeps the centroid inside the cell
        // despite rounding in the sum.
        let c = |a: usize| (self.sum[a] / n).clamp(self.lo[a], self.hi[a]);
        AttributedPoint::new(Point3::new(c(0), c(1), c(2)), self.eps_l, self.eps_g)
    }
}

/// Grid of cubic cells, each holding the centroid of its members and the
/// maximum of their ephemerality attributes.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    cell: f64,
    keys: Vec<CellKey>,
    points: Vec<AttributedPoint>,
}

impl VoxelGrid {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a AttributedPoint>, cell: f64) -> Self {
        assert!(cell > 0.0, "voxel size must be positive");
        let mut slots: HashMap<CellKey, usize> = HashMap::new();
        let mut keys = Vec::new();
        let mut acc: Vec<Accumulator> = Vec::new();
        for p in points {
            let key = cell_of(&p.position, cell);
            match slots.get(&key) {
                Some(&i) => acc[i].add(p),
                None => {
                    slots.insert(key, acc.len());
                    keys.push(key);
                    acc.push(Accumulator::new(p));
                }
            }
        }
        VoxelGrid {
            cell,
            keys,
            points: acc.iter().map(Accumulator::finish).collect(),
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Occupied cells in first-occurrence order of the input.
    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &AttributedPoint)> {
        self.keys.iter().zip(self.points.iter())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<AttributedPoint> {
        self.points
    }
}

/// One point per occupied cell at the cell centroid; `eps_l`/`eps_g` take the
/// maximum over the cell. Output order follows the first member of each cell.
pub fn voxel_downsample(cloud: &AttributedPointCloud, cell: f64) -> AttributedPointCloud {
    let grid = VoxelGrid::from_points(&cloud.points, cell);
    AttributedPointCloud::new(grid.into_points(), cloud.frame_id.clone())
}

/// Centroid decimation of bare positions.
pub fn downsample_points(points: &[Point3], cell: f64) -> Vec<Point3> {
    let attributed: Vec<AttributedPoint> = points
        .iter()
        .map(|p| AttributedPoint::new(*p, 0.5, 0.5))
        .collect();
    VoxelGrid::from_points(&attributed, cell)
        .into_points()
        .into_iter()
        .map(|p| p.position)
        .collect()
}
