//! Exact k-d tree over a fixed point set.
//!
//! Ties in distance are broken by ascending point id, so query results are a
//! pure function of the input set and match a sorted linear scan exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{is_finite_point, Point3};

const DEFAULT_LEAF_SIZE: usize = 12;

#[inline]
pub fn squared_distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Balanced k-d tree. Built once, then queried read-only from any number of threads.
#[derive(Clone, Debug)]
pub struct KdIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    id: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl KdIndex {
    pub fn build(points: Vec<Point3>) -> Result<Self> {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: Vec<Point3>, leaf_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty point set".into()));
        }
        if let Some(i) = points.iter().position(|p| !is_finite_point(p)) {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        let leaf_size = leaf_size.max(1);
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / leaf_size + 1);
        let n = order.len();
        build_node(&points, &mut order, 0, n, leaf_size, &mut nodes);
        Ok(KdIndex {
            points,
            order,
            nodes,
            leaf_size,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, id: usize) -> &Point3 {
        &self.points[id]
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Up to `k` nearest points sorted by ascending (distance, id).
    pub fn knn(&self, query: &Point3, k: usize) -> Vec<Neighbor> {
        self.knn_within(query, k, f64::INFINITY)
    }

    /// The members of [`knn`](Self::knn) whose distance is at most `max_distance`.
    pub fn knn_within(&self, query: &Point3, k: usize, max_distance: f64) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let limit = max_distance * max_distance;
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, query, k, limit, &mut heap);
        let mut found = heap.into_vec();
        found.sort_unstable();
        found
            .into_iter()
            .map(|c| Neighbor {
                id: c.id,
                distance: c.d2.sqrt(),
            })
            .collect()
    }

    pub fn nearest(&self, query: &Point3) -> Neighbor {
        self.knn(query, 1)[0]
    }

    fn knn_node(&self, node: usize, q: &Point3, k: usize, limit: f64, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[start..end] {
                    let c = Candidate {
                        d2: squared_distance(q, &self.points[id]),
                        id,
                    };
                    if c.d2 > limit {
                        continue;
                    }
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, limit, heap);
                // Equal distances must still be visited so that id tie-breaking stays exact.
                let bound = if heap.len() < k {
                    limit
                } else {
                    heap.peek().expect("nonempty").d2
                };
                if diff * diff <= bound {
                    self.knn_node(far, q, k, limit, heap);
                }
            }
        }
    }

    /// Ids of every point within `radius` (inclusive), sorted by ascending (distance, id).
    pub fn within_radius(&self, query: &Point3, radius: f64) -> Vec<Neighbor> {
        let r2 = radius * radius;
        let mut found = Vec::new();
        self.radius_node(0, query, r2, &mut found);
        found.sort_unstable();
        found
            .into_iter()
            .map(|c| Neighbor {
                id: c.id,
                distance: c.d2.sqrt(),
            })
            .collect()
    }

    /// Number of indexed points within `radius` of `query`, not counting one
    /// member that coincides exactly with the query (the query point itself).
    pub fn radius_count(&self, query: &Point3, radius: f64) -> usize {
        let r2 = radius * radius;
        let mut found = Vec::new();
        self.radius_node(0, query, r2, &mut found);
        let coincident = found.iter().any(|c| c.d2 == 0.0);
        found.len() - usize::from(coincident)
    }

    fn radius_node(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[start..end] {
                    let d2 = squared_distance(q, &self.points[id]);
                    if d2 <= r2 {
                        out.push(Candidate { d2, id });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.radius_node(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_node(far, q, r2, out);
                }
            }
        }
    }
}

fn build_node(
    points: &[Point3],
    order: &mut [usize],
    start: usize,
    end: usize,
    leaf_size: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let slot = nodes.len();
    if end - start <= leaf_size {
        nodes.push(Node::Leaf { start, end });
        return slot;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &id in &order[start..end] {
        for a in 0..3 {
            lo[a] = lo[a].min(points[id][a]);
            hi[a] = hi[a].max(points[id][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .expect("three axes");
    if hi[axis] - lo[axis] <= 0.0 {
        // All points coincide; no split can separate them.
        nodes.push(Node::Leaf { start, end });
        return slot;
    }
    let mid = (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then_with(|| a.cmp(&b))
    });
    let value = points[order[start + mid]][axis];
    // Left subtree holds coordinates <= value, right holds >= value.
    nodes.push(Node::Leaf { start, end });
    let left = build_node(points, order, start, start + mid, leaf_size, nodes);
    let right = build_node(points, order, start + mid, end, leaf_size, nodes);
    nodes[slot] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    slot
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(q, p), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter()
            .take(k)
            .map(|(d2, i)| (i, d2.sqrt()))
            .collect()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-extent..extent),
                    rng.random_range(-extent..extent),
                    rng.random_range(-extent..extent),
                )
            })
            .collect()
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(KdIndex::build(Vec::new()).is_err());
    }

    #[test]
    fn midpoint_query_returns_middle_point() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let index = KdIndex::build(pts).unwrap();
        assert_eq!(index.nearest(&Point3::new(1.1, 0.0, 0.0)).id, 1);
    }

    #[test]
    fn single_point_set_answers_every_query() {
        let index = KdIndex::build(vec![Point3::new(3.0, -1.0, 2.0)]).unwrap();
        for q in [Point3::origin(), Point3::new(100.0, 5.0, -7.0)] {
            assert_eq!(index.nearest(&q).id, 0);
        }
    }

    #[test]
    fn knn_of_member_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 50, 5.0);
        let index = KdIndex::build(pts.clone()).unwrap();
        let n = index.knn(&pts[17], 1);
        assert_eq!(n[0].id, 17);
        assert_eq!(n[0].distance, 0.0);
    }

    #[test]
    fn k_larger_than_set_returns_whole_set_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 9, 5.0);
        let index = KdIndex::build(pts.clone()).unwrap();
        let q = Point3::new(0.3, 0.1, -0.2);
        let got = index.knn(&q, 100);
        assert_eq!(got.len(), 9);
        assert!(got.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn knn_matches_linear_scan_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..1000 {
            let n = rng.random_range(1..200);
            let pts = random_points(&mut rng, n, 10.0);
            let index = KdIndex::with_leaf_size(pts.clone(), 1 + trial % 7).unwrap();
            let q = random_points(&mut rng, 1, 12.0)[0];
            let k = rng.random_range(1..8);
            let got: Vec<(usize, f64)> =
                index.knn(&q, k).into_iter().map(|n| (n.id, n.distance)).collect();
            assert_eq!(got, brute_knn(&pts, &q, k), "trial {trial}");

            let r = rng.random_range(0.1..6.0);
            let brute = pts
                .iter()
                .filter(|p| squared_distance(&q, p) <= r * r)
                .count();
            assert_eq!(index.radius_count(&q, r), brute, "trial {trial}");
        }
    }

    #[test]
    fn ties_are_broken_by_id() {
        // Grid points give many exactly equal distances.
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..3 {
                    pts.push(Point3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let index = KdIndex::with_leaf_size(pts.clone(), 2).unwrap();
        for q in [Point3::new(2.5, 2.5, 1.0), Point3::new(2.0, 2.0, 1.0)] {
            let got: Vec<(usize, f64)> =
                index.knn(&q, 7).into_iter().map(|n| (n.id, n.distance)).collect();
            assert_eq!(got, brute_knn(&pts, &q, 7));
        }
    }

    #[test]
    fn radius_count_excludes_the_query_itself() {
        let mut pts = vec![Point3::new(10.0, 10.0, 10.0)];
        let index = KdIndex::build(pts.clone()).unwrap();
        assert_eq!(index.radius_count(&pts[0], 0.5), 0);

        // 10-point cluster of diameter 0.1 m, query at the centroid (not a member).
        pts.clear();
        for i in 0..10 {
            let a = i as f64 * std::f64::consts::TAU / 10.0;
            pts.push(Point3::new(0.05 * a.cos(), 0.05 * a.sin(), 0.0));
        }
        let index = KdIndex::build(pts).unwrap();
        assert_eq!(index.radius_count(&Point3::origin(), 0.5), 10);
    }

    #[test]
    fn coincident_points_do_not_break_the_tree() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 40];
        let index = KdIndex::with_leaf_size(pts, 4).unwrap();
        let got = index.knn(&Point3::origin(), 5);
        assert_eq!(got.iter().map(|n| n.id).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert_eq!(index.radius_count(&Point3::new(1.0, 1.0, 1.0), 0.1), 39);
    }

    proptest! {
        #[test]
        fn within_radius_matches_brute_force(
            coords in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..120),
            q in (-6.0f64..6.0, -6.0f64..6.0, -6.0f64..6.0),
            r in 0.05f64..4.0,
        ) {
            let pts: Vec<Point3> = coords.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let q = Point3::new(q.0, q.1, q.2);
            let index = KdIndex::with_leaf_size(pts.clone(), 3).unwrap();
            let got: Vec<usize> = index.within_radius(&q, r).into_iter().map(|n| n.id).collect();
            let mut brute: Vec<(f64, usize)> = pts.iter().enumerate()
                .map(|(i, p)| (squared_distance(&q, p), i))
                .filter(|(d2, _)| *d2 <= r * r)
                .collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            prop_assert_eq!(got, brute.into_iter().map(|(_, i)| i).collect::<Vec<_>>());
        }
    }
}
