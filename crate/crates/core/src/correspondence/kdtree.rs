//! Exact nearest-neighbour search over a static 3D point set.

/// Static k-d tree. Queries are exact; among equidistant points the lowest
/// index wins.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    /// Point indices arranged so that every subtree is a contiguous slice
    /// with its splitting point at the slice midpoint.
    order: Vec<u32>,
}

const LEAF_SIZE: usize = 8;

/// Nearest point found by a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: u32,
    pub distance_sq: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.distance_sq.sqrt()
    }

    fn better_than(&self, other: &Neighbor) -> bool {
        self.distance_sq < other.distance_sq
            || (self.distance_sq == other.distance_sq && self.index < other.index)
    }
}

pub fn distance_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl SpatialIndex {
    pub fn build(points: Vec<[f64; 3]>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        build_recursive(&points, &mut order, 0);
        SpatialIndex { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn nearest(&self, query: &[f64; 3]) -> Option<Neighbor> {
        let mut best = Neighbor {
            index: u32::MAX,
            distance_sq: f64::INFINITY,
        };
        self.search(query, &self.order, 0, &mut best);
        (best.index != u32::MAX).then_some(best)
    }

    fn search(&self, query: &[f64; 3], slice: &[u32], depth: usize, best: &mut Neighbor) {
        if slice.len() <= LEAF_SIZE {
            for &i in slice {
                let cand = Neighbor {
                    index: i,
                    distance_sq: distance_sq(query, &self.points[i as usize]),
                };
                if cand.better_than(best) {
                    *best = cand;
                }
            }
            return;
        }
        let axis = depth % 3;
        let mid = slice.len() / 2;
        let pivot = slice[mid];
        let split = self.points[pivot as usize][axis];
        let cand = Neighbor {
            index: pivot,
            distance_sq: distance_sq(query, &self.points[pivot as usize]),
        };
        if cand.better_than(best) {
            *best = cand;
        }
        let delta = query[axis] - split;
        let (near, far) = if delta < 0.0 {
            (&slice[..mid], &slice[mid + 1..])
        } else {
            (&slice[mid + 1..], &slice[..mid])
        };
        self.search(query, near, depth + 1, best);
        // Points on the splitting plane can sit on either side, so the far
        // side is visited whenever it could hold an equally close point.
        if delta * delta <= best.distance_sq {
            self.search(query, far, depth + 1, best);
        }
    }
}

fn build_recursive(points: &[[f64; 3]], slice: &mut [u32], depth: usize) {
    if slice.len() <= LEAF_SIZE {
        return;
    }
    let axis = depth % 3;
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis].total_cmp(&points[b as usize][axis])
    });
    let (left, rest) = slice.split_at_mut(mid);
    build_recursive(points, left, depth + 1);
    build_recursive(points, &mut rest[1..], depth + 1);
}
