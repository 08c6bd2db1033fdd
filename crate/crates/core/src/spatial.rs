//! Exact nearest-neighbor, k-nearest and fixed-radius queries over a point set.
//!
//! A static kd-tree with bucketed leaves. All queries are exact: they return
//! the same points a linear scan would, with ties broken by the lower point id.
//! Radius queries are boundary inclusive (`distance <= r`).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

const LEAF_SIZE: usize = 12;

/// A query result: point id (position in the indexed cloud) and Euclidean distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// `(squared distance, id)` ordered lexicographically.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Cand {
    d2: f64,
    id: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2.total_cmp(&o.d2).then(self.id.cmp(&o.id))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Build an index over the positions of `cloud`.
pub fn build_index(cloud: &PointCloud) -> Result<SpatialIndex> {
    SpatialIndex::build(cloud.positions())
}

impl SpatialIndex {
    pub fn build(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("cannot index an empty point set"));
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::contract("point set too large to index"));
        }
        let mut index = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a as usize]
                .axis(axis)
                .total_cmp(&pts[b as usize].axis(axis))
                .then(a.cmp(&b))
        });
        let value = self.points[self.order[mid] as usize].axis(axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id as usize] = Node::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p.axis(a));
                hi[a] = hi[a].max(p.axis(a));
            }
        }
        let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let mut best = 0;
        for a in 1..3 {
            if ext[a] > ext[best] {
                best = a;
            }
        }
        best
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

    /// Children ordered (near, far) plus the squared lower bound on the distance
    /// from `q` to anything in the far child.
    #[inline]
    fn sides(q: Point3, axis: u8, value: f64, left: u32, right: u32) -> (u32, u32, f64) {
        let diff = q.axis(axis as usize) - value;
        if diff < 0.0 {
            (left, right, diff * diff)
        } else {
            (right, left, diff * diff)
        }
    }

    /// Closest point to `q`; ties go to the lowest id.
    pub fn nearest(&self, q: Point3) -> Neighbor {
        let mut best = Cand {
            d2: f64::INFINITY,
            id: u32::MAX,
        };
        self.nearest_rec(0, q, &mut best);
        Neighbor {
            id: best.id as usize,
            distance: best.d2.sqrt(),
        }
    }

    fn nearest_rec(&self, node: u32, q: Point3, best: &mut Cand) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let c = Cand {
                        d2: q.dist_squared(self.points[i as usize]),
                        id: i,
                    };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let (near, far, bound) = Self::sides(q, axis, value, left, right);
                self.nearest_rec(near, q, best);
                // `<=` keeps equal-distance points with a lower id reachable
                if bound <= best.d2 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points, ascending by distance then id. Returns every
    /// point when the set holds fewer than `k`.
    pub fn knn(&self, q: Point3, k: usize) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, q, k, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                id: c.id as usize,
                distance: c.d2.sqrt(),
            })
            .collect()
    }

    fn knn_rec(&self, node: u32, q: Point3, k: usize, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let c = Cand {
                        d2: q.dist_squared(self.points[i as usize]),
                        id: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
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
                let (near, far, bound) = Self::sides(q, axis, value, left, right);
                self.knn_rec(near, q, k, heap);
                if heap.len() < k || bound <= heap.peek().unwrap().d2 {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }

    /// All points within distance `r` of `q` (inclusive), sorted by id.
    pub fn radius_query(&self, q: Point3, r: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        self.for_each_within(q, r, |id, d2| {
            out.push(Neighbor {
                id,
                distance: d2.sqrt(),
            })
        });
        out.sort_unstable_by_key(|n| n.id);
        out
    }

    /// Visit every point with `dist_squared(q, p) <= r * r`, passing its id and
    /// squared distance. Visit order is fixed by the tree, not by id.
    pub fn for_each_within(&self, q: Point3, r: f64, mut f: impl FnMut(usize, f64)) {
        if r.is_nan() || r < 0.0 {
            return;
        }
        let r2 = r * r;
        let mut stack = vec![0u32];
        while let Some(node) = stack.pop() {
            match self.nodes[node as usize] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start as usize..end as usize] {
                        let d2 = q.dist_squared(self.points[i as usize]);
                        if d2 <= r2 {
                            f(i as usize, d2);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let (near, far, bound) = Self::sides(q, axis, value, left, right);
                    if bound <= r2 {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
    }
}
