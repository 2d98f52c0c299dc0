//! A kd-tree over points of ℂⁿ ≅ ℝ²ⁿ with queries in both the Euclidean
//! metric and the boundary quasi-metric d(ζ,η) = |1 − ⟨ζ,η⟩|.
//!
//! For unit vectors the two are related by e²/2 ≤ d ≤ e with e = |ζ − η|,
//! which turns Euclidean box pruning into correct quasi-metric pruning.

use crate::domain::Point;
use num_complex::Complex64;

const LEAF: usize = 16;
const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    lo: u32,
    hi: u32,
    left: u32,
    right: u32,
    bb_min: [f64; 6],
    bb_max: [f64; 6],
}

#[derive(Clone, Debug)]
pub struct SpatialIndex {
    dims: usize,
    coords: Vec<f64>,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

fn flatten(p: &Point, out: &mut [f64]) {
    for (j, c) in p.coords().iter().enumerate() {
        out[2 * j] = c.re;
        out[2 * j + 1] = c.im;
    }
}

impl SpatialIndex {
    pub fn build(points: &[Point]) -> Self {
        assert!(!points.is_empty());
        let dims = 2 * points[0].dim();
        let mut coords = vec![0.0; points.len() * dims];
        for (i, p) in points.iter().enumerate() {
            flatten(p, &mut coords[i * dims..(i + 1) * dims]);
        }
        let mut index = SpatialIndex {
            dims,
            coords,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
            root: NONE,
        };
        index.root = index.build_node(0, points.len());
        index
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn coord(&self, point: u32, d: usize) -> f64 {
        self.coords[point as usize * self.dims + d]
    }

    fn build_node(&mut self, lo: usize, hi: usize) -> u32 {
        let mut bb_min = [f64::INFINITY; 6];
        let mut bb_max = [f64::NEG_INFINITY; 6];
        for &p in &self.order[lo..hi] {
            for d in 0..self.dims {
                let v = self.coord(p, d);
                bb_min[d] = bb_min[d].min(v);
                bb_max[d] = bb_max[d].max(v);
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo: lo as u32,
            hi: hi as u32,
            left: NONE,
            right: NONE,
            bb_min,
            bb_max,
        });
        if hi - lo > LEAF {
            let split_dim = (0..self.dims)
                .max_by(|&a, &b| {
                    (bb_max[a] - bb_min[a]).total_cmp(&(bb_max[b] - bb_min[b]))
                })
                .unwrap();
            let mid = (lo + hi) / 2;
            let coords = &self.coords;
            let dims = self.dims;
            self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                coords[a as usize * dims + split_dim]
                    .total_cmp(&coords[b as usize * dims + split_dim])
                    .then(a.cmp(&b))
            });
            let left = self.build_node(lo, mid);
            let right = self.build_node(mid, hi);
            let node = &mut self.nodes[id as usize];
            node.left = left;
            node.right = right;
        }
        id
    }

    fn box_euclid_sq(&self, node: &Node, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for d in 0..self.dims {
            let lo = self.nodes_gap(node.bb_min[d], node.bb_max[d], q[d]);
            s += lo * lo;
        }
        s
    }

    fn nodes_gap(&self, min: f64, max: f64, v: f64) -> f64 {
        if v < min {
            min - v
        } else if v > max {
            v - max
        } else {
            0.0
        }
    }

    fn euclid_sq(&self, p: u32, q: &[f64]) -> f64 {
        let base = p as usize * self.dims;
        let mut s = 0.0;
        for d in 0..self.dims {
            let diff = self.coords[base + d] - q[d];
            s += diff * diff;
        }
        s
    }

    /// d(p, q) = |1 − ⟨p,q⟩| on flattened unit vectors.
    fn quasi(&self, p: u32, q: &[f64]) -> f64 {
        let base = p as usize * self.dims;
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..self.dims / 2 {
            let pr = self.coords[base + 2 * j];
            let pi = self.coords[base + 2 * j + 1];
            let qr = q[2 * j];
            let qi = q[2 * j + 1];
            re += pr * qr + pi * qi;
            im += pi * qr - pr * qi;
        }
        Complex64::new(1.0 - re, -im).norm()
    }

    /// Index of the point nearest to `q` in the quasi-metric, with ties
    /// broken by lowest index. Returns (index, distance).
    pub fn nearest_quasi(&self, q: &Point) -> (usize, f64) {
        let mut flat = [0.0; 6];
        flatten(q, &mut flat);
        let mut best = (u32::MAX, f64::INFINITY);
        self.nearest_rec(self.root, &flat[..self.dims], &mut best);
        (best.0 as usize, best.1)
    }

    fn nearest_rec(&self, id: u32, q: &[f64], best: &mut (u32, f64)) {
        let node = &self.nodes[id as usize];
        // Minimal possible quasi-distance from the box: e²/2 ≤ d, and on
        // the circle d = e.
        let box_sq = self.box_euclid_sq(node, q);
        let reachable = if self.dims == 2 {
            box_sq < best.1 * best.1
        } else {
            box_sq / 2.0 < best.1
        };
        if !reachable && best.1.is_finite() {
            return;
        }
        if node.left == NONE {
            for &p in &self.order[node.lo as usize..node.hi as usize] {
                let d = self.quasi(p, q);
                if d < best.1 || (d == best.1 && p < best.0) {
                    *best = (p, d);
                }
            }
            return;
        }
        let l = &self.nodes[node.left as usize];
        let r = &self.nodes[node.right as usize];
        let (first, second) = if self.box_euclid_sq(l, q) <= self.box_euclid_sq(r, q) {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.nearest_rec(first, q, best);
        self.nearest_rec(second, q, best);
    }

    /// Visit every point with quasi-distance < `r` from `q`, passing the
    /// index and the distance. No allocation; visit order is deterministic
    /// (tree order), not sorted.
    pub fn visit_quasi_ball<F: FnMut(u32, f64)>(&self, q: &Point, r: f64, mut f: F) {
        let mut flat = [0.0; 6];
        flatten(q, &mut flat);
        // d ≥ e²/2 means d < r forces e < sqrt(2r); on the circle
        // (one complex dimension) d is exactly the chordal distance.
        let bound = if self.dims == 2 { r * r } else { 2.0 * r };
        self.range_rec(self.root, &flat[..self.dims], bound, r, true, &mut f);
    }

    /// Visit every point with Euclidean distance < `r` from `q`.
    pub fn visit_euclid_ball<F: FnMut(u32, f64)>(&self, q: &Point, r: f64, mut f: F) {
        let mut flat = [0.0; 6];
        flatten(q, &mut flat);
        self.range_rec(self.root, &flat[..self.dims], r * r, r, false, &mut f);
    }

    /// All point indices with quasi-distance < `r` from `q`, sorted.
    pub fn quasi_range(&self, q: &Point, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.visit_quasi_ball(q, r, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// All point indices with Euclidean distance < `r` from `q`, sorted.
    pub fn euclid_range(&self, q: &Point, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.visit_euclid_ball(q, r, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    fn range_rec<F: FnMut(u32, f64)>(
        &self,
        id: u32,
        q: &[f64],
        euclid_sq_bound: f64,
        r: f64,
        quasi: bool,
        f: &mut F,
    ) {
        let node = &self.nodes[id as usize];
        if self.box_euclid_sq(node, q) > euclid_sq_bound {
            return;
        }
        if node.left == NONE {
            for &p in &self.order[node.lo as usize..node.hi as usize] {
                let d = if quasi {
                    self.quasi(p, q)
                } else {
                    self.euclid_sq(p, q).sqrt()
                };
                if d < r {
                    f(p, d);
                }
            }
            return;
        }
        self.range_rec(node.left, q, euclid_sq_bound, r, quasi, f);
        self.range_rec(node.right, q, euclid_sq_bound, r, quasi, f);
    }
}
