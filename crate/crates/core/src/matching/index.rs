//! Exact k-nearest-neighbor search over a fixed point set.
//!
//! All search paths order candidates by the pair `(squared distance, unit
//! index)`, so ties are broken by the smaller index and every path returns
//! the same neighbor list.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Which search structure to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Sorted array for one dimension, k-d tree up to eight, exhaustive above.
    #[default]
    Auto,
    KdTree,
    Exhaustive,
}

/// Largest dimension for which `Auto` picks the k-d tree.
pub const KD_MAX_DIM: usize = 8;
const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub idx: usize,
    pub sq_dist: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.sq_dist
            .total_cmp(&other.sq_dist)
            .then(self.idx.cmp(&other.idx))
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry(Neighbor);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp_key(&other.0)
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Search structure over a subset of units, addressed by their original indices.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    m: usize,
    /// Member coordinates, row-major, in member order.
    coords: Vec<f64>,
    ids: Vec<usize>,
    values: Option<Vec<f64>>,
    local_of: std::collections::HashMap<usize, usize>,
    kind: IndexKind,
}

#[derive(Debug, Clone)]
enum IndexKind {
    Exhaustive,
    KdTree(KdTree),
    Sorted(Sorted1d),
}

impl NeighborIndex {
    /// Index the units `members` of a row-major `coords_all` buffer of dimension `m`.
    pub fn build(coords_all: &[f64], m: usize, members: &[usize], strategy: SearchStrategy) -> Self {
        Self::build_inner(coords_all, m, members, None, strategy)
    }

    /// Like [`NeighborIndex::build`], attaching one value per member for [`NeighborIndex::knn_mean`].
    pub fn build_with_values(
        coords_all: &[f64],
        m: usize,
        members: &[usize],
        values: Vec<f64>,
        strategy: SearchStrategy,
    ) -> Self {
        assert_eq!(values.len(), members.len());
        Self::build_inner(coords_all, m, members, Some(values), strategy)
    }

    fn build_inner(
        coords_all: &[f64],
        m: usize,
        members: &[usize],
        values: Option<Vec<f64>>,
        strategy: SearchStrategy,
    ) -> Self {
        let mut coords = Vec::with_capacity(members.len() * m);
        for &i in members {
            coords.extend_from_slice(&coords_all[i * m..(i + 1) * m]);
        }
        let ids = members.to_vec();
        let kind = match strategy {
            SearchStrategy::Auto if m == 1 => {
                IndexKind::Sorted(Sorted1d::new(&coords, &ids, values.as_deref()))
            }
            SearchStrategy::Auto if m <= KD_MAX_DIM => IndexKind::KdTree(KdTree::new(&coords, m)),
            SearchStrategy::KdTree => IndexKind::KdTree(KdTree::new(&coords, m)),
            _ => IndexKind::Exhaustive,
        };
        let local_of = match (&values, &kind) {
            (Some(_), IndexKind::Sorted(_)) | (None, _) => Default::default(),
            (Some(_), _) => ids.iter().enumerate().map(|(l, &i)| (i, l)).collect(),
        };
        NeighborIndex {
            m,
            coords,
            ids,
            values,
            local_of,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn point(&self, local: usize) -> &[f64] {
        &self.coords[local * self.m..(local + 1) * self.m]
    }

    /// The `k` nearest members of `q`, ordered by `(distance, index)`.
    pub fn knn(&self, q: &[f64], k: usize) -> Vec<Neighbor> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        match &self.kind {
            IndexKind::Exhaustive => self.knn_exhaustive(q, k),
            IndexKind::KdTree(tree) => {
                let mut heap = BinaryHeap::with_capacity(k + 1);
                tree.search(self, q, k, 0, &mut heap);
                let mut out: Vec<Neighbor> = heap.into_iter().map(|e| e.0).collect();
                out.sort_by(Neighbor::cmp_key);
                out
            }
            IndexKind::Sorted(s) => {
                let w = s.window(q[0], k);
                let mut out: Vec<Neighbor> = (w.inner_lo..w.inner_hi)
                    .map(|p| Neighbor {
                        idx: s.ids[p],
                        sq_dist: w.key(s.xs[p]),
                    })
                    .collect();
                out.sort_by(Neighbor::cmp_key);
                out.extend(w.tie_picks.iter().map(|&idx| Neighbor {
                    idx,
                    sq_dist: w.radius_key,
                }));
                out
            }
        }
    }

    fn knn_exhaustive(&self, q: &[f64], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = (0..self.len())
            .map(|l| Neighbor {
                idx: self.ids[l],
                sq_dist: sq_dist(q, self.point(l)),
            })
            .collect();
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, Neighbor::cmp_key);
            all.truncate(k);
        }
        all.sort_by(Neighbor::cmp_key);
        all
    }

    /// Mean attached value over the `k` nearest members of `q`.
    ///
    /// Panics if the index was built without values.
    pub fn knn_mean(&self, q: &[f64], k: usize) -> f64 {
        let values = self.values.as_ref().expect("index built without values");
        let k = k.min(self.len());
        match &self.kind {
            IndexKind::Sorted(s) => {
                let w = s.window(q[0], k);
                let mut total = s.prefix[w.inner_hi] - s.prefix[w.inner_lo];
                for &idx in &w.tie_picks {
                    total += s.value_of[&idx];
                }
                total / k as f64
            }
            _ => {
                let nn = self.knn(q, k);
                let total: f64 = nn.iter().map(|nb| values[self.local_of[&nb.idx]]).sum();
                total / k as f64
            }
        }
    }
}

/// One-dimensional points sorted by `(x, index)`; the k-d tree's degenerate form.
#[derive(Debug, Clone)]
struct Sorted1d {
    xs: Vec<f64>,
    ids: Vec<usize>,
    prefix: Vec<f64>,
    value_of: std::collections::HashMap<usize, f64>,
}

struct Window {
    q: f64,
    inner_lo: usize,
    inner_hi: usize,
    radius_key: f64,
    tie_picks: Vec<usize>,
}

impl Window {
    fn key(&self, x: f64) -> f64 {
        let d = x - self.q;
        d * d
    }
}

impl Sorted1d {
    fn new(coords: &[f64], ids: &[usize], values: Option<&[f64]>) -> Self {
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&a, &b| coords[a].total_cmp(&coords[b]).then(ids[a].cmp(&ids[b])));
        let xs: Vec<f64> = order.iter().map(|&l| coords[l]).collect();
        let sorted_ids: Vec<usize> = order.iter().map(|&l| ids[l]).collect();
        let mut prefix = vec![0.0; ids.len() + 1];
        let mut value_of = std::collections::HashMap::new();
        if let Some(v) = values {
            for (p, &l) in order.iter().enumerate() {
                prefix[p + 1] = prefix[p] + v[l];
                value_of.insert(ids[l], v[l]);
            }
        }
        Sorted1d {
            xs,
            ids: sorted_ids,
            prefix,
            value_of,
        }
    }

    /// Locate the `k` nearest points to `q`: every point strictly inside the
    /// k-th smallest distance (a contiguous range) plus the lowest-index
    /// points lying exactly on it.
    fn window(&self, q: f64, k: usize) -> Window {
        let n = self.xs.len();
        let key = |x: f64| {
            let d = x - q;
            d * d
        };
        // smallest start s such that the window [s, s + k) cannot move right
        let (mut lo, mut hi) = (0usize, n - k);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.xs[mid + k] < q || key(self.xs[mid]) > key(self.xs[mid + k]) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let radius_key = key(self.xs[lo]).max(key(self.xs[lo + k - 1]));

        let split = self.xs.partition_point(|&x| x < q);
        let (left, right) = self.xs.split_at(split);
        // left keys are non-increasing, right keys non-decreasing
        let inner_lo = left.partition_point(|&x| key(x) >= radius_key);
        let tie_lo = left.partition_point(|&x| key(x) > radius_key);
        let inner_hi = split + right.partition_point(|&x| key(x) < radius_key);
        let tie_hi = split + right.partition_point(|&x| key(x) <= radius_key);

        let need = k - (inner_hi - inner_lo);
        let mut tied: Vec<usize> = self.ids[tie_lo..inner_lo]
            .iter()
            .chain(&self.ids[inner_hi..tie_hi])
            .copied()
            .collect();
        tied.sort_unstable();
        tied.truncate(need);
        Window {
            q,
            inner_lo,
            inner_hi,
            radius_key,
            tie_picks: tied,
        }
    }
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<KdNode>,
    /// Local point indices, permuted so that every leaf is a contiguous range.
    perm: Vec<usize>,
}

impl KdTree {
    fn new(coords: &[f64], m: usize) -> Self {
        let n = coords.len() / m;
        let mut tree = KdTree {
            nodes: Vec::new(),
            perm: (0..n).collect(),
        };
        if n > 0 {
            tree.build(coords, m, 0, n);
        }
        tree
    }

    fn build(&mut self, coords: &[f64], m: usize, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let dim = (0..m)
            .max_by(|&a, &b| {
                let spread = |k: usize| {
                    let (lo, hi) = self.perm[start..end]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                            let v = coords[p * m + k];
                            (lo.min(v), hi.max(v))
                        });
                    hi - lo
                };
                spread(a).total_cmp(&spread(b)).then(b.cmp(&a))
            })
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * m + dim]
                .total_cmp(&coords[b * m + dim])
                .then(a.cmp(&b))
        });
        let value = coords[self.perm[mid] * m + dim];
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build(coords, m, start, mid);
        let right = self.build(coords, m, mid, end);
        self.nodes[id] = KdNode::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn search(
        &self,
        index: &NeighborIndex,
        q: &[f64],
        k: usize,
        node: usize,
        heap: &mut BinaryHeap<HeapEntry>,
    ) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &local in &self.perm[start..end] {
                    let cand = Neighbor {
                        idx: index.ids[local],
                        sq_dist: sq_dist(q, index.point(local)),
                    };
                    if heap.len() < k {
                        heap.push(HeapEntry(cand));
                    } else if cand.cmp_key(&heap.peek().unwrap().0) == Ordering::Less {
                        heap.pop();
                        heap.push(HeapEntry(cand));
                    }
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(index, q, k, near, heap);
                let bound = diff * diff;
                // equal bound still visits: a tie may carry a smaller index
                if heap.len() < k || bound <= heap.peek().unwrap().0.sq_dist {
                    self.search(index, q, k, far, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(coords: &[f64], m: usize, members: &[usize], q: &[f64], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = members
            .iter()
            .map(|&i| Neighbor {
                idx: i,
                sq_dist: sq_dist(q, &coords[i * m..(i + 1) * m]),
            })
            .collect();
        all.sort_by(Neighbor::cmp_key);
        all.truncate(k);
        all
    }

    fn grid_coords() -> impl Strategy<Value = (usize, Vec<f64>)> {
        // coarse grid values force many exact ties
        (1usize..=3).prop_flat_map(|m| {
            (
                Just(m),
                prop::collection::vec((0i32..6).prop_map(|v| v as f64 * 0.5), m * 2..m * 40),
            )
        })
    }

    proptest! {
        #[test]
        fn all_paths_agree_with_brute_force((m, raw) in grid_coords(), k in 1usize..6, qsel in 0usize..1000) {
            let n = raw.len() / m;
            let coords = &raw[..n * m];
            let members: Vec<usize> = (0..n).filter(|i| i % 3 != 1).collect();
            prop_assume!(!members.is_empty());
            let q: Vec<f64> = coords[(qsel % n) * m..(qsel % n + 1) * m].iter().map(|v| v + 0.25).collect();
            let expected = brute(coords, m, &members, &q, k);
            for strategy in [SearchStrategy::Auto, SearchStrategy::KdTree, SearchStrategy::Exhaustive] {
                let idx = NeighborIndex::build(coords, m, &members, strategy);
                prop_assert_eq!(&idx.knn(&q, k), &expected);
            }
        }

        #[test]
        fn sorted_mean_matches_brute(raw in prop::collection::vec(-50i32..50, 2..80), k in 1usize..40, q in -60i32..60) {
            let coords: Vec<f64> = raw.iter().map(|&v| v as f64 / 4.0).collect();
            let members: Vec<usize> = (0..coords.len()).collect();
            let values: Vec<f64> = (0..coords.len()).map(|i| (i as f64).sin()).collect();
            let k = k.min(coords.len());
            let q = [q as f64 / 4.0];
            let nn = brute(&coords, 1, &members, &q, k);
            let expected = nn.iter().map(|nb| values[nb.idx]).sum::<f64>() / k as f64;
            for strategy in [SearchStrategy::Auto, SearchStrategy::KdTree, SearchStrategy::Exhaustive] {
                let idx = NeighborIndex::build_with_values(&coords, 1, &members, values.clone(), strategy);
                prop_assert!((idx.knn_mean(&q, k) - expected).abs() < 1e-12);
            }
        }
    }
}
