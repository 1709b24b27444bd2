//! Zero-dimensional Vietoris-Rips persistence.
//!
//! In dimension zero the Vietoris-Rips filtration is single-linkage
//! clustering: components merge exactly along the edges of a Euclidean
//! minimum spanning tree. We use the **radius** convention throughout, so an
//! edge of length `d` enters at `ε = d / 2` and every finite bar is
//! `[0, w/2)` for an MST edge of weight `w`.
//!
//! Coincident points produce empty bars `[0, 0)`. They are kept in the
//! barcode (which always has one bar per input point) but never count towards
//! a Betti number, so `β_0(0)` is the number of *distinct* points.

use rayon::prelude::*;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::spatial::{dist, sq_dist, KdTree};
use crate::{Error, PointCloud, Result};

/// Below this size a dense O(n²) Prim pass beats building a tree.
const DENSE_MST_CUTOFF: usize = 8;

/// A single persistence interval `[birth, death)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub birth: f64,
    /// `f64::INFINITY` for the essential class.
    pub death: f64,
}

impl Bar {
    #[inline]
    pub fn contains(&self, eps: f64) -> bool {
        self.birth <= eps && eps < self.death
    }

    pub fn is_empty(&self) -> bool {
        !(self.death > self.birth)
    }
}

/// The dimension-zero barcode of a finite point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Barcode0 {
    n_points: usize,
    /// Sorted by death, ascending; the infinite bar is last.
    bars: Vec<Bar>,
}

impl Barcode0 {
    /// Barcode from minimum-spanning-tree edge weights (pairwise distances).
    pub fn from_mst_weights(weights: &[f64]) -> Barcode0 {
        let mut bars: Vec<Bar> = weights
            .iter()
            .map(|w| Bar {
                birth: 0.0,
                death: w / 2.0,
            })
            .collect();
        bars.push(Bar {
            birth: 0.0,
            death: f64::INFINITY,
        });
        bars.sort_by(|a, b| a.death.total_cmp(&b.death));
        Barcode0 {
            n_points: weights.len() + 1,
            bars,
        }
    }

    /// Builds a barcode from explicit bars; used when reading files.
    pub fn from_bars(n_points: usize, mut bars: Vec<Bar>) -> Result<Barcode0> {
        if bars.len() != n_points {
            return Err(Error::param(format!(
                "barcode lists {} bars for {n_points} points",
                bars.len()
            )));
        }
        if bars.iter().filter(|b| b.death == f64::INFINITY).count() != 1 {
            return Err(Error::param("a barcode needs exactly one infinite bar"));
        }
        for b in &bars {
            if !(b.birth >= 0.0) || !b.birth.is_finite() || b.death.is_nan() || b.death < b.birth {
                return Err(Error::param(format!(
                    "malformed bar [{}, {})",
                    b.birth, b.death
                )));
            }
        }
        bars.sort_by(|a, b| a.death.total_cmp(&b.death));
        Ok(Barcode0 { n_points, bars })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    /// Finite deaths in ascending order, including zero-length bars.
    pub fn finite_deaths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bars.iter().map(|b| b.death).filter(|d| d.is_finite())
    }

    /// Betti numbers on a radius grid, via binary search on the sorted deaths.
    ///
    /// Assumes every bar is born at 0, which holds for any barcode produced
    /// by [`barcode0`].
    pub fn betti_counts(&self, radii: &[f64]) -> Vec<usize> {
        radii
            .iter()
            .map(|&eps| {
                if eps < 0.0 {
                    return 0;
                }
                self.bars.len() - self.bars.partition_point(|b| b.death <= eps)
            })
            .collect()
    }
}

impl Serialize for Barcode0 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(untagged)]
        enum Death {
            Finite(f64),
            Inf(&'static str),
        }
        #[derive(Serialize)]
        struct Repr {
            n_points: usize,
            bars: Vec<(f64, Death)>,
        }
        Repr {
            n_points: self.n_points,
            bars: self
                .bars
                .iter()
                .map(|b| {
                    let d = if b.death.is_infinite() {
                        Death::Inf("inf")
                    } else {
                        Death::Finite(b.death)
                    };
                    (b.birth, d)
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Barcode0 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Death {
            Finite(f64),
            Tag(String),
        }
        #[derive(Deserialize)]
        struct Repr {
            n_points: usize,
            bars: Vec<(f64, Death)>,
        }
        let repr = Repr::deserialize(d)?;
        let bars = repr
            .bars
            .into_iter()
            .map(|(birth, death)| {
                let death = match death {
                    Death::Finite(v) => v,
                    Death::Tag(t) if t == "inf" => f64::INFINITY,
                    Death::Tag(t) => return Err(de::Error::custom(format!("bad death '{t}'"))),
                };
                Ok(Bar { birth, death })
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        Barcode0::from_bars(repr.n_points, bars).map_err(de::Error::custom)
    }
}

/// The number of bars alive at `eps`: those with `birth ≤ eps < death`.
pub fn betti_at(bc: &Barcode0, eps: f64) -> usize {
    bc.bars.iter().filter(|b| b.contains(eps)).count()
}

/// Persistence barcode of the Vietoris-Rips filtration on `points`.
pub fn barcode0(points: &PointCloud) -> Result<Barcode0> {
    if points.is_empty() {
        return Err(Error::param("cannot compute persistence of an empty point set"));
    }
    let idx: Vec<usize> = (0..points.len()).collect();
    Ok(Barcode0::from_mst_weights(&mst_weights(points, &idx)))
}

/// Barcode of the sub-cloud `points[indices]`.
pub fn barcode0_subset(points: &PointCloud, indices: &[usize]) -> Result<Barcode0> {
    if indices.is_empty() {
        return Err(Error::param("cannot compute persistence of an empty point set"));
    }
    Ok(Barcode0::from_mst_weights(&mst_weights(points, indices)))
}

/// Edge weights (Euclidean lengths) of a minimum spanning tree on
/// `points[indices]`, sorted ascending. Every MST has the same weight
/// multiset, so the result is unique.
pub fn mst_weights(points: &PointCloud, indices: &[usize]) -> Vec<f64> {
    let mut w = if indices.len() <= DENSE_MST_CUTOFF {
        prim_dense(points, indices)
    } else {
        boruvka_kd(points, indices)
    };
    w.sort_by(f64::total_cmp);
    w
}

fn prim_dense(points: &PointCloud, indices: &[usize]) -> Vec<f64> {
    let k = indices.len();
    if k < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; k];
    let mut best = vec![f64::INFINITY; k];
    let mut weights = Vec::with_capacity(k - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..k {
        let p = points.point(indices[current]);
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..k {
            if in_tree[j] {
                continue;
            }
            let d = sq_dist(p, points.point(indices[j]));
            if d < best[j] {
                best[j] = d;
            }
            if best[j] < next_d || next == usize::MAX {
                next_d = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        weights.push(next_d.sqrt());
        current = next;
    }
    weights
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `true` if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Candidate edge ordered by (squared length, smaller slot, larger slot);
/// the total order keeps Borůvka correct in the presence of ties.
#[derive(Clone, Copy, PartialEq)]
struct Edge {
    d2: f64,
    a: usize,
    b: usize,
}

impl Edge {
    const NONE: Edge = Edge {
        d2: f64::INFINITY,
        a: usize::MAX,
        b: usize::MAX,
    };

    fn new(d2: f64, p: usize, q: usize) -> Edge {
        Edge {
            d2,
            a: p.min(q),
            b: p.max(q),
        }
    }

    #[inline]
    fn less(&self, other: &Edge) -> bool {
        (self.d2, self.a, self.b) < (other.d2, other.a, other.b)
    }
}

/// Borůvka rounds with kd-tree searches for the nearest point outside the
/// query's component. Subtrees lying entirely inside the query's component
/// are skipped.
fn boruvka_kd(points: &PointCloud, indices: &[usize]) -> Vec<f64> {
    let tree = KdTree::with_indices(points, indices);
    let k = tree.len();
    let mut uf = UnionFind::new(k);
    let mut weights = Vec::with_capacity(k.saturating_sub(1));
    let mut comp = vec![0usize; k];
    let mut node_comp = vec![usize::MAX; tree.nodes.len()];
    let mut best = vec![Edge::NONE; k];
    let mut stack = Vec::new();

    while weights.len() + 1 < k {
        for (s, c) in comp.iter_mut().enumerate() {
            *c = uf.find(s);
        }
        // Children always follow their parent in `nodes`, so a reverse sweep
        // is a post-order pass.
        for n in (0..tree.nodes.len()).rev() {
            let node = &tree.nodes[n];
            node_comp[n] = if node.is_leaf() {
                let c = comp[node.start];
                if comp[node.start..node.end].iter().all(|&x| x == c) {
                    c
                } else {
                    usize::MAX
                }
            } else if node_comp[node.left] == node_comp[node.right] {
                node_comp[node.left]
            } else {
                usize::MAX
            };
        }
        best.iter_mut().for_each(|e| *e = Edge::NONE);

        for q in 0..k {
            let cq = comp[q];
            let qp = tree.slot_point(q);
            let mut found = best[cq];
            stack.clear();
            stack.push(0usize);
            while let Some(n) = stack.pop() {
                if node_comp[n] == cq {
                    continue;
                }
                let bd = tree.box_sq_dist(n, qp);
                if bd > found.d2 {
                    continue;
                }
                let node = &tree.nodes[n];
                if node.is_leaf() {
                    for s in node.start..node.end {
                        if comp[s] == cq {
                            continue;
                        }
                        let e = Edge::new(sq_dist(qp, tree.slot_point(s)), q, s);
                        if e.less(&found) {
                            found = e;
                        }
                    }
                } else {
                    let dl = tree.box_sq_dist(node.left, qp);
                    let dr = tree.box_sq_dist(node.right, qp);
                    // Push the farther child first so the nearer is explored first.
                    if dl <= dr {
                        stack.push(node.right);
                        stack.push(node.left);
                    } else {
                        stack.push(node.left);
                        stack.push(node.right);
                    }
                }
            }
            best[cq] = found;
        }

        let mut merged = false;
        for c in 0..k {
            let e = best[c];
            if e.a == usize::MAX || comp[c] != c {
                continue;
            }
            if uf.union(e.a, e.b) {
                weights.push(e.d2.sqrt());
                merged = true;
            }
        }
        debug_assert!(merged, "Borůvka round made no progress");
        if !merged {
            break;
        }
    }
    weights
}

/// β₀ sampled on an increasing radius grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiCurve {
    radii: Vec<f64>,
    counts: Vec<usize>,
}

impl BettiCurve {
    pub fn new(radii: Vec<f64>, counts: Vec<usize>) -> Result<BettiCurve> {
        validate_radii(&radii)?;
        if radii.len() != counts.len() {
            return Err(Error::param("radii and counts differ in length"));
        }
        if counts.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("Betti counts must be non-increasing"));
        }
        if counts.last().is_some_and(|&c| c == 0) {
            return Err(Error::param("Betti counts must stay positive"));
        }
        Ok(BettiCurve { radii, counts })
    }

    /// The exact step function of a barcode: breakpoints at 0 and at every
    /// distinct positive death.
    pub fn exact(bc: &Barcode0) -> BettiCurve {
        let mut radii = vec![0.0];
        for d in bc.finite_deaths() {
            if d > *radii.last().unwrap() {
                radii.push(d);
            }
        }
        let counts = bc.betti_counts(&radii);
        BettiCurve { radii, counts }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Value of the right-continuous step function at `v`; constant beyond
    /// the last breakpoint and equal to the first count before the first.
    pub fn value_at(&self, v: f64) -> usize {
        let i = self.radii.partition_point(|&r| r <= v);
        self.counts[i.saturating_sub(1)]
    }

    /// Smallest breakpoint at which the curve is `≤ level`, if any.
    fn first_at_or_below(&self, level: usize) -> Option<f64> {
        let i = self.counts.partition_point(|&c| c > level);
        self.radii.get(i).copied()
    }
}

pub(crate) fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::param("radius grid is empty"));
    }
    if !(radii[0] >= 0.0) {
        return Err(Error::param("radii must be non-negative"));
    }
    if radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::param("radii must be finite"));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("radii must be strictly increasing"));
    }
    Ok(())
}

/// β₀ of the Vietoris-Rips filtration on `points`, sampled at `radii`.
pub fn betti_curve(points: &PointCloud, radii: &[f64]) -> Result<BettiCurve> {
    validate_radii(radii)?;
    let bc = barcode0(points)?;
    let counts = bc.betti_counts(radii);
    Ok(BettiCurve {
        radii: radii.to_vec(),
        counts,
    })
}

/// Interleaving distance between two non-increasing step functions.
///
/// Returns the least `α ≥ 0` with `f(v) ≥ g(v + α)` and `g(v) ≥ f(v + α)`
/// for every `v ≥ 0`, each curve extended by its last value. The infimum is
/// attained at a difference of breakpoints: on each step `[a_k, a_{k+1})` of
/// `f` the binding constraint is at `v = a_k`, so `α` must reach the first
/// breakpoint where `g` drops to `f(a_k)`. If one curve's tail stays above
/// the other's, no shift works and the result is `+∞`.
pub fn interleaving_distance(f: &BettiCurve, g: &BettiCurve) -> Result<f64> {
    if f.radii[0] != 0.0 || g.radii[0] != 0.0 {
        return Err(Error::param(format!(
            "interleaving needs both curves defined from 0 (got {} and {})",
            f.radii[0], g.radii[0]
        )));
    }
    Ok(one_sided_shift(f, g).max(one_sided_shift(g, f)))
}

/// Least `α ≥ 0` with `f(v) ≥ g(v + α)` for all `v`.
fn one_sided_shift(f: &BettiCurve, g: &BettiCurve) -> f64 {
    let mut alpha = 0.0f64;
    for (&a, &level) in f.radii.iter().zip(&f.counts) {
        match g.first_at_or_below(level) {
            Some(b) => alpha = alpha.max(b - a),
            None => return f64::INFINITY,
        }
    }
    alpha
}

/// Which correspondence a [`CorrespondenceBound`] was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrespondenceKind {
    /// Point `i` of one cloud matched to point `i` of the other.
    IdentityIndexMatch,
}

/// Distortion of an explicit correspondence; an upper bound on twice the
/// Gromov-Hausdorff distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceBound {
    pub distortion: f64,
    pub kind: CorrespondenceKind,
}

/// `max_{i,j} | ‖z_i − z_j‖ − ‖z'_i − z'_j‖ |` for the index-matching
/// correspondence.
pub fn distortion_identity(z: &PointCloud, z_prime: &PointCloud) -> Result<CorrespondenceBound> {
    if z.len() != z_prime.len() {
        return Err(Error::param(format!(
            "index correspondence needs equal sizes, got {} and {}",
            z.len(),
            z_prime.len()
        )));
    }
    if z.dim() != z_prime.dim() {
        return Err(Error::param("clouds differ in dimension"));
    }
    let n = z.len();
    let distortion = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut m = 0.0f64;
            for j in i + 1..n {
                let a = dist(z.point(i), z.point(j));
                let b = dist(z_prime.point(i), z_prime.point(j));
                m = m.max((a - b).abs());
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    Ok(CorrespondenceBound {
        distortion,
        kind: CorrespondenceKind::IdentityIndexMatch,
    })
}
