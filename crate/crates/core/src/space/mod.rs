//! Finite metric measure spaces: points, weights, a metric oracle and ball queries.

mod field;
mod lattice;
mod mask;
mod measure;

pub use field::{Field, FieldFile, NormTag, VecField, VecFieldFile};
pub use lattice::Lattice;
pub use mask::SubsetMask;
pub use measure::{
    average, average_vec, doubling_constant, maximal, maximal_at, maximal_with_caps, measure_density_constant,
    DensityReport, DoublingPlan, DoublingReport,
};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rstar::primitives::GeomWithData;
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest point count for which the graph metric keeps an all-pairs table.
pub const APSP_LIMIT: usize = 5000;

/// Default cap on the number of points a generated space may hold.
pub const DEFAULT_POINT_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    Graph,
}

type TreePoint = GeomWithData<[f64; 3], usize>;

/// A finite weighted metric space.
///
/// The neighbour relation is always present (it drives discrete upper gradients);
/// for the graph metric it also defines distances as shortest-path lengths.
#[derive(Debug)]
pub struct Space {
    dim: usize,
    coords: Vec<[f64; 3]>,
    weights: Vec<f64>,
    metric: MetricKind,
    edges: Vec<(usize, usize, f64)>,
    adj_start: Vec<usize>,
    adj: Vec<(usize, f64)>,
    scale_unit: f64,
    lattice: Option<Lattice>,
    rtree: OnceLock<RTree<TreePoint>>,
    apsp: OnceLock<Vec<f64>>,
}

impl Space {
    /// Builds a space from raw parts. Edges without a length use the Euclidean length.
    pub fn new(
        dim: usize,
        coords: Vec<[f64; 3]>,
        weights: Vec<f64>,
        metric: MetricKind,
        edges: Vec<(usize, usize, Option<f64>)>,
        scale_unit: f64,
    ) -> Result<Space> {
        Self::with_lattice(dim, coords, weights, metric, edges, scale_unit, None)
    }

    fn with_lattice(
        dim: usize,
        coords: Vec<[f64; 3]>,
        weights: Vec<f64>,
        metric: MetricKind,
        edges: Vec<(usize, usize, Option<f64>)>,
        scale_unit: f64,
        lattice: Option<Lattice>,
    ) -> Result<Space> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        let n = coords.len();
        if n == 0 {
            return Err(Error::Domain("space has no points".into()));
        }
        if weights.len() != n {
            return Err(Error::Domain(format!(
                "{} weights for {} points",
                weights.len(),
                n
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Domain(format!("weights must be positive and finite, got {w}")));
        }
        if coords.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        if !(scale_unit.is_finite() && scale_unit > 0.0) {
            return Err(Error::Domain(format!("scale_unit must be positive, got {scale_unit}")));
        }
        let mut norm_edges = Vec::with_capacity(edges.len());
        for (a, b, len) in edges {
            if a >= n || b >= n {
                return Err(Error::Domain(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                continue;
            }
            let len = match len {
                Some(l) => l,
                None => euclid(&coords[a], &coords[b]),
            };
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Domain(format!("edge ({a},{b}) has invalid length {len}")));
            }
            norm_edges.push((a.min(b), a.max(b), len));
        }
        norm_edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)).then(x.2.total_cmp(&y.2)));
        norm_edges.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);

        let mut deg = vec![0usize; n + 1];
        for &(a, b, _) in &norm_edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        let mut adj_start = vec![0usize; n + 1];
        for i in 0..n {
            adj_start[i + 1] = adj_start[i] + deg[i];
        }
        let mut fill = adj_start.clone();
        let mut adj = vec![(0usize, 0.0f64); adj_start[n]];
        for &(a, b, l) in &norm_edges {
            adj[fill[a]] = (b, l);
            fill[a] += 1;
            adj[fill[b]] = (a, l);
            fill[b] += 1;
        }
        for i in 0..n {
            adj[adj_start[i]..adj_start[i + 1]].sort_by_key(|e| e.0);
        }
        Ok(Space {
            dim,
            coords,
            weights,
            metric,
            edges: norm_edges,
            adj_start,
            adj,
            scale_unit,
            lattice,
            rtree: OnceLock::new(),
            apsp: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn scale_unit(&self) -> f64 {
        self.scale_unit
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i][..self.dim]
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    /// Lattice spacing when the space is a grid, else `None`.
    pub fn grid_spacing(&self) -> Option<f64> {
        self.lattice.as_ref().map(|l| l.h)
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[self.adj_start[i]..self.adj_start[i + 1]]
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn measure_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weights[i]).sum()
    }

    /// Returns a copy with a different scale unit.
    pub fn with_scale_unit(mut self, scale_unit: f64) -> Result<Space> {
        if !(scale_unit.is_finite() && scale_unit > 0.0) {
            return Err(Error::Domain(format!("scale_unit must be positive, got {scale_unit}")));
        }
        self.scale_unit = scale_unit;
        Ok(self)
    }

    /// Distance between two points.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match self.metric {
            MetricKind::Euclidean => match &self.lattice {
                Some(l) => l.dist(i, j),
                None => euclid(&self.coords[i], &self.coords[j]),
            },
            MetricKind::Graph => {
                if let Some(t) = self.apsp_table() {
                    t[i * self.len() + j]
                } else {
                    self.dijkstra(&[i], f64::INFINITY)[j]
                }
            }
        }
    }

    /// Distances from `i` to every point.
    pub fn dist_row(&self, i: usize) -> Vec<f64> {
        match self.metric {
            MetricKind::Euclidean => (0..self.len()).map(|j| self.dist(i, j)).collect(),
            MetricKind::Graph => match self.apsp_table() {
                Some(t) => t[i * self.len()..(i + 1) * self.len()].to_vec(),
                None => self.dijkstra(&[i], f64::INFINITY),
            },
        }
    }

    fn apsp_table(&self) -> Option<&Vec<f64>> {
        if self.len() > APSP_LIMIT {
            return None;
        }
        Some(self.apsp.get_or_init(|| {
            let n = self.len();
            let mut t = vec![0.0; n * n];
            for i in 0..n {
                let row = self.dijkstra(&[i], f64::INFINITY);
                t[i * n..(i + 1) * n].copy_from_slice(&row);
            }
            // Symmetrize bitwise so that d(i,j) and d(j,i) agree exactly.
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = t[i * n + j].min(t[j * n + i]);
                    t[i * n + j] = v;
                    t[j * n + i] = v;
                }
            }
            t
        }))
    }

    /// Single- or multi-source shortest paths, truncated at `cap` (unreached points are infinite).
    fn dijkstra(&self, sources: &[usize], cap: f64) -> Vec<f64> {
        let n = self.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(HeapItem { d: 0.0, src: s, node: s });
        }
        let mut done = vec![false; n];
        while let Some(HeapItem { d, node, .. }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            for &(m, l) in self.neighbors(node) {
                let nd = d + l;
                if nd < dist[m] && nd < cap {
                    dist[m] = nd;
                    heap.push(HeapItem { d: nd, src: 0, node: m });
                }
            }
        }
        dist
    }

    /// Multi-source shortest paths returning, per point, the distance and the
    /// lexicographically smallest `(distance, source)` source.
    fn dijkstra_nearest(&self, sources: &[usize]) -> (Vec<f64>, Vec<usize>) {
        let n = self.len();
        let mut best = vec![(f64::INFINITY, usize::MAX); n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            best[s] = (0.0, s);
            heap.push(HeapItem { d: 0.0, src: s, node: s });
        }
        let mut done = vec![false; n];
        while let Some(HeapItem { d, src, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            best[node] = (d, src);
            for &(m, l) in self.neighbors(node) {
                if done[m] {
                    continue;
                }
                let nd = d + l;
                if nd < best[m].0 || (nd == best[m].0 && src < best[m].1) {
                    best[m] = (nd, src);
                    heap.push(HeapItem { d: nd, src, node: m });
                }
            }
        }
        best.into_iter().unzip()
    }

    fn rtree(&self) -> &RTree<TreePoint> {
        self.rtree.get_or_init(|| {
            RTree::bulk_load(
                self.coords
                    .iter()
                    .enumerate()
                    .map(|(i, p)| GeomWithData::new(*p, i))
                    .collect(),
            )
        })
    }

    /// Calls `f(j, d(i, j))` for every `j` with `d(i, j) < r`, in nondecreasing
    /// distance order (ties in a fixed deterministic order).
    pub fn for_each_sorted<F: FnMut(usize, f64)>(&self, i: usize, r: f64, mut f: F) {
        match (self.metric, &self.lattice) {
            (MetricKind::Euclidean, Some(l)) => l.for_each_sorted(i, r, f),
            _ => {
                for (j, d) in self.sorted_ball_generic(i, r) {
                    f(j, d);
                }
            }
        }
    }

    fn sorted_ball_generic(&self, i: usize, r: f64) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = match self.metric {
            MetricKind::Euclidean => {
                if r.is_finite() {
                    let q = r * (1.0 + 1e-12);
                    self.rtree()
                        .locate_within_distance(self.coords[i], q * q)
                        .map(|p| (p.data, self.dist(i, p.data)))
                        .filter(|&(_, d)| d < r)
                        .collect()
                } else {
                    (0..self.len()).map(|j| (j, self.dist(i, j))).collect()
                }
            }
            MetricKind::Graph => {
                let row: Vec<f64> = match self.apsp_table() {
                    Some(t) => t[i * self.len()..(i + 1) * self.len()].to_vec(),
                    None => self.dijkstra(&[i], r),
                };
                row.into_iter()
                    .enumerate()
                    .filter(|&(_, d)| d < r)
                    .collect()
            }
        };
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Points of the open ball `B(i, r)` with their distances, sorted by distance.
    pub fn sorted_ball(&self, i: usize, r: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_sorted(i, r, |j, d| out.push((j, d)));
        out
    }

    /// Indices of the open ball `B(center, r)` in increasing index order.
    pub fn ball(&self, center: usize, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_sorted(center, r, |j, _| out.push(j));
        out.sort_unstable();
        out
    }

    /// Distance to a set and the nearest member (smallest index among ties), per point.
    pub fn nearest_in(&self, members: &[bool]) -> (Vec<f64>, Vec<usize>) {
        use rayon::prelude::*;
        let n = self.len();
        let sources: Vec<usize> = (0..n).filter(|&i| members[i]).collect();
        if sources.is_empty() {
            return (vec![f64::INFINITY; n], vec![usize::MAX; n]);
        }
        if self.metric == MetricKind::Graph {
            return self.dijkstra_nearest(&sources);
        }
        let tree: RTree<TreePoint> = RTree::bulk_load(
            sources
                .iter()
                .map(|&i| GeomWithData::new(self.coords[i], i))
                .collect(),
        );
        (0..n)
            .into_par_iter()
            .map(|z| {
                if members[z] {
                    return (0.0, z);
                }
                let mut best = (f64::INFINITY, usize::MAX);
                let mut first_d2 = None;
                for (p, d2) in tree.nearest_neighbor_iter_with_distance_2(&self.coords[z]) {
                    match first_d2 {
                        None => first_d2 = Some(d2),
                        Some(f) => {
                            if d2 > f * (1.0 + 1e-9) {
                                break;
                            }
                        }
                    }
                    let d = self.dist(z, p.data);
                    if d < best.0 || (d == best.0 && p.data < best.1) {
                        best = (d, p.data);
                    }
                }
                best
            })
            .unzip()
    }

    /// Builds a member mask over this space.
    pub fn mask(&self, members: Vec<bool>) -> Result<SubsetMask> {
        if members.len() != self.len() {
            return Err(Error::Domain(format!(
                "mask has {} flags for {} points",
                members.len(),
                self.len()
            )));
        }
        let (dist, nearest) = self.nearest_in(&members);
        Ok(SubsetMask::from_parts(members, dist, nearest))
    }

    pub fn mask_from_indices(&self, idx: &[usize]) -> Result<SubsetMask> {
        let mut m = vec![false; self.len()];
        for &i in idx {
            if i >= self.len() {
                return Err(Error::Domain(format!("mask index {i} out of range")));
            }
            m[i] = true;
        }
        self.mask(m)
    }

    /// The mask containing every point.
    pub fn full_mask(&self) -> SubsetMask {
        let n = self.len();
        SubsetMask::from_parts(vec![true; n], vec![0.0; n], (0..n).collect())
    }

    /// Sub-space on the given points; returns it with the list of original indices.
    pub fn restrict(&self, mask: &SubsetMask) -> Result<(Space, Vec<usize>)> {
        let keep: Vec<usize> = mask.indices();
        if keep.is_empty() {
            return Err(Error::Domain("cannot restrict to an empty set".into()));
        }
        let mut newidx = vec![usize::MAX; self.len()];
        for (k, &i) in keep.iter().enumerate() {
            newidx[i] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| newidx[e.0] != usize::MAX && newidx[e.1] != usize::MAX)
            .map(|e| (newidx[e.0], newidx[e.1], Some(e.2)))
            .collect();
        let lattice = self.lattice.as_ref().map(|l| l.restrict(&keep));
        let space = Space::with_lattice(
            self.dim,
            keep.iter().map(|&i| self.coords[i]).collect(),
            keep.iter().map(|&i| self.weights[i]).collect(),
            self.metric,
            edges,
            self.scale_unit,
            lattice,
        )?;
        Ok((space, keep))
    }

    /// Checks the triangle inequality and symmetry on sampled triples; returns the worst excess.
    pub fn spot_check_metric(&self, samples: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.len();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            let ab = self.dist(a, b);
            let bc = self.dist(b, c);
            let ac = self.dist(a, c);
            worst = worst.max(ac - ab - bc);
            worst = worst.max((ab - self.dist(b, a)).abs());
        }
        worst
    }

    /// Serializable form of the space.
    pub fn to_file(&self) -> SpaceFile {
        let grid = self.lattice.as_ref().map(|l| GridFile {
            origin: l.origin[..self.dim].to_vec(),
            h: l.h,
            counts: l.counts[..self.dim].to_vec(),
        });
        let edges = if self.lattice.is_some() && self.edges_are_axis_grid() {
            None
        } else {
            Some(
                self.edges
                    .iter()
                    .map(|&(a, b, l)| EdgeSpec::Weighted(a, b, l))
                    .collect(),
            )
        };
        SpaceFile {
            dimension: self.dim,
            points: self.coords.iter().map(|p| p[..self.dim].to_vec()).collect(),
            weights: self.weights.clone(),
            metric: MetricFile {
                kind: self.metric,
                edges,
            },
            scale_unit: self.scale_unit,
            grid,
        }
    }

    fn edges_are_axis_grid(&self) -> bool {
        let Some(l) = &self.lattice else { return false };
        let axis = l.axis_edges();
        axis.len() == self.edges.len()
            && axis
                .iter()
                .zip(&self.edges)
                .all(|(a, e)| a.0 == e.0 && a.1 == e.1 && e.2 == l.h)
    }

    /// Rebuilds a space from its serialized form.
    pub fn from_file(f: &SpaceFile) -> Result<Space> {
        let dim = f.dimension;
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        let mut coords = Vec::with_capacity(f.points.len());
        for p in &f.points {
            if p.len() != dim {
                return Err(Error::Domain(format!(
                    "point has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            let mut c = [0.0; 3];
            c[..dim].copy_from_slice(p);
            coords.push(c);
        }
        let lattice = match &f.grid {
            Some(g) => {
                if g.origin.len() != dim || g.counts.len() != dim || !(g.h > 0.0) {
                    return Err(Error::Domain("grid block does not match dimension".into()));
                }
                let mut origin = [0.0; 3];
                origin[..dim].copy_from_slice(&g.origin);
                let mut counts = [1usize; 3];
                counts[..dim].copy_from_slice(&g.counts);
                Some(
                    Lattice::from_coords(dim, origin, g.h, counts, &coords).ok_or_else(|| {
                        Error::Domain("points do not lie on the declared grid".into())
                    })?,
                )
            }
            None => None,
        };
        let edges: Vec<(usize, usize, Option<f64>)> = match (&f.metric.edges, &lattice) {
            (Some(e), _) => e
                .iter()
                .map(|e| match *e {
                    EdgeSpec::Pair([a, b]) => (a, b, None),
                    EdgeSpec::Weighted(a, b, l) => (a, b, Some(l)),
                })
                .collect(),
            (None, Some(l)) => l
                .axis_edges()
                .into_iter()
                .map(|(a, b)| (a, b, Some(l.h)))
                .collect(),
            (None, None) => Vec::new(),
        };
        if f.metric.kind == MetricKind::Graph && edges.is_empty() && coords.len() > 1 {
            return Err(Error::Domain("graph metric requires edges".into()));
        }
        Space::with_lattice(
            dim,
            coords,
            f.weights.clone(),
            f.metric.kind,
            edges,
            f.scale_unit,
            lattice,
        )
    }
}

/// Builds the uniform grid of cell centers over `bbox` with spacing `h`.
///
/// Neighbours are the axis-adjacent cells; weights are `h^d`; `scale_unit` is 1.
pub fn build_grid_space(
    bbox: &[(f64, f64)],
    h: f64,
    metric: MetricKind,
    budget: usize,
) -> Result<Space> {
    let dim = bbox.len();
    if !(1..=3).contains(&dim) {
        return Err(Error::Domain(format!("bbox dimension must be 1, 2 or 3, got {dim}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("spacing must be positive, got {h}")));
    }
    let mut counts = [1usize; 3];
    let mut origin = [0.0; 3];
    for (k, &(lo, hi)) in bbox.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::Domain(format!("degenerate bbox side [{lo}, {hi}]")));
        }
        let c = ((hi - lo) / h + 1e-9).floor();
        if c < 1.0 {
            return Err(Error::Domain(format!(
                "bbox side [{lo}, {hi}] shorter than spacing {h}"
            )));
        }
        if c > budget as f64 {
            return Err(Error::Size {
                points: usize::MAX,
                budget,
            });
        }
        counts[k] = c as usize;
        origin[k] = lo + 0.5 * h;
    }
    let total: u128 = counts.iter().map(|&c| c as u128).product();
    if total > budget as u128 {
        return Err(Error::Size {
            points: total.min(usize::MAX as u128) as usize,
            budget,
        });
    }
    let total = total as usize;
    let mut coords = Vec::with_capacity(total);
    let mut cells = Vec::with_capacity(total);
    for iz in 0..counts[2] {
        for iy in 0..counts[1] {
            for ix in 0..counts[0] {
                let c = [ix, iy, iz];
                let mut p = [0.0; 3];
                for k in 0..dim {
                    p[k] = origin[k] + c[k] as f64 * h;
                }
                coords.push(p);
                cells.push([ix as i32, iy as i32, iz as i32]);
            }
        }
    }
    let lattice = Lattice::new(dim, origin, h, counts, cells).expect("grid cells are distinct");
    let edges = lattice
        .axis_edges()
        .into_iter()
        .map(|(a, b)| (a, b, Some(h)))
        .collect();
    Space::with_lattice(
        dim,
        coords,
        vec![h.powi(dim as i32); total],
        metric,
        edges,
        1.0,
        Some(lattice),
    )
}

#[inline]
fn euclid(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    d: f64,
    src: usize,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    // Reversed so that BinaryHeap pops the smallest (d, src, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .d
            .total_cmp(&self.d)
            .then(other.src.cmp(&self.src))
            .then(other.node.cmp(&self.node))
    }
}

/// JSON form of a space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub dimension: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub metric: MetricFile,
    pub scale_unit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub kind: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSpec {
    Pair([usize; 2]),
    Weighted(usize, usize, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub origin: Vec<f64>,
    pub h: f64,
    pub counts: Vec<usize>,
}
