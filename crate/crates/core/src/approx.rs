//! Finite-dimensional approximation: Schauder truncations, inf-convolution
//! Lipschitz approximants and coordinatewise density checks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradients::discrete_upper_gradient;
use crate::norms::lp_norm;
use crate::space::{Field, MetricKind, NormTag, Space, VecField};

/// `T_k u`: keeps the first `k` coordinates and zeroes the rest.
pub fn schauder_truncate(u: &VecField, k: usize) -> Result<VecField> {
    let n = u.n();
    if k < 1 || k > n {
        return Err(Error::Domain(format!("truncation level {k} outside 1..={n}")));
    }
    let vals = u
        .values()
        .chunks(n)
        .flat_map(|c| c.iter().enumerate().map(move |(i, &v)| if i < k { v } else { 0.0 }))
        .collect();
    u.with_values(vals)
}

/// Vector field with coordinates `2^{-i}·f` for `i = 0..n` under the sup norm.
pub fn geometric_field(f: &Field, n: usize) -> Result<VecField> {
    let coords = (0..n)
        .map(|i| f.map(|v| v * 0.5f64.powi(i as i32)))
        .collect::<Result<Vec<_>>>()?;
    VecField::from_coords(&coords, NormTag::Sup)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationLevel {
    pub k: usize,
    /// `‖u − T_k u‖_{Lᵖ}`.
    pub error: f64,
    /// `‖ρ(T_k u)‖_{Lᵖ}`.
    pub rho_norm: f64,
    /// Points where `ρ(T_k u) > ρ(u)`.
    pub rho_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDensityReport {
    pub p: f64,
    pub n: usize,
    pub rho_u_norm: f64,
    pub levels: Vec<TruncationLevel>,
    pub error_nonincreasing: bool,
    pub exact_at_n: bool,
    pub ok: bool,
}

/// Truncation ladder `k = 1..N` with errors and upper-gradient comparisons.
pub fn energy_density_report(space: &Space, u: &VecField, p: f64) -> Result<EnergyDensityReport> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must lie in [1, ∞], got {p}")));
    }
    let dom = u.domain().indices();
    let rho_u = discrete_upper_gradient(space, u.into());
    let mut levels = Vec::with_capacity(u.n());
    for k in 1..=u.n() {
        let t = schauder_truncate(u, k)?;
        let err: Vec<f64> = (0..space.len())
            .map(|i| if u.domain().contains(i) { u.norm_tag().norm_diff(u.at(i), t.at(i)) } else { 0.0 })
            .collect();
        let rho_t = discrete_upper_gradient(space, (&t).into());
        let rho_violations = dom.iter().filter(|&&i| rho_t.value(i) > rho_u.value(i)).count();
        levels.push(TruncationLevel {
            k,
            error: lp_norm(space, &err, dom.iter().copied(), p),
            rho_norm: lp_norm(space, rho_t.values(), dom.iter().copied(), p),
            rho_violations,
        });
    }
    let error_nonincreasing = levels.windows(2).all(|w| w[1].error <= w[0].error);
    let exact_at_n = levels.last().is_some_and(|l| l.error == 0.0);
    let ok = error_nonincreasing && exact_at_n && levels.iter().all(|l| l.rho_violations == 0);
    Ok(EnergyDensityReport {
        p,
        n: u.n(),
        rho_u_norm: lp_norm(space, rho_u.values(), dom.iter().copied(), p),
        levels,
        error_nonincreasing,
        exact_at_n,
        ok,
    })
}

/// Min-convolution `u_L(x) = min_y u(y) + L·d(x,y)` over the domain of `u`.
///
/// With `symmetric`, returns the average of the lower and the upper
/// (`max_y u(y) − L·d(x,y)`) envelopes instead. Graph spaces use shortest
/// paths seeded with `u`; Euclidean spaces scan all pairs.
pub fn lipschitz_approximate(space: &Space, u: &Field, l: f64, symmetric: bool) -> Result<Field> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Domain(format!("Lipschitz constant must be positive and finite, got {l}")));
    }
    let lower = envelope(space, u, l, false);
    let vals = if symmetric {
        let upper = envelope(space, u, l, true);
        lower.iter().zip(&upper).map(|(a, b)| 0.5 * (a + b)).collect()
    } else {
        lower
    };
    Field::new(u.domain().clone(), vals)
}

fn envelope(space: &Space, u: &Field, l: f64, upper: bool) -> Vec<f64> {
    let dom = u.domain();
    let members = dom.indices();
    let sign = if upper { -1.0 } else { 1.0 };
    let vals = u.values();
    let lowered: Vec<f64> = match space.metric() {
        MetricKind::Graph => seeded_paths(space, &members, |y| sign * vals[y], l),
        MetricKind::Euclidean => {
            let mut out = vec![0.0; space.len()];
            let best: Vec<f64> = members
                .par_iter()
                .map(|&x| {
                    members
                        .iter()
                        .map(|&y| sign * vals[y] + l * space.dist(x, y))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            for (&x, b) in members.iter().zip(best) {
                out[x] = b;
            }
            out
        }
    };
    (0..space.len())
        .map(|i| if dom.contains(i) { sign * lowered[i] } else { 0.0 })
        .collect()
}

struct Label {
    v: f64,
    node: usize,
}

impl PartialEq for Label {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Label {
    fn cmp(&self, o: &Self) -> Ordering {
        o.v.total_cmp(&self.v).then(o.node.cmp(&self.node))
    }
}

/// `min_y seed(y) + l·d_graph(x,y)` by Dijkstra with initial labels.
fn seeded_paths(space: &Space, sources: &[usize], seed: impl Fn(usize) -> f64, l: f64) -> Vec<f64> {
    let mut val = vec![f64::INFINITY; space.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        val[s] = seed(s);
        heap.push(Label { v: val[s], node: s });
    }
    let mut done = vec![false; space.len()];
    while let Some(Label { v, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        for &(m, len) in space.neighbors(node) {
            let nv = v + l * len;
            if nv < val[m] {
                val[m] = nv;
                heap.push(Label { v: nv, node: m });
            }
        }
    }
    val
}

/// Largest `|f(x) − f(y)| − L·d(x,y)` over pairs of the domain (≤ 0 when `f` is L-Lipschitz).
///
/// All pairs up to `exhaustive_limit` domain points, otherwise pairs from
/// `samples` seeded random centers against every point.
pub fn lipschitz_excess(space: &Space, f: &Field, l: f64, exhaustive_limit: usize, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let members = f.domain().indices();
    let centers: Vec<usize> = if members.len() <= exhaustive_limit {
        members.clone()
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..samples).map(|_| members[rng.gen_range(0..members.len())]).collect()
    };
    centers
        .par_iter()
        .map(|&x| {
            members
                .iter()
                .map(|&y| (f.value(x) - f.value(y)).abs() - l * space.dist(x, y))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityLevel {
    pub l: f64,
    /// `‖u − h‖_{Lᵖ}` for the vector difference.
    pub error: f64,
    pub coordinate_errors: Vec<f64>,
    /// Edges where the vector quotient differs from the coordinatewise max.
    pub edge_mismatches: usize,
    pub edges_checked: usize,
    pub triangle_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub p: f64,
    pub n: usize,
    pub levels: Vec<DensityLevel>,
    pub ok: bool,
}

/// Coordinatewise Lipschitz approximants and the edgewise identity
/// `|Δ(u−h)|_∞ = maxᵢ |Δ(uᵢ−hᵢ)|`.
pub fn coordinatewise_density_check(space: &Space, u: &VecField, p: f64, l_list: &[f64]) -> Result<DensityReport> {
    if u.norm_tag() != NormTag::Sup {
        return Err(Error::Domain("coordinatewise density needs the sup norm".into()));
    }
    let dom = u.domain().clone();
    let members = dom.indices();
    let n = u.n();
    let levels = l_list
        .iter()
        .map(|&l| {
            let approx = (0..n)
                .map(|k| lipschitz_approximate(space, &u.coord(k)?, l, false))
                .collect::<Result<Vec<_>>>()?;
            let h = VecField::from_coords(&approx, NormTag::Sup)?;
            let diff: Vec<f64> = u.values().iter().zip(h.values()).map(|(a, b)| a - b).collect();
            let d = u.with_values(diff)?;
            let coord_diffs = (0..n).map(|k| d.coord(k)).collect::<Result<Vec<_>>>()?;
            let norms = d.norm_field();
            let error = lp_norm(space, norms.values(), members.iter().copied(), p);
            let coordinate_errors: Vec<f64> = coord_diffs
                .iter()
                .map(|c| lp_norm(space, c.values(), members.iter().copied(), p))
                .collect();
            let (mut checked, mut mismatches) = (0, 0);
            for &(a, b, _) in space.edges() {
                if dom.contains(a) && dom.contains(b) {
                    checked += 1;
                    let whole = d.diff_norm(a, b);
                    let each = coord_diffs
                        .iter()
                        .map(|c| (c.value(a) - c.value(b)).abs())
                        .fold(0.0, f64::max);
                    if whole != each {
                        mismatches += 1;
                    }
                }
            }
            let sum: f64 = coordinate_errors.iter().sum();
            Ok(DensityLevel {
                l,
                error,
                triangle_ok: error <= sum * (1.0 + 1e-12),
                coordinate_errors,
                edge_mismatches: mismatches,
                edges_checked: checked,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ok = levels.iter().all(|l| l.edge_mismatches == 0 && l.triangle_ok);
    Ok(DensityReport { p, n, levels, ok })
}
