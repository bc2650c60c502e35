//! Whitney covering of `Z ∖ F` by metric balls and its partition of unity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Space, SubsetMask};

/// One selected ball `B(center, radius)` with its anchor in `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitneyBall {
    pub center: usize,
    pub radius: f64,
    pub anchor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCover {
    /// Balls in selection order.
    pub balls: Vec<WhitneyBall>,
    /// Candidates examined by the greedy pass.
    pub candidates: usize,
    /// Candidates rejected because their `r/5` ball met an earlier selection.
    pub rejected: usize,
}

impl WhitneyCover {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

/// Greedy Whitney selection.
///
/// Candidates `z ∈ Z∖F` with `r(z) = d(z,F)/10` are processed by descending
/// `r(z)` then ascending index; a candidate is kept when `B(z, r(z)/5)` shares
/// no point with a kept ball. The anchor is the nearest point of `F`.
pub fn whitney_cover(space: &Space, f: &SubsetMask) -> Result<WhitneyCover> {
    if f.is_empty() {
        return Err(Error::Domain("Whitney cover of an empty set".into()));
    }
    let n = space.len();
    let mut cand: Vec<usize> = (0..n).filter(|&z| !f.contains(z)).collect();
    if let Some(&z) = cand.iter().find(|&&z| !f.dist(z).is_finite()) {
        return Err(Error::Domain(format!("point {z} is at infinite distance from F")));
    }
    cand.sort_by(|&a, &b| f.dist(b).total_cmp(&f.dist(a)).then(a.cmp(&b)));
    let mut claimed = vec![false; n];
    let mut balls = Vec::new();
    let mut rejected = 0;
    let mut members = Vec::new();
    for &z in &cand {
        let r = f.dist(z) / 10.0;
        members.clear();
        let mut hit = false;
        space.for_each_sorted(z, r / 5.0, |j, _| {
            hit |= claimed[j];
            members.push(j);
        });
        if hit {
            rejected += 1;
            continue;
        }
        for &j in &members {
            claimed[j] = true;
        }
        balls.push(WhitneyBall {
            center: z,
            radius: r,
            anchor: f.nearest(z),
        });
    }
    Ok(WhitneyCover {
        balls,
        candidates: cand.len(),
        rejected,
    })
}

/// Relative slack below which a bound is treated as attained.
pub const TIE_TOL: f64 = 1e-12;

/// Result of checking one property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub ok: bool,
    pub violations: usize,
    /// Cases that hold only with equality where the statement is strict.
    pub strict_failures: usize,
    /// Measured constant (worst margin, overlap count or radius ratio).
    pub measured: f64,
    /// Indices of the worst case: points or ball numbers, per property.
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitneyReport {
    pub balls: usize,
    pub properties: Vec<PropertyCheck>,
    /// Measured `max Σ χ_{5Bᵢ}`.
    pub overlap: usize,
    /// Measured max `r_j / r_i` over intersecting 5-dilates.
    pub radius_ratio: f64,
    /// Balls whose 5-dilate holds only its center.
    pub singleton_dilates: usize,
    pub all_ok: bool,
}

/// Optional regression bound for W5.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub overlap_bound: Option<usize>,
}

/// Point-to-ball incidence for the `factor`-dilates, as CSR over points.
struct Incidence {
    start: Vec<usize>,
    balls: Vec<(u32, f64)>,
}

fn incidence(space: &Space, cover: &WhitneyCover, factor: f64) -> Incidence {
    let lists: Vec<Vec<(usize, f64)>> = cover
        .balls
        .par_iter()
        .map(|b| space.sorted_ball(b.center, factor * b.radius))
        .collect();
    let n = space.len();
    let mut count = vec![0usize; n + 1];
    for l in &lists {
        for &(j, _) in l {
            count[j] += 1;
        }
    }
    let mut start = vec![0usize; n + 1];
    for i in 0..n {
        start[i + 1] = start[i] + count[i];
    }
    let mut fill = start.clone();
    let mut balls = vec![(0u32, 0.0); start[n]];
    for (bi, l) in lists.iter().enumerate() {
        for &(j, d) in l {
            balls[fill[j]] = (bi as u32, d);
            fill[j] += 1;
        }
    }
    Incidence { start, balls }
}

impl Incidence {
    fn at(&self, z: usize) -> &[(u32, f64)] {
        &self.balls[self.start[z]..self.start[z + 1]]
    }
}

/// Checks W1–W6 exhaustively on the discrete point sets.
pub fn verify_whitney(
    space: &Space,
    f: &SubsetMask,
    cover: &WhitneyCover,
    opts: &VerifyOptions,
) -> WhitneyReport {
    let n = space.len();
    let five = incidence(space, cover, 5.0);
    let fifth = incidence(space, cover, 0.2);
    let one = incidence(space, cover, 1.0);
    let balls = &cover.balls;

    // W1: 5Bᵢ ∩ F = ∅.
    let mut w1 = check("W1", 0.0);
    // W3: 5rᵢ ≤ d(z,F) ≤ 15rᵢ on 5Bᵢ; measured is the worst relative margin.
    let mut w3 = check("W3", f64::INFINITY);
    let mut singleton = vec![0usize; balls.len()];
    for z in 0..n {
        for &(bi, _) in five.at(z) {
            let b = &balls[bi as usize];
            singleton[bi as usize] += 1;
            if f.contains(z) {
                w1.violations += 1;
                w1.witness = vec![bi as usize, z];
            }
            let dz = f.dist(z);
            let (lo, hi) = (5.0 * b.radius, 15.0 * b.radius);
            let margin = ((dz - lo) / b.radius).min((hi - dz) / b.radius);
            // Points on the sphere of 5Bᵢ can enter it through rounding; ties
            // within a few ulps count as equality.
            let tol = TIE_TOL * b.radius;
            if dz < lo - tol || dz > hi + tol {
                w3.violations += 1;
            } else if dz <= lo + tol || dz >= hi - tol {
                w3.strict_failures += 1;
            }
            if margin < w3.measured {
                w3.measured = margin;
                w3.witness = vec![bi as usize, z];
            }
        }
    }
    let singleton_dilates = singleton.iter().filter(|&&c| c == 1).count();

    // W2: coverage by Bᵢ and disjointness of the r/5 balls.
    let mut w2 = check("W2", 0.0);
    for z in 0..n {
        if !f.contains(z) && one.at(z).is_empty() {
            w2.violations += 1;
            w2.witness = vec![z];
        }
        if fifth.at(z).len() > 1 {
            w2.violations += 1;
            w2.witness = vec![z];
        }
        w2.measured = w2.measured.max(fifth.at(z).len() as f64);
    }

    // W4: anchor in F with d(zᵢ, zᵢ*) < 15 rᵢ.
    let mut w4 = check("W4", 0.0);
    for (bi, b) in balls.iter().enumerate() {
        let d = space.dist(b.center, b.anchor);
        let ratio = d / b.radius;
        if !f.contains(b.anchor) || !(d <= 15.0 * b.radius) {
            w4.violations += 1;
            w4.witness = vec![bi];
        } else if d == 15.0 * b.radius {
            w4.strict_failures += 1;
        }
        if ratio > w4.measured {
            w4.measured = ratio;
            if w4.violations == 0 {
                w4.witness = vec![bi];
            }
        }
    }

    // W5 and W6 from one sweep over the 5-dilate incidence.
    let mut w5 = check("W5", 0.0);
    let mut w6 = check("W6", 0.0);
    for z in 0..n {
        let inc = five.at(z);
        if inc.len() as f64 > w5.measured {
            w5.measured = inc.len() as f64;
            w5.witness = vec![z];
        }
        if inc.len() > 1 {
            let (mut small, mut big) = (inc[0].0 as usize, inc[0].0 as usize);
            for &(bi, _) in inc {
                let bi = bi as usize;
                if balls[bi].radius < balls[small].radius {
                    small = bi;
                }
                if balls[bi].radius > balls[big].radius {
                    big = bi;
                }
            }
            let ratio = balls[big].radius / balls[small].radius;
            if ratio > w6.measured {
                w6.measured = ratio;
                w6.witness = vec![small, big, z];
            }
            if ratio > 75.0 {
                w6.violations += 1;
            }
        }
    }
    if let Some(bound) = opts.overlap_bound {
        if w5.measured > bound as f64 {
            w5.violations += 1;
        }
    }
    let overlap = w5.measured as usize;
    let radius_ratio = w6.measured;
    let mut properties = vec![w1, w2, w3, w4, w5, w6];
    for p in &mut properties {
        p.ok = p.violations == 0;
    }
    if balls.is_empty() {
        properties[2].measured = 0.0;
    }
    let all_ok = properties.iter().all(|p| p.ok);
    WhitneyReport {
        balls: balls.len(),
        properties,
        overlap,
        radius_ratio,
        singleton_dilates,
        all_ok,
    }
}

fn check(name: &str, measured: f64) -> PropertyCheck {
    PropertyCheck {
        name: name.into(),
        ok: true,
        violations: 0,
        strict_failures: 0,
        measured,
        witness: Vec::new(),
    }
}

/// Profile ψ: 1 on `[0,1]`, `3 − 2t` on `[1, 3/2]`, 0 beyond.
#[inline]
pub fn profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t < 1.5 {
        3.0 - 2.0 * t
    } else {
        0.0
    }
}

/// Normalized bumps `φᵢ = ψᵢ / Σⱼ ψⱼ`, stored sparsely per point.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    start: Vec<usize>,
    entries: Vec<(u32, f64)>,
    /// Measured overlap `max Σ χ_{5Bᵢ}`.
    pub overlap: usize,
}

impl PartitionOfUnity {
    /// Nonzero `(ball, φᵢ(z))` pairs at `z`, by ball number; empty on `F`.
    pub fn at(&self, z: usize) -> &[(u32, f64)] {
        &self.entries[self.start[z]..self.start[z + 1]]
    }

    pub fn value(&self, ball: usize, z: usize) -> f64 {
        self.at(z)
            .iter()
            .find(|e| e.0 as usize == ball)
            .map_or(0.0, |e| e.1)
    }

    pub fn len(&self) -> usize {
        self.start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the partition of unity for a nonempty cover.
pub fn partition_of_unity(space: &Space, f: &SubsetMask, cover: &WhitneyCover) -> Result<PartitionOfUnity> {
    if cover.is_empty() {
        return Err(Error::Domain("partition of unity needs a nonempty cover".into()));
    }
    let n = space.len();
    let support = incidence(space, cover, 1.5);
    let five = incidence(space, cover, 5.0);
    let overlap = (0..n).map(|z| five.at(z).len()).max().unwrap_or(0);
    let mut start = vec![0usize; n + 1];
    let mut entries = Vec::with_capacity(support.balls.len());
    for z in 0..n {
        if !f.contains(z) {
            let inc = support.at(z);
            let mut row: Vec<(u32, f64)> = inc
                .iter()
                .map(|&(bi, d)| (bi, profile(d / cover.balls[bi as usize].radius)))
                .filter(|e| e.1 > 0.0)
                .collect();
            row.sort_by_key(|e| e.0);
            let total: f64 = row.iter().map(|e| e.1).sum();
            if !(total > 0.0) {
                return Err(Error::Invariant(format!(
                    "no bump is positive at point {z} of Z∖F"
                )));
            }
            entries.extend(row.into_iter().map(|(bi, v)| (bi, v / total)));
        }
        start[z + 1] = entries.len();
    }
    Ok(PartitionOfUnity {
        start,
        entries,
        overlap,
    })
}

/// Discrete Lipschitz constant `max rᵢ·|φᵢ(a) − φᵢ(b)| / d(a,b)` over neighbour pairs.
pub fn partition_lipschitz(space: &Space, cover: &WhitneyCover, pou: &PartitionOfUnity) -> f64 {
    let mut k: f64 = 0.0;
    for &(a, b, _) in space.edges() {
        let d = space.dist(a, b);
        let (ra, rb) = (pou.at(a), pou.at(b));
        let mut touch = |bi: u32| {
            let diff = (pou.value(bi as usize, a) - pou.value(bi as usize, b)).abs();
            k = k.max(cover.balls[bi as usize].radius * diff / d);
        };
        for &(bi, _) in ra.iter().chain(rb) {
            touch(bi);
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub points: usize,
    pub max_sum_error: f64,
    pub support_violations: usize,
    pub lower_bound_violations: usize,
    pub overlap: usize,
    pub lipschitz: f64,
    pub ok: bool,
}

/// Checks normalization, support in `2Bᵢ` and `φᵢ ≥ 1/M` on `Bᵢ` at every point.
pub fn verify_partition(space: &Space, f: &SubsetMask, cover: &WhitneyCover, pou: &PartitionOfUnity) -> PartitionReport {
    let n = space.len();
    let m = pou.overlap as f64;
    let mut max_err: f64 = 0.0;
    let mut support = 0;
    let mut lower = 0;
    for z in 0..n {
        let row = pou.at(z);
        if f.contains(z) {
            if !row.is_empty() {
                support += 1;
            }
            continue;
        }
        let s: f64 = row.iter().map(|e| e.1).sum();
        max_err = max_err.max((s - 1.0).abs());
        for &(bi, _) in row {
            let b = &cover.balls[bi as usize];
            let d = space.dist(z, b.center);
            if !(d < 2.0 * b.radius) {
                support += 1;
            }
        }
    }
    // φᵢ ≥ 1/M wherever z ∈ Bᵢ.
    let one = incidence(space, cover, 1.0);
    for z in 0..n {
        for &(bi, _) in one.at(z) {
            if pou.value(bi as usize, z) < 1.0 / m {
                lower += 1;
            }
        }
    }
    let lipschitz = partition_lipschitz(space, cover, pou);
    PartitionReport {
        points: n - f.count(),
        max_sum_error: max_err,
        support_violations: support,
        lower_bound_violations: lower,
        overlap: pou.overlap,
        lipschitz,
        ok: max_err <= 1e-12 && support == 0 && lower == 0,
    }
}
