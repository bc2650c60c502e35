//! Weak (1,p)-Poincaré inequalities up to scale and the (q,p)-PI property.
//!
//! For a ball `B` centered in `Ω` the relative inequality is
//! `⨍_{Ω∩B} |u − u_{Ω∩B}| ≤ C·diam(Ω∩B)·(⨍_{Ω∩λB} ρᵖ)^{1/p}`.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{gen_domain, gen_test_field, DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::extension::{extension_criterion_sweep, Verdict};
use crate::gradients::{check_hajlasz, discrete_upper_gradient, pair_map, GradientCertificate, Scope};
use crate::space::{maximal_at, Field, MetricKind, Space, SubsetMask};

/// Largest ball diameter computed by all pairs outside the planar hull path.
pub const EXACT_DIAM_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiBall {
    pub center: usize,
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub diam: f64,
    /// False when the diameter came from the double-sweep heuristic.
    pub diam_exact: bool,
    pub points: usize,
}

/// Diameter of a point set and whether it is exact.
pub fn set_diameter(space: &Space, set: &[usize]) -> (f64, bool) {
    if set.len() < 2 {
        return (0.0, true);
    }
    if space.metric() == MetricKind::Euclidean && space.dim() <= 2 {
        let hull = convex_hull(space, set);
        let mut d: f64 = 0.0;
        for (a, &x) in hull.iter().enumerate() {
            for &y in &hull[a + 1..] {
                d = d.max(space.dist(x, y));
            }
        }
        return (d, true);
    }
    if set.len() <= EXACT_DIAM_LIMIT {
        let mut d: f64 = 0.0;
        for (a, &x) in set.iter().enumerate() {
            for &y in &set[a + 1..] {
                d = d.max(space.dist(x, y));
            }
        }
        return (d, true);
    }
    let far = |from: usize| {
        set.iter()
            .map(|&y| (space.dist(from, y), y))
            .fold((0.0, from), |m, c| if c.0 > m.0 { c } else { m })
    };
    let (_, a) = far(set[0]);
    let (d, _) = far(a);
    (d, false)
}

/// Vertices of the planar convex hull (monotone chain); collinear points dropped.
fn convex_hull(space: &Space, set: &[usize]) -> Vec<usize> {
    let mut pts: Vec<usize> = set.to_vec();
    let c = |i: usize| space.coords()[i];
    pts.sort_by(|&a, &b| c(a)[0].total_cmp(&c(b)[0]).then(c(a)[1].total_cmp(&c(b)[1])));
    pts.dedup_by(|a, b| c(*a)[0] == c(*b)[0] && c(*a)[1] == c(*b)[1]);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: usize, a: usize, b: usize| {
        (c(a)[0] - c(o)[0]) * (c(b)[1] - c(o)[1]) - (c(a)[1] - c(o)[1]) * (c(b)[0] - c(o)[0])
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Sorted members of `Ω ∩ B(center, r)`, `d < r`.
fn omega_ball(space: &Space, omega: &SubsetMask, center: usize, r: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    space.for_each_sorted(center, r, |j, d| {
        if omega.contains(j) {
            out.push((j, d));
        }
    });
    out
}

/// `⨍|u − u_B|` computed relative to the first point, so adding a constant
/// that is exact in floating point leaves it unchanged bitwise.
fn mean_oscillation(space: &Space, u: &Field, set: &[usize]) -> f64 {
    let base = u.value(set[0]);
    let (mut w, mut s) = (0.0, 0.0);
    for &i in set {
        w += space.weight(i);
        s += space.weight(i) * (u.value(i) - base);
    }
    let m = s / w;
    set.iter()
        .map(|&i| space.weight(i) * ((u.value(i) - base) - m).abs())
        .sum::<f64>()
        / w
}

#[inline]
fn pow_p(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else {
        v.powf(p)
    }
}

#[inline]
fn root_p(m: f64, p: f64) -> f64 {
    if p == 1.0 {
        m
    } else if p == 2.0 {
        m.sqrt()
    } else {
        m.powf(1.0 / p)
    }
}

/// `(⨍ ρᵖ)^{1/p}` over a set.
fn power_mean(space: &Space, rho: &Field, set: &[usize], p: f64) -> f64 {
    let (mut w, mut s) = (0.0, 0.0);
    for &i in set {
        w += space.weight(i);
        s += space.weight(i) * pow_p(rho.value(i).abs(), p);
    }
    root_p(s / w, p)
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

fn validate(p: f64, lambda: f64, r: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p must lie in [1, ∞), got {p}")));
    }
    if !(lambda >= 1.0) {
        return Err(Error::Domain(format!("λ must be at least 1, got {lambda}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

/// One ball of the relative Poincaré inequality.
#[allow(clippy::too_many_arguments)]
pub fn pi_check_ball(
    space: &Space,
    omega: &SubsetMask,
    center: usize,
    r: f64,
    u: &Field,
    rho: &Field,
    p: f64,
    lambda: f64,
) -> Result<PiBall> {
    validate(p, lambda, r)?;
    let big = omega_ball(space, omega, center, lambda * r);
    let set: Vec<usize> = big.iter().take_while(|e| e.1 < r).map(|e| e.0).collect();
    if set.is_empty() {
        return Err(Error::Domain(format!("Ω ∩ B({center}, {r}) is empty")));
    }
    let big: Vec<usize> = big.into_iter().map(|e| e.0).collect();
    Ok(ball_record(space, center, r, &set, &big, u, rho, p))
}

#[allow(clippy::too_many_arguments)]
fn ball_record(
    space: &Space,
    center: usize,
    r: f64,
    set: &[usize],
    big: &[usize],
    u: &Field,
    rho: &Field,
    p: f64,
) -> PiBall {
    let (diam, diam_exact) = set_diameter(space, set);
    let lhs = mean_oscillation(space, u, set);
    let rhs = diam * power_mean(space, rho, big, p);
    PiBall {
        center,
        r,
        lhs,
        rhs,
        ratio: ratio_of(lhs, rhs),
        diam,
        diam_exact,
        points: set.len(),
    }
}

/// A battery member: a field with its upper-gradient surrogate.
#[derive(Debug, Clone)]
pub struct BatteryField {
    pub name: String,
    pub u: Field,
    pub rho: Field,
}

impl BatteryField {
    /// Pairs `u` with its discrete upper gradient.
    pub fn with_upper_gradient(space: &Space, name: &str, u: Field) -> BatteryField {
        let rho = discrete_upper_gradient(space, (&u).into());
        BatteryField {
            name: name.to_string(),
            u,
            rho,
        }
    }
}

/// Field names of the standard battery for a domain kind.
pub fn battery_names(kind: Option<DomainKind>) -> Vec<String> {
    let mut names: Vec<String> = vec!["constant:1".into(), "linear:x".into(), "linear:y".into(), "radial".into()];
    names.extend((1..=5).map(|s| format!("random_smooth:{s}")));
    match kind {
        Some(DomainKind::SlitDisk) => names.push("slit_jump".into()),
        Some(DomainKind::TwoSquares) => names.push("vertex_jump".into()),
        _ => {}
    }
    names
}

/// Constants, coordinates, radial, five random smooth fields and the
/// domain's obstruction field, each with its discrete upper gradient.
pub fn standard_battery(space: &Space, omega: &Arc<SubsetMask>, kind: Option<DomainKind>) -> Result<Vec<BatteryField>> {
    battery_names(kind)
        .iter()
        .map(|n| Ok(BatteryField::with_upper_gradient(space, n, gen_test_field(n, space, omega)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiPlan {
    /// Radii `r₀·2^{-k}` for `k = 0..n_radii`.
    pub n_radii: usize,
    /// Cap on centers; above it a seeded sample is used.
    pub max_centers: Option<usize>,
    pub seed: u64,
}

impl Default for PiPlan {
    fn default() -> Self {
        PiPlan {
            n_radii: 4,
            max_centers: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConstant {
    pub name: String,
    pub c: f64,
    /// Largest finite ratio.
    pub c_finite: f64,
    pub infinite_balls: usize,
    pub worst: Option<PiBall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PIReport {
    pub p: f64,
    pub lambda: f64,
    pub r0: f64,
    pub radii: Vec<f64>,
    pub battery: Vec<String>,
    pub centers: usize,
    pub balls_checked: usize,
    /// Max ratio over the battery (may be infinite).
    pub c: f64,
    /// Max finite ratio over the battery.
    pub c_finite: f64,
    pub worst_field: Option<String>,
    pub worst: Option<PiBall>,
    pub per_field: Vec<FieldConstant>,
    pub diam_inexact: usize,
}

/// Sweeps centers of `Ω` and radii `r₀·2^{-k}` over a field battery.
#[allow(clippy::too_many_arguments)]
pub fn estimate_pi_constants(
    space: &Space,
    omega: &SubsetMask,
    p: f64,
    lambda: f64,
    r0: f64,
    battery: &[BatteryField],
    plan: &PiPlan,
) -> Result<PIReport> {
    validate(p, lambda, r0)?;
    if battery.is_empty() {
        return Err(Error::Domain("empty field battery".into()));
    }
    let mut centers = omega.indices();
    if let Some(m) = plan.max_centers {
        if centers.len() > m {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            centers.shuffle(&mut rng);
            centers.truncate(m);
            centers.sort_unstable();
        }
    }
    let radii: Vec<f64> = (0..plan.n_radii.max(1)).map(|k| r0 * 0.5f64.powi(k as i32)).collect();
    let nf = battery.len();
    let w = space.weights();
    let rho_p: Vec<Vec<f64>> = battery
        .iter()
        .map(|b| b.rho.values().iter().map(|&v| pow_p(v.abs(), p)).collect())
        .collect();
    type Acc = (Vec<(f64, f64, usize, Option<PiBall>)>, usize, usize);
    let init = || -> Acc { (vec![(0.0, 0.0, 0, None); nf], 0, 0) };
    let merge = |mut a: Acc, b: Acc| -> Acc {
        for (x, y) in a.0.iter_mut().zip(b.0) {
            absorb(x, y);
        }
        a.1 += b.1;
        a.2 += b.2;
        a
    };
    let acc = centers
        .par_iter()
        .fold(init, |mut acc, &x| {
            let big = omega_ball(space, omega, x, lambda * r0);
            for &r in &radii {
                let bigr: Vec<usize> = big.iter().take_while(|e| e.1 < lambda * r).map(|e| e.0).collect();
                let set: Vec<usize> = big.iter().take_while(|e| e.1 < r).map(|e| e.0).collect();
                let (diam, exact) = set_diameter(space, &set);
                acc.1 += 1;
                if !exact {
                    acc.2 += 1;
                }
                for (k, b) in battery.iter().enumerate() {
                    let lhs = mean_oscillation(space, &b.u, &set);
                    let (mut sw, mut sp) = (0.0, 0.0);
                    for &i in &bigr {
                        sw += w[i];
                        sp += w[i] * rho_p[k][i];
                    }
                    let rhs = diam * root_p(sp / sw, p);
                    let ratio = ratio_of(lhs, rhs);
                    let ball = PiBall {
                        center: x,
                        r,
                        lhs,
                        rhs,
                        ratio,
                        diam,
                        diam_exact: exact,
                        points: set.len(),
                    };
                    let fin = if ratio.is_finite() { ratio } else { 0.0 };
                    absorb(&mut acc.0[k], (ratio, fin, usize::from(ratio.is_infinite()), Some(ball)));
                }
            }
            acc
        })
        .reduce(init, merge);
    let per_field: Vec<FieldConstant> = battery
        .iter()
        .zip(acc.0)
        .map(|(b, (c, c_finite, inf, worst))| FieldConstant {
            name: b.name.clone(),
            c,
            c_finite,
            infinite_balls: inf,
            worst,
        })
        .collect();
    let mut best: Option<&FieldConstant> = None;
    for f in &per_field {
        if f.c > best.map_or(0.0, |b| b.c) {
            best = Some(f);
        }
    }
    Ok(PIReport {
        p,
        lambda,
        r0,
        radii,
        battery: battery.iter().map(|b| b.name.clone()).collect(),
        centers: centers.len(),
        balls_checked: acc.1,
        c: best.map_or(0.0, |b| b.c),
        c_finite: per_field.iter().map(|f| f.c_finite).fold(0.0, f64::max),
        worst_field: best.map(|b| b.name.clone()),
        worst: best.and_then(|b| b.worst.clone()),
        per_field: per_field.clone(),
        diam_inexact: acc.2,
    })
}

/// Keeps the larger ratio; ties go to the smaller `(center, -r)` so the
/// result does not depend on the parallel split.
fn absorb(a: &mut (f64, f64, usize, Option<PiBall>), b: (f64, f64, usize, Option<PiBall>)) {
    a.1 = a.1.max(b.1);
    a.2 += b.2;
    let better = match (&a.3, &b.3) {
        (_, None) => false,
        (None, Some(_)) => true,
        (Some(x), Some(y)) => {
            y.ratio > x.ratio
                || (y.ratio == x.ratio && (y.center, -y.r).partial_cmp(&(x.center, -x.r)) == Some(std::cmp::Ordering::Less))
        }
    };
    if better {
        a.0 = b.0;
        a.3 = b.3;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpReport {
    pub q: f64,
    pub p: f64,
    pub r: f64,
    /// Smallest constant making `c·(M_{2r}ρ^q)^{1/q}` a local gradient.
    pub c_pi: f64,
    /// `(M_{2r}ρ^q)^{1/q}` on the domain of `h`.
    pub profile: Field,
    pub certificate: GradientCertificate,
}

/// `(M_{2r}(ρ^q))^{1/q}` with `ρ` zero outside its domain.
pub fn power_maximal(space: &Space, rho: &Field, q: f64, r: f64) -> Result<Field> {
    let full = Arc::new(space.full_mask());
    let dom = rho.domain();
    let pw = Field::from_fn(full, |i| if dom.contains(i) { rho.value(i).abs().powf(q) } else { 0.0 })?;
    let pts = dom.indices();
    let m = maximal_at(space, &pw, Some(2.0 * r), &pts)?;
    let mut vals = vec![0.0; space.len()];
    for (&i, v) in pts.iter().zip(m) {
        vals[i] = v.powf(1.0 / q);
    }
    Field::new(dom.clone(), vals)
}

/// Fits `c_PI` so that `c_PI·(M_{2r}ρ^q)^{1/q}` is a Hajłasz gradient of `h`
/// on every ball of radius `r` (pairs with `d < 2r`).
pub fn qp_pi_check(space: &Space, h: &Field, rho: &Field, q: f64, p: f64, r: f64) -> Result<QpReport> {
    if !(q >= 1.0 && q < p) {
        return Err(Error::Domain(format!("need 1 ≤ q < p, got q = {q}, p = {p}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let dom = h.domain().clone();
    let prof = power_maximal(space, &rho.restrict_to(dom.clone())?, q, r)?;
    let pv = prof.values();
    let scope = Scope::Local(2.0 * r);
    let per = pair_map(space, &dom, scope, 0.0f64, |acc, x, y, d| {
        let du = (h.value(x) - h.value(y)).abs();
        if du > 0.0 {
            let s = d * (pv[x] + pv[y]);
            *acc = acc.max(if s > 0.0 { du / s } else { f64::INFINITY });
        }
    });
    let c_pi = per.into_iter().fold(0.0, f64::max);
    if c_pi.is_infinite() {
        log::warn!("(q,p)-PI fit is infinite: h varies where the maximal profile vanishes");
    }
    let c = c_pi * (1.0 + 1e-12);
    let g = if c.is_finite() {
        prof.map(|v| c * v)?
    } else {
        prof.map(|v| if v > 0.0 { v } else { 0.0 })?
    };
    let certificate = check_hajlasz(space, h.into(), &g, scope, p, 0.0)?;
    Ok(QpReport {
        q,
        p,
        r,
        c_pi,
        profile: prof,
        certificate,
    })
}

/// Relative spread allowed for a constant to count as stable under refinement.
pub const PI_STABLE_SPREAD: f64 = 1.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub domain: String,
    pub field: String,
    pub verdict: Verdict,
    pub hs: Vec<f64>,
    pub pi_constants: Vec<f64>,
    pub pi_stable: bool,
    /// Whether the implication is asserted (`p ≥ d`).
    pub asserted: bool,
    /// False only when asserted and extendable-stable but not PI-stable.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub p: f64,
    pub r0: f64,
    pub lambda: f64,
    pub rows: Vec<ExperimentRow>,
}

/// Max/min ratio of a constant over refinements; infinite when any level is.
pub fn spread(values: &[f64]) -> f64 {
    if values.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

/// Obstruction field used for a domain kind in the experiment.
pub fn obstruction_field(kind: DomainKind) -> &'static str {
    match kind {
        DomainKind::SlitDisk => "slit_jump",
        DomainKind::TwoSquares => "vertex_jump",
        _ => "radial",
    }
}

/// Cross-tabulates the extension verdict against Poincaré stability.
#[allow(clippy::too_many_arguments)]
pub fn extension_implies_pi_experiment(
    family: &[DomainKind],
    hs: &[f64],
    p: f64,
    s_list: &[f64],
    r0: f64,
    lambda: f64,
    plan: &PiPlan,
) -> Result<ExperimentReport> {
    let rows = family
        .iter()
        .map(|&kind| {
            let base = DomainSpec::new(kind, hs[0]);
            let field = obstruction_field(kind);
            let crit = extension_criterion_sweep(&base, hs, field, p, s_list)?;
            let pi_constants = hs
                .iter()
                .map(|&h| {
                    let (space, omega) = gen_domain(&DomainSpec::new(kind, h))?;
                    let battery = standard_battery(&space, &omega, Some(kind))?;
                    Ok(estimate_pi_constants(&space, &omega, p, lambda, r0, &battery, plan)?.c)
                })
                .collect::<Result<Vec<_>>>()?;
            let pi_stable = hs.len() >= 2 && spread(&pi_constants) <= PI_STABLE_SPREAD;
            let asserted = p >= 2.0;
            let consistent = !(asserted && crit.verdict == Verdict::ExtendableStable && !pi_stable);
            Ok(ExperimentRow {
                domain: kind.name().into(),
                field: field.into(),
                verdict: crit.verdict,
                hs: hs.to_vec(),
                pi_constants,
                pi_stable,
                asserted,
                consistent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { p, r0, lambda, rows })
}
