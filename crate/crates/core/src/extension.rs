//! Linear extension operators from a subset `F` to the whole space.
//!
//! `Ẽ(u)` equals `u` on `F` and `Σ_{i∈I₁} φᵢ·u_{B⋆ᵢ∩F}` on `U∖F`, where the `φᵢ`
//! are the Whitney partition of unity, `B⋆ᵢ = B(zᵢ⋆, rᵢ)` and
//! `I₁ = {i : rᵢ < scale_unit}`. The `p > 1` operator multiplies by the cutoff
//! `max(0, 1 − d(F,z)/scale_unit)`; the `p = 1` operator multiplies by
//! `Σᵢ ψ·φ̃ᵢ`, built from a second covering by balls of radius `scale_unit/10`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{gen_domain, gen_test_field, DomainSpec};
use crate::error::{Error, Result};
use crate::gradients::{
    minimal_hajlasz_gradient, sharp_functional_multi, Scope, SharpOptions, SolveOptions, Values,
};
use crate::norms::lp_norm;
use crate::space::{maximal_at, maximal_with_caps, measure_density_constant, Field, Space, SubsetMask, VecField};
use crate::whitney::{partition_of_unity, whitney_cover};

/// `U = B(F, U_FACTOR·scale_unit)`.
pub const U_FACTOR: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    #[serde(rename = "p_gt_1")]
    PGt1,
    #[serde(rename = "p_eq_1")]
    PEq1,
}

impl OperatorKind {
    /// Construction used for exponent `p`.
    pub fn for_p(p: f64) -> Result<OperatorKind> {
        if p == 1.0 {
            Ok(OperatorKind::PEq1)
        } else if p > 1.0 {
            Ok(OperatorKind::PGt1)
        } else {
            Err(Error::Domain(format!("p must be at least 1, got {p}")))
        }
    }
}

/// Sparse representation of one extension operator on a fixed `(Z, F)`.
#[derive(Debug, Clone)]
pub struct ExtensionOperator {
    kind: OperatorKind,
    f: Arc<SubsetMask>,
    full: Arc<SubsetMask>,
    /// `B⋆ᵢ∩F` for each ball in `I₁`.
    sets: Vec<Vec<usize>>,
    /// Per point of `U∖F`: `(set, φᵢ)`.
    start: Vec<usize>,
    entries: Vec<(u32, f64)>,
    /// Multiplier applied to `Ẽ` off `F`.
    cutoff: Vec<f64>,
    pub whitney_balls: usize,
    pub i1_balls: usize,
    /// Centers of the `p = 1` covering (empty for `p > 1`).
    pub p1_centers: Vec<usize>,
    /// Measured `max Σ χ_{5Bᵢ}` of the `p = 1` covering.
    pub p1_overlap: usize,
}

impl ExtensionOperator {
    pub fn new(space: &Space, f: &Arc<SubsetMask>, kind: OperatorKind) -> Result<ExtensionOperator> {
        if f.is_empty() {
            return Err(Error::Domain("cannot extend from an empty set".into()));
        }
        if f.universe() != space.len() {
            return Err(Error::Domain("subset mask does not match the space".into()));
        }
        let n = space.len();
        let su = space.scale_unit();
        let cover = whitney_cover(space, f)?;
        let pou = if cover.is_empty() {
            None
        } else {
            Some(partition_of_unity(space, f, &cover)?)
        };
        let mut set_of = vec![u32::MAX; cover.len()];
        let mut sets = Vec::new();
        for (i, b) in cover.balls.iter().enumerate() {
            if b.radius < su {
                set_of[i] = sets.len() as u32;
                let mut set = Vec::new();
                space.for_each_sorted(b.anchor, b.radius, |j, _| {
                    if f.contains(j) {
                        set.push(j);
                    }
                });
                sets.push(set);
            }
        }
        let mut start = vec![0usize; n + 1];
        let mut entries = Vec::new();
        for z in 0..n {
            if !f.contains(z) && f.dist(z) < U_FACTOR * su {
                if let Some(pou) = &pou {
                    for &(bi, phi) in pou.at(z) {
                        let s = set_of[bi as usize];
                        if s != u32::MAX {
                            entries.push((s, phi));
                        }
                    }
                }
            }
            start[z + 1] = entries.len();
        }
        let (cutoff, p1_centers, p1_overlap) = match kind {
            OperatorKind::PGt1 => {
                let c = (0..n)
                    .map(|z| if f.contains(z) { 1.0 } else { (1.0 - f.dist(z) / su).max(0.0) })
                    .collect();
                (c, Vec::new(), 0)
            }
            OperatorKind::PEq1 => p1_cutoff(space, f),
        };
        Ok(ExtensionOperator {
            kind,
            f: f.clone(),
            full: Arc::new(space.full_mask()),
            sets,
            start,
            entries,
            cutoff,
            whitney_balls: cover.len(),
            i1_balls: set_of.iter().filter(|&&s| s != u32::MAX).count(),
            p1_centers,
            p1_overlap,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn subset(&self) -> &Arc<SubsetMask> {
        &self.f
    }

    /// Multiplier applied to `Ẽ(u)` at `z` (1 on `F`).
    pub fn cutoff(&self, z: usize) -> f64 {
        self.cutoff[z]
    }

    /// `(B⋆ᵢ∩F index, φᵢ(z))` at a point of `U∖F`.
    pub fn row(&self, z: usize) -> &[(u32, f64)] {
        &self.entries[self.start[z]..self.start[z + 1]]
    }

    /// Whether `z ∈ U`.
    pub fn in_u(&self, space: &Space, z: usize) -> bool {
        self.f.dist(z) < U_FACTOR * space.scale_unit()
    }

    fn check_input(&self, u: &Field) -> Result<()> {
        if u.domain().universe() != self.f.universe() {
            return Err(Error::Domain("field does not live on the operator's space".into()));
        }
        if let Some(i) = self.f.indices().into_iter().find(|&i| !u.domain().contains(i)) {
            return Err(Error::Domain(format!("u is undefined at point {i} of F")));
        }
        Ok(())
    }

    /// `Ẽ(u)` on every point (zero outside `U`).
    ///
    /// Averages are `Σ µu / Σ µ` in a fixed order, so the map is odd and
    /// monotone in floating point as well.
    pub fn tilde(&self, space: &Space, u: &Field) -> Result<Field> {
        self.check_input(u)?;
        let w = space.weights();
        let vals = u.values();
        let avgs: Vec<f64> = self
            .sets
            .iter()
            .map(|set| {
                let (mut sw, mut s) = (0.0, 0.0);
                for &j in set {
                    sw += w[j];
                    s += w[j] * vals[j];
                }
                s / sw
            })
            .collect();
        let out = (0..self.f.universe())
            .map(|z| {
                if self.f.contains(z) {
                    vals[z]
                } else {
                    self.row(z).iter().map(|&(s, phi)| phi * avgs[s as usize]).sum()
                }
            })
            .collect();
        Field::new(self.full.clone(), out)
    }

    /// `E(u)`; equals `u` bitwise on `F`.
    pub fn apply(&self, space: &Space, u: &Field) -> Result<Field> {
        let t = self.tilde(space, u)?;
        let vals = (0..self.f.universe())
            .map(|z| {
                if self.f.contains(z) {
                    u.value(z)
                } else {
                    self.cutoff[z] * t.value(z)
                }
            })
            .collect();
        Field::new(self.full.clone(), vals)
    }

    /// Coordinatewise [`ExtensionOperator::apply`].
    pub fn apply_vec(&self, space: &Space, u: &VecField) -> Result<VecField> {
        let coords = (0..u.n())
            .map(|k| self.apply(space, &u.coord(k)?))
            .collect::<Result<Vec<_>>>()?;
        VecField::from_coords(&coords, u.norm_tag())
    }

    /// Coordinatewise [`ExtensionOperator::tilde`].
    pub fn tilde_vec(&self, space: &Space, u: &VecField) -> Result<VecField> {
        let coords = (0..u.n())
            .map(|k| self.tilde(space, &u.coord(k)?))
            .collect::<Result<Vec<_>>>()?;
        VecField::from_coords(&coords, u.norm_tag())
    }
}

/// Cutoff `ψ·Σφ̃ᵢ` of the `p = 1` construction, the covering centers and its overlap.
fn p1_cutoff(space: &Space, f: &SubsetMask) -> (Vec<f64>, Vec<usize>, usize) {
    let n = space.len();
    let r = space.scale_unit() / 10.0;
    let mut is_center = vec![false; n];
    let mut centers = Vec::new();
    for c in f.indices() {
        let mut clash = false;
        space.for_each_sorted(c, 2.0 * r, |j, _| clash |= is_center[j]);
        if !clash {
            is_center[c] = true;
            centers.push(c);
        }
    }
    let mut count = vec![0usize; n];
    for &c in &centers {
        space.for_each_sorted(c, 5.0 * r, |j, _| count[j] += 1);
    }
    let overlap = count.iter().copied().max().unwrap_or(0);
    let cutoff = (0..n)
        .map(|z| {
            if f.contains(z) {
                1.0
            } else if count[z] > 0 {
                (1.0 - f.dist(z) / r).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    (cutoff, centers, overlap)
}

/// Bump `ψ̃ᵢ` of the `p = 1` covering at distance `d` from its center.
pub fn p1_profile(d: f64, r: f64) -> f64 {
    ((5.0 * r - d) / (2.0 * r)).clamp(0.0, 1.0)
}

/// Extended field, scalar or vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Extended {
    Scalar(Field),
    Vector(VecField),
}

impl Extended {
    pub fn scalar(&self) -> Option<&Field> {
        match self {
            Extended::Scalar(f) => Some(f),
            Extended::Vector(_) => None,
        }
    }

    pub fn vector(&self) -> Option<&VecField> {
        match self {
            Extended::Vector(v) => Some(v),
            Extended::Scalar(_) => None,
        }
    }

    /// Pointwise norm (absolute value for scalars).
    pub fn norm_values(&self) -> Vec<f64> {
        match self {
            Extended::Scalar(f) => f.values().iter().map(|v| v.abs()).collect(),
            Extended::Vector(v) => v.norm_field().values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendOptions {
    /// Compute the pointwise maximal-bound margin (cost grows with `d(F,z)`).
    pub maximal_margin: bool,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        ExtendOptions { maximal_margin: true }
    }
}

/// Fitted constant in `|Ẽ(u)(x)| ≤ C·M(û)(x)` and where it is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalBound {
    pub c: f64,
    pub worst: Option<usize>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionDiagnostics {
    pub p: f64,
    pub norm_u: f64,
    pub norm_h: f64,
    pub sup_h: f64,
    /// `max_F |h − u|`.
    pub restriction_residual: f64,
    pub maximal_margin: Option<MaximalBound>,
    /// Measure-density constant of `F` up to `scale_unit/10`.
    pub density: f64,
    pub whitney_balls: usize,
    pub i1_balls: usize,
    pub p1_balls: usize,
    pub p1_overlap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionResult {
    pub h: Extended,
    pub tilde: Extended,
    pub operator_kind: OperatorKind,
    pub diagnostics: ExtensionDiagnostics,
}

/// `E(u)` for `p > 1` (cutoff construction) or `p = 1` (double partition).
pub fn extend(space: &Space, f: &Arc<SubsetMask>, u: &Field, p: f64) -> Result<ExtensionResult> {
    extend_with(space, f, Values::Scalar(u), p, &ExtendOptions::default())
}

/// The `p = 1` construction.
pub fn extend_p1(space: &Space, f: &Arc<SubsetMask>, u: &Field) -> Result<ExtensionResult> {
    extend_with(space, f, Values::Scalar(u), 1.0, &ExtendOptions::default())
}

/// Coordinatewise extension of a vector field.
pub fn extend_vector(space: &Space, f: &Arc<SubsetMask>, u: &VecField, p: f64) -> Result<ExtensionResult> {
    extend_with(space, f, Values::Vector(u), p, &ExtendOptions::default())
}

pub fn extend_with(
    space: &Space,
    f: &Arc<SubsetMask>,
    u: Values,
    p: f64,
    opts: &ExtendOptions,
) -> Result<ExtensionResult> {
    let kind = OperatorKind::for_p(p)?;
    let op = ExtensionOperator::new(space, f, kind)?;
    let density = measure_density_constant(space, f, space.scale_unit() / 10.0)?.value;
    if !(density > 0.0) {
        log::warn!("F has vanishing measure density");
    }
    let (h, tilde, u_abs) = match u {
        Values::Scalar(s) => (
            Extended::Scalar(op.apply(space, s)?),
            Extended::Scalar(op.tilde(space, s)?),
            s.abs(),
        ),
        Values::Vector(v) => (
            Extended::Vector(op.apply_vec(space, v)?),
            Extended::Vector(op.tilde_vec(space, v)?),
            v.norm_field(),
        ),
    };
    let fi = f.indices();
    let h_norm = h.norm_values();
    let residual = match (&h, u) {
        (Extended::Scalar(hs), Values::Scalar(s)) => fi
            .iter()
            .map(|&i| (hs.value(i) - s.value(i)).abs())
            .fold(0.0, f64::max),
        (Extended::Vector(hv), Values::Vector(v)) => fi
            .iter()
            .map(|&i| v.norm_tag().norm_diff(hv.at(i), v.at(i)))
            .fold(0.0, f64::max),
        _ => unreachable!(),
    };
    let maximal_margin = if opts.maximal_margin {
        let t = Field::new(op.full.clone(), tilde.norm_values())?;
        Some(maximal_bound(space, &op, &t, &u_abs)?)
    } else {
        None
    };
    let diagnostics = ExtensionDiagnostics {
        p,
        norm_u: lp_norm(space, u_abs.values(), fi.iter().copied(), p),
        norm_h: lp_norm(space, &h_norm, 0..space.len(), p),
        sup_h: h_norm.iter().fold(0.0, |m, &v| m.max(v)),
        restriction_residual: residual,
        maximal_margin,
        density,
        whitney_balls: op.whitney_balls,
        i1_balls: op.i1_balls,
        p1_balls: op.p1_centers.len(),
        p1_overlap: op.p1_overlap,
    };
    Ok(ExtensionResult {
        h,
        tilde,
        operator_kind: kind,
        diagnostics,
    })
}

/// Smallest `C` with `|t(x)| ≤ C·M(û)(x)` on `U∖F`, where `û` is `u_abs` on `F` and 0 elsewhere.
///
/// The maximal function at `x` is restricted to radii below `2·d(x,F)`, which
/// already contains every `B⋆ᵢ` used at `x`; the restriction only lowers `M`,
/// so the fitted constant is an upper bound for the unrestricted one.
pub fn maximal_bound(space: &Space, op: &ExtensionOperator, t: &Field, u_abs: &Field) -> Result<MaximalBound> {
    let f = op.subset();
    let hat = Field::from_fn(op.full.clone(), |i| if f.contains(i) { u_abs.value(i).abs() } else { 0.0 })?;
    let pts: Vec<usize> = (0..space.len())
        .filter(|&z| !f.contains(z) && op.in_u(space, z))
        .collect();
    let m = maximal_with_caps(space, &hat, &pts, |z| 2.0 * f.dist(z))?;
    let mut best = MaximalBound {
        c: 0.0,
        worst: None,
        points: pts.len(),
    };
    for (k, &z) in pts.iter().enumerate() {
        let lhs = t.value(z).abs();
        let ratio = if lhs == 0.0 {
            0.0
        } else if m[k] > 0.0 {
            lhs / m[k]
        } else {
            f64::INFINITY
        };
        if ratio > best.c {
            best.c = ratio;
            best.worst = Some(z);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimate {
    pub center: usize,
    pub r: f64,
    /// Smallest feasible constant (0 when every difference vanishes).
    pub c: f64,
    pub pairs: usize,
    pub worst_pair: Option<(usize, usize)>,
}

/// Fits `|Ẽu(y) − Ẽu(z)| ≤ d(y,z)·C·(M_{4r}ĝ(y) + M_{4r}ĝ(z))` on `U∩B(x,r)`.
///
/// `g` must be a Hajłasz gradient of `u` on `B(x,4r)∩F`; this is checked.
pub fn local_extension_estimate(
    space: &Space,
    op: &ExtensionOperator,
    u: &Field,
    g: &Field,
    x: usize,
    r: f64,
) -> Result<LocalEstimate> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let f = op.subset();
    let big: Vec<usize> = space
        .sorted_ball(x, 4.0 * r)
        .into_iter()
        .map(|(j, _)| j)
        .filter(|&j| f.contains(j))
        .collect();
    for (a_i, &a) in big.iter().enumerate() {
        for &b in &big[a_i + 1..] {
            let lhs = (u.value(a) - u.value(b)).abs();
            let rhs = space.dist(a, b) * (g.value(a) + g.value(b));
            if lhs > rhs * (1.0 + 1e-9) {
                return Err(Error::Domain(format!(
                    "g is not a Hajłasz gradient of u on B(x,4r)∩F: pair ({a}, {b}) violates by {:.3e}",
                    lhs - rhs
                )));
            }
        }
    }
    let t = op.tilde(space, u)?;
    let hat = Field::from_fn(op.full.clone(), |i| if f.contains(i) { g.value(i).abs() } else { 0.0 })?;
    let pts: Vec<usize> = space
        .sorted_ball(x, r)
        .into_iter()
        .map(|(j, _)| j)
        .filter(|&j| op.in_u(space, j))
        .collect();
    let m = maximal_at(space, &hat, Some(4.0 * r), &pts)?;
    let per: Vec<(f64, Option<(usize, usize)>, usize)> = (0..pts.len())
        .into_par_iter()
        .map(|a| {
            let mut best = (0.0f64, None, 0usize);
            for b in a + 1..pts.len() {
                let (y, z) = (pts[a], pts[b]);
                let lhs = (t.value(y) - t.value(z)).abs();
                best.2 += 1;
                if lhs == 0.0 {
                    continue;
                }
                let rhs = space.dist(y, z) * (m[a] + m[b]);
                let c = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
                if c > best.0 {
                    best = (c, Some((y, z)), best.2);
                }
            }
            best
        })
        .collect();
    let mut out = LocalEstimate {
        center: x,
        r,
        c: 0.0,
        pairs: 0,
        worst_pair: None,
    };
    for (c, wp, n) in per {
        out.pairs += n;
        if c > out.c {
            out.c = c;
            out.worst_pair = wp;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ExtendableStable,
    Obstructed,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::ExtendableStable => "extendable-stable",
            Verdict::Obstructed => "obstructed",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Largest max/min spread of `‖u♯ₛ‖` across levels counted as bounded.
pub const STABLE_SPREAD: f64 = 1.2;
/// Smallest growth factor per halving of `h` counted as blow-up.
pub const GROWTH_FACTOR: f64 = 1.5;

/// `‖u♯ₛ‖_{Lᵖ(Ω)}` at one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionLevel {
    pub h: f64,
    pub points: usize,
    /// One norm per scale, in the order of `s_list`.
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub p: f64,
    pub s_list: Vec<f64>,
    /// Levels ordered by decreasing `h`.
    pub levels: Vec<CriterionLevel>,
    /// Per scale: `norm(h/2) / norm(h)` for consecutive levels.
    pub growth: Vec<Vec<f64>>,
    /// Per scale: max/min over levels.
    pub spread: Vec<f64>,
    pub verdict: Verdict,
}

/// `‖u♯ₛ‖_{Lᵖ(Ω)}` for every scale, with `Ω` the domain of `u`.
pub fn sharp_norms(space: &Space, u: &Field, p: f64, s_list: &[f64]) -> Result<Vec<f64>> {
    let sharp = sharp_functional_multi(space, u.into(), s_list, &SharpOptions::default())?;
    let om = u.domain().indices();
    Ok(sharp
        .iter()
        .map(|s| lp_norm(space, s.values.values(), om.iter().copied(), p))
        .collect())
}

/// Verdict from norms at several refinements of one domain.
pub fn extension_criterion(levels: Vec<CriterionLevel>, p: f64, s_list: &[f64]) -> Result<CriterionReport> {
    if levels.iter().any(|l| l.norms.len() != s_list.len()) {
        return Err(Error::Domain("every level needs one norm per scale".into()));
    }
    let mut levels = levels;
    levels.sort_by(|a, b| b.h.total_cmp(&a.h));
    let ns = s_list.len();
    let growth: Vec<Vec<f64>> = (0..ns)
        .map(|k| levels.windows(2).map(|w| w[1].norms[k] / w[0].norms[k]).collect())
        .collect();
    let spread: Vec<f64> = (0..ns)
        .map(|k| {
            let (lo, hi) = levels
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l.norms[k]), hi.max(l.norms[k])));
            if hi == 0.0 {
                1.0
            } else {
                hi / lo
            }
        })
        .collect();
    let verdict = if levels.len() < 2 || ns == 0 {
        Verdict::Inconclusive
    } else if spread.iter().any(|&s| s <= STABLE_SPREAD) {
        Verdict::ExtendableStable
    } else if growth.iter().all(|g| g.iter().all(|&r| r >= GROWTH_FACTOR)) {
        Verdict::Obstructed
    } else {
        Verdict::Inconclusive
    };
    Ok(CriterionReport {
        p,
        s_list: s_list.to_vec(),
        levels,
        growth,
        spread,
        verdict,
    })
}

/// Runs [`extension_criterion`] over refinements of `base` for a named test field.
pub fn extension_criterion_sweep(
    base: &DomainSpec,
    hs: &[f64],
    field: &str,
    p: f64,
    s_list: &[f64],
) -> Result<CriterionReport> {
    let levels = hs
        .iter()
        .map(|&h| {
            let mut spec = base.clone();
            spec.h = h;
            let (space, omega) = gen_domain(&spec)?;
            let u = gen_test_field(field, &space, &omega)?;
            Ok(CriterionLevel {
                h,
                points: omega.count(),
                norms: sharp_norms(&space, &u, p, s_list)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    extension_criterion(levels, p, s_list)
}

/// `‖E u‖ / ‖u‖` in the discrete `M^{1,p}` norm `‖·‖_p + min ‖g‖_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormReport {
    pub p: f64,
    pub norm_u: f64,
    pub grad_u: f64,
    pub norm_h: f64,
    pub grad_h: f64,
    pub ratio: f64,
    pub localized: bool,
}

pub fn operator_norm_ratio(
    space: &Space,
    op: &ExtensionOperator,
    u: &Field,
    p: f64,
    scope: Scope,
    opts: &SolveOptions,
) -> Result<OperatorNormReport> {
    let f = op.subset();
    let u_f = u.restrict_to(f.clone())?;
    let h = op.apply(space, u)?;
    let gu = minimal_hajlasz_gradient(space, (&u_f).into(), p, scope, opts)?;
    let gh = minimal_hajlasz_gradient(space, (&h).into(), p, scope, opts)?;
    let localized = [&gu, &gh]
        .iter()
        .any(|c| c.solver.as_ref().is_some_and(|s| s.localized));
    if localized {
        log::warn!("operator norm uses the local-scope gradient relaxation");
    }
    let norm_u = lp_norm(space, u.values(), f.indices(), p);
    let norm_h = lp_norm(space, h.values(), 0..space.len(), p);
    let den = norm_u + gu.lp_norm;
    let num = norm_h + gh.lp_norm;
    Ok(OperatorNormReport {
        p,
        norm_u,
        grad_u: gu.lp_norm,
        norm_h,
        grad_h: gh.lp_norm,
        ratio: if den > 0.0 { num / den } else { 0.0 },
        localized,
    })
}
