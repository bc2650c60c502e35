//! Hajłasz gradients, discrete upper gradients and the sharp functional.

mod sharp;
mod solve;

pub use sharp::{sharp_functional, sharp_functional_multi, SharpField, SharpOptions};
pub use solve::{minimal_hajlasz_gradient, SolveOptions};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::lp_norm;
use crate::space::{measure_density_constant, Field, Space, SubsetMask, VecField};

/// Which pairs the pointwise inequality is required on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "s")]
pub enum Scope {
    Global,
    /// Pairs with `d(x, y) < s`.
    Local(f64),
}

impl Scope {
    #[inline]
    pub fn radius(&self) -> f64 {
        match *self {
            Scope::Global => f64::INFINITY,
            Scope::Local(s) => s,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Scope::Local(s) if !(s > 0.0) => {
                Err(Error::Domain(format!("local scope needs s > 0, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

/// Scalar or vector values, read through `|u(x) − u(y)|`.
#[derive(Debug, Clone, Copy)]
pub enum Values<'a> {
    Scalar(&'a Field),
    Vector(&'a VecField),
}

impl<'a> From<&'a Field> for Values<'a> {
    fn from(f: &'a Field) -> Self {
        Values::Scalar(f)
    }
}

impl<'a> From<&'a VecField> for Values<'a> {
    fn from(f: &'a VecField) -> Self {
        Values::Vector(f)
    }
}

impl Values<'_> {
    pub fn domain(&self) -> &Arc<SubsetMask> {
        match self {
            Values::Scalar(f) => f.domain(),
            Values::Vector(f) => f.domain(),
        }
    }

    #[inline]
    pub fn diff(&self, i: usize, j: usize) -> f64 {
        match self {
            Values::Scalar(f) => (f.value(i) - f.value(j)).abs(),
            Values::Vector(f) => f.diff_norm(i, j),
        }
    }
}

/// Solver diagnostics attached to minimized certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub method: String,
    /// Achieved `‖g‖_p`.
    pub objective: f64,
    /// Relative duality gap at termination (0 for exact methods).
    pub gap: f64,
    /// Largest `|u(x)−u(y)| − d(x,y)(g(x)+g(y))` over constrained pairs, before auditing.
    pub max_violation: f64,
    pub iterations: usize,
    pub constraints: usize,
    /// Constraints were generated only within `scale_unit` (large spaces).
    pub localized: bool,
}

/// A candidate gradient with its feasibility report.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCertificate {
    pub g: Field,
    pub scope: Scope,
    pub feasible: bool,
    /// Pair with the largest violation `|u(x)−u(y)| − d(g(x)+g(y))`.
    pub worst_pair: Option<(usize, usize, f64)>,
    pub pairs_checked: u64,
    pub p: f64,
    pub lp_norm: f64,
    pub solver: Option<SolverInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub scope: Scope,
    pub feasible: bool,
    pub worst_pair: Option<(usize, usize, f64)>,
    pub pairs_checked: u64,
    pub p: f64,
    pub lp_norm: f64,
    pub solver: Option<SolverInfo>,
}

impl GradientCertificate {
    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            scope: self.scope,
            feasible: self.feasible,
            worst_pair: self.worst_pair,
            pairs_checked: self.pairs_checked,
            p: self.p,
            lp_norm: self.lp_norm,
            solver: self.solver.clone(),
        }
    }
}

/// Calls `f(x, y, d)` for every pair `x < y` of the domain within scope; returns per-`x` results.
pub(crate) fn pair_map<R: Send, F>(space: &Space, domain: &SubsetMask, scope: Scope, init: R, f: F) -> Vec<R>
where
    R: Clone + Sync,
    F: Fn(&mut R, usize, usize, f64) + Sync,
{
    let members = domain.indices();
    members
        .par_iter()
        .map(|&x| {
            let mut acc = init.clone();
            match scope {
                Scope::Local(s) => space.for_each_sorted(x, s, |y, d| {
                    if y > x && domain.contains(y) {
                        f(&mut acc, x, y, d);
                    }
                }),
                Scope::Global => {
                    if space.metric() == crate::space::MetricKind::Graph {
                        let row = space.dist_row(x);
                        for &y in members.iter().filter(|&&y| y > x) {
                            f(&mut acc, x, y, row[y]);
                        }
                    } else {
                        for &y in members.iter().filter(|&&y| y > x) {
                            f(&mut acc, x, y, space.dist(x, y));
                        }
                    }
                }
            }
            acc
        })
        .collect()
}

/// Exhaustive pair check of `|u(x)−u(y)| ≤ d(x,y)(g(x)+g(y))`.
///
/// A pair passes when its violation is at most `rel_tol·|u(x)−u(y)|`; `rel_tol = 0`
/// is the exact check.
pub fn check_hajlasz(space: &Space, u: Values, g: &Field, scope: Scope, p: f64, rel_tol: f64) -> Result<GradientCertificate> {
    scope.validate()?;
    let dom = u.domain();
    for i in dom.indices() {
        match g.get(i) {
            Some(v) if v >= 0.0 => {}
            Some(v) => return Err(Error::Domain(format!("gradient is negative ({v}) at {i}"))),
            None => return Err(Error::Domain(format!("gradient undefined at {i}"))),
        }
    }
    let gv = g.values();
    let per = pair_map(
        space,
        dom,
        scope,
        (None::<(usize, usize, f64)>, 0u64, 0u64),
        |acc, x, y, d| {
            let du = u.diff(x, y);
            let viol = du - d * (gv[x] + gv[y]);
            acc.1 += 1;
            if viol > rel_tol * du {
                acc.2 += 1;
            }
            if acc.0.map_or(true, |w| viol > w.2) {
                acc.0 = Some((x, y, viol));
            }
        },
    );
    let mut worst: Option<(usize, usize, f64)> = None;
    let (mut pairs, mut bad) = (0u64, 0u64);
    for (w, c, b) in per {
        pairs += c;
        bad += b;
        if let Some(w) = w {
            if worst.map_or(true, |v| w.2 > v.2) {
                worst = Some(w);
            }
        }
    }
    let g = g.restrict_to(dom.clone())?;
    let lp = lp_norm(space, g.values(), dom.indices(), p);
    Ok(GradientCertificate {
        g,
        scope,
        feasible: bad == 0,
        worst_pair: worst,
        pairs_checked: pairs,
        p,
        lp_norm: lp,
        solver: None,
    })
}

/// Neighbour-difference field `ρ(x) = max_{y ~ x, y ∈ Ω} |u(x)−u(y)| / d(x,y)`.
///
/// Uses the metric distance for Euclidean spaces and the edge length for graph
/// spaces. Points without neighbours in the domain get 0 and are logged.
pub fn discrete_upper_gradient(space: &Space, u: Values) -> Field {
    let dom = u.domain().clone();
    let graph = space.metric() == crate::space::MetricKind::Graph;
    let mut isolated = 0usize;
    let vals: Vec<f64> = (0..space.len())
        .map(|x| {
            if !dom.contains(x) {
                return 0.0;
            }
            let mut best: f64 = 0.0;
            let mut any = false;
            for &(y, len) in space.neighbors(x) {
                if dom.contains(y) {
                    any = true;
                    let d = if graph { len } else { space.dist(x, y) };
                    best = best.max(u.diff(x, y) / d);
                }
            }
            if !any {
                isolated += 1;
            }
            best
        })
        .collect();
    if isolated > 0 {
        log::warn!("discrete upper gradient: {isolated} isolated points set to 0");
    }
    Field::new(dom, vals).expect("neighbour quotients are finite")
}

/// Certificate for `φ∘u` with gradient `L·g`, audited over all pairs in scope.
pub fn lipschitz_postcompose(
    space: &Space,
    u: &Field,
    phi: impl Fn(f64) -> f64,
    lip: f64,
    cert: &GradientCertificate,
) -> Result<(Field, GradientCertificate)> {
    if !(lip >= 0.0) {
        return Err(Error::Domain(format!("Lipschitz constant must be nonnegative, got {lip}")));
    }
    let composed = u.map(&phi)?;
    let g = cert.g.map(|v| lip * v)?;
    let out = check_hajlasz(space, (&composed).into(), &g, cert.scope, cert.p, 1e-12)?;
    Ok((composed, out))
}

/// Certificate for `φ·u` with `g̃ = (L|u| + ‖φ‖_∞ g)·χ_K`, `K = {φ ≠ 0}`.
///
/// `phi` is given on every point of the space; `lip` is its Lipschitz constant.
pub fn product_rule(
    space: &Space,
    u: &Field,
    phi: &[f64],
    lip: f64,
    cert: &GradientCertificate,
) -> Result<(Field, GradientCertificate)> {
    if phi.len() != space.len() {
        return Err(Error::Domain("cutoff must be given on every point".into()));
    }
    let sup = u
        .domain()
        .indices()
        .iter()
        .map(|&i| phi[i].abs())
        .fold(0.0, f64::max);
    let product = Field::from_fn(u.domain().clone(), |i| phi[i] * u.value(i))?;
    let g = Field::from_fn(u.domain().clone(), |i| {
        if phi[i] != 0.0 {
            lip * u.value(i).abs() + sup * cert.g.value(i)
        } else {
            0.0
        }
    })?;
    let out = check_hajlasz(space, (&product).into(), &g, cert.scope, cert.p, 1e-12)?;
    Ok((product, out))
}

/// Report for [`local_gradient_from_sharp`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGradient {
    /// Smallest constant with `|u(x)−u(y)| ≤ d·C·(u♯(x) + u♯(y))` on pairs within `2s`.
    pub c_min: f64,
    /// Constant used in the certificate (`c_min` widened by 1e-12 relative).
    pub c: f64,
    pub density: f64,
    pub certificate: GradientCertificate,
}

/// Fits `g = C·u♯_{2s}` as a local Hajłasz gradient up to scale `s`.
///
/// Scale `s` means pairs inside a common ball of radius `s`, i.e. `d(x,y) < 2s`.
pub fn local_gradient_from_sharp(space: &Space, u: &Field, s: f64, p: f64) -> Result<LocalGradient> {
    if !(s > 0.0 && s <= space.scale_unit() / 2.0) {
        return Err(Error::Domain(format!(
            "scale s must lie in (0, scale_unit/2], got {s}"
        )));
    }
    let dom = u.domain().clone();
    let density = measure_density_constant(space, &dom, 2.0 * s)?.value;
    if density < 1e-3 {
        log::warn!("measure density {density:.3e} at scale {} is degenerate", 2.0 * s);
    }
    let sharp = sharp_functional(space, u.into(), 2.0 * s, &SharpOptions::default())?;
    let sv = sharp.values.values();
    let scope = Scope::Local(2.0 * s);
    let per = pair_map(space, &dom, scope, 0.0f64, |acc, x, y, d| {
        let du = (u.value(x) - u.value(y)).abs();
        if du > 0.0 {
            let den = d * (sv[x] + sv[y]);
            let r = if den > 0.0 { du / den } else { f64::INFINITY };
            if r > *acc {
                *acc = r;
            }
        }
    });
    let c_min = per.into_iter().fold(0.0, f64::max);
    let c = c_min * (1.0 + 1e-12);
    let g = if c.is_finite() {
        sharp.values.map(|v| c * v)?
    } else {
        sharp.values.clone()
    };
    let mut certificate = check_hajlasz(space, u.into(), &g, scope, p, 0.0)?;
    if !c.is_finite() {
        certificate.feasible = false;
    }
    Ok(LocalGradient {
        c_min,
        c,
        density,
        certificate,
    })
}
