//! Integral averages, maximal operators and the density/doubling constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Field, Space, SubsetMask, VecField};
use crate::error::{Error, Result};

/// Weighted average of `u` over `set`.
///
/// Computed as `u(s₀) + avg(u − u(s₀))` and clamped to `[min, max]` so constants
/// average to themselves bitwise.
pub fn average(space: &Space, u: &Field, set: &[usize]) -> Result<f64> {
    let first = *set
        .first()
        .ok_or_else(|| Error::Domain("average over an empty set".into()))?;
    let base = u.value(first);
    let (mut w, mut s) = (0.0, 0.0);
    let (mut lo, mut hi) = (base, base);
    for &i in set {
        if !u.domain().contains(i) {
            return Err(Error::Domain(format!("point {i} is outside the field's domain")));
        }
        let v = u.value(i);
        w += space.weight(i);
        s += space.weight(i) * (v - base);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((base + s / w).clamp(lo, hi))
}

/// Componentwise weighted average of a vector field.
pub fn average_vec(space: &Space, u: &VecField, set: &[usize]) -> Result<Vec<f64>> {
    (0..u.n())
        .map(|k| average(space, &u.coord(k)?, set))
        .collect()
}

/// Maximal function of `|u|` at the chosen points, with radius cap `r` (`None` = ∞).
///
/// The sup runs over the realized balls `{d ≤ d_j}` with `d_j < r`; the first of
/// them is the degenerate ball `{x}`.
pub fn maximal_at(space: &Space, u: &Field, r: Option<f64>, points: &[usize]) -> Result<Vec<f64>> {
    if let Some(r) = r {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius cap must be positive, got {r}")));
        }
    }
    let cap = r.unwrap_or(f64::INFINITY);
    maximal_with_caps(space, u, points, |_| cap)
}

/// As [`maximal_at`] with a radius cap chosen per point.
pub fn maximal_with_caps(
    space: &Space,
    u: &Field,
    points: &[usize],
    cap: impl Fn(usize) -> f64 + Sync,
) -> Result<Vec<f64>> {
    if !u.domain().is_full() {
        return Err(Error::Domain("maximal function needs a field defined on the whole space".into()));
    }
    let vals = u.values();
    let w = space.weights();
    Ok(points
        .par_iter()
        .map(|&x| {
            let ux = vals[x].abs();
            let mut best = ux;
            let (mut cw, mut cs) = (0.0, 0.0);
            let mut last = 0.0;
            space.for_each_sorted(x, cap(x), |j, d| {
                if d != last {
                    best = best.max(ux + cs / cw);
                    last = d;
                }
                cw += w[j];
                cs += w[j] * (vals[j].abs() - ux);
            });
            if cw > 0.0 {
                best = best.max(ux + cs / cw);
            }
            best
        })
        .collect())
}

/// Restricted maximal function `M_r(u)` on every point (`None` = Hardy–Littlewood `M`).
pub fn maximal(space: &Space, u: &Field, r: Option<f64>) -> Result<Field> {
    let pts: Vec<usize> = (0..space.len()).collect();
    let vals = maximal_at(space, u, r, &pts)?;
    Field::new(u.domain().clone(), vals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub value: f64,
    pub center: usize,
    pub radius: f64,
    pub r_max: f64,
}

/// Measure-density constant: inf of `µ(B∩Ω)/µ(B)` over `x ∈ Ω` and balls of radius ≤ `r_max`.
///
/// The witness radius is the smallest radius realizing the minimizing ball.
pub fn measure_density_constant(space: &Space, omega: &SubsetMask, r_max: f64) -> Result<DensityReport> {
    if omega.is_empty() {
        return Err(Error::Domain("measure density needs a nonempty set".into()));
    }
    if !(r_max > 0.0) {
        return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
    }
    let w = space.weights();
    let per: Vec<(f64, usize, f64)> = omega
        .indices()
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::INFINITY, x, r_max);
            let (mut all, mut inside) = (0.0, 0.0);
            let mut last = 0.0;
            let mut pending = false;
            space.for_each_sorted(x, r_max, |j, d| {
                if d != last {
                    if pending {
                        let v = inside / all;
                        if v < best.0 {
                            best = (v, x, d);
                        }
                    }
                    last = d;
                }
                pending = true;
                all += w[j];
                if omega.contains(j) {
                    inside += w[j];
                }
            });
            let v = inside / all;
            if v < best.0 {
                best = (v, x, r_max);
            }
            best
        })
        .collect();
    let mut best = per[0];
    for &p in &per[1..] {
        if p.0 < best.0 {
            best = p;
        }
    }
    Ok(DensityReport {
        value: best.0,
        center: best.1,
        radius: best.2,
        r_max,
    })
}

/// Sampling plan for [`doubling_constant`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingPlan {
    /// Smallest radius considered; defaults to `r_max / 8`.
    pub r_min: Option<f64>,
    /// Radii per center in sampled mode.
    pub n_radii: usize,
    /// Restrict centers to points whose `2·r_max` ball stays inside a full grid.
    pub interior_only: bool,
    /// Spaces up to this size evaluate every breakpoint radius exactly.
    pub exact_limit: usize,
}

impl Default for DoublingPlan {
    fn default() -> Self {
        DoublingPlan {
            r_min: None,
            n_radii: 16,
            interior_only: false,
            exact_limit: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub value: f64,
    pub center: usize,
    pub radius: f64,
    pub mode: String,
    pub r_min: f64,
    pub r_max: f64,
    pub n_radii: usize,
    pub interior_only: bool,
    pub interior_applied: bool,
    pub centers: usize,
}

/// Doubling constant `sup µ(B(x,2r))/µ(B(x,r))` over the plan's centers and radii in `[r_min, r_max]`.
pub fn doubling_constant(space: &Space, r_max: f64, plan: &DoublingPlan) -> Result<DoublingReport> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
    }
    let r_min = plan.r_min.unwrap_or(r_max / 8.0);
    if !(r_min > 0.0 && r_min <= r_max) {
        return Err(Error::Domain(format!("r_min must lie in (0, r_max], got {r_min}")));
    }
    let exact = space.len() <= plan.exact_limit;
    let interior_applied = plan.interior_only
        && space.metric() == super::MetricKind::Euclidean
        && space.lattice().is_some_and(|l| l.is_full());
    let centers: Vec<usize> = match space.lattice() {
        Some(l) if interior_applied => (0..space.len())
            .filter(|&i| l.cells_to_boundary(i) as f64 * l.h >= 2.0 * r_max)
            .collect(),
        _ => (0..space.len()).collect(),
    };
    if centers.is_empty() {
        return Err(Error::Domain("no admissible centers for the doubling plan".into()));
    }
    let sampled: Vec<f64> = if plan.n_radii <= 1 {
        vec![r_max]
    } else {
        (0..plan.n_radii)
            .map(|k| r_min * (r_max / r_min).powf(k as f64 / (plan.n_radii - 1) as f64))
            .collect()
    };
    let w = space.weights();
    let per: Vec<(f64, usize, f64)> = centers
        .par_iter()
        .map(|&x| {
            let mut dist: Vec<f64> = Vec::new();
            let mut cum: Vec<f64> = Vec::new();
            space.for_each_sorted(x, 2.0 * r_max, |j, d| {
                if dist.last() == Some(&d) {
                    *cum.last_mut().unwrap() += w[j];
                } else {
                    let prev = cum.last().copied().unwrap_or(0.0);
                    dist.push(d);
                    cum.push(prev + w[j]);
                }
            });
            let mass = |r: f64| {
                let k = dist.partition_point(|&d| d < r);
                cum[k - 1]
            };
            let mut best = (0.0, x, r_min);
            let mut eval = |r: f64| {
                let v = mass(2.0 * r) / mass(r);
                if v > best.0 {
                    best = (v, x, r);
                }
            };
            if exact {
                for &d in &dist {
                    for r in [d, 0.5 * d] {
                        if r >= r_min && r <= r_max {
                            eval(r);
                        }
                    }
                }
                eval(r_max);
            } else {
                for &r in &sampled {
                    eval(r);
                }
            }
            best
        })
        .collect();
    let mut best = per[0];
    for &p in &per[1..] {
        if p.0 > best.0 {
            best = p;
        }
    }
    Ok(DoublingReport {
        value: best.0,
        center: best.1,
        radius: best.2,
        mode: if exact { "exact" } else { "sampled" }.into(),
        r_min,
        r_max,
        n_radii: if exact { 0 } else { sampled.len() },
        interior_only: plan.interior_only,
        interior_applied,
        centers: centers.len(),
    })
}
