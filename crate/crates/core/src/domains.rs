//! Example domains on grids and the canonical test fields.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{build_grid_space, Field, MetricKind, Space, SubsetMask, DEFAULT_POINT_BUDGET};

/// Fewest points a generated domain may contain.
pub const MIN_DOMAIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Disk,
    SlitDisk,
    OutwardCusp,
    TwoSquares,
    HalfPlane,
    JordanPolygon,
}

impl DomainKind {
    pub fn parse(s: &str) -> Result<DomainKind> {
        Ok(match s {
            "disk" => DomainKind::Disk,
            "slit_disk" => DomainKind::SlitDisk,
            "outward_cusp" => DomainKind::OutwardCusp,
            "two_squares" => DomainKind::TwoSquares,
            "half_plane" => DomainKind::HalfPlane,
            "jordan_polygon" => DomainKind::JordanPolygon,
            other => return Err(Error::Config(format!("unknown domain kind {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Disk => "disk",
            DomainKind::SlitDisk => "slit_disk",
            DomainKind::OutwardCusp => "outward_cusp",
            DomainKind::TwoSquares => "two_squares",
            DomainKind::HalfPlane => "half_plane",
            DomainKind::JordanPolygon => "jordan_polygon",
        }
    }
}

/// A domain kind, a grid spacing and per-kind parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub h: f64,
    /// Width of the ring of ambient grid around the domain's bounding box.
    /// Defaults to 0.5, except for `half_plane` whose ambient box is `[-1,1]²`.
    #[serde(default)]
    pub margin: Option<f64>,
    /// Vertices of the polygon for `jordan_polygon`.
    #[serde(default)]
    pub polygon: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_metric() -> MetricKind {
    MetricKind::Euclidean
}

fn default_budget() -> usize {
    DEFAULT_POINT_BUDGET
}

impl DomainSpec {
    pub fn new(kind: DomainKind, h: f64) -> DomainSpec {
        DomainSpec {
            kind,
            h,
            margin: None,
            polygon: None,
            metric: MetricKind::Euclidean,
            budget: DEFAULT_POINT_BUDGET,
        }
    }

    pub fn with_metric(mut self, metric: MetricKind) -> DomainSpec {
        self.metric = metric;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> DomainSpec {
        self.margin = Some(margin);
        self
    }
}

/// Membership test for the kind's defining inequalities.
pub fn contains(spec: &DomainSpec, x: f64, y: f64) -> bool {
    match spec.kind {
        DomainKind::Disk => x * x + y * y < 1.0,
        DomainKind::SlitDisk => {
            x * x + y * y < 1.0 && dist_to_segment(x, y) > 0.5 * spec.h * (1.0 + 1e-9)
        }
        DomainKind::OutwardCusp => {
            let ball = (x - 2.0).powi(2) + y * y < 2.0;
            let cusp = x > 0.0 && x <= 1.0 && y.abs() <= x * x;
            ball || cusp
        }
        DomainKind::TwoSquares => {
            let open = x.abs() < 1.0 && y.abs() < 1.0;
            let sw = (-0.5..=0.0).contains(&x) && (-0.5..=0.0).contains(&y);
            let ne = (0.0..=0.5).contains(&x) && (0.0..=0.5).contains(&y);
            open && !sw && !ne
        }
        DomainKind::HalfPlane => x > 0.0,
        DomainKind::JordanPolygon => spec
            .polygon
            .as_deref()
            .is_some_and(|poly| point_in_polygon(poly, x, y)),
    }
}

/// Distance from `(x, y)` to the slit `[0,1] × {0}`.
fn dist_to_segment(x: f64, y: f64) -> f64 {
    let cx = x.clamp(0.0, 1.0);
    ((x - cx).powi(2) + y * y).sqrt()
}

fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn domain_bbox(spec: &DomainSpec) -> Result<[(f64, f64); 2]> {
    Ok(match spec.kind {
        DomainKind::Disk | DomainKind::SlitDisk | DomainKind::TwoSquares | DomainKind::HalfPlane => {
            [(-1.0, 1.0), (-1.0, 1.0)]
        }
        DomainKind::OutwardCusp => {
            let s = 2f64.sqrt();
            [(0.0, 2.0 + s), (-s, s)]
        }
        DomainKind::JordanPolygon => {
            let poly = spec
                .polygon
                .as_deref()
                .filter(|p| p.len() >= 3)
                .ok_or_else(|| Error::Config("jordan_polygon needs at least 3 vertices".into()))?;
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in poly {
                for k in 0..2 {
                    lo[k] = lo[k].min(v[k]);
                    hi[k] = hi[k].max(v[k]);
                }
            }
            [(lo[0], hi[0]), (lo[1], hi[1])]
        }
    })
}

/// Generates the ambient grid space and the domain mask.
///
/// The grid bbox is the domain's bbox plus the margin, snapped outward to
/// multiples of `h`, so cell centers sit at `(k + 1/2)·h`.
pub fn gen_domain(spec: &DomainSpec) -> Result<(Space, Arc<SubsetMask>)> {
    let h = spec.h;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
    }
    let margin = spec.margin.unwrap_or(match spec.kind {
        DomainKind::HalfPlane => 0.0,
        _ => 0.5,
    });
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::Config(format!("margin must be nonnegative, got {margin}")));
    }
    let bb = domain_bbox(spec)?;
    let bbox: Vec<(f64, f64)> = bb
        .iter()
        .map(|&(lo, hi)| {
            (
                ((lo - margin) / h - 1e-9).floor() * h,
                ((hi + margin) / h + 1e-9).ceil() * h,
            )
        })
        .collect();
    let space = build_grid_space(&bbox, h, spec.metric, spec.budget)?;
    let members: Vec<bool> = space
        .coords()
        .iter()
        .map(|p| contains(spec, p[0], p[1]))
        .collect();
    let count = members.iter().filter(|&&m| m).count();
    if count < MIN_DOMAIN_POINTS {
        return Err(Error::Resolution(format!(
            "{} at h={h} resolves only {count} points (need {MIN_DOMAIN_POINTS})",
            spec.kind.name()
        )));
    }
    let mask = space.mask(members)?;
    Ok((space, Arc::new(mask)))
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Jump across the slit: 1 above, 0 below, blended in `x ∈ [0, 1/4]`.
pub fn slit_jump(x: f64, y: f64) -> f64 {
    if y > 0.0 {
        smoothstep(4.0 * x)
    } else {
        0.0
    }
}

/// Angular jump at the origin: 1 on the north-west quadrant, 0 on the south-east,
/// blended through the angle on the other two.
pub fn vertex_jump(x: f64, y: f64) -> f64 {
    let th = y.atan2(x);
    if th >= FRAC_PI_2 || th <= -PI {
        1.0
    } else if th >= 0.0 {
        smoothstep(th / FRAC_PI_2)
    } else if th >= -FRAC_PI_2 {
        0.0
    } else {
        smoothstep((-FRAC_PI_2 - th) / FRAC_PI_2)
    }
}

/// Seeded sum of Gaussian bumps on the box `[-1.5, 3.5] × [-1.5, 1.5]`.
pub struct RandomSmooth {
    bumps: Vec<([f64; 3], f64, f64)>,
}

impl RandomSmooth {
    pub fn new(seed: u64) -> RandomSmooth {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps = (0..8)
            .map(|_| {
                let c = [
                    rng.gen_range(-1.5..1.5),
                    rng.gen_range(-1.5..1.5),
                    rng.gen_range(-1.5..1.5),
                ];
                let width = rng.gen_range(0.3..0.6);
                let amp = rng.gen_range(-1.0..1.0);
                (c, width, amp)
            })
            .collect();
        RandomSmooth { bumps }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.bumps
            .iter()
            .map(|(c, w, a)| {
                let d2: f64 = p.iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum();
                a * (-d2 / (2.0 * w * w)).exp()
            })
            .sum()
    }
}

/// Evaluates a named test field on `omega`.
///
/// Names: `constant:c`, `linear:x|y|z`, `radial`, `random_smooth:seed`,
/// `slit_jump`, `vertex_jump`.
pub fn gen_test_field(name: &str, space: &Space, omega: &Arc<SubsetMask>) -> Result<Field> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let coords = space.coords();
    let unknown = || Error::UnknownField(name.to_string());
    match (head, arg) {
        ("constant", Some(a)) => {
            let c: f64 = a.parse().map_err(|_| unknown())?;
            Field::constant(omega.clone(), c)
        }
        ("linear", Some(a)) => {
            let k = match a {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => return Err(unknown()),
            };
            if k >= space.dim() {
                return Err(unknown());
            }
            Field::from_fn(omega.clone(), |i| coords[i][k])
        }
        ("radial", None) => Field::from_fn(omega.clone(), |i| {
            coords[i].iter().map(|x| x * x).sum::<f64>().sqrt()
        }),
        ("random_smooth", Some(a)) => {
            let seed: u64 = a.parse().map_err(|_| unknown())?;
            let f = RandomSmooth::new(seed);
            Field::from_fn(omega.clone(), |i| f.eval(space.point(i)))
        }
        ("slit_jump", None) => Field::from_fn(omega.clone(), |i| slit_jump(coords[i][0], coords[i][1])),
        ("vertex_jump", None) => {
            Field::from_fn(omega.clone(), |i| vertex_jump(coords[i][0], coords[i][1]))
        }
        _ => Err(unknown()),
    }
}
