use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SubsetMask;
use crate::error::{Error, Result};

/// A real-valued function defined on a subset of the points.
///
/// Values are stored for every point; entries outside the domain are zero and
/// are never read by the library.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    domain: Arc<SubsetMask>,
}

impl Field {
    pub fn new(domain: Arc<SubsetMask>, mut values: Vec<f64>) -> Result<Field> {
        if values.len() != domain.universe() {
            return Err(Error::Domain(format!(
                "field has {} values for {} points",
                values.len(),
                domain.universe()
            )));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if domain.contains(i) {
                if !v.is_finite() {
                    return Err(Error::Domain(format!("field value at {i} is not finite")));
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(Field { values, domain })
    }

    /// Builds a field by evaluating `f` on the members of the domain.
    pub fn from_fn(domain: Arc<SubsetMask>, f: impl Fn(usize) -> f64) -> Result<Field> {
        let values = (0..domain.universe())
            .map(|i| if domain.contains(i) { f(i) } else { 0.0 })
            .collect();
        Field::new(domain, values)
    }

    pub fn constant(domain: Arc<SubsetMask>, c: f64) -> Result<Field> {
        Field::from_fn(domain, |_| c)
    }

    pub fn domain(&self) -> &Arc<SubsetMask> {
        &self.domain
    }

    /// Full-length value array (zeros outside the domain).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.domain.contains(i).then(|| self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::from_fn(self.domain.clone(), |i| f(self.values[i]))
    }

    pub fn abs(&self) -> Field {
        Field {
            values: self.values.iter().map(|v| v.abs()).collect(),
            domain: self.domain.clone(),
        }
    }

    /// Same values viewed on a smaller domain.
    pub fn restrict_to(&self, domain: Arc<SubsetMask>) -> Result<Field> {
        for i in 0..domain.universe() {
            if domain.contains(i) && !self.domain.contains(i) {
                return Err(Error::Domain(format!(
                    "point {i} is outside the field's domain"
                )));
            }
        }
        Field::new(domain, self.values.clone())
    }

    /// Zero extension to a larger domain.
    pub fn zero_extend(&self, domain: Arc<SubsetMask>) -> Result<Field> {
        Field::new(domain, self.values.clone())
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| self.domain.contains(i))
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> FieldFile {
        let domain = self.domain.indices();
        let values = domain.iter().map(|&i| self.values[i]).collect();
        FieldFile { domain, values }
    }
}

/// Norm used for vector values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NormTag {
    Sup,
    Lq { q: f64 },
}

impl NormTag {
    #[inline]
    pub fn norm(&self, v: &[f64]) -> f64 {
        match *self {
            NormTag::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            NormTag::Lq { q } => {
                if q == 1.0 {
                    v.iter().map(|x| x.abs()).sum()
                } else if q == 2.0 {
                    v.iter().map(|x| x * x).sum::<f64>().sqrt()
                } else {
                    v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
                }
            }
        }
    }

    #[inline]
    pub fn norm_diff(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            NormTag::Sup => a
                .iter()
                .zip(b)
                .fold(0.0, |m, (x, y)| m.max((x - y).abs())),
            _ => {
                let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                self.norm(&d)
            }
        }
    }
}

/// An ℝᴺ-valued function on a subset of the points, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField {
    n: usize,
    values: Vec<f64>,
    domain: Arc<SubsetMask>,
    norm: NormTag,
}

impl VecField {
    pub fn new(domain: Arc<SubsetMask>, n: usize, mut values: Vec<f64>, norm: NormTag) -> Result<VecField> {
        if n == 0 {
            return Err(Error::Domain("vector dimension must be at least 1".into()));
        }
        if let NormTag::Lq { q } = norm {
            if !(q >= 1.0) {
                return Err(Error::Domain(format!("lq norm needs q >= 1, got {q}")));
            }
        }
        if values.len() != n * domain.universe() {
            return Err(Error::Domain(format!(
                "vector field has {} values, expected {}",
                values.len(),
                n * domain.universe()
            )));
        }
        for i in 0..domain.universe() {
            let row = &mut values[i * n..(i + 1) * n];
            if domain.contains(i) {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!("vector value at {i} is not finite")));
                }
            } else {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Ok(VecField {
            n,
            values,
            domain,
            norm,
        })
    }

    /// Stacks scalar fields sharing one domain.
    pub fn from_coords(coords: &[Field], norm: NormTag) -> Result<VecField> {
        let first = coords
            .first()
            .ok_or_else(|| Error::Domain("no coordinate fields".into()))?;
        let domain = first.domain().clone();
        if coords.iter().any(|c| c.domain() != &domain) {
            return Err(Error::Domain("coordinate fields must share a domain".into()));
        }
        let n = coords.len();
        let m = domain.universe();
        let mut values = vec![0.0; n * m];
        for i in 0..m {
            for (k, c) in coords.iter().enumerate() {
                values[i * n + k] = c.value(i);
            }
        }
        VecField::new(domain, n, values, norm)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn norm_tag(&self) -> NormTag {
        self.norm
    }

    pub fn domain(&self) -> &Arc<SubsetMask> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Pointwise norm |u(i)|.
    pub fn norm_at(&self, i: usize) -> f64 {
        self.norm.norm(self.at(i))
    }

    /// |u(i) − u(j)| in the field's norm.
    #[inline]
    pub fn diff_norm(&self, i: usize, j: usize) -> f64 {
        self.norm.norm_diff(self.at(i), self.at(j))
    }

    /// The k-th coordinate (0-based) as a scalar field.
    pub fn coord(&self, k: usize) -> Result<Field> {
        if k >= self.n {
            return Err(Error::Domain(format!("coordinate {k} out of range for N={}", self.n)));
        }
        Field::new(
            self.domain.clone(),
            (0..self.domain.universe()).map(|i| self.values[i * self.n + k]).collect(),
        )
    }

    /// Pointwise norm as a scalar field.
    pub fn norm_field(&self) -> Field {
        Field::new(
            self.domain.clone(),
            (0..self.domain.universe()).map(|i| self.norm_at(i)).collect(),
        )
        .expect("norms of finite vectors are finite")
    }

    /// Applies a linear map `t` (row-major, `m × n`) at every point.
    pub fn apply_linear(&self, t: &[f64], m: usize) -> Result<VecField> {
        if t.len() != m * self.n {
            return Err(Error::Domain("linear map has the wrong shape".into()));
        }
        let pts = self.domain.universe();
        let mut out = vec![0.0; pts * m];
        for i in 0..pts {
            let v = self.at(i);
            for r in 0..m {
                let mut s = 0.0;
                for (c, x) in v.iter().enumerate() {
                    s += t[r * self.n + c] * x;
                }
                out[i * m + r] = s;
            }
        }
        VecField::new(self.domain.clone(), m, out, self.norm)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<VecField> {
        VecField::new(self.domain.clone(), self.n, values, self.norm)
    }

    pub fn to_file(&self) -> VecFieldFile {
        let domain = self.domain.indices();
        let values = domain.iter().map(|&i| self.at(i).to_vec()).collect();
        VecFieldFile {
            n: self.n,
            norm: self.norm,
            domain,
            values,
        }
    }
}

/// JSON form of a scalar field: member indices and the values on them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub domain: Vec<usize>,
    pub values: Vec<f64>,
}

/// JSON form of a vector field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VecFieldFile {
    pub n: usize,
    pub norm: NormTag,
    pub domain: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}
