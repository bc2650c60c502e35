//! Batch front end: domain generation, staged pipelines and artifact emission.
//!
//! Every JSON artifact carries the library version, the SHA-256 of the
//! canonical config and the config itself, so each table can be re-derived.
//! Sweep tables get CSV companions.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::{
    coordinatewise_density_check, energy_density_report, geometric_field, lipschitz_approximate, schauder_truncate,
    DensityReport, EnergyDensityReport,
};
use crate::domains::{gen_domain, gen_test_field, DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::extension::{extend_with, extension_criterion, sharp_norms, CriterionLevel, CriterionReport, ExtendOptions, ExtensionDiagnostics, OperatorKind};
use crate::gradients::{
    check_hajlasz, discrete_upper_gradient, local_gradient_from_sharp, minimal_hajlasz_gradient, sharp_functional,
    CertificateSummary, Scope, SharpOptions, SolveOptions,
};
use crate::norms::lp_norm;
use crate::poincare::{estimate_pi_constants, obstruction_field, qp_pi_check, spread, standard_battery, PIReport, PiPlan, PI_STABLE_SPREAD};
use crate::space::{Field, MetricKind, NormTag, Space, SubsetMask, VecField};
use crate::whitney::{
    partition_of_unity, verify_partition, verify_whitney, whitney_cover, PartitionReport, VerifyOptions, WhitneyBall,
    WhitneyReport,
};
use crate::VERSION;

/// Pipeline stages, executed in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Gen,
    Whitney,
    Grad,
    Extend,
    Approx,
    Poincare,
    Report,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Whitney => "whitney",
            Stage::Grad => "grad",
            Stage::Extend => "extend",
            Stage::Approx => "approx",
            Stage::Poincare => "poincare",
            Stage::Report => "report",
        }
    }
}

fn default_domain() -> DomainKind {
    DomainKind::Disk
}
fn default_metric() -> MetricKind {
    MetricKind::Euclidean
}
fn default_p() -> f64 {
    2.0
}
fn default_q() -> f64 {
    1.0
}
fn default_s_list() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}
fn default_lambda() -> f64 {
    2.0
}
fn default_radii() -> usize {
    4
}
fn default_true() -> bool {
    true
}
fn default_approx_n() -> usize {
    4
}
fn default_approx_l() -> Vec<f64> {
    vec![1.0, 4.0, 16.0]
}
fn default_grad_max_points() -> usize {
    300
}

/// A pipeline description. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub stages: Vec<Stage>,
    /// Artifact directory; not part of the config hash.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_domain")]
    pub domain: DomainKind,
    #[serde(default)]
    pub polygon: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    /// Grid spacings, one refinement level each.
    #[serde(default)]
    pub hs: Vec<f64>,
    /// Test field; defaults to the domain's obstruction field.
    #[serde(default)]
    pub field: Option<String>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Exponent for the (q,p)-PI profile in the report.
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_s_list")]
    pub s_list: Vec<f64>,
    /// Poincaré scale cap; defaults to a quarter of the scale unit.
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_radii")]
    pub pi_radii: usize,
    #[serde(default)]
    pub pi_max_centers: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub maximal_margin: bool,
    #[serde(default = "default_approx_n")]
    pub approx_n: usize,
    #[serde(default = "default_approx_l")]
    pub approx_l: Vec<f64>,
    /// Largest `|Ω|` for which the grad stage solves for the minimal gradient.
    #[serde(default = "default_grad_max_points")]
    pub grad_max_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_json(text: &str, path: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: path.to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_json(&text, &path.display().to_string())
    }

    /// SHA-256 of the canonical serialization (output directory excluded).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn field_name(&self) -> String {
        match self.field.as_deref() {
            Some("random_smooth") => format!("random_smooth:{}", self.seed),
            Some(f) => f.to_string(),
            None => obstruction_field(self.domain).to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.stages.is_empty() {
            return Ok(());
        }
        if self.hs.is_empty() {
            return bad("hs must list at least one grid spacing".into());
        }
        if let Some(h) = self.hs.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return bad(format!("grid spacing must be positive, got {h}"));
        }
        let mut sorted = self.hs.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("hs contains duplicates".into());
        }
        if !(self.p >= 1.0) {
            return bad(format!("p must be at least 1, got {}", self.p));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return bad(format!("q must be finite and at least 1, got {}", self.q));
        }
        if self.s_list.is_empty() || self.s_list.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("s_list must hold positive finite scales".into());
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and at least 1, got {}", self.lambda));
        }
        if let Some(r) = self.r0 {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("r0 must be positive, got {r}"));
            }
        }
        if self.pi_radii == 0 || self.approx_n == 0 {
            return bad("pi_radii and approx_n must be positive".into());
        }
        if self.approx_l.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return bad("approx_l must hold positive finite constants".into());
        }
        Ok(())
    }

    fn spec(&self, h: f64) -> DomainSpec {
        let mut spec = DomainSpec::new(self.domain, h).with_metric(self.metric);
        spec.margin = self.margin;
        spec.polygon = self.polygon.clone();
        spec
    }

    /// Stages in pipeline order without duplicates.
    pub fn ordered_stages(&self) -> Vec<Stage> {
        let mut s = self.stages.clone();
        s.sort();
        s.dedup();
        s
    }
}

/// Envelope shared by every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub version: String,
    pub config_hash: String,
    pub stage: String,
    pub config: RunConfig,
    pub data: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenRow {
    pub h: f64,
    pub grid_points: usize,
    pub omega_points: usize,
    pub complement_points: usize,
    pub scale_unit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhitneyLevel {
    pub h: f64,
    pub whitney: WhitneyReport,
    pub partition: PartitionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WhitneyRow {
    h: f64,
    balls: usize,
    overlap: usize,
    radius_ratio: f64,
    whitney_ok: bool,
    max_sum_error: f64,
    partition_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradLevel {
    pub h: f64,
    pub points: usize,
    pub s_list: Vec<f64>,
    pub sharp_norms: Vec<f64>,
    pub upper_gradient_norm: f64,
    /// Minimal global gradient, when `|Ω|` is within the configured limit.
    pub minimal: Option<CertificateSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SharpRow {
    h: f64,
    s: f64,
    norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtendLevel {
    pub h: f64,
    pub operator: OperatorKind,
    pub diagnostics: ExtensionDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExtendRow {
    h: f64,
    norm_u: f64,
    norm_h: f64,
    sup_h: f64,
    restriction_residual: f64,
    maximal_c: Option<f64>,
    density: f64,
    whitney_balls: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxLevel {
    pub h: f64,
    pub ladder: EnergyDensityReport,
    pub density: DensityReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LadderRow {
    h: f64,
    k: usize,
    error: f64,
    rho_norm: f64,
    rho_violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoincareLevel {
    pub h: f64,
    pub report: PIReport,
    /// (q,p)-PI fit for the test field at radius `r₀`, when `q < p`.
    pub qp: Option<QpSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpSummary {
    pub q: f64,
    pub r: f64,
    pub c_pi: f64,
    pub certificate: CertificateSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PoincareRow {
    h: f64,
    c: String,
    c_finite: f64,
    worst_field: String,
    balls: usize,
    c_pi: Option<f64>,
}

/// Final summary: extension verdict and, when computed, Poincaré stability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub domain: String,
    pub field: String,
    pub verdict: String,
    pub criterion: CriterionReport,
    pub pi_constants: Option<Vec<String>>,
    pub pi_stable: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub version: String,
    pub config_hash: Option<String>,
    pub stage: Option<String>,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Size { .. } => "size",
        Error::Resolution(_) => "resolution",
        Error::Solver { .. } => "solver",
        Error::Invariant(_) => "invariant",
        Error::Config(_) => "config",
        Error::UnknownField(_) => "unknown_field",
        Error::Io { .. } => "io",
        Error::Json { .. } => "json",
    }
}

fn fmt_c(c: f64) -> String {
    if c.is_finite() {
        format!("{c}")
    } else {
        "inf".into()
    }
}

struct Level {
    h: f64,
    space: Space,
    omega: Arc<SubsetMask>,
}

/// Executes a config, writing artifacts into one directory.
pub struct Runner {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
    levels: Option<Vec<Level>>,
    grad: Option<Vec<CriterionLevel>>,
    pi: Option<Vec<f64>>,
    written: Vec<PathBuf>,
}

/// Outcome of a successful run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config_hash: String,
    pub artifacts: Vec<PathBuf>,
}

/// Failure with the stage it happened in.
#[derive(Debug)]
pub struct RunFailure {
    pub stage: Option<Stage>,
    pub config_hash: Option<String>,
    pub error: Error,
}

impl Runner {
    pub fn new(cfg: RunConfig, out: PathBuf) -> Runner {
        let hash = cfg.hash();
        Runner {
            cfg,
            hash,
            out,
            levels: None,
            grad: None,
            pi: None,
            written: Vec::new(),
        }
    }

    fn levels(&mut self) -> Result<&[Level]> {
        if self.levels.is_none() {
            let mut hs = self.cfg.hs.clone();
            hs.sort_by(|a, b| b.total_cmp(a));
            let levels = hs
                .iter()
                .map(|&h| {
                    let (space, omega) = gen_domain(&self.cfg.spec(h))?;
                    Ok(Level { h, space, omega })
                })
                .collect::<Result<Vec<_>>>()?;
            self.levels = Some(levels);
        }
        Ok(self.levels.as_deref().unwrap_or_default())
    }

    fn io_err(path: &Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn write_json<T: Serialize>(&mut self, stage: Stage, data: T) -> Result<()> {
        let art = Artifact {
            version: VERSION.to_string(),
            config_hash: self.hash.clone(),
            stage: stage.name().to_string(),
            config: self.cfg.clone(),
            data,
        };
        let path = self.out.join(format!("{}.json", stage.name()));
        let mut bytes = serde_json::to_vec_pretty(&art).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| Self::io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn write_csv<R: Serialize>(&mut self, stage: Stage, rows: &[R]) -> Result<()> {
        let path = self.out.join(format!("{}.csv", stage.name()));
        let csv_err = |e: csv::Error| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Self::io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Runs every configured stage in order.
    pub fn run(mut self) -> std::result::Result<RunOutcome, RunFailure> {
        let fail = |stage, hash: &str, error| RunFailure {
            stage,
            config_hash: Some(hash.to_string()),
            error,
        };
        if let Err(e) = self.cfg.validate() {
            return Err(fail(None, &self.hash, e));
        }
        let stages = self.cfg.ordered_stages();
        if stages.is_empty() {
            return Ok(RunOutcome {
                config_hash: self.hash,
                artifacts: Vec::new(),
            });
        }
        if let Err(e) = fs::create_dir_all(&self.out) {
            let err = Self::io_err(&self.out, e);
            return Err(fail(None, &self.hash, err));
        }
        for stage in stages {
            log::info!("stage {}", stage.name());
            let res = match stage {
                Stage::Gen => self.stage_gen(),
                Stage::Whitney => self.stage_whitney(),
                Stage::Grad => self.stage_grad(),
                Stage::Extend => self.stage_extend(),
                Stage::Approx => self.stage_approx(),
                Stage::Poincare => self.stage_poincare(),
                Stage::Report => self.stage_report(),
            };
            if let Err(e) = res {
                return Err(fail(Some(stage), &self.hash, e));
            }
        }
        Ok(RunOutcome {
            config_hash: self.hash,
            artifacts: self.written,
        })
    }

    fn stage_gen(&mut self) -> Result<()> {
        let rows: Vec<GenRow> = self
            .levels()?
            .iter()
            .map(|l| GenRow {
                h: l.h,
                grid_points: l.space.len(),
                omega_points: l.omega.count(),
                complement_points: l.space.len() - l.omega.count(),
                scale_unit: l.space.scale_unit(),
            })
            .collect();
        self.write_json(Stage::Gen, &rows)?;
        self.write_csv(Stage::Gen, &rows)
    }

    fn stage_whitney(&mut self) -> Result<()> {
        let data = self
            .levels()?
            .iter()
            .map(|l| {
                let cover = whitney_cover(&l.space, &l.omega)?;
                let whitney = verify_whitney(&l.space, &l.omega, &cover, &VerifyOptions::default());
                let pou = partition_of_unity(&l.space, &l.omega, &cover)?;
                let partition = verify_partition(&l.space, &l.omega, &cover, &pou);
                Ok(WhitneyLevel { h: l.h, whitney, partition })
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<WhitneyRow> = data
            .iter()
            .map(|d| WhitneyRow {
                h: d.h,
                balls: d.whitney.balls,
                overlap: d.whitney.overlap,
                radius_ratio: d.whitney.radius_ratio,
                whitney_ok: d.whitney.all_ok,
                max_sum_error: d.partition.max_sum_error,
                partition_ok: d.partition.ok,
            })
            .collect();
        self.write_json(Stage::Whitney, &data)?;
        self.write_csv(Stage::Whitney, &rows)
    }

    fn criterion_levels(&mut self) -> Result<Vec<CriterionLevel>> {
        if let Some(g) = &self.grad {
            return Ok(g.clone());
        }
        let (field, p, s_list) = (self.cfg.field_name(), self.cfg.p, self.cfg.s_list.clone());
        let levels = self
            .levels()?
            .iter()
            .map(|l| {
                let u = gen_test_field(&field, &l.space, &l.omega)?;
                Ok(CriterionLevel {
                    h: l.h,
                    points: l.omega.count(),
                    norms: sharp_norms(&l.space, &u, p, &s_list)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.grad = Some(levels.clone());
        Ok(levels)
    }

    fn stage_grad(&mut self) -> Result<()> {
        let crit = self.criterion_levels()?;
        let (field, p, limit) = (self.cfg.field_name(), self.cfg.p, self.cfg.grad_max_points);
        let s_list = self.cfg.s_list.clone();
        let data = self
            .levels()?
            .iter()
            .zip(&crit)
            .map(|(l, c)| {
                let u = gen_test_field(&field, &l.space, &l.omega)?;
                let rho = discrete_upper_gradient(&l.space, (&u).into());
                let minimal = if l.omega.count() <= limit {
                    let cert = minimal_hajlasz_gradient(&l.space, (&u).into(), p, Scope::Global, &SolveOptions::default())?;
                    Some(cert.summary())
                } else {
                    None
                };
                Ok(GradLevel {
                    h: l.h,
                    points: c.points,
                    s_list: s_list.clone(),
                    sharp_norms: c.norms.clone(),
                    upper_gradient_norm: lp_norm(&l.space, rho.values(), l.omega.indices(), p),
                    minimal,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<SharpRow> = crit
            .iter()
            .flat_map(|c| {
                s_list
                    .iter()
                    .zip(&c.norms)
                    .map(move |(&s, &norm)| SharpRow { h: c.h, s, norm })
            })
            .collect();
        self.write_json(Stage::Grad, &data)?;
        self.write_csv(Stage::Grad, &rows)
    }

    fn stage_extend(&mut self) -> Result<()> {
        let (field, p) = (self.cfg.field_name(), self.cfg.p);
        let opts = ExtendOptions {
            maximal_margin: self.cfg.maximal_margin,
        };
        let data = self
            .levels()?
            .iter()
            .map(|l| {
                let u = gen_test_field(&field, &l.space, &l.omega)?;
                let res = extend_with(&l.space, &l.omega, (&u).into(), p, &opts)?;
                Ok(ExtendLevel {
                    h: l.h,
                    operator: res.operator_kind,
                    diagnostics: res.diagnostics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<ExtendRow> = data
            .iter()
            .map(|d| ExtendRow {
                h: d.h,
                norm_u: d.diagnostics.norm_u,
                norm_h: d.diagnostics.norm_h,
                sup_h: d.diagnostics.sup_h,
                restriction_residual: d.diagnostics.restriction_residual,
                maximal_c: d.diagnostics.maximal_margin.as_ref().map(|m| m.c),
                density: d.diagnostics.density,
                whitney_balls: d.diagnostics.whitney_balls,
            })
            .collect();
        self.write_json(Stage::Extend, &data)?;
        self.write_csv(Stage::Extend, &rows)
    }

    fn stage_approx(&mut self) -> Result<()> {
        let (field, p, n) = (self.cfg.field_name(), self.cfg.p, self.cfg.approx_n);
        let ls = self.cfg.approx_l.clone();
        let data = self
            .levels()?
            .iter()
            .map(|l| {
                let f = gen_test_field(&field, &l.space, &l.omega)?;
                let u = geometric_field(&f, n)?;
                Ok(ApproxLevel {
                    h: l.h,
                    ladder: energy_density_report(&l.space, &u, p)?,
                    density: coordinatewise_density_check(&l.space, &u, p, &ls)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<LadderRow> = data
            .iter()
            .flat_map(|d| {
                d.ladder.levels.iter().map(move |k| LadderRow {
                    h: d.h,
                    k: k.k,
                    error: k.error,
                    rho_norm: k.rho_norm,
                    rho_violations: k.rho_violations,
                })
            })
            .collect();
        self.write_json(Stage::Approx, &data)?;
        self.write_csv(Stage::Approx, &rows)
    }

    fn pi_levels(&mut self) -> Result<Vec<PoincareLevel>> {
        let cfg = self.cfg.clone();
        let field = cfg.field_name();
        let plan = PiPlan {
            n_radii: cfg.pi_radii,
            max_centers: cfg.pi_max_centers,
            seed: cfg.seed,
        };
        let data = self
            .levels()?
            .iter()
            .map(|l| {
                let battery = standard_battery(&l.space, &l.omega, Some(cfg.domain))?;
                let r0 = cfg.r0.unwrap_or(l.space.scale_unit() / 4.0);
                let report = estimate_pi_constants(&l.space, &l.omega, cfg.p, cfg.lambda, r0, &battery, &plan)?;
                let qp = if cfg.q < cfg.p {
                    let u = gen_test_field(&field, &l.space, &l.omega)?;
                    let rho = discrete_upper_gradient(&l.space, (&u).into());
                    let fit = qp_pi_check(&l.space, &u, &rho, cfg.q, cfg.p, r0)?;
                    Some(QpSummary {
                        q: cfg.q,
                        r: r0,
                        c_pi: fit.c_pi,
                        certificate: fit.certificate.summary(),
                    })
                } else {
                    None
                };
                Ok(PoincareLevel { h: l.h, report, qp })
            })
            .collect::<Result<Vec<_>>>()?;
        self.pi = Some(data.iter().map(|d| d.report.c).collect());
        Ok(data)
    }

    fn stage_poincare(&mut self) -> Result<()> {
        let data = self.pi_levels()?;
        let rows: Vec<PoincareRow> = data
            .iter()
            .map(|d| PoincareRow {
                h: d.h,
                c: fmt_c(d.report.c),
                c_finite: d.report.c_finite,
                worst_field: d.report.worst_field.clone().unwrap_or_default(),
                balls: d.report.balls_checked,
                c_pi: d.qp.as_ref().map(|q| q.c_pi),
            })
            .collect();
        self.write_json(Stage::Poincare, &data)?;
        self.write_csv(Stage::Poincare, &rows)
    }

    fn stage_report(&mut self) -> Result<()> {
        let levels = self.criterion_levels()?;
        let criterion = extension_criterion(levels, self.cfg.p, &self.cfg.s_list)?;
        let pi = self.pi.clone();
        let summary = Summary {
            domain: self.cfg.domain.name().to_string(),
            field: self.cfg.field_name(),
            verdict: criterion.verdict.name().to_string(),
            pi_stable: pi.as_ref().map(|c| c.len() >= 2 && spread(c) <= PI_STABLE_SPREAD),
            pi_constants: pi.map(|c| c.into_iter().map(fmt_c).collect()),
            criterion,
        };
        let rows: Vec<SharpRow> = summary
            .criterion
            .levels
            .iter()
            .flat_map(|l| {
                summary
                    .criterion
                    .s_list
                    .iter()
                    .zip(&l.norms)
                    .map(move |(&s, &norm)| SharpRow { h: l.h, s, norm })
            })
            .collect();
        self.write_json(Stage::Report, &summary)?;
        self.write_csv(Stage::Report, &rows)
    }
}

/// Runs a config into `out` and returns the process exit code, writing
/// `error.json` there (and to stderr) on failure.
pub fn run_config(cfg: RunConfig, out: &Path) -> i32 {
    match Runner::new(cfg, out.to_path_buf()).run() {
        Ok(o) => {
            for a in &o.artifacts {
                log::info!("wrote {}", a.display());
            }
            0
        }
        Err(f) => report_failure(Some(out), f),
    }
}

fn report_failure(out: Option<&Path>, f: RunFailure) -> i32 {
    let code = f.error.exit_code();
    let rep = ErrorReport {
        version: VERSION.to_string(),
        config_hash: f.config_hash,
        stage: f.stage.map(|s| s.name().to_string()),
        kind: error_kind(&f.error).to_string(),
        message: f.error.to_string(),
        exit_code: code,
    };
    let text = serde_json::to_string_pretty(&rep).expect("error report serializes");
    if let Some(dir) = out {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), format!("{text}\n"));
        }
    }
    eprintln!("{text}");
    code
}

#[derive(Debug, Parser)]
#[command(name = "sobext", version, about = "Discrete Sobolev extension laboratory")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SOBEXT_JOBS")]
    jobs: Option<usize>,
    /// Increase log verbosity.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate domains; optionally write a space file and a mask.
    Gen(GenArgs),
    /// Whitney covering and partition-of-unity checks.
    Whitney(WhitneyArgs),
    /// Sharp-functional norms and minimal Hajłasz gradients.
    Grad(GradArgs),
    /// Extension operator diagnostics.
    Extend(StageArgs),
    /// Schauder ladder and coordinatewise Lipschitz density.
    Approx(ApproxArgs),
    /// Poincaré constant estimation over the standard battery.
    Poincare(StageArgs),
    /// Run a pipeline described by a JSON config.
    Run {
        /// Path to the config file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct StageArgs {
    /// disk, slit_disk, outward_cusp, two_squares or half_plane.
    #[arg(long, alias = "kind", value_parser = DomainKind::parse)]
    domain: Option<DomainKind>,
    /// Grid spacings (repeatable).
    #[arg(long = "h", num_args = 1..)]
    hs: Vec<f64>,
    #[arg(long, default_value = "euclidean", value_parser = parse_metric)]
    metric: MetricKind,
    /// Test field name (`radial`, `linear:x`, `slit_jump`, ...) or, with `--op`, a field file.
    #[arg(long)]
    field: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Scales for the sharp functional (repeatable).
    #[arg(long = "s", num_args = 1..)]
    s_list: Vec<f64>,
    /// Largest Poincaré radius (defaults to a quarter of the scale unit).
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit the verdict report.
    #[arg(long)]
    report: bool,
    /// Directory for stage artifacts.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    common: StageArgs,
    /// Write the space file for the (single) grid spacing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the domain mask as an index array.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WhitneyArgs {
    #[command(flatten)]
    common: StageArgs,
    /// Space file to cover instead of a generated domain.
    #[arg(long, requires = "mask")]
    space: Option<PathBuf>,
    /// Index array of `F` for `--space`.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Cover file written in `--space` mode.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check W1–W6 and the partition of unity; failure exits with status 3.
    #[arg(long)]
    verify: bool,
}

/// Cover file: selected balls with optional verification reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverFile {
    pub version: String,
    pub balls: Vec<WhitneyBall>,
    pub candidates: usize,
    pub rejected: usize,
    pub report: Option<WhitneyReport>,
    pub partition: Option<PartitionReport>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn gen_files(a: &GenArgs) -> Result<()> {
    let domain = a.common.domain.ok_or_else(|| Error::Config("--domain is required".into()))?;
    let [h] = a.common.hs[..] else {
        return Err(Error::Config("--out and --mask need exactly one --h".into()));
    };
    let (space, omega) = gen_domain(&DomainSpec::new(domain, h).with_metric(a.common.metric))?;
    if let Some(p) = &a.out {
        write_pretty(p, &space.to_file())?;
    }
    if let Some(p) = &a.mask {
        write_pretty(p, &omega.indices())?;
    }
    Ok(())
}

fn whitney_files(a: &WhitneyArgs, space_path: &Path) -> Result<()> {
    let mask_path = a.mask.as_deref().ok_or_else(|| Error::Config("--space needs --mask".into()))?;
    let out = a.out.as_deref().ok_or_else(|| Error::Config("--space needs --out".into()))?;
    let space = Space::from_file(&read_json(space_path)?)?;
    let idx: Vec<usize> = read_json(mask_path)?;
    let f = space.mask_from_indices(&idx)?;
    let cover = whitney_cover(&space, &f)?;
    let (report, partition) = if a.verify {
        let rep = verify_whitney(&space, &f, &cover, &VerifyOptions::default());
        let part = if cover.is_empty() {
            None
        } else {
            let pou = partition_of_unity(&space, &f, &cover)?;
            Some(verify_partition(&space, &f, &cover, &pou))
        };
        (Some(rep), part)
    } else {
        (None, None)
    };
    let failed = report.as_ref().is_some_and(|r| !r.all_ok) || partition.as_ref().is_some_and(|p| !p.ok);
    write_pretty(
        out,
        &CoverFile {
            version: VERSION.to_string(),
            balls: cover.balls,
            candidates: cover.candidates,
            rejected: cover.rejected,
            report,
            partition,
        },
    )?;
    if failed {
        return Err(Error::Invariant(format!("Whitney verification failed; see {}", out.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GradOp {
    /// Check a candidate gradient `--g` against every pair.
    Check,
    /// Minimal Hajłasz gradient in `Lᵖ`.
    Minimize,
    /// Sharp functional at scale `--s`.
    Sharp,
    /// Local gradient fitted from the sharp functional.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ApproxOp {
    /// Schauder truncation to the first `--k` coordinates.
    Truncate,
    /// Truncation ladder with upper-gradient comparison.
    Density,
    /// Inf-convolution approximant with constant `--l`.
    Lipschitz,
}

/// Inputs shared by the file-based `grad` and `approx` operations.
#[derive(Debug, Args)]
struct FileArgs {
    /// Space file to operate on.
    #[arg(long, requires = "op")]
    space: Option<PathBuf>,
    /// Index array of the field's domain (defaults to every point).
    #[arg(long, requires = "space")]
    mask: Option<PathBuf>,
    /// Output file for the operation.
    #[arg(long, requires = "space")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradArgs {
    #[command(flatten)]
    common: StageArgs,
    #[command(flatten)]
    files: FileArgs,
    #[arg(long, value_enum, requires = "space")]
    op: Option<GradOp>,
    /// Candidate gradient file for `--op check`.
    #[arg(long)]
    g: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ApproxArgs {
    #[command(flatten)]
    common: StageArgs,
    #[command(flatten)]
    files: FileArgs,
    #[arg(long, value_enum, requires = "space")]
    op: Option<ApproxOp>,
    /// Truncation level for `--op truncate`.
    #[arg(long)]
    k: Option<usize>,
    /// Lipschitz constant for `--op lipschitz`.
    #[arg(long)]
    l: Option<f64>,
    /// Symmetric regularization for `--op lipschitz`.
    #[arg(long)]
    symmetric: bool,
}

/// Field file: one value per point, or one coordinate vector per point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldData {
    Scalar(Vec<f64>),
    Vector(Vec<Vec<f64>>),
}

/// Result of a file-based `grad` operation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradFile {
    pub version: String,
    pub op: String,
    pub p: f64,
    pub s: Option<f64>,
    /// `‖values‖_{Lᵖ}` over the field's domain.
    pub norm: f64,
    /// Fitted constant for `local`.
    pub c: Option<f64>,
    pub certificate: Option<CertificateSummary>,
    /// The gradient (or sharp functional) at every point; 0 off the domain.
    pub values: Vec<f64>,
}

/// Result of a file-based `approx` operation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxFile {
    pub version: String,
    pub op: String,
    pub field: FieldData,
    pub density: Option<EnergyDensityReport>,
}

struct FileInput {
    space: Space,
    omega: Arc<SubsetMask>,
    data: FieldData,
}

fn file_input(files: &FileArgs, field: Option<&str>) -> Result<FileInput> {
    let space_path = files.space.as_deref().ok_or_else(|| Error::Config("--op needs --space".into()))?;
    let space = Space::from_file(&read_json(space_path)?)?;
    let omega = Arc::new(match &files.mask {
        Some(p) => space.mask_from_indices(&read_json::<Vec<usize>>(p)?)?,
        None => space.full_mask(),
    });
    let field = field.ok_or_else(|| Error::Config("--op needs --field".into()))?;
    // A path to a field file, otherwise a named test field.
    let data = if Path::new(field).is_file() {
        read_json(Path::new(field))?
    } else {
        FieldData::Scalar(gen_test_field(field, &space, &omega)?.values().to_vec())
    };
    let n = match &data {
        FieldData::Scalar(v) => v.len(),
        FieldData::Vector(v) => v.len(),
    };
    if n != space.len() {
        return Err(Error::Config(format!("field has {n} values for {} points", space.len())));
    }
    Ok(FileInput { space, omega, data })
}

impl FileInput {
    fn scalar(&self) -> Result<Field> {
        match &self.data {
            FieldData::Scalar(v) => Field::new(self.omega.clone(), v.clone()),
            FieldData::Vector(_) => Err(Error::Config("this operation needs a scalar field".into())),
        }
    }

    fn vector(&self) -> Result<VecField> {
        match &self.data {
            FieldData::Scalar(v) => VecField::new(self.omega.clone(), 1, v.clone(), NormTag::Sup),
            FieldData::Vector(rows) => {
                let n = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("vector field rows differ in length".into()));
                }
                VecField::new(self.omega.clone(), n, rows.concat(), NormTag::Sup)
            }
        }
    }
}

fn out_path(files: &FileArgs) -> Result<&Path> {
    files.out.as_deref().ok_or_else(|| Error::Config("--op needs --out".into()))
}

fn grad_file(a: &GradArgs, op: GradOp) -> Result<()> {
    let input = file_input(&a.files, a.common.field.as_deref())?;
    let out = out_path(&a.files)?;
    let u = input.scalar()?;
    let (space, p) = (&input.space, a.common.p);
    let s = match a.common.s_list[..] {
        [] => 0.1,
        [s] => s,
        _ => return Err(Error::Config("file operations take a single --s".into())),
    };
    let (s_used, c, certificate, values) = match op {
        GradOp::Check => {
            let path = a.g.as_deref().ok_or_else(|| Error::Config("--op check needs --g".into()))?;
            let g = Field::new(input.omega.clone(), read_json(path)?)?;
            let cert = check_hajlasz(space, (&u).into(), &g, Scope::Global, p, 0.0)?;
            (None, None, Some(cert.summary()), cert.g.values().to_vec())
        }
        GradOp::Minimize => {
            let cert = minimal_hajlasz_gradient(space, (&u).into(), p, Scope::Global, &SolveOptions::default())?;
            (None, None, Some(cert.summary()), cert.g.values().to_vec())
        }
        GradOp::Sharp => {
            let sharp = sharp_functional(space, (&u).into(), s, &SharpOptions::default())?;
            (Some(s), None, None, sharp.values.values().to_vec())
        }
        GradOp::Local => {
            let lg = local_gradient_from_sharp(space, &u, s, p)?;
            (Some(s), Some(lg.c), Some(lg.certificate.summary()), lg.certificate.g.values().to_vec())
        }
    };
    let norm = lp_norm(space, &values, input.omega.indices(), p);
    write_pretty(
        out,
        &GradFile {
            version: VERSION.to_string(),
            op: format!("{op:?}").to_lowercase(),
            p,
            s: s_used,
            norm,
            c,
            certificate,
            values,
        },
    )
}

fn approx_file(a: &ApproxArgs, op: ApproxOp) -> Result<()> {
    let input = file_input(&a.files, a.common.field.as_deref())?;
    let out = out_path(&a.files)?;
    let rows = |v: &VecField| -> FieldData {
        let n = v.n();
        FieldData::Vector(v.values().chunks(n).map(<[f64]>::to_vec).collect())
    };
    let (field, density) = match op {
        ApproxOp::Truncate => {
            let k = a.k.ok_or_else(|| Error::Config("--op truncate needs --k".into()))?;
            (rows(&schauder_truncate(&input.vector()?, k)?), None)
        }
        ApproxOp::Density => {
            let u = input.vector()?;
            (rows(&u), Some(energy_density_report(&input.space, &u, a.common.p)?))
        }
        ApproxOp::Lipschitz => {
            let l = a.l.ok_or_else(|| Error::Config("--op lipschitz needs --l".into()))?;
            let f = lipschitz_approximate(&input.space, &input.scalar()?, l, a.symmetric)?;
            (FieldData::Scalar(f.values().to_vec()), None)
        }
    };
    if let Some(rep) = &density {
        let path = out.with_extension("csv");
        let csv_err = |e: csv::Error| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        for level in &rep.levels {
            w.serialize(level).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    write_pretty(
        out,
        &ApproxFile {
            version: VERSION.to_string(),
            op: format!("{op:?}").to_lowercase(),
            field,
            density,
        },
    )
}

fn parse_metric(s: &str) -> Result<MetricKind> {
    match s {
        "euclidean" => Ok(MetricKind::Euclidean),
        "graph" => Ok(MetricKind::Graph),
        other => Err(Error::Config(format!("unknown metric {other:?}"))),
    }
}

impl StageArgs {
    fn into_config(self, stage: Stage) -> Result<(RunConfig, PathBuf)> {
        let domain = self.domain.ok_or_else(|| Error::Config("--domain is required".into()))?;
        let out = self.out_dir.ok_or_else(|| Error::Config("--out-dir is required".into()))?;
        let mut stages = vec![stage];
        if self.report {
            stages.push(Stage::Report);
        }
        let cfg = RunConfig {
            stages,
            domain,
            metric: self.metric,
            hs: self.hs,
            field: self.field,
            p: self.p,
            s_list: if self.s_list.is_empty() { default_s_list() } else { self.s_list },
            r0: self.r0,
            lambda: self.lambda,
            seed: self.seed,
            ..RunConfig::default()
        };
        Ok((cfg, out))
    }
}

fn plain_failure(error: Error) -> i32 {
    report_failure(
        None,
        RunFailure {
            stage: None,
            config_hash: None,
            error,
        },
    )
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return plain_failure(Error::Config("--jobs must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let parsed = match cli.command {
        Command::Gen(a) => {
            if a.out.is_some() || a.mask.is_some() {
                if let Err(e) = gen_files(&a) {
                    return plain_failure(e);
                }
                if a.common.out_dir.is_none() {
                    return 0;
                }
            }
            a.common.into_config(Stage::Gen)
        }
        Command::Whitney(a) => match a.space.clone() {
            Some(path) => {
                return match whitney_files(&a, &path) {
                    Ok(()) => 0,
                    Err(e) => plain_failure(e),
                }
            }
            None => a.common.into_config(Stage::Whitney),
        },
        Command::Grad(a) => match a.op {
            Some(op) => {
                return match grad_file(&a, op) {
                    Ok(()) => 0,
                    Err(e) => plain_failure(e),
                }
            }
            None => a.common.into_config(Stage::Grad),
        },
        Command::Extend(a) => a.into_config(Stage::Extend),
        Command::Approx(a) => match a.op {
            Some(op) => {
                return match approx_file(&a, op) {
                    Ok(()) => 0,
                    Err(e) => plain_failure(e),
                }
            }
            None => a.common.into_config(Stage::Approx),
        },
        Command::Poincare(a) => a.into_config(Stage::Poincare),
        Command::Run { config, out_dir } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(error) => {
                    return report_failure(
                        out_dir.as_deref(),
                        RunFailure {
                            stage: None,
                            config_hash: None,
                            error,
                        },
                    )
                }
            };
            match out_dir.or_else(|| cfg.output_dir.clone()) {
                Some(o) => Ok((cfg, o)),
                None if cfg.stages.is_empty() => return 0,
                None => Err(Error::Config("no output directory: set output_dir or --out-dir".into())),
            }
        }
    };
    match parsed {
        Ok((cfg, out)) => run_config(cfg, &out),
        Err(e) => plain_failure(e),
    }
}
