//! Minimal Hajłasz gradient: `min ‖g‖_{Lᵖ(µ)}` subject to `g(x) + g(y) ≥ |u(x)−u(y)|/d(x,y)`.
//!
//! `p = ∞` has a closed form, `p = 1` is a linear program, and `p ∈ (1,∞)` is
//! solved through its smooth concave dual with accelerated projected gradient
//! ascent, stopped on the relative duality gap.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::{check_hajlasz, pair_map, GradientCertificate, Scope, SolverInfo, Values};
use crate::error::{Error, Result};
use crate::space::{Field, Space};

/// Above this many domain points a global scope generates constraints only
/// within `scale_unit` and audits the result on all pairs.
pub const LOCALIZE_ABOVE: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    /// Relative duality gap at which the first-order method stops.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Relative violation accepted by the final feasibility audit.
    pub audit_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-11,
            max_iter: 2_000_000,
            audit_tol: 1e-9,
        }
    }
}

struct Program {
    /// Domain points that occur in some constraint.
    vars: Vec<usize>,
    /// Normalized weights (max 1).
    mu: Vec<f64>,
    pairs: Vec<(u32, u32)>,
    /// Normalized right-hand sides (max 1).
    c: Vec<f64>,
    c_scale: f64,
    localized: bool,
}

fn build_program(space: &Space, u: Values, scope: Scope) -> Program {
    let dom = u.domain();
    let localized = scope == Scope::Global && dom.count() > LOCALIZE_ABOVE;
    let gen_scope = if localized {
        Scope::Local(space.scale_unit())
    } else {
        scope
    };
    let per = pair_map(space, dom, gen_scope, Vec::new(), |acc: &mut Vec<(usize, usize, f64)>, x, y, d| {
        let du = u.diff(x, y);
        if du > 0.0 {
            acc.push((x, y, du / d));
        }
    });
    let raw: Vec<(usize, usize, f64)> = per.into_iter().flatten().collect();
    let n = space.len();
    let mut local = vec![u32::MAX; n];
    let mut vars = Vec::new();
    for &(x, y, _) in &raw {
        for z in [x, y] {
            if local[z] == u32::MAX {
                local[z] = 0;
            }
        }
    }
    for z in 0..n {
        if local[z] == 0 {
            local[z] = vars.len() as u32;
            vars.push(z);
        }
    }
    let c_scale = raw.iter().map(|e| e.2).fold(0.0, f64::max);
    let mu_max = vars.iter().map(|&z| space.weight(z)).fold(0.0, f64::max);
    Program {
        mu: vars.iter().map(|&z| space.weight(z) / mu_max).collect(),
        pairs: raw.iter().map(|&(x, y, _)| (local[x], local[y])).collect(),
        c: raw.iter().map(|e| e.2 / c_scale).collect(),
        vars,
        c_scale,
        localized,
    }
}

impl Program {
    fn violation(&self, g: &[f64]) -> f64 {
        self.pairs
            .iter()
            .zip(&self.c)
            .map(|(&(a, b), &c)| c - g[a as usize] - g[b as usize])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cheapest of two repairs making `g` feasible: adding half of each incident
    /// violation, or scaling by the worst ratio.
    fn repair(&self, g: &[f64], p: f64) -> Vec<f64> {
        let mut add = g.to_vec();
        let mut bump = vec![0.0f64; g.len()];
        let mut ratio: f64 = 1.0;
        for (&(a, b), &c) in self.pairs.iter().zip(&self.c) {
            let s = g[a as usize] + g[b as usize];
            let v = c - s;
            if v > 0.0 {
                bump[a as usize] = bump[a as usize].max(0.5 * v);
                bump[b as usize] = bump[b as usize].max(0.5 * v);
                ratio = ratio.max(if s > 0.0 { c / s } else { f64::INFINITY });
            }
        }
        for (x, b) in add.iter_mut().zip(&bump) {
            *x += b;
        }
        let widen = |v: &mut Vec<f64>| {
            let mut step = 4.0 * f64::EPSILON;
            for _ in 0..200 {
                let viol = self.violation(v);
                if viol <= 0.0 {
                    break;
                }
                for x in v.iter_mut() {
                    *x = *x * (1.0 + step) + viol;
                }
                step *= 2.0;
            }
        };
        widen(&mut add);
        if ratio.is_finite() {
            let mut scaled: Vec<f64> = g.iter().map(|x| x * ratio).collect();
            widen(&mut scaled);
            if self.primal(&scaled, p) < self.primal(&add, p) {
                return scaled;
            }
        }
        add
    }

    fn primal(&self, g: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return g.iter().fold(0.0, |m, &x| m.max(x));
        }
        g.iter()
            .zip(&self.mu)
            .map(|(&x, &m)| m * pow(x, p))
            .sum::<f64>()
            / p
    }
}

#[inline]
fn pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// Minimizes `‖g‖_{Lᵖ}` over Hajłasz gradients of `u` in the given scope.
pub fn minimal_hajlasz_gradient(
    space: &Space,
    u: Values,
    p: f64,
    scope: Scope,
    opts: &SolveOptions,
) -> Result<GradientCertificate> {
    scope.validate()?;
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must lie in [1, ∞], got {p}")));
    }
    let dom = u.domain().clone();
    let prog = build_program(space, u, scope);
    let mut g_full = vec![0.0; space.len()];
    let info = if prog.pairs.is_empty() {
        SolverInfo {
            method: "trivial".into(),
            objective: 0.0,
            gap: 0.0,
            max_violation: 0.0,
            iterations: 0,
            constraints: 0,
            localized: prog.localized,
        }
    } else {
        let (g, method, gap, iterations) = if p.is_infinite() {
            (solve_inf(&prog), "closed-form", 0.0, 0)
        } else if p == 1.0 {
            let g = solve_lp(&prog)?;
            (g, "simplex", 0.0, 0)
        } else {
            let (g, gap, it) = solve_dual(&prog, p, opts)?;
            (g, "dual-accelerated-gradient", gap, it)
        };
        let max_violation = prog.violation(&g) * prog.c_scale;
        let g = prog.repair(&g, p);
        for (k, &z) in prog.vars.iter().enumerate() {
            g_full[z] = g[k] * prog.c_scale;
        }
        SolverInfo {
            method: method.into(),
            objective: 0.0,
            gap,
            max_violation,
            iterations,
            constraints: prog.pairs.len(),
            localized: prog.localized,
        }
    };
    let g = Field::new(dom.clone(), g_full)?;
    let mut cert = check_hajlasz(space, u, &g, scope, p, opts.audit_tol)?;
    let mut info = info;
    info.objective = cert.lp_norm;
    cert.solver = Some(info);
    Ok(cert)
}

/// `t* = max c/2`; `g(x) = min(t*, max of c over pairs at x)` is feasible and optimal.
fn solve_inf(prog: &Program) -> Vec<f64> {
    let t = prog.c.iter().fold(0.0f64, |m, &c| m.max(c)) / 2.0;
    let mut best = vec![0.0f64; prog.vars.len()];
    for (&(a, b), &c) in prog.pairs.iter().zip(&prog.c) {
        best[a as usize] = best[a as usize].max(c);
        best[b as usize] = best[b as usize].max(c);
    }
    best.iter().map(|&m| m.min(t)).collect()
}

fn solve_lp(prog: &Program) -> Result<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = prog
        .mu
        .iter()
        .map(|&m| lp.add_var(m, (0.0, f64::INFINITY)))
        .collect();
    for (&(a, b), &c) in prog.pairs.iter().zip(&prog.c) {
        lp.add_constraint(
            [(vars[a as usize], 1.0), (vars[b as usize], 1.0)],
            ComparisonOp::Ge,
            c,
        );
    }
    let sol = lp.solve().map_err(|e| Error::Solver {
        message: format!("linear program failed: {e}"),
        gap: f64::NAN,
        violation: f64::NAN,
    })?;
    Ok(vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect())
}

/// Dual ascent for `1 < p < ∞`.
///
/// With multipliers `λ ≥ 0` per pair and `s(x) = Σ λ` over pairs at `x`, the
/// Lagrangian minimizer is `g(x) = (s(x)/µ(x))^{1/(p−1)}` and the dual is
/// `Σ cλ − Σ µ gᵖ/p'`. Its gradient in `λ_e` is `c_e − g(a) − g(b)`.
fn solve_dual(prog: &Program, p: f64, opts: &SolveOptions) -> Result<(Vec<f64>, f64, usize)> {
    let m = prog.pairs.len();
    let nv = prog.vars.len();
    let q = p / (p - 1.0);
    let expo = 1.0 / (p - 1.0);
    let eval = |lam: &[f64], g: &mut Vec<f64>, grad: &mut Vec<f64>| -> f64 {
        let mut s = vec![0.0; nv];
        for (&(a, b), &l) in prog.pairs.iter().zip(lam) {
            s[a as usize] += l;
            s[b as usize] += l;
        }
        g.clear();
        g.extend(s.iter().zip(&prog.mu).map(|(&s, &mu)| {
            let t = s / mu;
            if expo == 1.0 {
                t
            } else {
                t.powf(expo)
            }
        }));
        let mut dual = 0.0;
        grad.clear();
        for ((&(a, b), &c), &l) in prog.pairs.iter().zip(&prog.c).zip(lam) {
            grad.push(c - g[a as usize] - g[b as usize]);
            dual += c * l;
        }
        let pen: f64 = g.iter().zip(&prog.mu).map(|(&x, &mu)| mu * pow(x, p)).sum();
        dual - pen / q
    };

    let mut lam = vec![0.0; m];
    let mut y = lam.clone();
    let (mut gy, mut grad_y) = (Vec::new(), Vec::new());
    let mut dy = eval(&y, &mut gy, &mut grad_y);
    let (mut gc, mut grad_c) = (Vec::new(), Vec::new());
    let mut cand = vec![0.0; m];
    let mut t: f64 = 1.0;
    let mut lip: f64 = 1.0;
    let mut best_primal = f64::INFINITY;
    let mut best_g: Vec<f64> = Vec::new();
    let mut best_dual = f64::NEG_INFINITY;
    let mut gap = f64::INFINITY;
    let check_every = 25;
    for it in 0..opts.max_iter {
        // backtracking projected step from y
        let dc = loop {
            let mut lin = 0.0;
            let mut sq = 0.0;
            for e in 0..m {
                let v = (y[e] + grad_y[e] / lip).max(0.0);
                cand[e] = v;
                let d = v - y[e];
                lin += grad_y[e] * d;
                sq += d * d;
            }
            let dc = eval(&cand, &mut gc, &mut grad_c);
            if dc >= dy + lin - 0.5 * lip * sq - 1e-15 * dy.abs() || lip > 1e300 {
                break dc;
            }
            lip *= 2.0;
        };
        best_dual = best_dual.max(dc);
        // adaptive restart on the gradient-mapping test
        let mut restart = 0.0;
        for e in 0..m {
            restart += (y[e] - cand[e]) * (cand[e] - lam[e]);
        }
        if restart > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for e in 0..m {
            let v = cand[e];
            y[e] = (v + beta * (v - lam[e])).max(0.0);
            lam[e] = v;
        }
        t = t_next;
        lip *= 0.9;
        if (it + 1) % check_every == 0 || it + 1 == opts.max_iter {
            let fixed = prog.repair(&gc, p);
            let pv = prog.primal(&fixed, p);
            if pv < best_primal {
                best_primal = pv;
                best_g = fixed;
            }
            gap = (best_primal - best_dual) / best_primal.max(1e-300);
            if gap <= opts.gap_tol {
                return Ok((best_g, gap.max(0.0), it + 1));
            }
        }
        dy = eval(&y, &mut gy, &mut grad_y);
    }
    if gap <= 1e3 * opts.gap_tol {
        log::warn!("dual solver stopped at iteration cap with relative gap {gap:.3e}");
        return Ok((best_g, gap.max(0.0), opts.max_iter));
    }
    Err(Error::Solver {
        message: format!("no convergence within {} iterations", opts.max_iter),
        gap,
        violation: if best_g.is_empty() {
            f64::NAN
        } else {
            prog.violation(&best_g)
        },
    })
}
