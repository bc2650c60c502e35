#![allow(dead_code)]

use std::sync::Arc;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sobext::space::{Field, MetricKind, NormTag, Space, SubsetMask, VecField};

pub struct Instance {
    pub space: Space,
    pub full: Arc<SubsetMask>,
    pub u: Field,
}

/// Random Euclidean instance in the unit square.
pub fn random_instance(seed: u64, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0])
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let space = Space::new(2, coords, weights, MetricKind::Euclidean, vec![], 1.0).unwrap();
    let full = Arc::new(space.full_mask());
    let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = Field::new(full.clone(), vals).unwrap();
    Instance { space, full, u }
}

pub fn random_vec_field(full: &Arc<SubsetMask>, n: usize, seed: u64) -> VecField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..n * full.universe()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    VecField::new(full.clone(), n, vals, NormTag::Sup).unwrap()
}

/// Pairwise constraints `(a, b, |Δu|/d)` over all pairs.
pub fn constraints(space: &Space, u: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = space.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let c = (u[a] - u[b]).abs() / space.dist(a, b);
            if c > 0.0 {
                out.push((a, b, c));
            }
        }
    }
    out
}

/// Interior-point oracle for `min ‖g‖_p` (p ∈ {1, 2, ∞}) with `g(a) + g(b) ≥ c`.
///
/// Returns the optimal norm value.
pub fn oracle_norm(space: &Space, u: &[f64], p: f64) -> f64 {
    let n = space.len();
    let cons = constraints(space, u);
    if cons.is_empty() {
        return 0.0;
    }
    let w = space.weights();
    let inf = p.is_infinite();
    let nv = if inf { n + 1 } else { n };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    for &(i, j, c) in &cons {
        let mut r = vec![0.0; nv];
        r[i] = -1.0;
        r[j] = -1.0;
        rows.push(r);
        b.push(-c);
    }
    for i in 0..n {
        let mut r = vec![0.0; nv];
        r[i] = -1.0;
        rows.push(r);
        b.push(0.0);
        if inf {
            let mut r = vec![0.0; nv];
            r[i] = 1.0;
            r[n] = -1.0;
            rows.push(r);
            b.push(0.0);
        }
    }
    let a = dense_csc(&rows, nv);
    let (pm, q) = if inf {
        let mut q = vec![0.0; nv];
        q[n] = 1.0;
        (CscMatrix::<f64>::zeros((nv, nv)), q)
    } else if p == 1.0 {
        (CscMatrix::<f64>::zeros((nv, nv)), w.to_vec())
    } else {
        let diag: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = w[i];
                r
            })
            .collect();
        (dense_csc(&diag, n), vec![0.0; n])
    };
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-13)
        .tol_gap_rel(1e-13)
        .tol_feas(1e-13)
        .max_iter(400)
        .build()
        .unwrap();
    let cones = [NonnegativeConeT(rows.len())];
    let mut solver = DefaultSolver::new(&pm, &q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "oracle status {:?}",
        solver.solution.status
    );
    let x = &solver.solution.x;
    if inf {
        x[n]
    } else if p == 1.0 {
        (0..n).map(|i| w[i] * x[i].max(0.0)).sum()
    } else {
        (0..n).map(|i| w[i] * x[i] * x[i]).sum::<f64>().sqrt()
    }
}

fn dense_csc(rows: &[Vec<f64>], ncols: usize) -> CscMatrix<f64> {
    let m = rows.len();
    let mut colptr = vec![0usize];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for j in 0..ncols {
        for (i, r) in rows.iter().enumerate() {
            if r[j] != 0.0 {
                rowval.push(i);
                nzval.push(r[j]);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, ncols, colptr, rowval, nzval)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
