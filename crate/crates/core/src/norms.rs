//! Weighted Lᵖ norms on subsets.

use crate::space::Space;

/// `(Σ µ|v|ᵖ)^{1/p}` over `set` (sup over `set` for infinite `p`).
///
/// `p = 1` and `p = 2` avoid `powf` so results are reproducible bit for bit.
pub fn lp_norm(space: &Space, values: &[f64], set: impl IntoIterator<Item = usize>, p: f64) -> f64 {
    let it = set.into_iter();
    if p.is_infinite() {
        return it.map(|i| values[i].abs()).fold(0.0, f64::max);
    }
    if p == 1.0 {
        it.map(|i| space.weight(i) * values[i].abs()).sum()
    } else if p == 2.0 {
        it.map(|i| space.weight(i) * values[i] * values[i]).sum::<f64>().sqrt()
    } else {
        it.map(|i| space.weight(i) * values[i].abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Lᵖ norm over the member points of a flag vector.
pub fn lp_norm_on(space: &Space, values: &[f64], flags: &[bool], p: f64) -> f64 {
    lp_norm(space, values, (0..flags.len()).filter(|&i| flags[i]), p)
}
