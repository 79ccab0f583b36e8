//! Liouville-transform potentials for a smooth background:
//! a = 1/γ₀ − 1 and b = V = Δ√γ₀ / √γ₀, sampled on the padded grid.

use super::PaddedGrid;
use crate::conductivity::Gamma0;
use crate::error::{Error, Result};
use crate::geom::Rect;

/// Sampled potential pair with its common support box.
#[derive(Debug, Clone)]
pub struct PotentialPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub support: Rect,
    pub sup_a: f64,
    pub sup_b: f64,
    /// sup of ⟨x⟩|a| and ⟨x⟩|b| (the norms entering the contraction bound).
    pub weighted_sup_a: f64,
    pub weighted_sup_b: f64,
}

/// Sample a and b from the closed-form background. Derivatives come from
/// the expression's exact jets: Δ√γ = Δγ/(2√γ) − |∇γ|²/(4γ^{3/2}), so
/// b = Δγ/(2γ) − |∇γ|²/(4γ²).
pub fn liouville_potentials(gamma0: &Gamma0, grid: &PaddedGrid) -> Result<PotentialPair> {
    let support = gamma0.support_box().unwrap_or(Rect::new(0.0, 0.0, 0.0, 0.0));
    let n = grid.n;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n * n];
    let mut sup_a = 0.0f64;
    let mut sup_b = 0.0f64;
    let mut weighted_sup_a = 0.0f64;
    let mut weighted_sup_b = 0.0f64;
    if gamma0.is_one() {
        return Ok(PotentialPair {
            a,
            b,
            support,
            sup_a,
            sup_b,
            weighted_sup_a,
            weighted_sup_b,
        });
    }
    for j in 0..n {
        for i in 0..n {
            let p = grid.point(i, j);
            if !support.contains(p) {
                continue;
            }
            let jet = gamma0.eval_jet(p);
            let g = jet.v;
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Cgo(format!(
                    "γ₀ must be positive; got {g} at ({:.3}, {:.3})",
                    p.x, p.y
                )));
            }
            let grad_sq = jet.dx * jet.dx + jet.dy * jet.dy;
            let av = 1.0 / g - 1.0;
            let bv = jet.laplacian() / (2.0 * g) - grad_sq / (4.0 * g * g);
            let idx = j * n + i;
            a[idx] = av;
            b[idx] = bv;
            let w = (1.0 + p.norm_sq()).sqrt();
            sup_a = sup_a.max(av.abs());
            sup_b = sup_b.max(bv.abs());
            weighted_sup_a = weighted_sup_a.max(w * av.abs());
            weighted_sup_b = weighted_sup_b.max(w * bv.abs());
        }
    }
    Ok(PotentialPair {
        a,
        b,
        support,
        sup_a,
        sup_b,
        weighted_sup_a,
        weighted_sup_b,
    })
}
