//! Probe construction for non-constant isotropic backgrounds.
//!
//! The Liouville transform reduces ∇·γ₀∇ − τ to Δ − V with
//! V = Δ√γ₀/√γ₀, and the probe is sought as
//!
//!   v_τ(x) = e^{x·z} (1 + ε_z(x)) / √γ₀(x),
//!
//! where the remainder ε_z solves (Δ + 2z·∇ − τa − b) ε = τa + b with
//! a = 1/γ₀ − 1, b = V. The solve inverts Δ + 2z·∇ through the Faddeev
//! Green multiplier and iterates the Neumann series, which contracts once
//! the virtual slowness c is large enough — measured, not assumed.
//!
//! The computation grid is uniform and padded (FFT-friendly), independent of
//! the forward-solver mesh; probe traces reach the boundary nodes through
//! bicubic interpolation.

pub mod fft2;
pub mod kernel;
pub mod neumann;
pub mod potentials;

pub use kernel::{faddeev_kernel, gz_convolve, FaddeevKernel};
pub use neumann::{neumann_solve, CgoCorrection, CgoDiagnostics};
pub use potentials::{liouville_potentials, PotentialPair};

use crate::conductivity::Gamma0;
use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use crate::grid::{DomainSpec, Grid};
use crate::probes::{ProbeKind, ProbeParams, ProbeSolution};
use num_complex::Complex64;
use std::sync::Arc;

/// Uniform square FFT grid over a padded box centered on the body.
#[derive(Debug, Clone)]
pub struct PaddedGrid {
    pub n: usize,
    pub length: f64,
    pub center: Vec2,
}

impl PaddedGrid {
    pub fn new(n: usize, length: f64, center: Vec2) -> Self {
        PaddedGrid { n, length, center }
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Cell-centered physical coordinate of sample (i, j).
    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        let h = self.h();
        Vec2::new(
            self.center.x - 0.5 * self.length + (i as f64 + 0.5) * h,
            self.center.y - 0.5 * self.length + (j as f64 + 0.5) * h,
        )
    }

    /// Signed angular frequency of FFT bin k.
    pub fn freq(&self, k: usize) -> f64 {
        let n = self.n;
        let signed = if k <= n / 2 {
            k as isize
        } else {
            k as isize - n as isize
        };
        2.0 * std::f64::consts::PI * signed as f64 / self.length
    }

    /// Central quarter-size box: right-hand sides must be supported here so
    /// the periodic convolution cannot wrap around.
    pub fn safe_box(&self) -> Rect {
        let q = 0.25 * self.length;
        Rect::new(
            self.center.x - q,
            self.center.x + q,
            self.center.y - q,
            self.center.y + q,
        )
    }
}

/// Catmull-Rom weights for the four taps around fractional position t.
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t + t2 - 0.5 * t3,
        1.0 - 2.5 * t2 + 1.5 * t3,
        0.5 * t + 2.0 * t2 - 1.5 * t3,
        -0.5 * t2 + 0.5 * t3,
    ]
}

/// Bicubic sample of a complex field on the padded grid (clamped indexing;
/// callers stay well inside the box).
fn bicubic(field: &[Complex64], grid: &PaddedGrid, p: Vec2) -> Complex64 {
    let n = grid.n as isize;
    let h = grid.h();
    let fx = (p.x - (grid.center.x - 0.5 * grid.length)) / h - 0.5;
    let fy = (p.y - (grid.center.y - 0.5 * grid.length)) / h - 0.5;
    let ix = fx.floor();
    let iy = fy.floor();
    let wx = catmull_rom(fx - ix);
    let wy = catmull_rom(fy - iy);
    let mut acc = Complex64::default();
    for (dj, wyj) in wy.iter().enumerate() {
        let j = (iy as isize + dj as isize - 1).clamp(0, n - 1) as usize;
        let mut row = Complex64::default();
        for (di, wxi) in wx.iter().enumerate() {
            let i = (ix as isize + di as isize - 1).clamp(0, n - 1) as usize;
            row += *wxi * field[j * grid.n + i];
        }
        acc += *wyj * row;
    }
    acc
}

/// Reusable CGO construction context: the padded grid and the sampled
/// Liouville potentials for one background. Shareable across directions.
pub struct CgoContext {
    pub grid: PaddedGrid,
    pub potentials: PotentialPair,
    pub gamma0: Gamma0,
    pub max_iter: usize,
}

impl CgoContext {
    /// Build for a background over the given domain. The padded box is twice
    /// the body's bounding square, so the support box (which must sit inside
    /// the body) automatically satisfies the 2x padding rule.
    pub fn new(gamma0: &Gamma0, domain: &DomainSpec, n: usize) -> Result<Self> {
        let bb = domain.bounding_rect();
        let center = Vec2::new(0.5 * (bb.x0 + bb.x1), 0.5 * (bb.y0 + bb.y1));
        let half = 0.5 * bb.width().max(bb.height());
        let grid = PaddedGrid::new(n, 4.0 * half, center);
        if let Some(support) = gamma0.support_box() {
            let safe = grid.safe_box();
            if !(safe.contains(Vec2::new(support.x0, support.y0))
                && safe.contains(Vec2::new(support.x1, support.y1)))
            {
                return Err(Error::Cgo(
                    "γ₀ support box must lie inside the body (and the unpadded box)".into(),
                ));
            }
        }
        let potentials = liouville_potentials(gamma0, &grid)?;
        Ok(CgoContext {
            grid,
            potentials,
            gamma0: gamma0.clone(),
            max_iter: 300,
        })
    }

    /// Solve for the remainder ε_z of one probe.
    pub fn correction(&self, params: &ProbeParams) -> Result<(CgoCorrection, FaddeevKernel)> {
        let kernel = faddeev_kernel(params, &self.grid)?;
        let corr = neumann_solve(&self.potentials, &kernel, 1.0, self.max_iter)?;
        Ok((corr, kernel))
    }

    /// Diagnostics entry for the report command; failures are recorded, not
    /// propagated.
    pub fn diagnostics(&self, params: &ProbeParams) -> CgoDiagnostics {
        let theta = params.omega.y.atan2(params.omega.x);
        match self.correction(params) {
            Ok((corr, _)) => CgoDiagnostics {
                omega_theta: theta,
                c: params.c,
                tau: params.tau,
                lambda: params.lambda(),
                converged: true,
                iterations: corr.iterations,
                contraction_estimate: corr.contraction_estimate,
                increments: corr.increments,
                eps_sup: corr.eps_sup,
                grad_sup: corr.grad_sup,
                residual_rel: corr.residual_rel,
                regularized_mass: corr.regularized_mass,
                failure: None,
            },
            Err(e) => CgoDiagnostics {
                omega_theta: theta,
                c: params.c,
                tau: params.tau,
                lambda: params.lambda(),
                converged: false,
                iterations: 0,
                contraction_estimate: f64::NAN,
                increments: Vec::new(),
                eps_sup: f64::NAN,
                grad_sup: f64::NAN,
                residual_rel: f64::NAN,
                regularized_mass: f64::NAN,
                failure: Some(e.to_string()),
            },
        }
    }

    /// Construct the full probe on the forward grid's boundary nodes,
    /// enforcing the η bound on the remainder.
    pub fn build_probe(
        &self,
        params: &ProbeParams,
        fv_grid: &Grid,
        eta: f64,
    ) -> Result<(ProbeSolution, CgoDiagnostics)> {
        if params.kind != ProbeKind::Cgo {
            return Err(Error::Cgo(format!(
                "cgo probe builder got kind {:?}",
                params.kind
            )));
        }
        let (corr, _kernel) = self.correction(params)?;
        if corr.eps_sup + corr.grad_sup > eta {
            return Err(Error::Cgo(format!(
                "remainder bound ‖ε‖∞ + ‖∇ε‖∞ = {:.3e} exceeds η = {eta}; increase c",
                corr.eps_sup + corr.grad_sup
            )));
        }
        let z = params.z();
        let log_scale = params.growth_rate() * fv_grid.domain.support(params.omega);
        let eps = Arc::new(corr.eps.clone());
        let gx = Arc::new(corr.grad[0].clone());
        let gy = Arc::new(corr.grad[1].clone());
        let pgrid = self.grid.clone();
        let gamma0 = self.gamma0.clone();

        let mut boundary_values = Vec::with_capacity(fv_grid.boundary.len());
        let mut conormal = Vec::with_capacity(fv_grid.boundary.len());
        for node in &fv_grid.boundary {
            let x = node.pos;
            let e = (z[0] * x.x + z[1] * x.y - log_scale).exp();
            let eps_v = bicubic(&eps, &pgrid, x);
            let eps_g = [bicubic(&gx, &pgrid, x), bicubic(&gy, &pgrid, x)];
            let jet = gamma0.eval_jet(x);
            let sqrt_g = jet.v.sqrt();
            let one_plus = Complex64::new(1.0, 0.0) + eps_v;
            boundary_values.push(e * one_plus / sqrt_g);
            let z_nu = z[0] * node.normal.x + z[1] * node.normal.y;
            let grad_nu = eps_g[0] * node.normal.x + eps_g[1] * node.normal.y;
            let dgamma_nu = jet.dx * node.normal.x + jet.dy * node.normal.y;
            conormal.push(
                e * (jet.v * z_nu * one_plus / sqrt_g + sqrt_g * grad_nu
                    - one_plus * dgamma_nu / (2.0 * sqrt_g)),
            );
        }

        let diag = CgoDiagnostics {
            omega_theta: params.omega.y.atan2(params.omega.x),
            c: params.c,
            tau: params.tau,
            lambda: params.lambda(),
            converged: true,
            iterations: corr.iterations,
            contraction_estimate: corr.contraction_estimate,
            increments: corr.increments.clone(),
            eps_sup: corr.eps_sup,
            grad_sup: corr.grad_sup,
            residual_rel: corr.residual_rel,
            regularized_mass: corr.regularized_mass,
            failure: None,
        };

        let (s_eps, s_grid, s_g0, s_z) = (eps.clone(), pgrid.clone(), gamma0.clone(), z);
        let sampler = Arc::new(move |x: Vec2| {
            let e = (s_z[0] * x.x + s_z[1] * x.y - log_scale).exp();
            let ev = bicubic(&s_eps, &s_grid, x);
            e * (Complex64::new(1.0, 0.0) + ev) / s_g0.eval(x).sqrt()
        });
        let grad_sampler = Arc::new(move |x: Vec2| {
            let e = (z[0] * x.x + z[1] * x.y - log_scale).exp();
            let ev = bicubic(&eps, &pgrid, x);
            let eg = [bicubic(&gx, &pgrid, x), bicubic(&gy, &pgrid, x)];
            let jet = gamma0.eval_jet(x);
            let sqrt_g = jet.v.sqrt();
            let one_plus = Complex64::new(1.0, 0.0) + ev;
            let gcorr = 1.0 / (2.0 * jet.v * sqrt_g);
            [
                e * (z[0] * one_plus / sqrt_g + eg[0] / sqrt_g - one_plus * jet.dx * gcorr),
                e * (z[1] * one_plus / sqrt_g + eg[1] / sqrt_g - one_plus * jet.dy * gcorr),
            ]
        });

        Ok((
            ProbeSolution {
                params: *params,
                z,
                log_scale,
                boundary_values,
                conormal,
                sampler,
                grad_sampler,
            },
            diag,
        ))
    }
}
