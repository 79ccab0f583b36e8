//! Probe solutions of the background equation ∇·γ₀∇v = τv and the time
//! profiles used to turn them into prescribed heat fluxes.
//!
//! For constant background the probes are explicit exponentials:
//!
//! - complex kind: v = e^{x·z} with z = cτ(ω + i λ ω⊥), λ = √(1 − 1/(c²τ)),
//!   so z·z = τ exactly; c is the virtual slowness.
//! - real kind: v = e^{√τ x·ω}, non-oscillatory.
//!
//! Probe values grow like e^{cτ h_Ω(ω)} across the body, so every stored
//! trace is scaled by e^{-S} with S = the probe's growth bound; `log_scale`
//! records S and downstream consumers reinstate it inside logarithms.

use crate::error::{Error, Result};
use crate::forward::FluxPrescription;
use crate::geom::Vec2;
use crate::grid::Grid;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    ComplexExp,
    RealExp,
    Cgo,
}

/// Parameters of one probe: direction, virtual slowness and τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub kind: ProbeKind,
    pub omega: Vec2,
    /// Virtual slowness; unused by the real-exponential kind.
    pub c: f64,
    pub tau: f64,
}

impl ProbeParams {
    pub fn new(kind: ProbeKind, omega: Vec2, c: f64, tau: f64) -> Result<Self> {
        if (omega.norm() - 1.0).abs() > 1e-14 {
            return Err(Error::Probe(format!(
                "direction must be a unit vector, |omega| = {}",
                omega.norm()
            )));
        }
        if !(tau > 0.0) {
            return Err(Error::Probe(format!("tau must be positive, got {tau}")));
        }
        match kind {
            ProbeKind::ComplexExp | ProbeKind::Cgo => {
                if !(c > 0.0) {
                    return Err(Error::Probe(format!("virtual slowness must be positive, got {c}")));
                }
                if c * c * tau < 1.0 {
                    return Err(Error::Probe(format!(
                        "need c^2 tau >= 1 for a real lambda; got c = {c}, tau = {tau}"
                    )));
                }
            }
            ProbeKind::RealExp => {}
        }
        Ok(ProbeParams { kind, omega, c, tau })
    }

    /// ω⊥: ω rotated by +90 degrees.
    pub fn omega_perp(&self) -> Vec2 {
        self.omega.perp()
    }

    /// λ(c, τ) = √(1 − 1/(c²τ)).
    pub fn lambda(&self) -> f64 {
        (1.0 - 1.0 / (self.c * self.c * self.tau)).max(0.0).sqrt()
    }

    /// Complex frequency vector z for the exponential kinds.
    pub fn z(&self) -> [Complex64; 2] {
        match self.kind {
            ProbeKind::ComplexExp | ProbeKind::Cgo => {
                let l = self.lambda();
                let ct = self.c * self.tau;
                let w = self.omega;
                let wp = self.omega_perp();
                [
                    Complex64::new(ct * w.x, ct * l * wp.x),
                    Complex64::new(ct * w.y, ct * l * wp.y),
                ]
            }
            ProbeKind::RealExp => {
                let r = self.tau.sqrt();
                [
                    Complex64::new(r * self.omega.x, 0.0),
                    Complex64::new(r * self.omega.y, 0.0),
                ]
            }
        }
    }

    /// Exponential growth rate along ω: cτ for complex kinds, √τ real.
    pub fn growth_rate(&self) -> f64 {
        match self.kind {
            ProbeKind::ComplexExp | ProbeKind::Cgo => self.c * self.tau,
            ProbeKind::RealExp => self.tau.sqrt(),
        }
    }

    /// The fit abscissa s for slope extraction: τ (complex) or √τ (real).
    pub fn slope_abscissa(&self) -> f64 {
        match self.kind {
            ProbeKind::ComplexExp | ProbeKind::Cgo => self.tau,
            ProbeKind::RealExp => self.tau.sqrt(),
        }
    }
}

// ---------------------------------------------------------------------------
// Time profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// φ ≡ 1; satisfies the Laplace-weight lower bound with μ = 1, and keeps
    /// Ψ(τ) in closed form.
    Constant,
    /// φ(t) = e^{-rate t}.
    ExpDecay { rate: f64 },
    /// Tabulated values on a uniform grid over [0, T].
    Table { values: Vec<f64> },
}

/// Real-valued time profile φ on (0, T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub kind: ProfileKind,
    pub t_end: f64,
}

impl TimeProfile {
    pub fn constant(t_end: f64) -> Self {
        TimeProfile {
            kind: ProfileKind::Constant,
            t_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::Probe(format!("profile needs T > 0, got {}", self.t_end)));
        }
        if let ProfileKind::Table { values } = &self.kind {
            if values.len() < 2 {
                return Err(Error::Probe("profile table needs at least 2 samples".into()));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Probe("profile table has non-finite entries".into()));
            }
            if values.iter().all(|v| *v == 0.0) {
                return Err(Error::Probe(
                    "all-zero profile violates the Laplace-weight lower bound".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Constant => 1.0,
            ProfileKind::ExpDecay { rate } => (-rate * t).exp(),
            ProfileKind::Table { values } => {
                let m = values.len() - 1;
                let x = (t / self.t_end).clamp(0.0, 1.0) * m as f64;
                let i = (x.floor() as usize).min(m - 1);
                let frac = x - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Closed-form Laplace weight where available.
    fn laplace_closed_form(&self, tau: f64) -> Option<f64> {
        match &self.kind {
            ProfileKind::Constant => Some((1.0 - (-tau * self.t_end).exp()) / tau),
            ProfileKind::ExpDecay { rate } => {
                let s = tau + rate;
                Some((1.0 - (-s * self.t_end).exp()) / s)
            }
            ProfileKind::Table { .. } => None,
        }
    }
}

/// Ψ(τ) = ∫_0^T e^{-τt} φ(t) dt, in closed form when available and by
/// composite Simpson quadrature on a refined grid otherwise.
pub fn laplace_weight(profile: &TimeProfile, tau: f64) -> Result<f64> {
    profile.validate()?;
    if !(tau > 0.0) {
        return Err(Error::Probe(format!("tau must be positive, got {tau}")));
    }
    if let Some(v) = profile.laplace_closed_form(tau) {
        return Ok(v);
    }
    // Quadrature resolving both the table grid and the e^{-τt} scale.
    let base = match &profile.kind {
        ProfileKind::Table { values } => values.len() - 1,
        _ => 64,
    };
    let need = ((tau * profile.t_end / 0.125).ceil() as usize).max(base * 8);
    let n = need.next_multiple_of(2 * base);
    let h = profile.t_end / n as f64;
    let mut sum = 0.0;
    for k in 0..=n {
        let t = k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * (-tau * t).exp() * profile.value(t);
    }
    Ok(sum * h / 3.0)
}

// ---------------------------------------------------------------------------
// Probe solutions
// ---------------------------------------------------------------------------

/// A sampled probe: scaled boundary trace, scaled conormal derivative, and a
/// scaled interior sampler for diagnostics.
pub struct ProbeSolution {
    pub params: ProbeParams,
    pub z: [Complex64; 2],
    /// S with stored values v e^{-S}; S = growth_rate · h_Ω(ω).
    pub log_scale: f64,
    /// v(x_s) e^{-S} at boundary nodes.
    pub boundary_values: Vec<Complex64>,
    /// γ₀ ∂v/∂ν (x_s) e^{-S} at boundary nodes.
    pub conormal: Vec<Complex64>,
    /// Scaled interior evaluation v(x) e^{-S}.
    pub sampler: Arc<dyn Fn(Vec2) -> Complex64 + Send + Sync>,
    /// Scaled gradient evaluation ∇v(x) e^{-S}.
    pub grad_sampler: Arc<dyn Fn(Vec2) -> [Complex64; 2] + Send + Sync>,
}

impl std::fmt::Debug for ProbeSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProbeSolution")
            .field("params", &self.params)
            .field("z", &self.z)
            .field("log_scale", &self.log_scale)
            .field("nodes", &self.boundary_values.len())
            .finish()
    }
}

fn exp_xz(x: Vec2, z: &[Complex64; 2], log_scale: f64) -> Complex64 {
    let arg = z[0] * x.x + z[1] * x.y - log_scale;
    arg.exp()
}

fn exponential_solution(params: ProbeParams, grid: &Grid) -> ProbeSolution {
    let z = params.z();
    let log_scale = params.growth_rate() * grid.domain.support(params.omega);
    let boundary_values: Vec<Complex64> = grid
        .boundary
        .iter()
        .map(|b| exp_xz(b.pos, &z, log_scale))
        .collect();
    let conormal: Vec<Complex64> = grid
        .boundary
        .iter()
        .zip(&boundary_values)
        .map(|(b, v)| (z[0] * b.normal.x + z[1] * b.normal.y) * v)
        .collect();
    let zs = z;
    let sampler = Arc::new(move |x: Vec2| exp_xz(x, &zs, log_scale));
    let zg = z;
    let grad_sampler = Arc::new(move |x: Vec2| {
        let v = exp_xz(x, &zg, log_scale);
        [zg[0] * v, zg[1] * v]
    });
    ProbeSolution {
        params,
        z,
        log_scale,
        boundary_values,
        conormal,
        sampler,
        grad_sampler,
    }
}

/// Complex-exponential probe e^{x·z} for γ₀ ≡ 1 (the caller is responsible
/// for checking the background really is constant).
pub fn make_complex_probe(params: &ProbeParams, grid: &Grid) -> Result<ProbeSolution> {
    if params.kind != ProbeKind::ComplexExp {
        return Err(Error::Probe(format!(
            "make_complex_probe got kind {:?}",
            params.kind
        )));
    }
    if params.c * params.c * params.tau < 1.0 {
        return Err(Error::Probe("c^2 tau >= 1 violated".into()));
    }
    Ok(exponential_solution(*params, grid))
}

/// Real-exponential probe e^{√τ x·ω} for γ₀ ≡ 1.
pub fn make_real_probe(omega: Vec2, tau: f64, grid: &Grid) -> Result<ProbeSolution> {
    let params = ProbeParams::new(ProbeKind::RealExp, omega, 1.0, tau)?;
    Ok(exponential_solution(params, grid))
}

/// Flux prescription f(x, t) = γ₀ ∂v/∂ν (x) φ(t) from a probe.
pub fn flux_from_probe(probe: &ProbeSolution, profile: &TimeProfile) -> Result<FluxPrescription> {
    profile.validate()?;
    Ok(FluxPrescription {
        spatial: probe.conormal.clone(),
        profile: profile.clone(),
        log_scale: probe.log_scale,
    })
}
