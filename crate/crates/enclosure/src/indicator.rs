//! The boundary indicator functional and its τ-series.
//!
//! For a probe v_τ and measured pair (f, u_f), the raw indicator is
//!
//!   I(τ) = ∫_∂Ω ( g v̄_τ − w γ₀ ∂v̄_τ/∂ν ) dS,
//!   w(x) = ∫_0^T e^{-τt} u_f(x,t) dt,  g(x) = ∫_0^T e^{-τt} f(x,t) dt,
//!
//! equivalently (up to sign) the time-domain double integral of
//! e^{-τt}(−v̄ f + u_f γ₀ ∂v̄/∂ν). Both routes are implemented and
//! cross-checked.
//!
//! The engine additionally pairs the data against a *simulated background*:
//! w₀ solves the discrete resolvent problem (τ̃ V + A₀) w₀ = B g with the
//! known γ₀ and the exact discrete Laplace symbol τ̃ = (1 − e^{-τΔt})/Δt of
//! the backward Euler stepper. Subtracting the background pairing realizes
//! the Neumann-to-Dirichlet difference the theory works with, and cancels
//! the discretization bias common to both solves; without it the inclusion
//! signal (relative size e^{-2cτ(h_Ω - h_D)}) drowns in coherent scheme
//! error long before the asymptotic regime. What remains is limited only by
//! solver round-off, which the per-point noise floor tracks; points below
//! the floor are flagged invalid and the schedule refines itself inside the
//! usable window.

use crate::conductivity::{sample_conductivity, ConductivityModel};
use crate::error::{Error, Result};
use crate::forward::{superpose, BoundaryDataset, ForwardSolver, ResolventSolver, TimeScheme};
use crate::geom::Vec2;
use crate::grid::Grid;
use crate::probes::{
    flux_from_probe, laplace_weight, make_complex_probe, make_real_probe, ProbeKind, ProbeParams,
    ProbeSolution, TimeProfile,
};
use crate::solver::SolveOptions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// ln of the absolute floor below which an indicator value counts as zero.
const LOG_FLOOR: f64 = -644.0; // ln(1e-280)

// ---------------------------------------------------------------------------
// Raw indicator (spec-shaped, no background pairing)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct IndicatorValue {
    /// Laplace-domain form ∫(g v̄ − w γ₀∂v̄/∂ν) dS, in scaled units.
    pub laplace: Complex64,
    /// Time-domain form ∫∫ e^{-τt}(−v̄ f + u γ₀∂v̄/∂ν), in scaled units.
    pub time_domain: Complex64,
    /// ln|I| with all scale factors reinstated.
    pub log_abs: f64,
    /// Relative disagreement between the two routes.
    pub route_mismatch: f64,
}

/// Trapezoid weights Δt·e^{-τ t_n} (half at the endpoints).
fn transform_weights(times: &[f64], tau: f64) -> Vec<f64> {
    let m = times.len() - 1;
    let dt = times[1] - times[0];
    (0..=m)
        .map(|n| {
            let w = if n == 0 || n == m { 0.5 } else { 1.0 };
            w * dt * (-tau * times[n]).exp()
        })
        .collect()
}

/// Right-endpoint weights Δt·e^{-τ t_n} for n ≥ 1; matches the discrete
/// Laplace transform under which the backward Euler recurrence becomes the
/// exact resolvent equation.
fn transform_weights_resolvent(times: &[f64], tau: f64) -> Vec<f64> {
    let m = times.len() - 1;
    let dt = times[1] - times[0];
    (0..=m)
        .map(|n| if n == 0 { 0.0 } else { dt * (-tau * times[n]).exp() })
        .collect()
}

fn transform(data: &[Complex64], n_nodes: usize, weights: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); n_nodes];
    for (n, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &data[n * n_nodes..(n + 1) * n_nodes];
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

/// Raw two-route indicator of a dataset against a probe. No background
/// subtraction; suitable for route cross-checks and controls.
pub fn indicator_value(
    data: &BoundaryDataset,
    probe: &ProbeSolution,
    profile: &TimeProfile,
    tau: f64,
    grid: &Grid,
) -> Result<IndicatorValue> {
    if (data.t_end() - profile.t_end).abs() > 1e-12 * profile.t_end.max(1.0) {
        return Err(Error::Indicator(format!(
            "dataset horizon T = {} does not match profile T = {}",
            data.t_end(),
            profile.t_end
        )));
    }
    if data.n_nodes != probe.boundary_values.len() || data.n_nodes != grid.boundary.len() {
        return Err(Error::Indicator(format!(
            "node count mismatch: data {}, probe {}, grid {}",
            data.n_nodes,
            probe.boundary_values.len(),
            grid.boundary.len()
        )));
    }
    let weights = transform_weights(&data.times, tau);
    let w_nodes = transform(&data.temp, data.n_nodes, &weights);
    let g_nodes = transform(&data.flux, data.n_nodes, &weights);

    // Laplace-domain route.
    let mut laplace = Complex64::default();
    for (s, node) in grid.boundary.iter().enumerate() {
        let v_bar = probe.boundary_values[s].conj();
        let dv_bar = probe.conormal[s].conj();
        laplace += node.weight * (g_nodes[s] * v_bar - w_nodes[s] * dv_bar);
    }

    // Time-domain route: reduce over the boundary per step, then in time.
    let mut time_domain = Complex64::default();
    let m = data.times.len() - 1;
    for n in 0..=m {
        let wt = weights[n];
        if wt == 0.0 {
            continue;
        }
        let mut shell = Complex64::default();
        for (s, node) in grid.boundary.iter().enumerate() {
            let v_bar = probe.boundary_values[s].conj();
            let dv_bar = probe.conormal[s].conj();
            shell += node.weight * (-v_bar * data.flux_at(n, s) + data.temp_at(n, s) * dv_bar);
        }
        time_domain += wt * shell;
    }

    let scale = data.meta.log_scale + probe.log_scale;
    let mag = laplace.norm();
    let log_abs = if mag > 0.0 {
        mag.ln() + scale
    } else {
        f64::NEG_INFINITY
    };
    // The routes are sign-opposite by construction.
    let mismatch = (time_domain + laplace).norm() / mag.max(1e-300);
    Ok(IndicatorValue {
        laplace,
        time_domain,
        log_abs,
        route_mismatch: mismatch,
    })
}

// ---------------------------------------------------------------------------
// Series engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndicatorOptions {
    /// Pair the data against a simulated background (known γ₀) and subtract.
    pub subtract_background: bool,
    /// Round-off depth of the background cancellation relative to the raw
    /// pairing; sets the floor at large τ.
    pub noise_epsilon: f64,
    /// Safety margin (in nats) on the final-time error term e^{-τT}, the
    /// floor at small τ.
    pub f_term_margin: f64,
    /// Largest resolvable probe oscillation in radians per cell: points
    /// with cτλ·h beyond this are dropped (the discrete scattered field
    /// leaks at a spurious near-boundary rate when the oscillation is
    /// unresolved).
    pub resolution_kappa: f64,
    /// Minimum |I| / noise-floor ratio for a point to be retained.
    pub snr_min: f64,
    /// Maximum schedule-refinement rounds when too few points survive.
    pub max_refinement_rounds: usize,
}

impl Default for IndicatorOptions {
    fn default() -> Self {
        IndicatorOptions {
            subtract_background: true,
            noise_epsilon: 1e-13,
            f_term_margin: 4.5,
            resolution_kappa: 0.35,
            snr_min: 3.0,
            max_refinement_rounds: 2,
        }
    }
}

/// One measured point of the τ-series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub tau: f64,
    /// Background-subtracted indicator (scaled units).
    pub value: Complex64,
    /// Raw data pairing (scaled units).
    pub raw: Complex64,
    /// Simulated-background pairing (scaled units).
    pub background: Complex64,
    /// ln|value| with scale factors reinstated.
    pub log_abs: f64,
    /// Scale S of the probe at this τ.
    pub log_scale: f64,
    /// ln of the estimated noise floor (same scale convention as log_abs).
    pub noise_floor_log: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub kind: ProbeKind,
    pub omega: Vec2,
    pub c: f64,
    pub points: Vec<SeriesPoint>,
    pub warnings: Vec<String>,
}

impl IndicatorSeries {
    pub fn valid_points(&self) -> impl Iterator<Item = &SeriesPoint> {
        self.points.iter().filter(|p| p.valid)
    }

    pub fn n_valid(&self) -> usize {
        self.points.iter().filter(|p| p.valid).count()
    }
}

/// Context owning the solvers for one model + time grid; reusable across
/// directions and τ values.
pub struct SeriesContext {
    pub model: ConductivityModel,
    pub grid: Grid,
    pub forward: ForwardSolver,
    pub resolvent: ResolventSolver,
    pub profile: TimeProfile,
    pub opts: IndicatorOptions,
    pub solve_opts: SolveOptions,
    pub cgo: Option<crate::cgo::CgoContext>,
    /// Contraction target η for CGO probes.
    pub cgo_eta: f64,
}

impl SeriesContext {
    pub fn new(
        model: &ConductivityModel,
        t_end: f64,
        dt: f64,
        profile: TimeProfile,
        opts: IndicatorOptions,
        solve_opts: SolveOptions,
    ) -> Result<Self> {
        profile.validate()?;
        if (profile.t_end - t_end).abs() > 1e-12 * t_end.max(1.0) {
            return Err(Error::Indicator(
                "profile horizon does not match the measurement horizon".into(),
            ));
        }
        let forward = ForwardSolver::new(model, t_end, dt, TimeScheme::BackwardEuler, solve_opts)?;
        let background = model.background_only();
        let grid = forward.grid.clone();
        let gamma0_field = sample_conductivity(&grid, &background)?;
        let resolvent = ResolventSolver::new(grid.clone(), &gamma0_field);
        Ok(SeriesContext {
            model: model.clone(),
            grid,
            forward,
            resolvent,
            profile,
            opts,
            solve_opts,
            cgo: None,
            cgo_eta: 0.5,
        })
    }

    /// Attach a CGO construction context (required for `ProbeKind::Cgo`).
    pub fn with_cgo(mut self, ctx: crate::cgo::CgoContext, eta: f64) -> Self {
        self.cgo = Some(ctx);
        self.cgo_eta = eta;
        self
    }

    fn build_probe(&mut self, params: &ProbeParams) -> Result<ProbeSolution> {
        match params.kind {
            ProbeKind::ComplexExp => {
                if !self.model.gamma0.is_one() {
                    return Err(Error::Probe(
                        "complex-exponential probes require γ₀ ≡ 1; use the cgo kind".into(),
                    ));
                }
                make_complex_probe(params, &self.grid)
            }
            ProbeKind::RealExp => {
                if !self.model.gamma0.is_one() {
                    return Err(Error::Probe(
                        "real-exponential probes require γ₀ ≡ 1; use the cgo kind".into(),
                    ));
                }
                make_real_probe(params.omega, params.tau, &self.grid)
            }
            ProbeKind::Cgo => {
                let ctx = self.cgo.as_ref().ok_or_else(|| {
                    Error::Cgo("no CGO context attached to the series engine".into())
                })?;
                let (probe, _diag) = ctx.build_probe(params, &self.grid, self.cgo_eta)?;
                Ok(probe)
            }
        }
    }

    /// Simulate the measurement for one probe: complex fluxes run as two
    /// real solves combined by superposition.
    pub fn simulate(&mut self, probe: &ProbeSolution) -> Result<BoundaryDataset> {
        let flux = flux_from_probe(probe, &self.profile)?;
        if flux.is_real() {
            self.forward.solve(&flux)
        } else {
            let (re, im) = flux.split();
            let d_re = self.forward.solve(&re)?;
            let d_im = self.forward.solve(&im)?;
            superpose(
                &[&d_re, &d_im],
                &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
            )
        }
    }

    /// Compute one series point from a dataset (already simulated).
    ///
    /// The transform weight uses the calibrated decay parameter
    /// τ_t = −ln(1 − τΔt)/Δt, whose discrete Laplace symbol under the
    /// backward Euler stepper is exactly the probe's τ: the probe is then
    /// on-shell for the measured resolvent and the indicator grows at the
    /// true rate. (With the naive weight e^{-τt} the data live at
    /// τ̃ = (1−e^{-τΔt})/Δt < τ and the off-shell mismatch inflates the
    /// signal by e^{τ²Δt(h_Ω−h_D)/(2c)} — superexponential junk.)
    pub fn point_from_data(
        &self,
        data: &BoundaryDataset,
        probe: &ProbeSolution,
        tau: f64,
    ) -> Result<SeriesPoint> {
        let nb = data.n_nodes;
        let dt0 = data.times[1] - data.times[0];
        if tau * dt0 >= 1.0 {
            return Err(Error::Indicator(format!(
                "τΔt = {:.3} ≥ 1: the calibrated transform parameter does not exist",
                tau * dt0
            )));
        }
        let tau_transform = -(1.0 - tau * dt0).ln() / dt0;
        let weights = transform_weights(&data.times, tau_transform);
        let w_nodes = transform(&data.temp, nb, &weights);
        let f_trap = transform(&data.flux, nb, &weights);

        // Raw pairing, Laplace-domain form.
        let mut raw = Complex64::default();
        for (s, node) in self.grid.boundary.iter().enumerate() {
            let v_bar = probe.boundary_values[s].conj();
            let dv_bar = probe.conormal[s].conj();
            raw += node.weight * (f_trap[s] * v_bar - w_nodes[s] * dv_bar);
        }

        let (value, background, noise_floor) = if self.opts.subtract_background {
            // Simulated background at the probe's own parameter (the
            // calibrated transform makes the discrete symbol equal τ
            // exactly); rhs under the right-endpoint rule. The trace
            // extrapolation must mirror the data exactly: recorded traces
            // are cell values plus (d/2)f/γ for n ≥ 1 but exactly zero at
            // t = 0, so the extrapolation transform drops the t = 0
            // half-weight.
            let tau_tilde = tau;
            let res_weights = transform_weights_resolvent(&data.times, tau_transform);
            let f_right = transform(&data.flux, nb, &res_weights);
            let mut trace_weights = weights.clone();
            trace_weights[0] = 0.0;
            let f_trace = transform(&data.flux, nb, &trace_weights);
            let w0 = self
                .resolvent
                .solve_traces(tau_tilde, &f_right, &f_trace, &self.solve_opts)?;
            let mut b0 = Complex64::default();
            for (s, node) in self.grid.boundary.iter().enumerate() {
                let v_bar = probe.boundary_values[s].conj();
                let dv_bar = probe.conormal[s].conj();
                b0 += node.weight * (f_trap[s] * v_bar - w0[s] * dv_bar);
            }
            let corrected = raw - b0;
            // Noise floor: the background pairing cancels down to (a) the
            // final-time term of the measurement, relative size ~e^{-τT},
            // and (b) the round-off depth of the raw pairing. Both are
            // deterministic and measurable with a unit-contrast control.
            let scale = raw.norm().max(b0.norm());
            let t_horizon = data.t_end();
            let f_term = (-tau_transform * t_horizon + self.opts.f_term_margin).exp();
            let floor = scale * self.opts.noise_epsilon.max(f_term);
            (corrected, b0, floor)
        } else {
            (raw, Complex64::default(), 0.0)
        };

        let scale = data.meta.log_scale + probe.log_scale;
        let mag = value.norm();
        let log_abs = if mag > 0.0 {
            mag.ln() + scale
        } else {
            f64::NEG_INFINITY
        };
        let noise_floor_log = if noise_floor > 0.0 {
            noise_floor.ln() + scale
        } else {
            f64::NEG_INFINITY
        };
        let valid = log_abs.is_finite()
            && log_abs > LOG_FLOOR
            && (noise_floor == 0.0 || mag >= self.opts.snr_min * noise_floor);
        Ok(SeriesPoint {
            tau,
            value,
            raw,
            background,
            log_abs,
            log_scale: probe.log_scale,
            noise_floor_log,
            valid,
        })
    }

    fn compute_point(
        &mut self,
        kind: ProbeKind,
        omega: Vec2,
        c: f64,
        tau: f64,
    ) -> Result<SeriesPoint> {
        let params = ProbeParams::new(kind, omega, c, tau)?;
        let probe = self.build_probe(&params)?;
        let data = self.simulate(&probe)?;
        self.point_from_data(&data, &probe, tau)
    }

    /// Build the τ-series for one direction: walk the schedule, drop points
    /// below the noise floor, and refine geometrically inside the usable
    /// window when fewer than 4 points survive.
    pub fn indicator_series(
        &mut self,
        kind: ProbeKind,
        omega: Vec2,
        c: f64,
        schedule: &[f64],
    ) -> Result<IndicatorSeries> {
        if schedule.is_empty() {
            return Err(Error::Indicator("empty τ-schedule".into()));
        }
        let mut taus: Vec<f64> = schedule.to_vec();
        taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if taus[0] <= 0.0 {
            return Err(Error::Indicator("τ-schedule must be positive".into()));
        }
        let dt = self.forward.time.dt;
        let tau_max = *taus.last().unwrap();
        if tau_max * dt > 0.5 + 1e-12 {
            return Err(Error::Indicator(format!(
                "τ·Δt = {:.3} exceeds 0.5 at the top of the schedule; refine Δt",
                tau_max * dt
            )));
        }
        // The calibrated transform parameter −ln(1−τΔt)/Δt must itself keep
        // τ_t·Δt ≤ 0.5, which caps τΔt at 1 − e^{-1/2}.
        let tau_dt_cap = 1.0 - (-0.5f64).exp();

        let mut warnings = Vec::new();
        let mut points: Vec<SeriesPoint> = Vec::new();
        let needs_c2tau = matches!(kind, ProbeKind::ComplexExp | ProbeKind::Cgo);
        let h_cell = self.grid.hx.max(self.grid.hy);
        // Largest τ whose probe oscillation cτλ stays resolved on the mesh:
        // τλ(τ) = κ/(c h) solves to τ = (1/c² + sqrt(1/c⁴ + 4K²))/2.
        let resolution_cap = if needs_c2tau {
            let k_res = self.opts.resolution_kappa / (c * h_cell);
            0.5 * (1.0 / (c * c) + (1.0 / (c * c * c * c) + 4.0 * k_res * k_res).sqrt())
        } else {
            f64::INFINITY
        };
        let kappa = self.opts.resolution_kappa;
        let admissible = move |tau: f64, warnings: &mut Vec<String>| -> bool {
            if tau * dt > tau_dt_cap {
                warnings.push(format!(
                    "τ = {tau:.3} skipped: τΔt = {:.3} beyond the calibrated-transform range",
                    tau * dt
                ));
                return false;
            }
            if needs_c2tau && c * c * tau < 1.0 {
                warnings.push(format!(
                    "τ = {tau:.3} skipped: c²τ = {:.3} < 1 makes the probe frequency complex",
                    c * c * tau
                ));
                return false;
            }
            if tau > resolution_cap * (1.0 + 1e-9) {
                warnings.push(format!(
                    "τ = {tau:.3} skipped: probe oscillation cτλ·h exceeds {kappa} rad/cell"
                ));
                return false;
            }
            true
        };
        for &tau in &taus {
            if !admissible(tau, &mut warnings) {
                continue;
            }
            let p = self.compute_point(kind, omega, c, tau)?;
            if !p.valid {
                warnings.push(format!(
                    "τ = {tau} below the noise floor (log|I| = {:.2}, floor {:.2})",
                    p.log_abs, p.noise_floor_log
                ));
            }
            points.push(p);
        }

        // Refinement: densify geometrically inside the admissible window
        // when the schedule leaves too few usable points.
        for round in 0..self.opts.max_refinement_rounds {
            let n_valid = points.iter().filter(|p| p.valid).count();
            if n_valid >= 5 {
                break;
            }
            let mut lo = taus[0];
            if needs_c2tau {
                lo = lo.max((1.0 + 1e-9) / (c * c));
            }
            let hi = resolution_cap.min(*taus.last().unwrap());
            if hi / lo < 1.2 {
                break;
            }
            let count = 8 + 4 * round;
            let targets: Vec<f64> = (0..count)
                .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
                .collect();
            for tau in targets {
                if points.iter().any(|p| (p.tau - tau).abs() < 1e-6 * tau) {
                    continue;
                }
                if !admissible(tau, &mut warnings) {
                    continue;
                }
                let p = self.compute_point(kind, omega, c, tau)?;
                if !p.valid {
                    warnings.push(format!("refined τ = {tau:.3} below the noise floor"));
                }
                points.push(p);
            }
        }
        points.sort_by(|a, b| a.tau.partial_cmp(&b.tau).unwrap());
        Ok(IndicatorSeries {
            kind,
            omega,
            c,
            points,
            warnings,
        })
    }
}

// ---------------------------------------------------------------------------
// Slope extraction
// ---------------------------------------------------------------------------

/// Per-direction support estimate from the fitted indicator growth rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub omega: Vec2,
    pub kind: ProbeKind,
    pub c: f64,
    /// Fitted growth constant C₂ (the coefficient of 2s in ln|I|).
    pub c2: f64,
    pub c2_stderr: f64,
    /// Estimated support value ĥ_D(ω): C₂/c for complex kinds, C₂ for real.
    pub support: f64,
    pub support_stderr: f64,
    /// Fitted log-correction coefficient β and offset α.
    pub beta: f64,
    pub alpha: f64,
    /// Root-mean-square fit residual in ln|I|.
    pub fit_rms: f64,
    pub n_points: usize,
    /// Per-point corrected values (τ, ln|I|/(2s)).
    pub corrected: Vec<(f64, f64)>,
    /// True when the direction shows no credible inclusion signal.
    pub no_inclusion: bool,
}

/// Least-squares fit of ln|I| against 2 C₂ s + β ln s + α, where s = τ for
/// complex probes and s = √τ for real probes.
pub fn extract_slope(series: &IndicatorSeries, h_omega: f64) -> Result<SupportEstimate> {
    let mut pts: Vec<(f64, f64)> = series
        .valid_points()
        .map(|p| {
            let s = match series.kind {
                ProbeKind::ComplexExp | ProbeKind::Cgo => p.tau,
                ProbeKind::RealExp => p.tau.sqrt(),
            };
            (s, p.log_abs)
        })
        .collect();
    // The genuine series approaches its asymptotic slope from below with a
    // saturating (concave) profile in log|I|/(2s); the under-resolved
    // scattered tail bends it convex-upward at the top of the window.
    // Truncate at the first clear convexity flip.
    if matches!(series.kind, ProbeKind::ComplexExp | ProbeKind::Cgo) && pts.len() >= 5 {
        let corrected: Vec<(f64, f64)> =
            pts.iter().map(|&(s, y)| (s, y / (2.0 * s))).collect();
        let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
        let mut cut = pts.len();
        for j in 2..corrected.len() - 1 {
            let prev = slope(corrected[j - 1], corrected[j]);
            let next = slope(corrected[j], corrected[j + 1]);
            if next > 0.0 && next > 1.25 * prev.max(0.0) + 2e-4 {
                cut = j + 1;
                break;
            }
        }
        if cut >= 4 {
            pts.truncate(cut);
        }
    }
    let n = pts.len();
    if n < 4 {
        return Err(Error::Indicator(format!(
            "slope fit needs at least 4 valid points, got {n}"
        )));
    }
    let mut distinct = pts.iter().map(|p| p.0).collect::<Vec<_>>();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * a.abs().max(1.0));
    if distinct.len() < 3 {
        return Err(Error::Indicator(
            "slope fit is rank deficient: fewer than 3 distinct s values".into(),
        ));
    }

    // Least squares over the basis (2s, ln s, 1[, s_min/s]), scaled for
    // conditioning; the 1/s column absorbs the smooth drift of the probe
    // family across the window and is used once enough points support it.
    let s_scale = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let s_min = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let ncols = 3;
    let cols_of = |s: f64| -> [f64; 4] {
        [2.0 * s / s_scale, s.ln(), 1.0, s_min / s]
    };
    let mut ata = [[0.0f64; 4]; 4];
    let mut atb = [0.0f64; 4];
    for &(s, y) in &pts {
        let cols = cols_of(s);
        for i in 0..ncols {
            for j in 0..ncols {
                ata[i][j] += cols[i] * cols[j];
            }
            atb[i] += cols[i] * y;
        }
    }
    let (sol, inv00) = solve_sym(&ata, &atb, ncols).ok_or_else(|| {
        Error::Indicator("slope fit is rank deficient (singular normal equations)".into())
    })?;
    let c2 = sol[0] / s_scale;
    let beta = sol[1];
    let alpha = sol[2];

    let mut rss = 0.0;
    for &(s, y) in &pts {
        let cols = cols_of(s);
        let mut fit = 0.0;
        for k in 0..ncols {
            fit += sol[k] * cols[k];
        }
        rss += (y - fit) * (y - fit);
    }
    let dof = (n as f64 - ncols as f64).max(1.0);
    let sigma2 = rss / dof;
    let c2_stderr = (sigma2 * inv00).sqrt() / s_scale;

    let (support, support_stderr) = match series.kind {
        ProbeKind::ComplexExp | ProbeKind::Cgo => (c2 / series.c, c2_stderr / series.c),
        ProbeKind::RealExp => (c2, c2_stderr),
    };
    let corrected = series
        .valid_points()
        .map(|p| {
            let s = match series.kind {
                ProbeKind::ComplexExp | ProbeKind::Cgo => p.tau,
                ProbeKind::RealExp => p.tau.sqrt(),
            };
            (p.tau, p.log_abs / (2.0 * s))
        })
        .collect();

    // No credible inclusion: non-positive growth, high variance, or an
    // estimate at/beyond the body's own support (D̄ ⊂ Ω strictly).
    let no_inclusion = c2 <= 0.0 || c2 < 3.0 * c2_stderr || support >= h_omega - 1e-9;

    Ok(SupportEstimate {
        omega: series.omega,
        kind: series.kind,
        c: series.c,
        c2,
        c2_stderr,
        support,
        support_stderr,
        beta,
        alpha,
        fit_rms: (rss / n as f64).sqrt(),
        n_points: n,
        corrected,
        no_inclusion,
    })
}

/// Solve the n x n symmetric system by Gaussian elimination with partial
/// pivoting; returns the solution and the (0,0) entry of the inverse (the
/// variance factor of the first coefficient).
fn solve_sym(a: &[[f64; 4]; 4], b: &[f64; 4], n: usize) -> Option<([f64; 4], f64)> {
    // Augment with b and e0 to get A^{-1}b and (A^{-1})_{00} together.
    let mut m = [[0.0f64; 6]; 4];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a[i][j];
        }
        m[i][n] = b[i];
        m[i][n + 1] = if i == 0 { 1.0 } else { 0.0 };
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        for j in 0..n + 2 {
            m[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                for j in 0..n + 2 {
                    m[i][j] -= f * m[col][j];
                }
            }
        }
    }
    let mut sol = [0.0f64; 4];
    for i in 0..n {
        sol[i] = m[i][n];
    }
    Some((sol, m[0][n + 1]))
}

// ---------------------------------------------------------------------------
// Energy-gap diagnostic (test-only use of ground truth)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EnergyGapReport {
    /// ln|I(τ)| − ln(|Ψ(τ)|·‖∇v_τ‖²_{L²(D)}) per valid τ; bounded when the
    /// two-sided energy estimate holds.
    Sandwich {
        diffs: Vec<(f64, f64)>,
        window_width: f64,
    },
    /// Without inclusions: the decay trend ln|I|/(2s) per τ.
    FTermDecay { slopes: Vec<(f64, f64)> },
}

/// Compare the indicator series against Ψ(τ)·‖∇v_τ‖²_{L²(D)} computed by
/// quadrature over the true inclusion geometry. Requires ground truth.
pub fn energy_gap_diagnostic(
    model: &ConductivityModel,
    series: &IndicatorSeries,
    profile: &TimeProfile,
) -> Result<EnergyGapReport> {
    if model.inclusions.is_empty() {
        let slopes = series
            .valid_points()
            .map(|p| {
                let s = match series.kind {
                    ProbeKind::ComplexExp | ProbeKind::Cgo => p.tau,
                    ProbeKind::RealExp => p.tau.sqrt(),
                };
                (p.tau, p.log_abs / (2.0 * s))
            })
            .collect();
        return Ok(EnergyGapReport::FTermDecay { slopes });
    }

    let mut diffs = Vec::new();
    for p in series.valid_points() {
        let params = ProbeParams::new(series.kind, series.omega, series.c, p.tau)?;
        let log_grad_sq = log_grad_norm_sq_over_inclusions(model, &params)?;
        let psi = laplace_weight(profile, p.tau)?;
        let diff = p.log_abs - psi.abs().ln() - log_grad_sq;
        diffs.push((p.tau, diff));
    }
    if diffs.is_empty() {
        return Err(Error::Indicator(
            "energy-gap diagnostic has no valid series points".into(),
        ));
    }
    let lo = diffs.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let hi = diffs.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyGapReport::Sandwich {
        diffs,
        window_width: hi - lo,
    })
}

/// ln ‖∇v‖²_{L²(D)} for an exponential probe over the union of inclusions,
/// by midpoint quadrature in log-safe form.
fn log_grad_norm_sq_over_inclusions(
    model: &ConductivityModel,
    params: &ProbeParams,
) -> Result<f64> {
    let z = params.z();
    let z_abs2 = z[0].norm_sqr() + z[1].norm_sqr();
    let rate = params.growth_rate();
    let omega = params.omega;
    let h_d: f64 = model
        .inclusions
        .iter()
        .map(|inc| inc.support(omega))
        .fold(f64::NEG_INFINITY, f64::max);
    // J = ∫_D e^{2·rate·(x·ω − h_D)} dx over the union, values ≤ 1.
    let n = 420;
    let mut j_sum = 0.0;
    for (which, inc) in model.inclusions.iter().enumerate() {
        let bb = inclusion_bbox(inc);
        let dx = (bb.1 - bb.0) / n as f64;
        let dy = (bb.3 - bb.2) / n as f64;
        for jy in 0..n {
            for jx in 0..n {
                let p = Vec2::new(
                    bb.0 + (jx as f64 + 0.5) * dx,
                    bb.2 + (jy as f64 + 0.5) * dy,
                );
                // First containing inclusion owns the point, so overlapping
                // inclusions are not double counted.
                let owner = model.inclusions.iter().position(|o| o.contains(p));
                if owner != Some(which) {
                    continue;
                }
                j_sum += dx * dy * (2.0 * rate * (p.dot(omega) - h_d)).exp();
            }
        }
    }
    if j_sum <= 0.0 {
        return Err(Error::Indicator("inclusion quadrature came out empty".into()));
    }
    Ok(z_abs2.ln() + 2.0 * rate * h_d + j_sum.ln())
}

fn inclusion_bbox(inc: &crate::conductivity::InclusionSpec) -> (f64, f64, f64, f64) {
    match &inc.shape {
        crate::conductivity::InclusionShape::Disk { cx, cy, radius } => {
            (cx - radius, cx + radius, cy - radius, cy + radius)
        }
        crate::conductivity::InclusionShape::Polygon { vertices } => {
            let mut bb = (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            );
            for &(x, y) in vertices {
                bb.0 = bb.0.min(x);
                bb.1 = bb.1.max(x);
                bb.2 = bb.2.min(y);
                bb.3 = bb.3.max(y);
            }
            bb
        }
    }
}
