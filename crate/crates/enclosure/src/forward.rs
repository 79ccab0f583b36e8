//! Forward problem: implicit time integration of ∂_t u = ∇·γ∇u with
//! prescribed Neumann flux and zero initial data, producing boundary
//! measurement datasets.
//!
//! Discretization is cell-centered finite volume with harmonic face
//! averaging (exactly conservative, robust to the discontinuous coefficient
//! at inclusion boundaries). Backward Euler is the default integrator;
//! Crank–Nicolson is available for convergence studies. Each step solves an
//! SPD system by DCT-preconditioned CG; the operator and preconditioner are
//! assembled once per (γ, Δt) and shared across all steps and fluxes.

use crate::conductivity::{sample_conductivity, ConductivityField, ConductivityModel};
use crate::error::{Error, Result};
use crate::grid::{build_grid, FaceDir, Grid};
use crate::probes::TimeProfile;
use crate::solver::{pcg_solve, CgWorkspace, DctPrecond, SolveOptions, StencilOp};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    BackwardEuler,
    CrankNicolson,
}

/// Uniform time grid 0 = t_0 < … < t_M = T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end > 0.0 && dt > 0.0) {
            return Err(Error::Model(format!("need T > 0 and dt > 0, got {t_end}, {dt}")));
        }
        let ratio = t_end / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Model(format!(
                "T/dt = {ratio} must be a positive integer"
            )));
        }
        Ok(TimeGrid {
            t_end,
            dt,
            steps: steps as usize,
        })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }
}

/// Which real channel of a complex flux a dataset was generated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Real,
    Imag,
    Complex,
}

/// Separable boundary flux f(x, t) = spatial(x) · φ(t), with values stored
/// scaled by e^{-log_scale}.
#[derive(Debug, Clone)]
pub struct FluxPrescription {
    pub spatial: Vec<Complex64>,
    pub profile: TimeProfile,
    pub log_scale: f64,
}

impl FluxPrescription {
    /// Split into the real and imaginary channels for the superposition
    /// pipeline. Returns (Re f, Im f).
    pub fn split(&self) -> (FluxPrescription, FluxPrescription) {
        let re = FluxPrescription {
            spatial: self.spatial.iter().map(|z| Complex64::new(z.re, 0.0)).collect(),
            profile: self.profile.clone(),
            log_scale: self.log_scale,
        };
        let im = FluxPrescription {
            spatial: self.spatial.iter().map(|z| Complex64::new(z.im, 0.0)).collect(),
            profile: self.profile.clone(),
            log_scale: self.log_scale,
        };
        (re, im)
    }

    pub fn is_real(&self) -> bool {
        self.spatial.iter().all(|z| z.im == 0.0)
    }
}

/// Grid fingerprint carried by datasets so that mismatched combinations are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub domain: crate::grid::DomainSpec,
    pub nx: usize,
    pub ny: usize,
    pub n_boundary: usize,
}

impl GridMeta {
    pub fn of(grid: &Grid) -> Self {
        GridMeta {
            domain: grid.domain,
            nx: grid.nx,
            ny: grid.ny,
            n_boundary: grid.boundary.len(),
        }
    }
}

/// Metadata recording how a dataset was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub grid: GridMeta,
    pub scheme: TimeScheme,
    pub log_scale: f64,
    pub channel: Channel,
    pub probe: Option<crate::probes::ProbeParams>,
    pub profile: TimeProfile,
}

/// Boundary measurements: prescribed flux and recorded temperature per
/// (boundary node, time step). Values are scaled by e^{-meta.log_scale}.
#[derive(Debug, Clone)]
pub struct BoundaryDataset {
    pub times: Vec<f64>,
    pub n_nodes: usize,
    /// Arc-length coordinate per node (for export).
    pub node_s: Vec<f64>,
    /// Time-major: flux[n * n_nodes + s] = f(x_s, t_n).
    pub flux: Vec<Complex64>,
    pub temp: Vec<Complex64>,
    pub meta: DatasetMeta,
}

impl BoundaryDataset {
    pub fn flux_at(&self, n: usize, s: usize) -> Complex64 {
        self.flux[n * self.n_nodes + s]
    }

    pub fn temp_at(&self, n: usize, s: usize) -> Complex64 {
        self.temp[n * self.n_nodes + s]
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn compatible_with(&self, other: &BoundaryDataset) -> bool {
        self.meta.grid == other.meta.grid
            && self.times.len() == other.times.len()
            && self.n_nodes == other.n_nodes
            && (self.t_end() - other.t_end()).abs() < 1e-12
    }
}

/// Per-run solver diagnostics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ForwardStats {
    pub total_cg_iterations: usize,
    pub max_cg_iterations: usize,
    pub worst_rel_residual: f64,
    pub steps: usize,
}

/// Reusable forward solver bound to one (model, Δt, scheme).
pub struct ForwardSolver {
    pub grid: Grid,
    pub gamma: ConductivityField,
    pub scheme: TimeScheme,
    pub time: TimeGrid,
    pub opts: SolveOptions,
    op: StencilOp,
    a_half: Option<StencilOp>,
    precond: DctPrecond,
    ws: CgWorkspace,
    pub stats: ForwardStats,
    /// γ at the boundary cell of each node (trace extrapolation).
    gamma_boundary: Vec<f64>,
    /// Half cell width normal to each boundary face.
    half_depth: Vec<f64>,
}

impl ForwardSolver {
    pub fn new(
        model: &ConductivityModel,
        t_end: f64,
        dt: f64,
        scheme: TimeScheme,
        opts: SolveOptions,
    ) -> Result<Self> {
        let grid = build_grid(&model.domain)?;
        let gamma = sample_conductivity(&grid, model)?;
        Self::with_grid(grid, gamma, t_end, dt, scheme, opts)
    }

    pub fn with_grid(
        grid: Grid,
        gamma: ConductivityField,
        t_end: f64,
        dt: f64,
        scheme: TimeScheme,
        opts: SolveOptions,
    ) -> Result<Self> {
        let time = TimeGrid::new(t_end, dt)?;
        let sigma = 1.0 / time.dt;
        let (op, a_half) = match scheme {
            TimeScheme::BackwardEuler => (
                assemble_scaled(&grid, &gamma.values, sigma, 1.0),
                None,
            ),
            TimeScheme::CrankNicolson => (
                assemble_scaled(&grid, &gamma.values, sigma, 0.5),
                Some(assemble_scaled(&grid, &gamma.values, 0.0, 0.5)),
            ),
        };
        let gamma_bar = mean_active(&gamma.values, &grid.active);
        let precond = DctPrecond::new(grid.nx, grid.ny, grid.hx, grid.hy, sigma, gamma_bar);
        let n = grid.n_cells();
        let gamma_boundary = grid
            .boundary
            .iter()
            .map(|b| gamma.values[b.cell])
            .collect();
        let half_depth = grid
            .boundary
            .iter()
            .map(|b| match b.face {
                FaceDir::XNeg | FaceDir::XPos => 0.5 * grid.hx,
                FaceDir::YNeg | FaceDir::YPos => 0.5 * grid.hy,
            })
            .collect();
        Ok(ForwardSolver {
            grid,
            gamma,
            scheme,
            time,
            opts,
            op,
            a_half,
            precond,
            ws: CgWorkspace::new(n),
            stats: ForwardStats::default(),
            gamma_boundary,
            half_depth,
        })
    }

    /// Run one real-valued simulation; returns the boundary temperature
    /// trace per step (extrapolated to the boundary with the known flux) and
    /// optionally the final interior state.
    fn run_real(
        &mut self,
        spatial: &[f64],
        profile: &TimeProfile,
        mut on_state: Option<&mut dyn FnMut(usize, &[f64])>,
    ) -> Result<Vec<f64>> {
        let n = self.grid.n_cells();
        let nb = self.grid.boundary.len();
        let steps = self.time.steps;
        if spatial.len() != nb {
            return Err(Error::Model(format!(
                "flux has {} nodes, grid has {nb}",
                spatial.len()
            )));
        }
        let vol = self.grid.cell_area();
        let inv_dt = 1.0 / self.time.dt;

        let mut u_prev = vec![0.0; n];
        let mut u_cur = vec![0.0; n];
        let mut u_next = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut trace = vec![0.0; (steps + 1) * nb];

        // Precompute φ at all step times.
        let phi: Vec<f64> = (0..=steps)
            .map(|k| profile.value(self.time.time(k)))
            .collect();

        if let Some(cb) = on_state.as_deref_mut() {
            cb(0, &u_cur);
        }

        for step in 1..=steps {
            // Right-hand side.
            match self.scheme {
                TimeScheme::BackwardEuler => {
                    for i in 0..n {
                        b[i] = vol * inv_dt * u_cur[i];
                    }
                    let w = phi[step];
                    for (s, node) in self.grid.boundary.iter().enumerate() {
                        b[node.cell] += spatial[s] * w * node.weight;
                    }
                }
                TimeScheme::CrankNicolson => {
                    let a = self.a_half.as_ref().unwrap();
                    a.apply(&u_cur, &mut b);
                    for i in 0..n {
                        b[i] = vol * inv_dt * u_cur[i] - b[i];
                    }
                    let w = 0.5 * (phi[step] + phi[step - 1]);
                    for (s, node) in self.grid.boundary.iter().enumerate() {
                        b[node.cell] += spatial[s] * w * node.weight;
                    }
                }
            }
            // Warm start by linear extrapolation.
            for i in 0..n {
                u_next[i] = 2.0 * u_cur[i] - u_prev[i];
            }
            let stats = pcg_solve(&self.op, &mut self.precond, &b, &mut u_next, &mut self.ws, &self.opts);
            self.stats.total_cg_iterations += stats.iterations;
            self.stats.max_cg_iterations = self.stats.max_cg_iterations.max(stats.iterations);
            self.stats.worst_rel_residual = self.stats.worst_rel_residual.max(stats.rel_residual);
            self.stats.steps += 1;
            if !stats.converged {
                return Err(Error::Solver(format!(
                    "CG failed at step {step}: {} iterations, relative residual {:.3e}",
                    stats.iterations, stats.rel_residual
                )));
            }
            let mut check = 0.0;
            for (s, node) in self.grid.boundary.iter().enumerate() {
                let f_here = spatial[s] * phi[step];
                let v = u_next[node.cell]
                    + self.half_depth[s] * f_here / self.gamma_boundary[s];
                trace[step * nb + s] = v;
                check += v;
            }
            if !check.is_finite() {
                return Err(Error::Solver(format!(
                    "non-finite boundary values at step {step}"
                )));
            }
            if let Some(cb) = on_state.as_deref_mut() {
                cb(step, &u_next);
            }
            std::mem::swap(&mut u_prev, &mut u_cur);
            std::mem::swap(&mut u_cur, &mut u_next);
        }
        Ok(trace)
    }

    /// Run one real pass exposing the interior state per step (integration
    /// tests and diagnostics).
    #[doc(hidden)]
    pub fn run_real_for_tests(
        &mut self,
        spatial: &[f64],
        profile: &TimeProfile,
        on_state: &mut dyn FnMut(usize, &[f64]),
    ) -> Result<Vec<f64>> {
        self.run_real(spatial, profile, Some(on_state))
    }

    /// Simulate the flux and return the boundary dataset. Complex fluxes
    /// run as two real passes combined per Eq-by-linearity; this is the
    /// "direct complex solve" oracle path.
    pub fn solve(&mut self, flux: &FluxPrescription) -> Result<BoundaryDataset> {
        let nb = self.grid.boundary.len();
        let steps = self.time.steps;
        let re_spatial: Vec<f64> = flux.spatial.iter().map(|z| z.re).collect();
        let re_trace = self.run_real(&re_spatial, &flux.profile, None)?;
        let im_trace = if flux.is_real() {
            None
        } else {
            let im_spatial: Vec<f64> = flux.spatial.iter().map(|z| z.im).collect();
            Some(self.run_real(&im_spatial, &flux.profile, None)?)
        };
        let channel = if im_trace.is_some() {
            Channel::Complex
        } else {
            Channel::Real
        };

        let times = self.time.times();
        let mut temp = vec![Complex64::default(); (steps + 1) * nb];
        let mut fdat = vec![Complex64::default(); (steps + 1) * nb];
        for n in 0..=steps {
            let phi = flux.profile.value(times[n]);
            for s in 0..nb {
                let k = n * nb + s;
                temp[k] = Complex64::new(
                    re_trace[k],
                    im_trace.as_ref().map_or(0.0, |t| t[k]),
                );
                fdat[k] = flux.spatial[s] * phi;
            }
        }
        Ok(BoundaryDataset {
            times,
            n_nodes: nb,
            node_s: self.grid.boundary.iter().map(|b| b.s).collect(),
            flux: fdat,
            temp,
            meta: DatasetMeta {
                grid: GridMeta::of(&self.grid),
                scheme: self.scheme,
                log_scale: flux.log_scale,
                channel,
                probe: None,
                profile: flux.profile.clone(),
            },
        })
    }

    /// Simulate and additionally report conservation diagnostics:
    /// the maximum relative defect of the discrete energy identity
    /// d/dt(½‖u‖²) + ‖u‖²_A + ½‖Δu‖²/Δt = ∫fu, and the final mass balance
    /// |∫u(T) - ∫∫f| relative to the flux integral. Backward Euler only.
    pub fn solve_with_diagnostics(
        &mut self,
        flux: &FluxPrescription,
    ) -> Result<(BoundaryDataset, EnergyDiagnostics)> {
        if self.scheme != TimeScheme::BackwardEuler {
            return Err(Error::Model(
                "energy diagnostics are defined for the backward Euler scheme".into(),
            ));
        }
        if !flux.is_real() {
            return Err(Error::Model("energy diagnostics need a real flux".into()));
        }
        let spatial: Vec<f64> = flux.spatial.iter().map(|z| z.re).collect();
        let vol = self.grid.cell_area();
        let dt = self.time.dt;
        let n = self.grid.n_cells();
        let a_op = assemble_scaled(&self.grid, &self.gamma.values.clone(), 0.0, 1.0);
        let mut prev = vec![0.0; n];
        let mut au = vec![0.0; n];
        let mut worst = 0.0f64;
        let mut flux_time_integral = 0.0;
        let mut final_heat = 0.0;
        let profile = flux.profile.clone();
        let grid_boundary: Vec<(usize, f64)> = self
            .grid
            .boundary
            .iter()
            .map(|b| (b.cell, b.weight))
            .collect();
        let times: Vec<f64> = self.time.times();
        {
            let mut cb = |step: usize, u: &[f64]| {
                if step == 0 {
                    prev.copy_from_slice(u);
                    return;
                }
                let phi = profile.value(times[step]);
                a_op.apply(u, &mut au);
                let mut de = 0.0;
                let mut dissip = 0.0;
                let mut jump = 0.0;
                for i in 0..n {
                    de += u[i] * u[i] - prev[i] * prev[i];
                    let d = u[i] - prev[i];
                    jump += d * d;
                    dissip += u[i] * au[i];
                }
                de *= 0.5 * vol / dt;
                jump *= 0.5 * vol / dt;
                let mut power = 0.0;
                for &(cell, w) in &grid_boundary {
                    power += u[cell] * w;
                }
                // Boundary power uses cell values: the scheme-exact pairing.
                let mut pw = 0.0;
                for (s, &(cell, w)) in grid_boundary.iter().enumerate() {
                    pw += spatial[s] * phi * w * u[cell];
                }
                let _ = power;
                let defect = (de + jump + dissip - pw).abs();
                let scale = de.abs().max(dissip.abs()).max(pw.abs()).max(1e-300);
                worst = worst.max(defect / scale);
                flux_time_integral += dt * spatial.iter().zip(&grid_boundary).map(|(f, &(_, w))| f * phi * w).sum::<f64>();
                if step == times.len() - 1 {
                    final_heat = u.iter().map(|v| v * vol).sum();
                }
                prev.copy_from_slice(u);
            };
            self.run_real(&spatial, &flux.profile, Some(&mut cb))?;
        }
        let dataset = self.solve(flux)?;
        let mass_defect = (final_heat - flux_time_integral).abs()
            / flux_time_integral.abs().max(1e-300);
        Ok((
            dataset,
            EnergyDiagnostics {
                worst_energy_defect: worst,
                mass_balance_defect: mass_defect,
            },
        ))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyDiagnostics {
    pub worst_energy_defect: f64,
    pub mass_balance_defect: f64,
}

fn mean_active(values: &[f64], active: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (v, &a) in values.iter().zip(active) {
        if a {
            sum += v;
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

fn assemble_scaled(grid: &Grid, gamma: &[f64], sigma: f64, a_scale: f64) -> StencilOp {
    let mut op = StencilOp::assemble(
        grid.nx,
        grid.ny,
        grid.hx,
        grid.hy,
        sigma,
        gamma,
        &grid.active,
    );
    if a_scale != 1.0 {
        let vol = grid.cell_area();
        for v in op.kx.iter_mut() {
            *v *= a_scale;
        }
        for v in op.ky.iter_mut() {
            *v *= a_scale;
        }
        // Rebuild diagonal: σ·vol + scaled face sums.
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let c = j * grid.nx + i;
                if !grid.active[c] {
                    op.diag[c] = 1.0;
                    continue;
                }
                let mut d = sigma * vol;
                if i > 0 {
                    d += op.kx[j * (grid.nx - 1) + i - 1];
                }
                if i < grid.nx - 1 {
                    d += op.kx[j * (grid.nx - 1) + i];
                }
                if j > 0 {
                    d += op.ky[(j - 1) * grid.nx + i];
                }
                if j < grid.ny - 1 {
                    d += op.ky[j * grid.nx + i];
                }
                op.diag[c] = d;
            }
        }
    }
    op
}

/// Spec-shaped one-shot wrapper around [`ForwardSolver`].
pub fn solve_forward(
    model: &ConductivityModel,
    flux: &FluxPrescription,
    t_end: f64,
    dt: f64,
    scheme: TimeScheme,
    opts: SolveOptions,
) -> Result<BoundaryDataset> {
    let mut solver = ForwardSolver::new(model, t_end, dt, scheme, opts)?;
    solver.solve(flux)
}

/// Linear combination of datasets (both flux and temperature channels).
/// Used to assemble complex-flux measurements from real-flux simulations.
pub fn superpose(datasets: &[&BoundaryDataset], coeffs: &[Complex64]) -> Result<BoundaryDataset> {
    if datasets.is_empty() || datasets.len() != coeffs.len() {
        return Err(Error::Dataset(format!(
            "superpose needs matching dataset/coefficient counts, got {} and {}",
            datasets.len(),
            coeffs.len()
        )));
    }
    let first = datasets[0];
    for d in &datasets[1..] {
        if !first.compatible_with(d) {
            return Err(Error::Dataset(
                "superpose: datasets have mismatched grids or time grids".into(),
            ));
        }
        if (d.meta.log_scale - first.meta.log_scale).abs() > 1e-12 {
            return Err(Error::Dataset(
                "superpose: datasets carry different scale factors".into(),
            ));
        }
    }
    let mut out = BoundaryDataset {
        times: first.times.clone(),
        n_nodes: first.n_nodes,
        node_s: first.node_s.clone(),
        flux: vec![Complex64::default(); first.flux.len()],
        temp: vec![Complex64::default(); first.temp.len()],
        meta: DatasetMeta {
            channel: Channel::Complex,
            ..first.meta.clone()
        },
    };
    for (d, &c) in datasets.iter().zip(coeffs) {
        for (o, v) in out.flux.iter_mut().zip(&d.flux) {
            *o += c * v;
        }
        for (o, v) in out.temp.iter_mut().zip(&d.temp) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Stationary resolvent solver: (τ̃ V + A) w = boundary-injected rhs, used
/// by the indicator's simulated-background pairing. The operator matches the
/// discrete Laplace transform of the backward Euler stepper exactly.
pub struct ResolventSolver {
    pub grid: Grid,
    gamma: Vec<f64>,
    gamma_boundary: Vec<f64>,
    half_depth: Vec<f64>,
}

impl ResolventSolver {
    pub fn new(grid: Grid, gamma: &ConductivityField) -> Self {
        let gamma_boundary = grid
            .boundary
            .iter()
            .map(|b| gamma.values[b.cell])
            .collect();
        let half_depth = grid
            .boundary
            .iter()
            .map(|b| match b.face {
                FaceDir::XNeg | FaceDir::XPos => 0.5 * grid.hx,
                FaceDir::YNeg | FaceDir::YPos => 0.5 * grid.hy,
            })
            .collect();
        ResolventSolver {
            gamma: gamma.values.clone(),
            gamma_boundary,
            half_depth,
            grid,
        }
    }

    /// Solve (τ̃ V + A) w = Σ_s rhs_s w_s δ_{cell(s)} and return the node
    /// traces extrapolated with `trace_flux` (the trapezoid-transformed flux
    /// convention used for the measured data).
    pub fn solve_traces(
        &self,
        tau_tilde: f64,
        rhs_nodes: &[Complex64],
        trace_flux: &[Complex64],
        opts: &SolveOptions,
    ) -> Result<Vec<Complex64>> {
        let n = self.grid.n_cells();
        let op = StencilOp::assemble(
            self.grid.nx,
            self.grid.ny,
            self.grid.hx,
            self.grid.hy,
            tau_tilde,
            &self.gamma,
            &self.grid.active,
        );
        let gamma_bar = mean_active(&self.gamma, &self.grid.active);
        let mut precond = DctPrecond::new(
            self.grid.nx,
            self.grid.ny,
            self.grid.hx,
            self.grid.hy,
            tau_tilde,
            gamma_bar,
        );
        let mut ws = CgWorkspace::new(n);
        let mut solve_part = |part: &dyn Fn(Complex64) -> f64| -> Result<Vec<f64>> {
            let mut b = vec![0.0; n];
            for (s, node) in self.grid.boundary.iter().enumerate() {
                b[node.cell] += part(rhs_nodes[s]) * node.weight;
            }
            let mut x = vec![0.0; n];
            let stats = pcg_solve(&op, &mut precond, &b, &mut x, &mut ws, opts);
            if !stats.converged {
                return Err(Error::Solver(format!(
                    "resolvent CG failed: {} iterations, rel residual {:.3e}",
                    stats.iterations, stats.rel_residual
                )));
            }
            Ok(x)
        };
        let xr = solve_part(&|z: Complex64| z.re)?;
        let has_im = rhs_nodes.iter().any(|z| z.im != 0.0);
        let xi = if has_im {
            Some(solve_part(&|z: Complex64| z.im)?)
        } else {
            None
        };
        Ok(self
            .grid
            .boundary
            .iter()
            .enumerate()
            .map(|(s, node)| {
                let cell_val = Complex64::new(
                    xr[node.cell],
                    xi.as_ref().map_or(0.0, |x| x[node.cell]),
                );
                cell_val + trace_flux[s] * (self.half_depth[s] / self.gamma_boundary[s])
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::{ConductivityModel, Gamma0, InclusionShape, InclusionSpec};
    use crate::grid::DomainSpec;
    use crate::probes::TimeProfile;

    fn unit_square_model(res: f64) -> ConductivityModel {
        ConductivityModel {
            domain: DomainSpec::rect(-1.0, 1.0, -1.0, 1.0, res),
            gamma0: Gamma0::One,
            inclusions: vec![],
        }
    }

    fn constant_flux(grid: &Grid, value: f64) -> FluxPrescription {
        FluxPrescription {
            spatial: vec![Complex64::new(value, 0.0); grid.boundary.len()],
            profile: TimeProfile::constant(1.0),
            log_scale: 0.0,
        }
    }

    #[test]
    fn zero_flux_gives_zero_temperature() {
        let model = unit_square_model(16.0);
        let mut solver = ForwardSolver::new(
            &model,
            0.25,
            0.25 / 8.0,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let flux = constant_flux(&solver.grid, 0.0);
        let data = solver.solve(&flux).unwrap();
        assert!(data.temp.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn initial_temperature_is_zero() {
        let model = unit_square_model(16.0);
        let mut solver = ForwardSolver::new(
            &model,
            0.25,
            1.0 / 64.0,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let flux = constant_flux(&solver.grid, 1.0);
        let data = solver.solve(&flux).unwrap();
        for s in 0..data.n_nodes {
            assert_eq!(data.temp_at(0, s), Complex64::default());
        }
    }

    #[test]
    fn constant_influx_mean_growth_matches_divergence_theorem() {
        // With f ≡ 1 the mean temperature grows as (|∂Ω|/|Ω|) t.
        let model = unit_square_model(16.0);
        let t_end = 0.5;
        let dt = t_end / 256.0;
        let mut solver = ForwardSolver::new(
            &model,
            t_end,
            dt,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let flux = constant_flux(&solver.grid, 1.0);
        let vol = solver.grid.cell_area();
        let area = model.domain.area();
        let mut mean_at_end = 0.0;
        {
            let steps = solver.time.steps;
            let spatial = vec![1.0; solver.grid.boundary.len()];
            let mut cb = |step: usize, u: &[f64]| {
                if step == steps {
                    mean_at_end = u.iter().map(|v| v * vol).sum::<f64>() / area;
                }
            };
            solver
                .run_real(&spatial, &flux.profile, Some(&mut cb))
                .unwrap();
        }
        let expected = model.domain.perimeter() / area * t_end;
        assert!(
            (mean_at_end - expected).abs() / expected < 1e-6,
            "mean {mean_at_end} vs {expected}"
        );
    }

    #[test]
    fn energy_identity_and_mass_balance() {
        let model = ConductivityModel {
            domain: DomainSpec::rect(-1.0, 1.0, -1.0, 1.0, 16.0),
            gamma0: Gamma0::One,
            inclusions: vec![InclusionSpec {
                shape: InclusionShape::Disk {
                    cx: 0.3,
                    cy: -0.2,
                    radius: 0.25,
                },
                contrast: 3.0,
            }],
        };
        let mut solver = ForwardSolver::new(
            &model,
            0.25,
            0.25 / 64.0,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let mut flux = constant_flux(&solver.grid, 0.0);
        for (s, node) in solver.grid.boundary.iter().enumerate() {
            flux.spatial[s] = Complex64::new((2.3 * node.s).sin() + 0.4, 0.0);
        }
        let (_, diag) = solver.solve_with_diagnostics(&flux).unwrap();
        assert!(
            diag.worst_energy_defect < 1e-8,
            "energy defect {}",
            diag.worst_energy_defect
        );
        assert!(
            diag.mass_balance_defect < 1e-6,
            "mass defect {}",
            diag.mass_balance_defect
        );
    }

    #[test]
    fn solver_is_linear() {
        let model = unit_square_model(16.0);
        let mut solver = ForwardSolver::new(
            &model,
            0.125,
            0.125 / 32.0,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let nb = solver.grid.boundary.len();
        let mut fa = constant_flux(&solver.grid, 0.0);
        let mut fb = constant_flux(&solver.grid, 0.0);
        for s in 0..nb {
            let t = s as f64 / nb as f64;
            fa.spatial[s] = Complex64::new((6.0 * t).cos(), 0.0);
            fb.spatial[s] = Complex64::new((3.0 * t).sin() - 0.2, 0.0);
        }
        let (alpha, beta) = (0.7, -1.3);
        let mut combined = constant_flux(&solver.grid, 0.0);
        for s in 0..nb {
            combined.spatial[s] = alpha * fa.spatial[s] + beta * fb.spatial[s];
        }
        let da = solver.solve(&fa).unwrap();
        let db = solver.solve(&fb).unwrap();
        let dc = solver.solve(&combined).unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for k in 0..dc.temp.len() {
            let want = alpha * da.temp[k] + beta * db.temp[k];
            worst = worst.max((dc.temp[k] - want).norm());
            scale = scale.max(want.norm());
        }
        assert!(worst / scale < 1e-8, "linearity defect {}", worst / scale);
    }

    #[test]
    fn positivity_under_backward_euler() {
        let model = unit_square_model(16.0);
        let mut solver = ForwardSolver::new(
            &model,
            0.25,
            0.25 / 32.0,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let flux = constant_flux(&solver.grid, 1.0);
        let mut min_seen = f64::INFINITY;
        {
            let spatial = vec![1.0; solver.grid.boundary.len()];
            let mut cb = |_step: usize, u: &[f64]| {
                for &v in u {
                    min_seen = min_seen.min(v);
                }
            };
            solver
                .run_real(&spatial, &flux.profile, Some(&mut cb))
                .unwrap();
        }
        assert!(min_seen >= -1e-9, "minimum {min_seen}");
    }

    #[test]
    fn superpose_identity_and_cancellation() {
        let model = unit_square_model(16.0);
        let mut solver = ForwardSolver::new(
            &model,
            0.125,
            0.125 / 16.0,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let flux = constant_flux(&solver.grid, 1.0);
        let d = solver.solve(&flux).unwrap();
        let ident = superpose(&[&d], &[Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(ident.temp, d.temp);
        let zero = superpose(
            &[&d, &d],
            &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        )
        .unwrap();
        assert!(zero.temp.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn superpose_rejects_mismatched_grids() {
        let m1 = unit_square_model(16.0);
        let m2 = unit_square_model(24.0);
        let mut s1 =
            ForwardSolver::new(&m1, 0.125, 0.125 / 16.0, TimeScheme::BackwardEuler, SolveOptions::default())
                .unwrap();
        let mut s2 =
            ForwardSolver::new(&m2, 0.125, 0.125 / 16.0, TimeScheme::BackwardEuler, SolveOptions::default())
                .unwrap();
        let d1 = s1.solve(&constant_flux(&s1.grid, 1.0)).unwrap();
        let d2 = s2.solve(&constant_flux(&s2.grid, 1.0)).unwrap();
        assert!(superpose(&[&d1, &d2], &[Complex64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn superposition_matches_direct_complex_solve() {
        let model = unit_square_model(16.0);
        let mut solver = ForwardSolver::new(
            &model,
            0.125,
            0.125 / 32.0,
            TimeScheme::BackwardEuler,
            SolveOptions::default(),
        )
        .unwrap();
        let nb = solver.grid.boundary.len();
        let mut flux = constant_flux(&solver.grid, 0.0);
        for s in 0..nb {
            let t = s as f64 / nb as f64;
            flux.spatial[s] = Complex64::new((4.0 * t).cos(), (4.0 * t).sin() * 0.5);
        }
        let direct = solver.solve(&flux).unwrap();
        let (re, im) = flux.split();
        let dre = solver.solve(&re).unwrap();
        let dim = solver.solve(&im).unwrap();
        let combined = superpose(
            &[&dre, &dim],
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
        )
        .unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for k in 0..direct.temp.len() {
            worst = worst.max((direct.temp[k] - combined.temp[k]).norm());
            scale = scale.max(direct.temp[k].norm());
        }
        assert!(worst <= 1e-10 * scale.max(1.0), "defect {worst}");
    }

    #[test]
    fn crank_nicolson_converges_faster_than_first_order() {
        // Richardson-style check against a fine reference (4x in space+time):
        // halving h and dt must reduce the boundary-trace error with observed
        // order at least 1.5 under the Crank-Nicolson option.
        let t_end = 0.25;
        let trace_err = |res: f64, steps: usize| -> f64 {
            let model = unit_square_model(res);
            let mut solver = ForwardSolver::new(
                &model,
                t_end,
                t_end / steps as f64,
                TimeScheme::CrankNicolson,
                SolveOptions::default(),
            )
            .unwrap();
            let mut flux = constant_flux(&solver.grid, 0.0);
            for (s, node) in solver.grid.boundary.iter().enumerate() {
                flux.spatial[s] = Complex64::new((std::f64::consts::PI * node.pos.x).cos() + 0.5 * (2.0 * std::f64::consts::PI * node.pos.y).sin(), 0.0);
            }
            let data = solver.solve(&flux).unwrap();
            // Reference on a 4x grid in space and time.
            let fine_model = unit_square_model(res * 4.0);
            let mut fine = ForwardSolver::new(
                &fine_model,
                t_end,
                t_end / (steps * 4) as f64,
                TimeScheme::CrankNicolson,
                SolveOptions::default(),
            )
            .unwrap();
            let mut fine_flux = constant_flux(&fine.grid, 0.0);
            for (s, node) in fine.grid.boundary.iter().enumerate() {
                fine_flux.spatial[s] = Complex64::new((std::f64::consts::PI * node.pos.x).cos() + 0.5 * (2.0 * std::f64::consts::PI * node.pos.y).sin(), 0.0);
            }
            let fdata = fine.solve(&fine_flux).unwrap();
            // Compare at final time; coarse node s maps to fine nodes 4s+1/4s+2.
            let nbc = data.n_nodes;
            let m = data.steps();
            let mf = fdata.steps();
            let mut err = 0.0;
            for s in 0..nbc {
                let coarse = data.temp_at(m, s).re;
                let f1 = fdata.temp_at(mf, 4 * s + 1).re;
                let f2 = fdata.temp_at(mf, 4 * s + 2).re;
                let fine_v = 0.5 * (f1 + f2);
                err += (coarse - fine_v).powi(2);
            }
            (err / nbc as f64).sqrt()
        };
        let e1 = trace_err(16.0, 16);
        let e2 = trace_err(32.0, 32);
        let order = (e1 / e2).log2();
        assert!(order >= 1.5, "observed order {order} (errors {e1} -> {e2})");
    }
}
