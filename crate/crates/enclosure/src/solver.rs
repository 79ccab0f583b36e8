//! Linear algebra kernels for the implicit heat stepper: a 5-point stencil
//! operator, preconditioned conjugate gradients, and a fast DCT-based solver
//! for the constant-coefficient part.
//!
//! The systems are of the form (σ V + A) u = b where A is the finite-volume
//! diffusion operator with harmonic face averaging and σ V the scaled cell
//! volume (σ = 1/Δt for time stepping, σ = τ̃ for resolvent solves). With a
//! homogeneous Neumann boundary the constant-coefficient operator is
//! diagonalized exactly by the DCT-II basis, which makes a spectral solve an
//! exact preconditioner away from the inclusion contrast.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

// ---------------------------------------------------------------------------
// 1D DCT machinery
// ---------------------------------------------------------------------------

/// DCT-II / DCT-III pair of one size, implemented over a complex FFT.
pub struct Dct1d {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    /// e^{-iπk/(2n)} twiddles for the forward transform.
    twiddle_fwd: Vec<Complex64>,
    /// e^{+iπk/(2n)} twiddles for the backward transform.
    twiddle_bwd: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Dct1d {
    pub fn new(n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let fft = planner.plan_fft_forward(n);
        let twiddle_fwd = (0..n)
            .map(|k| Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2.0 * n as f64)))
            .collect();
        let twiddle_bwd = (0..n)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / (2.0 * n as f64)))
            .collect();
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Dct1d {
            n,
            fft,
            twiddle_fwd,
            twiddle_bwd,
            buf: vec![Complex64::default(); n],
            scratch,
        }
    }

    /// DCT-II: out_k = Σ_j x_j cos(πk(2j+1)/(2n)).
    pub fn forward(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        // Even entries in order, then odd entries reversed.
        let half = n.div_ceil(2);
        for j in 0..half {
            self.buf[j] = Complex64::new(x[2 * j], 0.0);
        }
        for j in 0..n / 2 {
            self.buf[n - 1 - j] = Complex64::new(x[2 * j + 1], 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for k in 0..n {
            out[k] = (self.twiddle_fwd[k] * self.buf[k]).re;
        }
    }

    /// Full DCT-III: out_j = Σ_k z_k cos(πk(2j+1)/(2n)) (no halving of z_0).
    pub fn backward(&mut self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(z.len(), n);
        for k in 0..n {
            self.buf[k] = self.twiddle_bwd[k] * z[k];
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        // y_{2m} = Re F_{(n-m) mod n}, y_{2m+1} = Re F_{(m+1) mod n}.
        let half = n.div_ceil(2);
        for m in 0..half {
            out[2 * m] = self.buf[(n - m) % n].re;
        }
        for m in 0..n / 2 {
            out[2 * m + 1] = self.buf[(m + 1) % n].re;
        }
    }
}

// ---------------------------------------------------------------------------
// Stencil operator
// ---------------------------------------------------------------------------

/// Symmetric positive-definite 5-point operator (σV + A) over the bounding
/// rectangle. Inactive cells are decoupled identity rows.
#[derive(Debug, Clone)]
pub struct StencilOp {
    pub nx: usize,
    pub ny: usize,
    /// Face coefficients between (i,j) and (i+1,j); length (nx-1)*ny.
    pub kx: Vec<f64>,
    /// Face coefficients between (i,j) and (i,j+1); length nx*(ny-1).
    pub ky: Vec<f64>,
    /// Full diagonal: σ·vol + sum of adjacent face coefficients.
    pub diag: Vec<f64>,
}

impl StencilOp {
    /// Assemble from cellwise conductivity. `sigma` multiplies the cell
    /// volume on the diagonal; `active` masks the domain.
    pub fn assemble(
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        sigma: f64,
        gamma: &[f64],
        active: &[bool],
    ) -> Self {
        let vol = hx * hy;
        let mut kx = vec![0.0; (nx - 1) * ny];
        let mut ky = vec![0.0; nx * (ny - 1)];
        let mut diag = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx - 1 {
                let a = j * nx + i;
                let b = a + 1;
                if active[a] && active[b] {
                    let harm = 2.0 * gamma[a] * gamma[b] / (gamma[a] + gamma[b]);
                    kx[j * (nx - 1) + i] = harm * hy / hx;
                }
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let a = j * nx + i;
                let b = a + nx;
                if active[a] && active[b] {
                    let harm = 2.0 * gamma[a] * gamma[b] / (gamma[a] + gamma[b]);
                    ky[j * nx + i] = harm * hx / hy;
                }
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                if !active[c] {
                    diag[c] = 1.0;
                    continue;
                }
                let mut d = sigma * vol;
                if i > 0 {
                    d += kx[j * (nx - 1) + i - 1];
                }
                if i < nx - 1 {
                    d += kx[j * (nx - 1) + i];
                }
                if j > 0 {
                    d += ky[(j - 1) * nx + i];
                }
                if j < ny - 1 {
                    d += ky[j * nx + i];
                }
                diag[c] = d;
            }
        }
        StencilOp { nx, ny, kx, ky, diag }
    }

    /// out = K u.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        debug_assert_eq!(u.len(), nx * ny);
        for j in 0..ny {
            let row = j * nx;
            let kxrow = j * (nx - 1);
            for i in 0..nx {
                let c = row + i;
                let mut v = self.diag[c] * u[c];
                if i > 0 {
                    v -= self.kx[kxrow + i - 1] * u[c - 1];
                }
                if i < nx - 1 {
                    v -= self.kx[kxrow + i] * u[c + 1];
                }
                if j > 0 {
                    v -= self.ky[c - nx] * u[c - nx];
                }
                if j < ny - 1 {
                    v -= self.ky[c] * u[c + nx];
                }
                out[c] = v;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// DCT preconditioner
// ---------------------------------------------------------------------------

/// Exact spectral solve of the constant-coefficient surrogate
/// (σV + γ̄ A_const); used as a CG preconditioner for variable coefficients.
pub struct DctPrecond {
    nx: usize,
    ny: usize,
    dct_x: Dct1d,
    dct_y: Dct1d,
    /// Inverse eigenvalues with the inverse-transform normalization folded in.
    scale: Vec<f64>,
    row: Vec<f64>,
    row_out: Vec<f64>,
    work: Vec<f64>,
}

impl DctPrecond {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, sigma: f64, gamma_bar: f64) -> Self {
        let mut planner = FftPlanner::new();
        let dct_x = Dct1d::new(nx, &mut planner);
        let dct_y = Dct1d::new(ny, &mut planner);
        let vol = hx * hy;
        let mut scale = vec![0.0; nx * ny];
        for j in 0..ny {
            let muy = 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / ny as f64).cos();
            let wy = if j == 0 { 1.0 } else { 2.0 } / ny as f64;
            for i in 0..nx {
                let mux = 2.0 - 2.0 * (std::f64::consts::PI * i as f64 / nx as f64).cos();
                let wx = if i == 0 { 1.0 } else { 2.0 } / nx as f64;
                let eig = sigma * vol + gamma_bar * (mux * hy / hx + muy * hx / hy);
                scale[j * nx + i] = wx * wy / eig;
            }
        }
        DctPrecond {
            nx,
            ny,
            dct_x,
            dct_y,
            scale,
            row: vec![0.0; nx.max(ny)],
            row_out: vec![0.0; nx.max(ny)],
            work: vec![0.0; nx * ny],
        }
    }

    /// z = M r (approximate inverse apply).
    pub fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        // Forward DCT along x (contiguous rows).
        for j in 0..ny {
            self.dct_x.forward(&r[j * nx..(j + 1) * nx], &mut self.row_out[..nx]);
            self.work[j * nx..(j + 1) * nx].copy_from_slice(&self.row_out[..nx]);
        }
        // Forward DCT along y (gather columns).
        for i in 0..nx {
            for j in 0..ny {
                self.row[j] = self.work[j * nx + i];
            }
            self.dct_y.forward(&self.row[..ny], &mut self.row_out[..ny]);
            for j in 0..ny {
                self.work[j * nx + i] = self.row_out[j] * self.scale[j * nx + i];
            }
        }
        // Backward along y.
        for i in 0..nx {
            for j in 0..ny {
                self.row[j] = self.work[j * nx + i];
            }
            self.dct_y.backward(&self.row[..ny], &mut self.row_out[..ny]);
            for j in 0..ny {
                self.work[j * nx + i] = self.row_out[j];
            }
        }
        // Backward along x.
        for j in 0..ny {
            self.row[..nx].copy_from_slice(&self.work[j * nx..(j + 1) * nx]);
            self.dct_x.backward(&self.row[..nx], &mut z[j * nx..(j + 1) * nx]);
        }
    }
}

// ---------------------------------------------------------------------------
// Preconditioned conjugate gradients
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative residual target ‖b - Kx‖ / ‖b‖.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rel_tol: 1e-12,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Workspace reused across many CG solves of the same size.
pub struct CgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl CgWorkspace {
    pub fn new(n: usize) -> Self {
        CgWorkspace {
            r: vec![0.0; n],
            z: vec![0.0; n],
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve K x = b by preconditioned CG, starting from the value already in x.
pub fn pcg_solve(
    op: &StencilOp,
    precond: &mut DctPrecond,
    b: &[f64],
    x: &mut [f64],
    ws: &mut CgWorkspace,
    opts: &SolveOptions,
) -> SolveStats {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return SolveStats {
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let target = opts.rel_tol * bnorm;

    op.apply(x, &mut ws.q);
    for i in 0..n {
        ws.r[i] = b[i] - ws.q[i];
    }
    let mut rnorm = norm(&ws.r);
    if rnorm <= target {
        return SolveStats {
            iterations: 0,
            rel_residual: rnorm / bnorm,
            converged: true,
        };
    }
    precond.apply(&ws.r, &mut ws.z);
    ws.p.copy_from_slice(&ws.z);
    let mut rz = dot(&ws.r, &ws.z);

    let mut best = rnorm;
    let mut since_best = 0usize;
    let mut iters = 0;
    for it in 1..=opts.max_iter {
        iters = it;
        op.apply(&ws.p, &mut ws.q);
        let pq = dot(&ws.p, &ws.q);
        if pq <= 0.0 || !pq.is_finite() {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * ws.p[i];
            ws.r[i] -= alpha * ws.q[i];
        }
        rnorm = norm(&ws.r);
        if rnorm <= target {
            return SolveStats {
                iterations: it,
                rel_residual: rnorm / bnorm,
                converged: true,
            };
        }
        if rnorm < best * 0.999 {
            best = rnorm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 20 {
                break; // stagnated at the round-off floor
            }
        }
        precond.apply(&ws.r, &mut ws.z);
        let rz_new = dot(&ws.r, &ws.z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            ws.p[i] = ws.z[i] + beta * ws.p[i];
        }
    }
    SolveStats {
        iterations: iters,
        rel_residual: rnorm / bnorm,
        converged: rnorm <= target * 50.0,
    }
}
