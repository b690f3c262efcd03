//! Direct linear solvers for the implicit parts of the scheme.
//!
//! All solvers are direct and deterministic:
//!
//! * chain grids (radial / anchored disks) — tridiagonal elimination;
//!   with a nonnegative right-hand side every intermediate quantity in the
//!   sweep is a sum/product/quotient of nonnegatives, so the solution is
//!   nonnegative *in floating point*, not just in exact arithmetic;
//! * rectangles — the exact cosine eigenbasis of the 1D no-flux Laplacian
//!   (modified-Helmholtz and mean-zero Poisson solves), plus a
//!   direction-factored variant `(alpha - c*Dxx)(alpha - c*Dyy)/alpha`
//!   assembled from row/column tridiagonal sweeps for the time stepper,
//!   which keeps the floating-point nonnegativity guarantee and exact
//!   conservation on 2D grids;
//! * the singular mean-zero Poisson problem on a chain is integrated
//!   directly: face fluxes are cumulative sums of the right-hand side, so
//!   the discrete system is satisfied exactly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridKind};
use crate::ops;

/// Solve a tridiagonal system in place. `lower[i]` couples row `i` to
/// `i-1` (`lower[0]` unused), `upper[i]` couples row `i` to `i+1`
/// (`upper[n-1]` unused). Overwrites `diag` and `rhs`; returns the solution
/// in `rhs`.
///
/// For an M-matrix (positive diagonal, nonpositive off-diagonals, diagonally
/// dominant) with `rhs >= 0`, the computed solution is nonnegative in
/// floating point: the elimination only ever adds nonnegative products.
pub fn tridiag_solve_in_place(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    debug_assert_eq!(lower.len(), n);
    debug_assert_eq!(upper.len(), n);
    debug_assert_eq!(rhs.len(), n);
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

/// Solve `(alpha - c * Lap_h) x = b` on a chain grid (volume-weighted form).
fn chain_helmholtz(grid: &Arc<Grid>, alpha: f64, c: f64, b: &Field) -> Field {
    let n = grid.num_cells();
    let vols = grid.volumes();
    let faces = grid.faces();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut diag: Vec<f64> = vols.iter().map(|v| alpha * v).collect();
    for (k, fc) in faces.iter().enumerate() {
        debug_assert_eq!(fc.left, k);
        debug_assert_eq!(fc.right, k + 1);
        diag[fc.left] += c * fc.trans;
        diag[fc.right] += c * fc.trans;
        upper[fc.left] = -c * fc.trans;
        lower[fc.right] = -c * fc.trans;
    }
    let mut rhs: Vec<f64> = b.values().iter().zip(vols).map(|(x, v)| x * v).collect();
    tridiag_solve_in_place(&lower, &mut diag, &upper, &mut rhs);
    Field::new(grid, rhs).expect("solver preserves cell count")
}

/// Solve the singular chain problem `c * Lap_h x = g` with zero-flux ends
/// and the gauge `mean(x) = 0`. Requires `integrate(g) = 0` (up to
/// roundoff); the flux through face `k` is the cumulative integral of `g`,
/// which solves the discrete system exactly.
fn chain_poisson_mean_zero(grid: &Arc<Grid>, c: f64, g: &Field) -> Field {
    let n = grid.num_cells();
    let vols = grid.volumes();
    let faces = grid.faces();
    let mut x = vec![0.0; n];
    let mut cum = 0.0;
    for k in 0..n - 1 {
        cum += g[k] * vols[k];
        // c * trans_k * (x_{k+1} - x_k) = cumulative integral of g
        x[k + 1] = x[k] + cum / (c * faces[k].trans);
    }
    let mut f = Field::new(grid, x).expect("solver preserves cell count");
    let m = ops::mean(&f);
    for v in f.values_mut() {
        *v -= m;
    }
    f
}

/// Exact eigen-decomposition of the 1D cell-centered no-flux Laplacian on a
/// uniform grid: eigenvectors `cos(pi k (2i+1) / (2n))` with eigenvalues
/// `-(4/h^2) sin^2(pi k / (2n))`.
struct CosineBasis {
    n: usize,
    /// Row-major `n x n`; `basis[k*n + i]` = orthonormal eigenvector `k` at cell `i`.
    basis: Vec<f64>,
    /// Nonpositive eigenvalues.
    lambda: Vec<f64>,
}

impl CosineBasis {
    fn new(n: usize, h: f64) -> CosineBasis {
        let mut basis = vec![0.0; n * n];
        let mut lambda = vec![0.0; n];
        for k in 0..n {
            let norm = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                basis[k * n + i] =
                    norm * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos();
            }
            let s = (std::f64::consts::PI * k as f64 / (2 * n) as f64).sin();
            lambda[k] = -4.0 / (h * h) * s * s;
        }
        CosineBasis { n, basis, lambda }
    }

    /// `out[k] = sum_i basis[k][i] * f[i]` for each row of a 2D array.
    fn forward_x(&self, f: &[f64], ny: usize, out: &mut [f64]) {
        let n = self.n;
        for j in 0..ny {
            let row = &f[j * n..(j + 1) * n];
            for k in 0..n {
                let b = &self.basis[k * n..(k + 1) * n];
                out[j * n + k] = row.iter().zip(b).map(|(a, c)| a * c).sum();
            }
        }
    }

    fn inverse_x(&self, coef: &[f64], ny: usize, out: &mut [f64]) {
        let n = self.n;
        for j in 0..ny {
            let row = &coef[j * n..(j + 1) * n];
            let dst = &mut out[j * n..(j + 1) * n];
            dst.fill(0.0);
            for k in 0..n {
                let c = row[k];
                if c == 0.0 {
                    continue;
                }
                let b = &self.basis[k * n..(k + 1) * n];
                for (d, &bv) in dst.iter_mut().zip(b) {
                    *d += c * bv;
                }
            }
        }
    }
}

/// Spectral solver for an `nx x ny` rectangle.
pub struct RectSpectral {
    nx: usize,
    ny: usize,
    bx: CosineBasis,
    by: CosineBasis,
}

impl RectSpectral {
    fn new(grid: &Grid) -> RectSpectral {
        let GridKind::Rect2D { nx, ny, .. } = grid.kind() else {
            panic!("RectSpectral requires a rectangle grid");
        };
        let (dx, dy) = grid.spacing();
        RectSpectral { nx, ny, bx: CosineBasis::new(nx, dx), by: CosineBasis::new(ny, dy) }
    }

    fn transform(&self, f: &[f64]) -> Vec<f64> {
        let mut tmp = vec![0.0; f.len()];
        self.bx.forward_x(f, self.ny, &mut tmp);
        // Transform in y: transpose, forward, transpose back.
        let t = transpose(&tmp, self.nx, self.ny);
        let mut out_t = vec![0.0; f.len()];
        self.by.forward_x(&t, self.nx, &mut out_t);
        transpose(&out_t, self.ny, self.nx)
    }

    fn inverse(&self, coef: &[f64]) -> Vec<f64> {
        let t = transpose(coef, self.nx, self.ny);
        let mut out_t = vec![0.0; coef.len()];
        self.by.inverse_x(&t, self.nx, &mut out_t);
        let back = transpose(&out_t, self.ny, self.nx);
        let mut out = vec![0.0; coef.len()];
        self.bx.inverse_x(&back, self.ny, &mut out);
        out
    }

    /// Solve `(alpha - c * Lap_h) x = b`, `alpha > 0`.
    fn helmholtz(&self, alpha: f64, c: f64, b: &[f64]) -> Vec<f64> {
        let mut coef = self.transform(b);
        for l in 0..self.ny {
            for k in 0..self.nx {
                let denom = alpha - c * (self.bx.lambda[k] + self.by.lambda[l]);
                coef[l * self.nx + k] /= denom;
            }
        }
        self.inverse(&coef)
    }

    /// Solve `c * Lap_h x = g` with `mean(x) = 0`; the zero mode of `g` is
    /// dropped (it must vanish for solvability, which the caller checks).
    fn poisson_mean_zero(&self, c: f64, g: &[f64]) -> Vec<f64> {
        let mut coef = self.transform(g);
        coef[0] = 0.0;
        for l in 0..self.ny {
            for k in 0..self.nx {
                if k == 0 && l == 0 {
                    continue;
                }
                let denom = c * (self.bx.lambda[k] + self.by.lambda[l]);
                coef[l * self.nx + k] /= denom;
            }
        }
        self.inverse(&coef)
    }
}

fn transpose(a: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for j in 0..ny {
        for i in 0..nx {
            t[i * ny + j] = a[j * nx + i];
        }
    }
    t
}

/// Tridiagonal sweep along one direction of a rectangle:
/// `(alpha - c * Dxx) x = b` row by row (or column by column when
/// `along_x = false`). Uniform 1D no-flux stencils.
fn rect_directional_solve(
    nx: usize,
    ny: usize,
    h: f64,
    along_x: bool,
    alpha: f64,
    c: f64,
    b: &[f64],
) -> Vec<f64> {
    let (len, count) = if along_x { (nx, ny) } else { (ny, nx) };
    let t = c / (h * h);
    let mut out = vec![0.0; b.len()];
    let mut diag = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    let mut lower = vec![-t; len];
    let mut upper = vec![-t; len];
    lower[0] = 0.0;
    upper[len - 1] = 0.0;
    for line in 0..count {
        for s in 0..len {
            let mut d = alpha;
            if s > 0 {
                d += t;
            }
            if s < len - 1 {
                d += t;
            }
            diag[s] = d;
            let idx = if along_x { line * nx + s } else { s * nx + line };
            rhs[s] = b[idx];
        }
        tridiag_solve_in_place(&lower, &mut diag, &upper, &mut rhs);
        for s in 0..len {
            let idx = if along_x { line * nx + s } else { s * nx + line };
            out[idx] = rhs[s];
        }
    }
    out
}

/// Per-grid solver context; built once and reused across time steps.
pub struct Solvers {
    grid: Arc<Grid>,
    rect: Option<RectSpectral>,
}

impl Solvers {
    pub fn new(grid: &Arc<Grid>) -> Solvers {
        let rect = match grid.kind() {
            GridKind::Rect2D { .. } => Some(RectSpectral::new(grid)),
            _ => None,
        };
        Solvers { grid: Arc::clone(grid), rect }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Solve the modified Helmholtz problem `(alpha - c * Lap_h) x = b`
    /// with no-flux boundaries; checks the residual against `tol`
    /// (relative to the right-hand side norm).
    pub fn helmholtz(&self, alpha: f64, c: f64, b: &Field, tol: f64) -> Result<Field> {
        let x = match &self.rect {
            None => chain_helmholtz(&self.grid, alpha, c, b),
            Some(sp) => Field::new(&self.grid, sp.helmholtz(alpha, c, b.values()))
                .expect("solver preserves cell count"),
        };
        let res = helmholtz_residual(alpha, c, &x, b);
        // Backward-error scale: ||b|| + ||A|| ||x|| with the operator norm
        // estimated from the largest per-cell flux coefficient.
        let mut op_scale = vec![0.0f64; self.grid.num_cells()];
        for fc in self.grid.faces() {
            op_scale[fc.left] += fc.trans;
            op_scale[fc.right] += fc.trans;
        }
        let amax = op_scale
            .iter()
            .zip(self.grid.volumes())
            .map(|(t, v)| alpha + c * t / v)
            .fold(0.0, f64::max);
        let scale = ops::l2_norm_sq(b).sqrt() + amax * ops::l2_norm_sq(&x).sqrt();
        if res > tol * scale.max(1e-300) {
            return Err(Error::LinearSolve(format!(
                "helmholtz residual {res:e} exceeds tolerance (problem scale {scale:e})"
            )));
        }
        Ok(x)
    }

    /// Like `helmholtz`, but guaranteed to return a nonnegative field for a
    /// nonnegative right-hand side, including floating-point effects. On
    /// rectangles this uses the direction-factored operator
    /// `(alpha - c Dxx)(alpha - c Dyy)/alpha`, an `O(c^2/alpha)`
    /// perturbation of the unfactored one that conserves the integral
    /// exactly; on chains it is the plain tridiagonal solve.
    pub fn helmholtz_positive(&self, alpha: f64, c: f64, b: &Field) -> Field {
        match self.grid.kind() {
            GridKind::Rect2D { nx, ny, .. } => {
                let (dx, dy) = self.grid.spacing();
                let scaled: Vec<f64> = b.values().iter().map(|v| alpha * v).collect();
                let z = rect_directional_solve(nx, ny, dx, true, alpha, c, &scaled);
                let x = rect_directional_solve(nx, ny, dy, false, alpha, c, &z);
                Field::new(&self.grid, x).expect("solver preserves cell count")
            }
            _ => chain_helmholtz(&self.grid, alpha, c, b),
        }
    }

    /// Solve `c * Lap_h x = g` under the gauge `mean(x) = 0`. The
    /// compatibility condition `integrate(g) = 0` is checked.
    pub fn poisson_mean_zero(&self, c: f64, g: &Field) -> Result<Field> {
        let total = ops::integrate(g);
        let scale = ops::l1_norm(g).max(1e-300);
        if total.abs() > 1e-10 * scale {
            return Err(Error::LinearSolve(format!(
                "mean-zero Poisson right-hand side has nonzero integral {total:e}"
            )));
        }
        let mut x = match &self.rect {
            None => chain_poisson_mean_zero(&self.grid, c, g),
            Some(sp) => Field::new(&self.grid, sp.poisson_mean_zero(c, g.values()))
                .expect("solver preserves cell count"),
        };
        // Re-pin the gauge to roundoff.
        let m = ops::mean(&x);
        for v in x.values_mut() {
            *v -= m;
        }
        Ok(x)
    }
}

/// `|| (alpha - c Lap_h) x - b ||_2`.
pub fn helmholtz_residual(alpha: f64, c: f64, x: &Field, b: &Field) -> f64 {
    let lap = ops::laplacian_neumann(x);
    let r = Field::from_fn(x.grid(), |i| alpha * x[i] - c * lap[i] - b[i]);
    ops::l2_norm_sq(&r).sqrt()
}
