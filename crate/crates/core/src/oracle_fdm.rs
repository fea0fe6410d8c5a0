//! A 2-D finite-difference solver for the minimal surface equation, used as
//! an independent reference for trained networks.
//!
//! The equation is written as `−div(a ∇u) = f` with `a = 1/√(1 + |∇u|²)`.
//! Each Picard step freezes `a` at the cell-edge midpoints of the current
//! iterate, solves the resulting symmetric positive definite five-point
//! system by conjugate gradients, and blends the solution with the previous
//! iterate:
//!
//! ```text
//! u ← (1 − ω) u + ω · solve(a(u))
//! ```
//!
//! At an east midpoint `(i + ½, j)` the normal derivative is the one-sided
//! difference `(u[i+1,j] − u[i,j]) / h₁` and the tangential derivative is
//! the mean of the central differences at the two neighbouring nodes.

use crate::autodiff::ScalarField;
use crate::boundary::{BoundaryFn, SourceTerm};
use crate::error::{Error, Result};
use crate::sampling::BoxDomain;

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdmOptions {
    /// Stop once the largest interior update is below this.
    pub tol: f64,
    /// Maximum number of Picard steps.
    pub max_iter: usize,
    /// Blending factor ω in (0, 1].
    pub damping: f64,
    pub f: SourceTerm,
}

impl Default for FdmOptions {
    fn default() -> Self {
        FdmOptions {
            tol: 1e-8,
            max_iter: 10_000,
            damping: 0.5,
            f: SourceTerm::default(),
        }
    }
}

/// Nodal values on an `n × n` grid spanning a 2-D box, boundary included.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    n: usize,
    domain: BoxDomain,
    /// `values[i * n + j]` is the value at `(x1_i, x2_j)`.
    values: Vec<f64>,
    /// Picard steps taken.
    pub iterations: usize,
    /// Largest interior change in the last step.
    pub final_update: f64,
    pub converged: bool,
}

impl Grid2D {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn spacing(&self) -> (f64, f64) {
        let s = |k: usize| (self.domain.upper()[k] - self.domain.lower()[k]) / (self.n - 1) as f64;
        (s(0), s(1))
    }

    /// Coordinate of node `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i == self.n - 1 {
            return self.domain.upper()[axis];
        }
        let lo = self.domain.lower()[axis];
        lo + (self.domain.upper()[axis] - lo) * i as f64 / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(0, i), self.coord(1, j)]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }
}

/// Solves the minimal surface equation with Dirichlet data `g` on an
/// `n × n` grid. Not converging within `max_iter` is reported through
/// [`Grid2D::converged`], not as an error.
pub fn solve_fdm(g: &BoundaryFn, domain: &BoxDomain, n: usize, opts: FdmOptions) -> Result<Grid2D> {
    if domain.dim() != 2 || g.dim() != 2 {
        return Err(Error::config("the finite-difference oracle is two-dimensional only"));
    }
    if n < 9 {
        return Err(Error::config(format!("grid size {n} is below the minimum of 9")));
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::config(format!("tolerance {} must be positive", opts.tol)));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::config(format!("damping {} is outside (0, 1]", opts.damping)));
    }
    let mut grid = Grid2D {
        n,
        domain: domain.clone(),
        values: vec![0.0; n * n],
        iterations: 0,
        final_update: f64::INFINITY,
        converged: false,
    };
    for i in 0..n {
        for j in 0..n {
            if grid.is_boundary(i, j) {
                let x = grid.node(i, j);
                grid.values[i * n + j] = g.eval(&x)?;
            }
        }
    }
    // Start from the mean of the boundary values.
    let (sum, count) = (0..n * n)
        .filter(|&k| grid.is_boundary(k / n, k % n))
        .fold((0.0, 0usize), |(s, c), k| (s + grid.values[k], c + 1));
    let start = sum / count as f64;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            grid.values[i * n + j] = start;
        }
    }

    let mut solver = PicardSystem::new(&grid, opts.f.value());
    while grid.iterations < opts.max_iter {
        solver.freeze_coefficients(&grid.values);
        let solved = solver.solve(&grid.values);
        let mut update: f64 = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                let next = (1.0 - opts.damping) * grid.values[k] + opts.damping * solved[k];
                update = update.max((next - grid.values[k]).abs());
                grid.values[k] = next;
            }
        }
        grid.iterations += 1;
        grid.final_update = update;
        if !update.is_finite() {
            return Err(Error::eval(format!("finite-difference iteration diverged at step {}", grid.iterations)));
        }
        if update < opts.tol {
            grid.converged = true;
            break;
        }
    }
    Ok(grid)
}

/// The frozen-coefficient linear system of one Picard step.
struct PicardSystem {
    n: usize,
    h1: f64,
    h2: f64,
    f: f64,
    /// Coefficients at east midpoints `(i + ½, j)`, indexed `i * n + j`.
    east: Vec<f64>,
    /// Coefficients at north midpoints `(i, j + ½)`, indexed `i * n + j`.
    north: Vec<f64>,
}

impl PicardSystem {
    fn new(grid: &Grid2D, f: f64) -> Self {
        let (h1, h2) = grid.spacing();
        let n = grid.n;
        PicardSystem {
            n,
            h1,
            h2,
            f,
            east: vec![0.0; n * n],
            north: vec![0.0; n * n],
        }
    }

    fn freeze_coefficients(&mut self, u: &[f64]) {
        let (n, h1, h2) = (self.n, self.h1, self.h2);
        let at = |i: usize, j: usize| u[i * n + j];
        for i in 0..n - 1 {
            for j in 1..n - 1 {
                let ux = (at(i + 1, j) - at(i, j)) / h1;
                let uy = (at(i, j + 1) - at(i, j - 1) + at(i + 1, j + 1) - at(i + 1, j - 1)) / (4.0 * h2);
                self.east[i * n + j] = 1.0 / (1.0 + ux * ux + uy * uy).sqrt();
            }
        }
        for i in 1..n - 1 {
            for j in 0..n - 1 {
                let uy = (at(i, j + 1) - at(i, j)) / h2;
                let ux = (at(i + 1, j) - at(i - 1, j) + at(i + 1, j + 1) - at(i - 1, j + 1)) / (4.0 * h1);
                self.north[i * n + j] = 1.0 / (1.0 + ux * ux + uy * uy).sqrt();
            }
        }
    }

    /// `A u` on interior nodes, treating boundary entries of `u` as given.
    fn apply(&self, u: &[f64], out: &mut [f64], interior_only: bool) {
        let n = self.n;
        let (c1, c2) = (1.0 / (self.h1 * self.h1), 1.0 / (self.h2 * self.h2));
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                let (ae, aw) = (self.east[k], self.east[k - n]);
                let (an, as_) = (self.north[k], self.north[k - 1]);
                let nb = |i2: usize, j2: usize| {
                    let b = i2 == 0 || j2 == 0 || i2 == n - 1 || j2 == n - 1;
                    if interior_only && b { 0.0 } else { u[i2 * n + j2] }
                };
                out[k] = c1 * ((ae + aw) * u[k] - ae * nb(i + 1, j) - aw * nb(i - 1, j))
                    + c2 * ((an + as_) * u[k] - an * nb(i, j + 1) - as_ * nb(i, j - 1));
            }
        }
    }

    /// Conjugate gradients on the interior unknowns, warm-started from `u`.
    fn solve(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let interior: Vec<usize> = (1..n - 1).flat_map(|i| (1..n - 1).map(move |j| i * n + j)).collect();
        // Right-hand side: f minus the boundary contributions.
        let mut bnd = u.to_vec();
        for &k in &interior {
            bnd[k] = 0.0;
        }
        let mut t = vec![0.0; n * n];
        self.apply(&bnd, &mut t, false);
        let mut x = u.to_vec();
        let mut ax = vec![0.0; n * n];
        self.apply(&x, &mut ax, true);
        let mut r = vec![0.0; n * n];
        for &k in &interior {
            r[k] = self.f - t[k] - ax[k];
        }
        let bnorm: f64 = interior.iter().map(|&k| (self.f - t[k]).powi(2)).sum::<f64>().sqrt();
        let mut p = r.clone();
        let mut rr: f64 = interior.iter().map(|&k| r[k] * r[k]).sum();
        let target = (1e-14 * bnorm.max(1.0)).powi(2);
        let mut ap = vec![0.0; n * n];
        for _ in 0..10 * interior.len() {
            if rr <= target {
                break;
            }
            self.apply(&p, &mut ap, true);
            let pap: f64 = interior.iter().map(|&k| p[k] * ap[k]).sum();
            let alpha = rr / pap;
            for &k in &interior {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new: f64 = interior.iter().map(|&k| r[k] * r[k]).sum();
            let beta = rr_new / rr;
            for &k in &interior {
                p[k] = r[k] + beta * p[k];
            }
            rr = rr_new;
        }
        x
    }
}

/// Differences between a model and a grid over the interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridComparison {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub rms: f64,
    pub nodes: usize,
}

/// Evaluates `model` at every interior node of `grid` and summarizes the
/// differences. The grid must lie inside the box the model was built for.
pub fn compare_model_to_grid<F: ScalarField + ?Sized>(
    model: &F,
    model_domain: &BoxDomain,
    grid: &Grid2D,
) -> Result<GridComparison> {
    if model.dim() != 2 || model_domain.dim() != 2 {
        return Err(Error::config("grid comparison needs a two-dimensional model"));
    }
    if !model_domain.encloses(grid.domain()) {
        return Err(Error::config(format!(
            "grid domain {} is not inside the model domain {model_domain}",
            grid.domain()
        )));
    }
    let n = grid.n();
    let (mut max_abs, mut sum_abs, mut sum_sq, mut count) = (0.0f64, 0.0, 0.0, 0usize);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let e = (model.value(&grid.node(i, j))? - grid.value(i, j)).abs();
            max_abs = max_abs.max(e);
            sum_abs += e;
            sum_sq += e * e;
            count += 1;
        }
    }
    let stats = GridComparison {
        max_abs,
        mean_abs: sum_abs / count as f64,
        rms: (sum_sq / count as f64).sqrt(),
        nodes: count,
    };
    if !(stats.max_abs.is_finite() && stats.rms.is_finite()) {
        return Err(Error::eval("model produced non-finite values on the grid"));
    }
    Ok(stats)
}

/// Largest interior deviation of the grid from a closed-form function.
pub fn max_error_vs(grid: &Grid2D, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let n = grid.n();
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            worst = worst.max((grid.value(i, j) - exact(&grid.node(i, j))).abs());
        }
    }
    worst
}
