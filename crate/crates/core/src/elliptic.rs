//! Helmholtz-type pressure systems `(I - sigma Lap_h) p = rhs` and their conjugate-gradient solver.

use crate::error::{Result, SolverError};
use crate::state::{Boundary, GridSpec, OperatorField, PrimitiveField, ScalarField};
use crate::stiff::{discrete_divergence, StiffScalars};

/// Compact 5-point Laplacian in difference form; ghosts of `p` must be filled.
pub fn compact_laplacian(p: &ScalarField, grid: &GridSpec) -> ScalarField {
    let mut out = ScalarField::zeros(grid);
    let (ix, iy) = (1.0 / (grid.dx * grid.dx), 1.0 / (grid.dy * grid.dy));
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let c = p.at(j, k);
            let lx = (p.at(j - 1, k) - c) + (p.at(j + 1, k) - c);
            let ly = (p.at(j, k - 1) - c) + (p.at(j, k + 1) - c);
            out.set(j, k, lx * ix + ly * iy);
        }
    }
    out.fill_ghosts(grid);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzSystem {
    pub sigma: f64,
    pub rhs: ScalarField,
    pub bc_x: Boundary,
    pub bc_y: Boundary,
}

impl HelmholtzSystem {
    /// Lower bound on `sigma` for positive definiteness: the spectrum of `-Lap_h` is
    /// contained in `[0, 4/dx^2 + 4/dy^2]`.
    pub fn sigma_bound(grid: &GridSpec) -> f64 {
        -1.0 / (4.0 / (grid.dx * grid.dx) + 4.0 / (grid.dy * grid.dy))
    }
}

/// Statistics of one pressure solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `||rhs - A q||_2 / ||rhs - mean(rhs)||_2` recomputed from the returned solution.
    pub relative_residual: f64,
}

fn interior_div(fx: &ScalarField, fy: &ScalarField, grid: &GridSpec) -> ScalarField {
    discrete_divergence(fx, fy, grid)
}

/// Stage-one system: `p* - sigma^n Lap p* = p^n - dt R^p - dt g p_min div u^n + dt^2 g p_min div R^u`.
pub fn assemble_stage1_system(
    vn: &PrimitiveField,
    rn: &OperatorField,
    sn: &StiffScalars,
    dt: f64,
    grid: &GridSpec,
) -> HelmholtzSystem {
    let div_u = interior_div(&vn.u, &vn.v, grid);
    let div_r = interior_div(&rn.comps[1], &rn.comps[2], grid);
    let g = sn.gamma_pmin;
    let mut rhs = ScalarField::zeros(grid);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let val = vn.p.at(j, k) - dt * rn.comps[3].at(j, k) - dt * g * div_u.at(j, k)
                + dt * dt * g * div_r.at(j, k);
            rhs.set(j, k, val);
        }
    }
    HelmholtzSystem {
        sigma: dt * dt * g * sn.inv_eps2_rhomax,
        rhs,
        bc_x: grid.bc_x,
        bc_y: grid.bc_y,
    }
}

/// Stage-two system. The velocity-correction term carries `+dt^2 g p*_min / 2`, which is what
/// substituting the stage-two velocity update into the pressure update produces.
#[allow(clippy::too_many_arguments)]
pub fn assemble_stage2_system(
    vn: &PrimitiveField,
    rn: &OperatorField,
    rs: &OperatorField,
    lnn: &OperatorField,
    lss: &OperatorField,
    ss: &StiffScalars,
    dt: f64,
    grid: &GridSpec,
) -> HelmholtzSystem {
    let mut ru = rn.comps[1].clone();
    let mut rv = rn.comps[2].clone();
    let mut lu = lnn.comps[1].clone();
    let mut lv = lnn.comps[2].clone();
    for (dst, src) in [
        (&mut ru, &rs.comps[1]),
        (&mut rv, &rs.comps[2]),
    ] {
        dst.as_mut_slice().iter_mut().zip(src.as_slice()).for_each(|(a, b)| *a += b);
    }
    for (dst, src) in [
        (&mut lu, &lss.comps[1]),
        (&mut lv, &lss.comps[2]),
    ] {
        dst.as_mut_slice().iter_mut().zip(src.as_slice()).for_each(|(a, b)| *a -= b);
    }
    let div_u = interior_div(&vn.u, &vn.v, grid);
    let div_r = interior_div(&ru, &rv, grid);
    let div_l = interior_div(&lu, &lv, grid);
    let g = ss.gamma_pmin;
    let h = 0.5 * dt;
    let mut rhs = ScalarField::zeros(grid);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let val = vn.p.at(j, k)
                - h * (rn.comps[3].at(j, k) + rs.comps[3].at(j, k))
                - h * (lnn.comps[3].at(j, k) - lss.comps[3].at(j, k))
                - dt * g * div_u.at(j, k)
                + dt * h * g * div_r.at(j, k)
                + dt * h * g * div_l.at(j, k);
            rhs.set(j, k, val);
        }
    }
    HelmholtzSystem {
        sigma: dt * dt * g * ss.inv_eps2_rhomax,
        rhs,
        bc_x: grid.bc_x,
        bc_y: grid.bc_y,
    }
}

/// Matrix-free `(I - sigma Lap_h)` on interior vectors; outflow sides act as homogeneous Neumann.
struct Operator {
    nx: usize,
    ny: usize,
    sigma: f64,
    ix: f64,
    iy: f64,
    periodic_x: bool,
    periodic_y: bool,
}

impl Operator {
    fn apply(&self, q: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for k in 0..ny {
            let row = k * nx;
            let down = if k > 0 {
                Some(row - nx)
            } else if self.periodic_y {
                Some((ny - 1) * nx)
            } else {
                None
            };
            let up = if k + 1 < ny {
                Some(row + nx)
            } else if self.periodic_y {
                Some(0)
            } else {
                None
            };
            for j in 0..nx {
                let c = q[row + j];
                let w = if j > 0 {
                    q[row + j - 1] - c
                } else if self.periodic_x {
                    q[row + nx - 1] - c
                } else {
                    0.0
                };
                let e = if j + 1 < nx {
                    q[row + j + 1] - c
                } else if self.periodic_x {
                    q[row] - c
                } else {
                    0.0
                };
                let s = down.map_or(0.0, |d| q[d + j] - c);
                let n = up.map_or(0.0, |u| q[u + j] - c);
                out[row + j] = c - self.sigma * ((w + e) * self.ix + (s + n) * self.iy);
            }
        }
    }

    fn diagonal(&self, j: usize, k: usize) -> f64 {
        let mut nb_x = 2.0;
        let mut nb_y = 2.0;
        if !self.periodic_x {
            nb_x -= (j == 0) as u8 as f64 + (j + 1 == self.nx) as u8 as f64;
        }
        if !self.periodic_y {
            nb_y -= (k == 0) as u8 as f64 + (k + 1 == self.ny) as u8 as f64;
        }
        1.0 + self.sigma * (nb_x * self.ix + nb_y * self.iy)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients, warm-started from `guess`.
///
/// Constants lie in the kernel of the Laplacian for both boundary types, so the mean of the
/// right-hand side is split off and the iteration runs on the mean-free remainder. At low Mach
/// numbers the pressure is a constant plus an `O(eps^2)` fluctuation and `sigma` is huge;
/// iterating on the full field would stall at `eps_mach * sigma / dx^2` relative residual.
/// The residual is measured against the mean-free right-hand side, whose norm never exceeds
/// that of the full one.
///
/// Returns the solution with filled ghosts. The residual is recomputed from scratch; if it
/// misses `tol` the iteration restarts from there until `max_iter` total iterations are spent.
pub fn solve_helmholtz(
    sys: &HelmholtzSystem,
    guess: &ScalarField,
    grid: &GridSpec,
    tol: f64,
    max_iter: usize,
    jacobi: bool,
) -> Result<(ScalarField, SolveStats)> {
    let bound = HelmholtzSystem::sigma_bound(grid);
    if !(sys.sigma > bound) || !sys.sigma.is_finite() {
        return Err(SolverError::IndefiniteSystem { sigma: sys.sigma, bound });
    }
    let op = Operator {
        nx: grid.nx,
        ny: grid.ny,
        sigma: sys.sigma,
        ix: 1.0 / (grid.dx * grid.dx),
        iy: 1.0 / (grid.dy * grid.dy),
        periodic_x: sys.bc_x == Boundary::Periodic,
        periodic_y: sys.bc_y == Boundary::Periodic,
    };
    let n = grid.cell_count();
    let mut b = sys.rhs.interior_to_vec();
    let shift = b.iter().sum::<f64>() / n as f64;
    b.iter_mut().for_each(|v| *v -= shift);
    let b_norm = dot(&b, &b).sqrt();
    let mut x: Vec<f64> = guess.interior().map(|g| g - shift).collect();
    let finish = |x: &[f64], iterations: usize, rel: f64| {
        let mut out = ScalarField::zeros(grid);
        let full: Vec<f64> = x.iter().map(|v| v + shift).collect();
        out.set_interior(&full);
        out.fill_ghosts(grid);
        (out, SolveStats { iterations, relative_residual: rel })
    };
    if b_norm == 0.0 {
        return Ok(finish(&vec![0.0; n], 0, 0.0));
    }
    if !b_norm.is_finite() || !shift.is_finite() {
        return Err(SolverError::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    let inv_diag: Vec<f64> = (0..grid.ny)
        .flat_map(|k| (0..grid.nx).map(move |j| (j, k)))
        .map(|(j, k)| if jacobi { 1.0 / op.diagonal(j, k) } else { 1.0 })
        .collect();
    let target = tol * b_norm;
    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    loop {
        op.apply(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let true_res = dot(&r, &r).sqrt();
        if true_res <= target {
            return Ok(finish(&x, iterations, true_res / b_norm));
        }
        if iterations >= max_iter {
            return Err(SolverError::NoConvergence { iterations, residual: true_res / b_norm });
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            if dot(&r, &r).sqrt() <= target {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// `<w, (I - sigma Lap_h) w>` for a field with filled ghosts; used by the SPD checks.
pub fn energy_product(w: &ScalarField, sigma: f64, grid: &GridSpec) -> f64 {
    let lap = compact_laplacian(w, grid);
    w.interior().zip(lap.interior()).map(|(a, l)| a * (a - sigma * l)).sum()
}
