//! Linear stiff operator: scaled pressure gradient and velocity divergence by central differences.

use crate::nonstiff::SplitScalars;
use crate::state::{fill_ghosts, GridSpec, OperatorField, PrimitiveField, ScalarField};

/// Coefficients of the stiff operator, frozen at one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffScalars {
    pub inv_eps2_rhomax: f64,
    /// `gamma * p_min`; may be negative when the shifted minimum drops below zero at large `eps`.
    pub gamma_pmin: f64,
}

impl StiffScalars {
    pub fn new(s: &SplitScalars, eps: f64, gamma: f64) -> Self {
        StiffScalars {
            inv_eps2_rhomax: 1.0 / (eps * eps * s.rho_max),
            gamma_pmin: gamma * s.p_min,
        }
    }
}

/// Central gradient `((p_{j+1} - p_{j-1})/(2dx), (p_{k+1} - p_{k-1})/(2dy))`; ghosts of the result filled.
pub fn central_gradient(p: &ScalarField, grid: &GridSpec) -> (ScalarField, ScalarField) {
    let mut px = ScalarField::zeros(grid);
    let mut py = ScalarField::zeros(grid);
    let (sx, sy) = (0.5 / grid.dx, 0.5 / grid.dy);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            px.set(j, k, (p.at(j + 1, k) - p.at(j - 1, k)) * sx);
            py.set(j, k, (p.at(j, k + 1) - p.at(j, k - 1)) * sy);
        }
    }
    px.fill_ghosts(grid);
    py.fill_ghosts(grid);
    (px, py)
}

/// Central divergence of `(u, v)`; ghosts of the result filled.
pub fn discrete_divergence(u: &ScalarField, v: &ScalarField, grid: &GridSpec) -> ScalarField {
    let mut d = ScalarField::zeros(grid);
    let (sx, sy) = (0.5 / grid.dx, 0.5 / grid.dy);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            d.set(j, k, (u.at(j + 1, k) - u.at(j - 1, k)) * sx + (v.at(j, k + 1) - v.at(j, k - 1)) * sy);
        }
    }
    d.fill_ghosts(grid);
    d
}

/// `L = (0, grad p_b / (eps^2 rho_max_a), gamma p_min_a div u_b)`: coefficients from stage a,
/// differentiated fields from stage b.
#[allow(non_snake_case)]
pub fn assemble_L(a: &StiffScalars, vb: &PrimitiveField, grid: &GridSpec) -> OperatorField {
    let (px, py) = central_gradient(&vb.p, grid);
    let div = discrete_divergence(&vb.u, &vb.v, grid);
    let mut l = OperatorField::zeros(grid);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            l.comps[1].set(j, k, a.inv_eps2_rhomax * px.at(j, k));
            l.comps[2].set(j, k, a.inv_eps2_rhomax * py.at(j, k));
            l.comps[3].set(j, k, a.gamma_pmin * div.at(j, k));
        }
    }
    fill_ghosts(&mut l, grid);
    l
}
