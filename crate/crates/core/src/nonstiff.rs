//! Explicit (nonstiff) part of the primitive system: splitting scalars, modified sound
//! speed, central-upwind fluxes with anti-diffusion and the path-conservative
//! treatment of the nonconservative products.

use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::reconstruction::{minmod2, reconstruct, InterfaceValues};
use crate::state::{fill_ghosts, Axis, Components, GridSpec, OperatorField, PrimitiveField, State4};

/// Global density maximum and pressure minimum of one stage, shifted by `eps^4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScalars {
    pub rho_max: f64,
    pub p_min: f64,
}

pub fn split_scalars(v: &PrimitiveField, eps: f64) -> SplitScalars {
    let e4 = eps.powi(4);
    SplitScalars {
        rho_max: v.rho.interior_max() + e4,
        p_min: v.p.interior_min() - e4,
    }
}

/// `c~ = (1/eps) sqrt(gamma (rho_max - rho)(p - p_min) / (rho rho_max))`.
pub fn modified_sound_speed(rho: f64, p: f64, s: &SplitScalars, eps: f64, gamma: f64) -> Result<f64> {
    let radicand = gamma * (s.rho_max - rho) * (p - s.p_min) / (rho * s.rho_max);
    if !(radicand >= 0.0) {
        return Err(SolverError::nonphysical("modified sound speed", -1, -1, rho, p));
    }
    Ok(radicand.sqrt() / eps)
}

/// One-sided local speeds on every face, indexed like [`InterfaceValues`].
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSpeeds {
    pub a_minus: Vec<f64>,
    pub a_plus: Vec<f64>,
    pub b_minus: Vec<f64>,
    pub b_plus: Vec<f64>,
}

impl InterfaceSpeeds {
    /// Largest `|speed|` over all faces.
    pub fn max_abs(&self) -> f64 {
        self.a_minus
            .iter()
            .chain(&self.a_plus)
            .chain(&self.b_minus)
            .chain(&self.b_plus)
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `(min(n_m - c_m, n_p - c_p, -delta), max(n_m + c_m, n_p + c_p, delta))`.
#[inline]
pub fn one_sided_speeds(n_m: f64, c_m: f64, n_p: f64, c_p: f64, delta: f64) -> (f64, f64) {
    (
        (n_m - c_m).min(n_p - c_p).min(-delta),
        (n_m + c_m).max(n_p + c_p).max(delta),
    )
}

/// Builds face speeds from a per-state sound-speed closure.
pub(crate) fn face_speeds(
    iv: &InterfaceValues,
    delta: f64,
    mut sound: impl FnMut(&State4) -> Result<f64>,
) -> Result<InterfaceSpeeds> {
    let nx_faces = iv.x_minus.len();
    let ny_faces = iv.y_minus.len();
    let mut sp = InterfaceSpeeds {
        a_minus: vec![0.0; nx_faces],
        a_plus: vec![0.0; nx_faces],
        b_minus: vec![0.0; ny_faces],
        b_plus: vec![0.0; ny_faces],
    };
    for f in 0..nx_faces {
        let (m, p) = (&iv.x_minus[f], &iv.x_plus[f]);
        let (lo, hi) = one_sided_speeds(m[1], sound(m)?, p[1], sound(p)?, delta);
        sp.a_minus[f] = lo;
        sp.a_plus[f] = hi;
    }
    for f in 0..ny_faces {
        let (m, p) = (&iv.y_minus[f], &iv.y_plus[f]);
        let (lo, hi) = one_sided_speeds(m[2], sound(m)?, p[2], sound(p)?, delta);
        sp.b_minus[f] = lo;
        sp.b_plus[f] = hi;
    }
    Ok(sp)
}

pub fn nonstiff_speeds(iv: &InterfaceValues, s: &SplitScalars, cfg: &SolverConfig) -> Result<InterfaceSpeeds> {
    face_speeds(iv, cfg.delta, |v| {
        modified_sound_speed(v[0], v[3], s, cfg.epsilon, cfg.gamma)
    })
}

/// Nonstiff flux `(rho u, u^2/2, 0, 0)` in x and `(rho v, 0, v^2/2, 0)` in y.
#[inline]
pub fn nonstiff_flux(v: &State4, axis: Axis) -> State4 {
    match axis {
        Axis::X => [v[0] * v[1], 0.5 * v[1] * v[1], 0.0, 0.0],
        Axis::Y => [v[0] * v[2], 0.0, 0.5 * v[2] * v[2], 0.0],
    }
}

/// Anti-diffusion term `minmod(w_int - w_m, w_p - w_int)` built from the
/// intermediate state of the local Riemann fan.
#[inline]
pub fn antidiffusion(a_m: f64, a_p: f64, w_m: &State4, w_p: &State4, f_m: &State4, f_p: &State4) -> State4 {
    let inv = 1.0 / (a_p - a_m);
    std::array::from_fn(|c| {
        let w_int = (a_p * w_p[c] - a_m * w_m[c] - (f_p[c] - f_m[c])) * inv;
        minmod2(w_int - w_m[c], w_p[c] - w_int)
    })
}

/// Central-upwind flux with anti-diffusion, shared by the primitive and conservative operators.
#[inline]
pub fn cu_flux(a_m: f64, a_p: f64, w_m: &State4, w_p: &State4, f_m: &State4, f_p: &State4) -> State4 {
    let inv = 1.0 / (a_p - a_m);
    let dw = antidiffusion(a_m, a_p, w_m, w_p, f_m, f_p);
    let diff = a_p * a_m * inv;
    std::array::from_fn(|c| (a_p * f_m[c] - a_m * f_p[c]) * inv + diff * (w_p[c] - w_m[c] - dw[c]))
}

/// Numerical fluxes on x faces and y faces, indexed like [`InterfaceValues`].
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceFluxes {
    pub x: Vec<State4>,
    pub y: Vec<State4>,
}

pub fn cu_flux_primitive(iv: &InterfaceValues, sp: &InterfaceSpeeds) -> InterfaceFluxes {
    let x = (0..iv.x_minus.len())
        .map(|f| {
            let (m, p) = (&iv.x_minus[f], &iv.x_plus[f]);
            cu_flux(sp.a_minus[f], sp.a_plus[f], m, p, &nonstiff_flux(m, Axis::X), &nonstiff_flux(p, Axis::X))
        })
        .collect();
    let y = (0..iv.y_minus.len())
        .map(|f| {
            let (m, p) = (&iv.y_minus[f], &iv.y_plus[f]);
            cu_flux(sp.b_minus[f], sp.b_plus[f], m, p, &nonstiff_flux(m, Axis::Y), &nonstiff_flux(p, Axis::Y))
        })
        .collect();
    InterfaceFluxes { x, y }
}

/// `B~(v) dv` with `B~ = -[[0,0,0,0],[0,0,0,A],[0,0,u,0],[0,g(p-p_min),0,u]]`,
/// `A = (rho_max - rho)/(eps^2 rho rho_max)`.
#[inline]
pub fn b_product(v: &State4, dv: &State4, s: &SplitScalars, eps: f64, gamma: f64) -> State4 {
    let a = (s.rho_max - v[0]) / (eps * eps * v[0] * s.rho_max);
    [
        0.0,
        -a * dv[3],
        -v[1] * dv[2],
        -(gamma * (v[3] - s.p_min) * dv[1] + v[1] * dv[3]),
    ]
}

/// `C~(v) dv` with `C~ = -[[0,0,0,0],[0,v,0,0],[0,0,0,A],[0,0,g(p-p_min),v]]`.
#[inline]
pub fn c_product(v: &State4, dv: &State4, s: &SplitScalars, eps: f64, gamma: f64) -> State4 {
    let a = (s.rho_max - v[0]) / (eps * eps * v[0] * s.rho_max);
    [
        0.0,
        -v[2] * dv[1],
        -a * dv[3],
        -(gamma * (v[3] - s.p_min) * dv[2] + v[2] * dv[3]),
    ]
}

#[inline]
fn sub(a: &State4, b: &State4) -> State4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

#[inline]
fn mid(a: &State4, b: &State4) -> State4 {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2]), 0.5 * (a[3] + b[3])]
}

/// Cell terms (interior cells, `k * nx + j`) and interface fluctuations (face-indexed).
#[derive(Debug, Clone, PartialEq)]
pub struct NonconservativeTerms {
    pub cell_x: Vec<State4>,
    pub cell_y: Vec<State4>,
    pub psi_x: Vec<State4>,
    pub psi_y: Vec<State4>,
}

/// Linear-path, midpoint-rule fluctuations plus in-cell reconstruction jumps.
pub fn nonconservative_terms(
    iv: &InterfaceValues,
    v: &PrimitiveField,
    s: &SplitScalars,
    cfg: &SolverConfig,
) -> NonconservativeTerms {
    let (nx, ny) = (iv.nx, iv.ny);
    let (eps, gamma) = (cfg.epsilon, cfg.gamma);
    let psi_x = iv
        .x_minus
        .iter()
        .zip(&iv.x_plus)
        .map(|(m, p)| b_product(&mid(m, p), &sub(p, m), s, eps, gamma))
        .collect();
    let psi_y = iv
        .y_minus
        .iter()
        .zip(&iv.y_plus)
        .map(|(m, p)| c_product(&mid(m, p), &sub(p, m), s, eps, gamma))
        .collect();
    let mut cell_x = Vec::with_capacity(nx * ny);
    let mut cell_y = Vec::with_capacity(nx * ny);
    for k in 0..ny {
        for j in 0..nx {
            let vc = v.state_at(j as isize, k as isize);
            let jump_x = sub(&iv.x_minus[iv.xi(j + 1, k)], &iv.x_plus[iv.xi(j, k)]);
            let jump_y = sub(&iv.y_minus[iv.yi(j, k + 1)], &iv.y_plus[iv.yi(j, k)]);
            cell_x.push(b_product(&vc, &jump_x, s, eps, gamma));
            cell_y.push(c_product(&vc, &jump_y, s, eps, gamma));
        }
    }
    NonconservativeTerms {
        cell_x,
        cell_y,
        psi_x,
        psi_y,
    }
}

/// Explicit operator from already reconstructed interface values. Ghosts of the result are filled.
pub fn assemble_r_from(
    v: &PrimitiveField,
    iv: &InterfaceValues,
    grid: &GridSpec,
    cfg: &SolverConfig,
    s: &SplitScalars,
) -> Result<(OperatorField, InterfaceSpeeds)> {
    let sp = nonstiff_speeds(iv, s, cfg)?;
    let flux = cu_flux_primitive(iv, &sp);
    let nc = nonconservative_terms(iv, v, s, cfg);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut r = OperatorField::zeros(grid);
    for k in 0..ny {
        for j in 0..nx {
            let (fl, fr) = (iv.xi(j, k), iv.xi(j + 1, k));
            let (gb, gt) = (iv.yi(j, k), iv.yi(j, k + 1));
            let wl = sp.a_plus[fl] / (sp.a_plus[fl] - sp.a_minus[fl]);
            let wr = sp.a_minus[fr] / (sp.a_plus[fr] - sp.a_minus[fr]);
            let wb = sp.b_plus[gb] / (sp.b_plus[gb] - sp.b_minus[gb]);
            let wt = sp.b_minus[gt] / (sp.b_plus[gt] - sp.b_minus[gt]);
            let cell = k * nx + j;
            let out: State4 = std::array::from_fn(|c| {
                let x = flux.x[fr][c] - flux.x[fl][c] - nc.cell_x[cell][c] - wl * nc.psi_x[fl][c]
                    + wr * nc.psi_x[fr][c];
                let y = flux.y[gt][c] - flux.y[gb][c] - nc.cell_y[cell][c] - wb * nc.psi_y[gb][c]
                    + wt * nc.psi_y[gt][c];
                x / grid.dx + y / grid.dy
            });
            r.set_state(j as isize, k as isize, out);
        }
    }
    fill_ghosts(&mut r, grid);
    Ok((r, sp))
}

/// Reconstructs `v` and assembles the explicit operator `R`.
#[allow(non_snake_case)]
pub fn assemble_R(v: &PrimitiveField, grid: &GridSpec, cfg: &SolverConfig, s: &SplitScalars) -> Result<OperatorField> {
    let (_, iv) = reconstruct(v, grid, cfg.theta)?;
    Ok(assemble_r_from(v, &iv, grid, cfg, s)?.0)
}
