//! Explicit central-upwind operator for the conservative Euler system.

use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::nonstiff::{cu_flux, face_speeds, InterfaceFluxes, InterfaceSpeeds};
use crate::reconstruction::InterfaceValues;
use crate::state::{
    cons_to_prim_point, fill_ghosts, prim_to_cons_point, Axis, Components, GridSpec, OperatorField, State4,
};

/// Speeds built with the full sound speed `c = sqrt(gamma p / rho) / eps`.
pub type ConsInterfaceSpeeds = InterfaceSpeeds;

/// Euler flux of a primitive state.
#[inline]
pub fn flux_from_primitive(v: &State4, eps: f64, gamma: f64, axis: Axis) -> State4 {
    let (rho, u, w, p) = (v[0], v[1], v[2], v[3]);
    let e = prim_to_cons_point(v, eps, gamma)[3];
    let ie2 = 1.0 / (eps * eps);
    match axis {
        Axis::X => [rho * u, rho * u * u + p * ie2, rho * u * w, u * (e + p)],
        Axis::Y => [rho * w, rho * u * w, rho * w * w + p * ie2, w * (e + p)],
    }
}

/// `F(U) = (rho u, rho u^2 + p/eps^2, rho u v, u(E + p))` and its y counterpart.
pub fn conservative_flux(u: &State4, cfg: &SolverConfig, axis: Axis) -> Result<State4> {
    let v = cons_to_prim_point(u, cfg.epsilon, cfg.gamma)
        .map_err(|(rho, p)| SolverError::nonphysical("conservative flux", -1, -1, rho, p))?;
    let ie2 = 1.0 / (cfg.epsilon * cfg.epsilon);
    let (rho, vx, vy, p, e) = (u[0], v[1], v[2], v[3], u[3]);
    Ok(match axis {
        Axis::X => [u[1], rho * vx * vx + p * ie2, rho * vx * vy, vx * (e + p)],
        Axis::Y => [u[2], rho * vx * vy, rho * vy * vy + p * ie2, vy * (e + p)],
    })
}

#[inline]
pub fn full_sound_speed(rho: f64, p: f64, eps: f64, gamma: f64) -> f64 {
    (gamma * p / rho).sqrt() / eps
}

pub fn conservative_speeds(iv: &InterfaceValues, cfg: &SolverConfig) -> Result<ConsInterfaceSpeeds> {
    face_speeds(iv, cfg.delta, |v| {
        let c = full_sound_speed(v[0], v[3], cfg.epsilon, cfg.gamma);
        if c.is_finite() && v[0] > 0.0 && v[3] > 0.0 {
            Ok(c)
        } else {
            Err(SolverError::nonphysical("conservative speeds", -1, -1, v[0], v[3]))
        }
    })
}

/// Interface fluxes with `U^{+-}` taken from the reconstructed primitive values.
pub fn cu_flux_conservative(iv: &InterfaceValues, sp: &ConsInterfaceSpeeds, cfg: &SolverConfig) -> InterfaceFluxes {
    let (eps, gamma) = (cfg.epsilon, cfg.gamma);
    let face = |m: &State4, p: &State4, lo: f64, hi: f64, axis: Axis| {
        let (um, up) = (prim_to_cons_point(m, eps, gamma), prim_to_cons_point(p, eps, gamma));
        let (fm, fp) = (flux_from_primitive(m, eps, gamma, axis), flux_from_primitive(p, eps, gamma, axis));
        cu_flux(lo, hi, &um, &up, &fm, &fp)
    };
    let x = (0..iv.x_minus.len())
        .map(|f| face(&iv.x_minus[f], &iv.x_plus[f], sp.a_minus[f], sp.a_plus[f], Axis::X))
        .collect();
    let y = (0..iv.y_minus.len())
        .map(|f| face(&iv.y_minus[f], &iv.y_plus[f], sp.b_minus[f], sp.b_plus[f], Axis::Y))
        .collect();
    InterfaceFluxes { x, y }
}

/// Result of one evaluation of the conservative operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservativeRhs {
    /// `dU/dt` on interior cells.
    pub rhs: OperatorField,
    /// Net flux out of the domain per unit time, integrated along the boundary.
    pub boundary_flux: State4,
    /// Largest `|a|` or `|b|` over all faces.
    pub max_speed: f64,
}

pub fn assemble_conservative_rhs(iv: &InterfaceValues, grid: &GridSpec, cfg: &SolverConfig) -> Result<ConservativeRhs> {
    let sp = conservative_speeds(iv, cfg)?;
    let flux = cu_flux_conservative(iv, &sp, cfg);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut rhs = OperatorField::zeros(grid);
    for k in 0..ny {
        for j in 0..nx {
            let (fl, fr) = (iv.xi(j, k), iv.xi(j + 1, k));
            let (gb, gt) = (iv.yi(j, k), iv.yi(j, k + 1));
            let d: State4 = std::array::from_fn(|c| {
                -(flux.x[fr][c] - flux.x[fl][c]) / grid.dx - (flux.y[gt][c] - flux.y[gb][c]) / grid.dy
            });
            rhs.set_state(j as isize, k as isize, d);
        }
    }
    fill_ghosts(&mut rhs, grid);
    let mut boundary_flux = [0.0; 4];
    for k in 0..ny {
        let (l, r) = (&flux.x[iv.xi(0, k)], &flux.x[iv.xi(nx, k)]);
        for c in 0..4 {
            boundary_flux[c] += (r[c] - l[c]) * grid.dy;
        }
    }
    for j in 0..nx {
        let (b, t) = (&flux.y[iv.yi(j, 0)], &flux.y[iv.yi(j, ny)]);
        for c in 0..4 {
            boundary_flux[c] += (t[c] - b[c]) * grid.dx;
        }
    }
    Ok(ConservativeRhs {
        rhs,
        boundary_flux,
        max_speed: sp.max_abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruction::reconstruct;
    use crate::state::PrimitiveField;
    use proptest::prelude::*;

    fn cfg(eps: f64, gamma: f64) -> SolverConfig {
        SolverConfig { epsilon: eps, gamma, ..SolverConfig::default() }
    }

    fn close4(a: &State4, b: &State4, tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1.0))
    }

    #[test]
    fn flux_examples() {
        let c = cfg(1.0, 1.4);
        let f = conservative_flux(&prim_to_cons_point(&[1.0, 0.0, 0.0, 1.0], 1.0, 1.4), &c, Axis::X).unwrap();
        assert!(close4(&f, &[0.0, 1.0, 0.0, 0.0], 1e-15));
        let f = conservative_flux(&prim_to_cons_point(&[1.0, 2.0, 1.0, 1.0], 1.0, 1.4), &c, Axis::X).unwrap();
        assert!(close4(&f, &[2.0, 5.0, 2.0, 12.0], 1e-14));
        let c = cfg(0.5, 1.4);
        let f = conservative_flux(&prim_to_cons_point(&[1.0, 2.0, 1.0, 1.0], 0.5, 1.4), &c, Axis::X).unwrap();
        assert!(close4(&f, &[2.0, 8.0, 2.0, 8.25], 1e-14));
        assert!(close4(&flux_from_primitive(&[1.0, 2.0, 1.0, 1.0], 0.5, 1.4, Axis::X), &f, 1e-14));
        assert!(conservative_flux(&[1.0, 0.0, 0.0, -1.0], &c, Axis::X).is_err());
    }

    #[test]
    fn y_flux_mirrors_x_flux() {
        let v = [1.2, 0.4, -0.7, 0.9];
        let s = [1.2, -0.7, 0.4, 0.9];
        let fx = flux_from_primitive(&s, 0.3, 1.4, Axis::X);
        let gy = flux_from_primitive(&v, 0.3, 1.4, Axis::Y);
        assert!(close4(&[gy[0], gy[2], gy[1], gy[3]], &fx, 1e-15));
    }

    #[test]
    fn speed_examples() {
        assert_eq!(full_sound_speed(1.0, 1.0, 1.0, 1.0), 1.0);
        assert!((full_sound_speed(1.0, 1.0, 0.1, 1.0) - 10.0).abs() < 1e-14);
        let grid = GridSpec::periodic(4, 4, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let v = PrimitiveField::uniform(&grid, [1.0, 0.0, 0.0, 1.0]);
        let (_, iv) = reconstruct(&v, &grid, 1.3).unwrap();
        for (eps, a) in [(1.0, 1.0), (0.1, 10.0)] {
            let sp = conservative_speeds(&iv, &cfg(eps, 1.0)).unwrap();
            assert!(sp.a_minus.iter().all(|&x| (x + a).abs() < 1e-13));
            assert!(sp.a_plus.iter().all(|&x| (x - a).abs() < 1e-13));
        }
        let v = PrimitiveField::uniform(&grid, [1.0, 5.0, 0.0, 1.0]);
        let (_, iv) = reconstruct(&v, &grid, 1.3).unwrap();
        let sp = conservative_speeds(&iv, &cfg(1.0, 1.0)).unwrap();
        assert!(sp.a_minus.iter().all(|&x| x == -1e-15));
        assert!(sp.a_plus.iter().all(|&x| x == 6.0));
    }

    #[test]
    fn consistent_flux_for_equal_states() {
        let v = [1.1, 0.3, -0.2, 0.8];
        let u = prim_to_cons_point(&v, 0.4, 1.4);
        let f = flux_from_primitive(&v, 0.4, 1.4, Axis::X);
        assert!(close4(&cu_flux(-3.0, 2.0, &u, &u, &f, &f), &f, 1e-15));
    }

    #[test]
    fn constant_state_and_periodic_telescoping() {
        let grid = GridSpec::periodic(12, 10, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let c = cfg(0.7, 1.4);
        let v = PrimitiveField::uniform(&grid, [1.0, 0.3, -0.1, 1.0]);
        let (_, iv) = reconstruct(&v, &grid, 1.3).unwrap();
        let out = assemble_conservative_rhs(&iv, &grid, &c).unwrap();
        assert!(out.rhs.comps.iter().all(|f| f.interior().all(|x| x.abs() < 1e-13)));

        let tau = std::f64::consts::TAU;
        let v = PrimitiveField::from_fn(&grid, |x, y| {
            [1.0 + 0.2 * (tau * x).sin(), (tau * y).cos(), 0.5 * (tau * x).sin(), 1.0 + 0.1 * (tau * (x + y)).cos()]
        });
        let (_, iv) = reconstruct(&v, &grid, 1.3).unwrap();
        let out = assemble_conservative_rhs(&iv, &grid, &c).unwrap();
        for comp in out.rhs.components() {
            let scale: f64 = comp.interior().map(f64::abs).sum();
            assert!(comp.interior_sum().abs() <= 1e-13 * scale.max(1.0));
        }
        assert_eq!(out.boundary_flux, [0.0; 4]);
    }

    fn rhs_error(n: usize) -> f64 {
        let tau = std::f64::consts::TAU;
        let grid = GridSpec::periodic(n, n, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let c = cfg(1.0, 1.4);
        // Pure advection of density at constant velocity and pressure: -div F reduces to -(u rho_x + v rho_y).
        let rho = |x: f64, y: f64| 1.0 + 0.2 * (tau * x).sin() * (tau * y).sin();
        let v = PrimitiveField::from_fn(&grid, |x, y| [rho(x, y), 0.5, 0.25, 1.0]);
        let (_, iv) = reconstruct(&v, &grid, 1.3).unwrap();
        let out = assemble_conservative_rhs(&iv, &grid, &c).unwrap();
        let mut err = 0.0;
        for k in 0..n as isize {
            for j in 0..n as isize {
                let (x, y) = (grid.xc(j), grid.yc(k));
                let rx = 0.2 * tau * (tau * x).cos() * (tau * y).sin();
                let ry = 0.2 * tau * (tau * x).sin() * (tau * y).cos();
                err += (out.rhs.comps[0].at(j, k) + 0.5 * rx + 0.25 * ry).abs() * grid.cell_area();
            }
        }
        err
    }

    #[test]
    fn rhs_is_second_order() {
        let ratio = rhs_error(64) / rhs_error(128);
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn conservative_antidiffusion_is_bounded(
            rm in 0.1f64..3.0, rp in 0.1f64..3.0, um in -2.0f64..2.0, up in -2.0f64..2.0,
            pm in 0.1f64..3.0, pp in 0.1f64..3.0,
        ) {
            let (eps, gamma) = (0.5, 1.4);
            let vm = [rm, um, 0.2, pm];
            let vp = [rp, up, -0.1, pp];
            let cm = full_sound_speed(rm, pm, eps, gamma);
            let cp = full_sound_speed(rp, pp, eps, gamma);
            let (lo, hi) = crate::nonstiff::one_sided_speeds(um, cm, up, cp, 1e-15);
            let (wm, wp) = (prim_to_cons_point(&vm, eps, gamma), prim_to_cons_point(&vp, eps, gamma));
            let fm = flux_from_primitive(&vm, eps, gamma, Axis::X);
            let fp = flux_from_primitive(&vp, eps, gamma, Axis::X);
            let dw = crate::nonstiff::antidiffusion(lo, hi, &wm, &wp, &fm, &fp);
            for c in 0..4 {
                let jump = wp[c] - wm[c];
                prop_assert!(dw[c] == 0.0 || (dw[c].signum() == jump.signum() && dw[c].abs() <= jump.abs() * (1.0 + 1e-12)));
            }
        }
    }
}
