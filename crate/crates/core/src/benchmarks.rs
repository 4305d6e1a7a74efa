//! Initial data, exact solutions and diagnostics for the standard test problems.

use std::f64::consts::PI;

use crate::config::{DtOverride, SolverConfig};
use crate::error::{Result, SolverError};
use crate::state::{fill_ghosts, Boundary, Components, GridSpec, PrimitiveField, ScalarField, State4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkCase {
    /// Isentropic vortex advected diagonally; exact solution known.
    Vortex,
    /// Stationary Gresho vortex.
    Gresho,
    /// Acoustic wave crossing two density layers.
    Baroclinic,
    DoubleShear,
    /// Radial Riemann problem with free boundaries.
    Explosion,
}

pub const ALL_CASES: [BenchmarkCase; 5] = [
    BenchmarkCase::Vortex,
    BenchmarkCase::Gresho,
    BenchmarkCase::Baroclinic,
    BenchmarkCase::DoubleShear,
    BenchmarkCase::Explosion,
];

/// Mach number the baroclinic problem is posed for.
pub const BAROCLINIC_EPS: f64 = 0.05;

impl BenchmarkCase {
    pub fn from_name(name: &str) -> Result<Self> {
        ALL_CASES
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| SolverError::InvalidConfig(format!("unknown case `{name}`")))
    }

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkCase::Vortex => "vortex",
            BenchmarkCase::Gresho => "gresho",
            BenchmarkCase::Baroclinic => "baroclinic",
            BenchmarkCase::DoubleShear => "double-shear",
            BenchmarkCase::Explosion => "explosion",
        }
    }

    pub fn gamma(self) -> f64 {
        match self {
            BenchmarkCase::Vortex => 2.0,
            _ => 1.4,
        }
    }

    pub fn default_cfl(self) -> f64 {
        match self {
            BenchmarkCase::DoubleShear => 0.1,
            _ => 0.475,
        }
    }

    pub fn domain(self, eps: f64) -> ((f64, f64), (f64, f64)) {
        match self {
            BenchmarkCase::Vortex => ((-10.0, 10.0), (-10.0, 10.0)),
            BenchmarkCase::Gresho => ((0.0, 1.0), (0.0, 1.0)),
            BenchmarkCase::Baroclinic => ((-1.0 / eps, 1.0 / eps), (0.0, 2.0 / (5.0 * eps))),
            BenchmarkCase::DoubleShear => ((0.0, 2.0 * PI), (0.0, 2.0 * PI)),
            BenchmarkCase::Explosion => ((-1.0, 1.0), (-1.0, 1.0)),
        }
    }

    pub fn boundary(self) -> Boundary {
        match self {
            BenchmarkCase::Explosion => Boundary::Outflow,
            _ => Boundary::Periodic,
        }
    }

    pub fn grid(self, nx: usize, ny: usize, eps: f64) -> Result<GridSpec> {
        let (x, y) = self.domain(eps);
        GridSpec::new(nx, ny, x, y, self.boundary(), self.boundary())
    }

    pub fn default_t_final(self, eps: f64) -> f64 {
        match self {
            BenchmarkCase::Vortex => 0.1,
            BenchmarkCase::Gresho => 1.0,
            BenchmarkCase::Baroclinic => 20.0,
            BenchmarkCase::DoubleShear => 10.0,
            BenchmarkCase::Explosion => {
                if eps >= 0.95 {
                    0.25
                } else if eps >= 0.75 {
                    0.2
                } else if eps >= 0.45 {
                    0.15
                } else {
                    0.08
                }
            }
        }
    }

    /// Start-up time steps for the explosion at moderate Mach numbers, where the
    /// modified sound speed alone admits too large a step.
    pub fn dt_override(self, eps: f64) -> Option<DtOverride> {
        match self {
            BenchmarkCase::Explosion if eps < 0.75 => Some(DtOverride { steps: 10, dt: 1e-4 }),
            _ => None,
        }
    }

    /// Solver settings for this case at the given Mach number.
    pub fn config(self, eps: f64) -> SolverConfig {
        let mut cfg = SolverConfig::default().with_epsilon(eps).with_gamma(self.gamma()).with_cfl(self.default_cfl());
        cfg.dt_override = self.dt_override(eps);
        cfg
    }

    /// Cell averages by midpoint evaluation.
    pub fn initial(self, grid: &GridSpec, eps: f64) -> PrimitiveField {
        match self {
            BenchmarkCase::Vortex => init_vortex(grid, eps),
            BenchmarkCase::Gresho => init_gresho(grid, eps),
            BenchmarkCase::Baroclinic => PrimitiveField::from_fn(grid, |x, y| baroclinic_point(x, y, eps, self.gamma())),
            BenchmarkCase::DoubleShear => init_double_shear(grid),
            BenchmarkCase::Explosion => init_explosion(grid),
        }
    }

    pub fn has_exact(self) -> bool {
        matches!(self, BenchmarkCase::Vortex | BenchmarkCase::Gresho)
    }

    /// Exact cell averages at time `t`, where known.
    pub fn exact(self, grid: &GridSpec, eps: f64, t: f64) -> Option<PrimitiveField> {
        match self {
            BenchmarkCase::Vortex => Some(vortex_exact(grid, eps, t)),
            BenchmarkCase::Gresho => Some(cell_averages(grid, |x, y| gresho_point(x, y, eps))),
            _ => None,
        }
    }
}

fn wrap(x: f64, lo: f64, hi: f64) -> f64 {
    (x - lo).rem_euclid(hi - lo) + lo
}

/// Vortex state at `(x, y)` and time `t`, with `gamma = 2`.
pub fn vortex_point(x: f64, y: f64, t: f64, eps: f64) -> State4 {
    let gamma = BenchmarkCase::Vortex.gamma();
    let xr = wrap(x - t, -10.0, 10.0);
    let yr = wrap(y - t, -10.0, 10.0);
    let r2 = xr * xr + yr * yr;
    let rho = 1.0 - eps * eps / (16.0 * PI * PI) * (1.0 - r2).exp();
    let g = eps / (2.0 * PI) * (0.5 * (1.0 - r2)).exp();
    let u = 1.0 - yr * g;
    let v = 1.0 + xr * g;
    let e = 1.0 + eps * eps * (rho * rho + 0.5 * rho * (u * u + v * v));
    let p = (gamma - 1.0) * (e - 0.5 * eps * eps * rho * (u * u + v * v));
    [rho, u, v, p]
}

pub fn init_vortex(grid: &GridSpec, eps: f64) -> PrimitiveField {
    PrimitiveField::from_fn(grid, |x, y| vortex_point(x, y, 0.0, eps))
}

/// Exact cell averages of the vortex at time `t`.
pub fn vortex_exact(grid: &GridSpec, eps: f64, t: f64) -> PrimitiveField {
    cell_averages(grid, |x, y| vortex_point(x, y, t, eps))
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Cell averages of `f` by 4x4 Gauss-Legendre quadrature; ghosts filled.
pub fn cell_averages(grid: &GridSpec, f: impl Fn(f64, f64) -> State4) -> PrimitiveField {
    let mut out = PrimitiveField::zeros(grid);
    let (hx, hy) = (0.5 * grid.dx, 0.5 * grid.dy);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let (xc, yc) = (grid.xc(j), grid.yc(k));
            let mut acc = [0.0; 4];
            for (sy, wy) in GAUSS4 {
                for (sx, wx) in GAUSS4 {
                    let q = f(xc + sx * hx, yc + sy * hy);
                    for c in 0..4 {
                        acc[c] += 0.25 * wx * wy * q[c];
                    }
                }
            }
            out.set_state(j, k, acc);
        }
    }
    fill_ghosts(&mut out, grid);
    out
}

pub fn gresho_psi(r: f64) -> f64 {
    if r < 0.2 {
        5.0 * r
    } else if r < 0.4 {
        2.0 - 5.0 * r
    } else {
        0.0
    }
}

pub fn gresho_pressure(r: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    if r < 0.2 {
        1.0 + 12.5 * e2 * r * r
    } else if r < 0.4 {
        1.0 + e2 * (4.0 * (5.0 * r).ln() + 4.0 - 20.0 * r + 12.5 * r * r)
    } else {
        1.0 + e2 * (4.0 * 2f64.ln() - 2.0)
    }
}

pub fn gresho_point(x: f64, y: f64, eps: f64) -> State4 {
    let (xr, yr) = (x - 0.5, y - 0.5);
    let r = xr.hypot(yr);
    if r == 0.0 {
        return [1.0, 0.0, 0.0, gresho_pressure(0.0, eps)];
    }
    let psi = gresho_psi(r);
    [1.0, -yr / r * psi, xr / r * psi, gresho_pressure(r, eps)]
}

pub fn init_gresho(grid: &GridSpec, eps: f64) -> PrimitiveField {
    PrimitiveField::from_fn(grid, |x, y| gresho_point(x, y, eps))
}

pub fn baroclinic_point(x: f64, y: f64, eps: f64, gamma: f64) -> State4 {
    let c = 1.0 + (eps * PI * x).cos();
    let layer = if y <= 1.0 / (5.0 * eps) { 0.0 } else { 1.8 };
    let rho = 1.0 + eps / 2000.0 * c + 4.5 * eps * y - layer;
    [rho, 0.5 * gamma.sqrt() * c, 0.0, 1.0 + 0.5 * eps * gamma * c]
}

/// Baroclinic problem on an `nx x ny` mesh of its own domain.
pub fn init_baroclinic(nx: usize, ny: usize, eps: f64) -> Result<(GridSpec, PrimitiveField)> {
    let case = BenchmarkCase::Baroclinic;
    let grid = case.grid(nx, ny, eps)?;
    let v = PrimitiveField::from_fn(&grid, |x, y| baroclinic_point(x, y, eps, case.gamma()));
    Ok((grid, v))
}

pub fn double_shear_point(x: f64, y: f64) -> State4 {
    let u = if y <= PI { (15.0 * (y / PI - 0.5)).tanh() } else { (15.0 * (1.5 - y / PI)).tanh() };
    [PI / 15.0, u, 0.05 * x.sin(), 1.0 / BenchmarkCase::DoubleShear.gamma()]
}

pub fn init_double_shear(grid: &GridSpec) -> PrimitiveField {
    PrimitiveField::from_fn(grid, |x, y| double_shear_point(x, y))
}

pub fn explosion_point(x: f64, y: f64) -> State4 {
    if x.hypot(y) < 0.4 {
        [1.0, 0.0, 0.0, 1.0]
    } else {
        [0.125, 0.0, 0.0, 0.1]
    }
}

pub fn init_explosion(grid: &GridSpec) -> PrimitiveField {
    PrimitiveField::from_fn(grid, explosion_point)
}

/// Local Mach number `|u| / sqrt(gamma)`.
pub fn local_mach(v: &PrimitiveField, grid: &GridSpec, gamma: f64) -> ScalarField {
    let mut m = ScalarField::zeros(grid);
    let s = 1.0 / gamma.sqrt();
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            m.set(j, k, v.u.at(j, k).hypot(v.v.at(j, k)) * s);
        }
    }
    m.fill_ghosts(grid);
    m
}

/// `v_x - u_y` by central differences; expects filled ghosts.
pub fn vorticity(v: &PrimitiveField, grid: &GridSpec) -> ScalarField {
    let mut w = ScalarField::zeros(grid);
    let (sx, sy) = (0.5 / grid.dx, 0.5 / grid.dy);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let vx = (v.v.at(j + 1, k) - v.v.at(j - 1, k)) * sx;
            let uy = (v.u.at(j, k + 1) - v.u.at(j, k - 1)) * sy;
            w.set(j, k, vx - uy);
        }
    }
    w.fill_ghosts(grid);
    w
}
