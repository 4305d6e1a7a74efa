//! Grid geometry, the primitive and conservative field representations,
//! variable transforms and ghost-cell boundary handling.

use crate::error::{Result, SolverError};

/// Ghost-layer depth on every side of the grid.
pub const GHOST: usize = 2;

/// A four-component point state, either `(rho, u, v, p)` or `(rho, rho u, rho v, E)`.
pub type State4 = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Zero-order extrapolation of the nearest interior cell.
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Uniform Cartesian grid with a two-cell ghost frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub dx: f64,
    pub dy: f64,
    pub bc_x: Boundary,
    pub bc_y: Boundary,
}

impl GridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        (x_lo, x_hi): (f64, f64),
        (y_lo, y_hi): (f64, f64),
        bc_x: Boundary,
        bc_y: Boundary,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(SolverError::InvalidConfig(format!(
                "grid needs at least 2x2 cells, got {nx}x{ny}"
            )));
        }
        if !(x_hi > x_lo) || !(y_hi > y_lo) {
            return Err(SolverError::InvalidConfig(format!(
                "empty domain [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]"
            )));
        }
        Ok(GridSpec {
            nx,
            ny,
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            dx: (x_hi - x_lo) / nx as f64,
            dy: (y_hi - y_lo) / ny as f64,
            bc_x,
            bc_y,
        })
    }

    pub fn periodic(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        Self::new(nx, ny, x, y, Boundary::Periodic, Boundary::Periodic)
    }

    pub fn ghost(&self) -> usize {
        GHOST
    }

    /// Row length of the padded storage.
    #[inline]
    pub fn pitch(&self) -> usize {
        self.nx + 2 * GHOST
    }

    #[inline]
    pub fn padded_len(&self) -> usize {
        self.pitch() * (self.ny + 2 * GHOST)
    }

    /// Storage index of cell `(j, k)`; ghosts use `-2..0` and `n..n+2`.
    #[inline]
    pub fn idx(&self, j: isize, k: isize) -> usize {
        debug_assert!(j >= -(GHOST as isize) && j < (self.nx + GHOST) as isize);
        debug_assert!(k >= -(GHOST as isize) && k < (self.ny + GHOST) as isize);
        (k + GHOST as isize) as usize * self.pitch() + (j + GHOST as isize) as usize
    }

    #[inline]
    pub fn xc(&self, j: isize) -> f64 {
        self.x_lo + (j as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn yc(&self, k: isize) -> f64 {
        self.y_lo + (k as f64 + 0.5) * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx,
            Axis::Y => self.dy,
        }
    }
}

/// Scalar cell averages on the ghost-padded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        ScalarField {
            nx: grid.nx,
            ny: grid.ny,
            data: vec![value; grid.padded_len()],
        }
    }

    /// Samples `f` at interior cell centers; ghosts are left at zero.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for k in 0..grid.ny as isize {
            for j in 0..grid.nx as isize {
                let i = grid.idx(j, k);
                field.data[i] = f(grid.xc(j), grid.yc(k));
            }
        }
        field
    }

    #[inline]
    fn pitch(&self) -> usize {
        self.nx + 2 * GHOST
    }

    #[inline]
    fn index(&self, j: isize, k: isize) -> usize {
        (k + GHOST as isize) as usize * self.pitch() + (j + GHOST as isize) as usize
    }

    #[inline]
    pub fn at(&self, j: isize, k: isize) -> f64 {
        self.data[self.index(j, k)]
    }

    #[inline]
    pub fn set(&mut self, j: isize, k: isize, value: f64) {
        let i = self.index(j, k);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Interior values in k-major, then j order.
    pub fn interior(&self) -> impl Iterator<Item = f64> + '_ {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        (0..ny).flat_map(move |k| (0..nx).map(move |j| self.at(j, k)))
    }

    pub fn interior_max(&self) -> f64 {
        self.interior().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn interior_min(&self) -> f64 {
        self.interior().fold(f64::INFINITY, f64::min)
    }

    pub fn interior_sum(&self) -> f64 {
        self.interior().sum()
    }

    pub fn interior_abs_max(&self) -> f64 {
        self.interior().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn interior_to_vec(&self) -> Vec<f64> {
        self.interior().collect()
    }

    /// Overwrites the interior from a k-major buffer of length `nx * ny`.
    pub fn set_interior(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.nx * self.ny);
        for k in 0..self.ny {
            let start = self.index(0, k as isize);
            self.data[start..start + self.nx].copy_from_slice(&values[k * self.nx..(k + 1) * self.nx]);
        }
    }

    pub fn fill_ghosts(&mut self, grid: &GridSpec) {
        debug_assert_eq!((self.nx, self.ny), (grid.nx, grid.ny));
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let g = GHOST as isize;
        for k in 0..ny {
            for layer in 1..=g {
                let (left_src, right_src) = match grid.bc_x {
                    Boundary::Periodic => (nx - layer, layer - 1),
                    Boundary::Outflow => (0, nx - 1),
                };
                let lv = self.at(left_src, k);
                let rv = self.at(right_src, k);
                self.set(-layer, k, lv);
                self.set(nx - 1 + layer, k, rv);
            }
        }
        // Full padded rows so the corners are consistent with both directions.
        for layer in 1..=g {
            let (bottom_src, top_src) = match grid.bc_y {
                Boundary::Periodic => (ny - layer, layer - 1),
                Boundary::Outflow => (0, ny - 1),
            };
            for j in -g..nx + g {
                let bv = self.at(j, bottom_src);
                let tv = self.at(j, top_src);
                self.set(j, -layer, bv);
                self.set(j, ny - 1 + layer, tv);
            }
        }
    }
}

/// Fields built from four scalar components.
pub trait Components {
    fn components(&self) -> [&ScalarField; 4];
    fn components_mut(&mut self) -> [&mut ScalarField; 4];

    #[inline]
    fn state_at(&self, j: isize, k: isize) -> State4 {
        let c = self.components();
        [c[0].at(j, k), c[1].at(j, k), c[2].at(j, k), c[3].at(j, k)]
    }

    #[inline]
    fn set_state(&mut self, j: isize, k: isize, s: State4) {
        for (field, value) in self.components_mut().into_iter().zip(s) {
            field.set(j, k, value);
        }
    }

    /// Componentwise sum over interior cells.
    fn interior_sums(&self) -> State4 {
        let c = self.components();
        [
            c[0].interior_sum(),
            c[1].interior_sum(),
            c[2].interior_sum(),
            c[3].interior_sum(),
        ]
    }
}

/// Fills the ghost layers of every component.
pub fn fill_ghosts<F: Components>(field: &mut F, grid: &GridSpec) {
    for c in field.components_mut() {
        c.fill_ghosts(grid);
    }
}

/// Cell averages of `(rho, u, v, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveField {
    pub rho: ScalarField,
    pub u: ScalarField,
    pub v: ScalarField,
    pub p: ScalarField,
}

/// Cell averages of `(rho, rho u, rho v, E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservativeField {
    pub rho: ScalarField,
    pub mx: ScalarField,
    pub my: ScalarField,
    pub e: ScalarField,
}

impl PrimitiveField {
    pub fn zeros(grid: &GridSpec) -> Self {
        PrimitiveField {
            rho: ScalarField::zeros(grid),
            u: ScalarField::zeros(grid),
            v: ScalarField::zeros(grid),
            p: ScalarField::zeros(grid),
        }
    }

    pub fn uniform(grid: &GridSpec, s: State4) -> Self {
        PrimitiveField {
            rho: ScalarField::constant(grid, s[0]),
            u: ScalarField::constant(grid, s[1]),
            v: ScalarField::constant(grid, s[2]),
            p: ScalarField::constant(grid, s[3]),
        }
    }

    /// Midpoint sampling of a pointwise state; ghosts are filled.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> State4) -> Self {
        let mut field = Self::zeros(grid);
        for k in 0..grid.ny as isize {
            for j in 0..grid.nx as isize {
                field.set_state(j, k, f(grid.xc(j), grid.yc(k)));
            }
        }
        fill_ghosts(&mut field, grid);
        field
    }

    /// Checks positivity of density and pressure and finiteness on interior cells.
    pub fn check_physical(&self, context: &'static str) -> Result<()> {
        let (nx, ny) = self.rho.dims();
        for k in 0..ny as isize {
            for j in 0..nx as isize {
                let s = self.state_at(j, k);
                if !(s[0] > 0.0 && s[3] > 0.0) || !s.iter().all(|x| x.is_finite()) {
                    return Err(SolverError::nonphysical(context, j, k, s[0], s[3]));
                }
            }
        }
        Ok(())
    }
}

impl ConservativeField {
    pub fn zeros(grid: &GridSpec) -> Self {
        ConservativeField {
            rho: ScalarField::zeros(grid),
            mx: ScalarField::zeros(grid),
            my: ScalarField::zeros(grid),
            e: ScalarField::zeros(grid),
        }
    }
}

impl Components for PrimitiveField {
    fn components(&self) -> [&ScalarField; 4] {
        [&self.rho, &self.u, &self.v, &self.p]
    }
    fn components_mut(&mut self) -> [&mut ScalarField; 4] {
        [&mut self.rho, &mut self.u, &mut self.v, &mut self.p]
    }
}

impl Components for ConservativeField {
    fn components(&self) -> [&ScalarField; 4] {
        [&self.rho, &self.mx, &self.my, &self.e]
    }
    fn components_mut(&mut self) -> [&mut ScalarField; 4] {
        [&mut self.rho, &mut self.mx, &mut self.my, &mut self.e]
    }
}

/// Generic four-component cell field, used for operator values and right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorField {
    pub comps: [ScalarField; 4],
}

impl OperatorField {
    pub fn zeros(grid: &GridSpec) -> Self {
        OperatorField {
            comps: std::array::from_fn(|_| ScalarField::zeros(grid)),
        }
    }
}

impl Components for OperatorField {
    fn components(&self) -> [&ScalarField; 4] {
        let [a, b, c, d] = &self.comps;
        [a, b, c, d]
    }
    fn components_mut(&mut self) -> [&mut ScalarField; 4] {
        let [a, b, c, d] = &mut self.comps;
        [a, b, c, d]
    }
}

/// Total energy `E = p/(gamma-1) + eps^2/2 rho (u^2 + v^2)`.
#[inline]
pub fn total_energy(v: &State4, eps: f64, gamma: f64) -> f64 {
    v[3] / (gamma - 1.0) + 0.5 * eps * eps * v[0] * (v[1] * v[1] + v[2] * v[2])
}

#[inline]
pub fn prim_to_cons_point(v: &State4, eps: f64, gamma: f64) -> State4 {
    [v[0], v[0] * v[1], v[0] * v[2], total_energy(v, eps, gamma)]
}

/// Inverse transform; fails on non-positive density or recovered pressure.
#[inline]
pub fn cons_to_prim_point(c: &State4, eps: f64, gamma: f64) -> std::result::Result<State4, (f64, f64)> {
    let rho = c[0];
    if !(rho > 0.0) || !rho.is_finite() {
        return Err((rho, f64::NAN));
    }
    let u = c[1] / rho;
    let v = c[2] / rho;
    let p = (gamma - 1.0) * (c[3] - 0.5 * eps * eps * rho * (u * u + v * v));
    if !(p > 0.0) || !p.is_finite() || !u.is_finite() || !v.is_finite() {
        return Err((rho, p));
    }
    Ok([rho, u, v, p])
}

/// Converts primitive to conservative averages on every cell, ghosts included.
pub fn prim_to_cons(v: &PrimitiveField, eps: f64, gamma: f64) -> ConservativeField {
    let mut out = ConservativeField {
        rho: v.rho.clone(),
        mx: v.u.clone(),
        my: v.v.clone(),
        e: v.p.clone(),
    };
    let n = v.rho.as_slice().len();
    for i in 0..n {
        let s = [
            v.rho.as_slice()[i],
            v.u.as_slice()[i],
            v.v.as_slice()[i],
            v.p.as_slice()[i],
        ];
        let c = prim_to_cons_point(&s, eps, gamma);
        out.mx.as_mut_slice()[i] = c[1];
        out.my.as_mut_slice()[i] = c[2];
        out.e.as_mut_slice()[i] = c[3];
    }
    out
}

/// Converts conservative to primitive averages on interior cells and refills ghosts.
pub fn cons_to_prim(u: &ConservativeField, grid: &GridSpec, eps: f64, gamma: f64) -> Result<PrimitiveField> {
    let mut out = PrimitiveField::zeros(grid);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let c = u.state_at(j, k);
            let v = cons_to_prim_point(&c, eps, gamma)
                .map_err(|(rho, p)| SolverError::nonphysical("cons_to_prim", j, k, rho, p))?;
            out.set_state(j, k, v);
        }
    }
    fill_ghosts(&mut out, grid);
    Ok(out)
}
