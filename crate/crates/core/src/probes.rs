//! Asymptotic-preserving probes: short runs that measure the quantities the low-Mach theory
//! predicts (time step, divergence, pressure spread) plus the branch and conservation checks.

use std::ops::ControlFlow;

use crate::benchmarks::{local_mach, BenchmarkCase};
use crate::config::SolverConfig;
use crate::error::Result;
use crate::integrator::{ap_diagnostics, run, step_dt, DualState, RunSummary, StepEvent};
use crate::nonstiff::split_scalars;
use crate::state::{cons_to_prim, Components, GridSpec, PrimitiveField, ScalarField, State4};

/// Grid, settings and initial state of `case` on an `nx x ny` mesh.
pub fn prepare(case: BenchmarkCase, nx: usize, ny: usize, eps: f64) -> Result<(GridSpec, SolverConfig, DualState)> {
    let grid = case.grid(nx, ny, eps)?;
    let cfg = case.config(eps);
    let state = DualState::from_primitive(case.initial(&grid, eps), &grid, &cfg, 0.0);
    Ok((grid, cfg, state))
}

/// Worst elliptic behaviour seen over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveMonitor {
    pub solves: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl SolveMonitor {
    pub fn record(&mut self, e: &StepEvent) {
        self.solves += 2;
        self.max_iterations = self.max_iterations.max(e.report.elliptic_iterations[0].max(e.report.elliptic_iterations[1]));
        self.max_residual = self.max_residual.max(e.report.elliptic_residuals[0].max(e.report.elliptic_residuals[1]));
    }
}

/// Runs to `t_final` or for `max_steps` steps, whichever comes first.
pub fn run_monitored(
    init: DualState,
    grid: &GridSpec,
    cfg: &SolverConfig,
    t_final: f64,
    max_steps: usize,
    mut each: impl FnMut(&StepEvent),
) -> Result<(RunSummary, SolveMonitor)> {
    let mut mon = SolveMonitor::default();
    let out = run(init, grid, cfg, t_final, &[], |e| {
        mon.record(e);
        each(e);
        if e.step >= max_steps {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok((out, mon))
}

/// Time step the CFL rule picks for the initial data.
pub fn first_step_dt(case: BenchmarkCase, n: usize, eps: f64) -> Result<f64> {
    let (grid, cfg, state) = prepare(case, n, n, eps)?;
    let s = split_scalars(&state.v, eps);
    step_dt(&state.v, &s, &grid, &cfg, 0, 0.0, f64::INFINITY)
}

/// Maximum discrete divergence before the first step and after each of `steps` steps.
pub fn divergence_history(case: BenchmarkCase, n: usize, eps: f64, steps: usize) -> Result<(Vec<f64>, SolveMonitor)> {
    let (grid, cfg, state) = prepare(case, n, n, eps)?;
    let mut hist = vec![ap_diagnostics(&state.v, &grid).0];
    let (_, mon) = run_monitored(state, &grid, &cfg, f64::INFINITY, steps, |e| hist.push(e.report.max_divergence))?;
    Ok((hist, mon))
}

/// `max p - min p` at time `t`.
pub fn pressure_fluctuation(case: BenchmarkCase, n: usize, eps: f64, t: f64) -> Result<(f64, SolveMonitor)> {
    let (grid, cfg, state) = prepare(case, n, n, eps)?;
    let (out, mon) = run_monitored(state, &grid, &cfg, t, usize::MAX, |_| {})?;
    Ok((ap_diagnostics(&out.state.v, &grid).1, mon))
}

#[derive(Debug, Clone)]
pub struct MachProfile {
    /// Local Mach field divided by its own maximum.
    pub normalized: ScalarField,
    pub initial_max: f64,
    pub final_max: f64,
    pub steps: usize,
    pub monitor: SolveMonitor,
}

/// Local Mach number of `case` at `t`, normalized for comparison across Mach numbers.
pub fn mach_profile(case: BenchmarkCase, n: usize, eps: f64, t: f64) -> Result<MachProfile> {
    let (grid, cfg, state) = prepare(case, n, n, eps)?;
    let initial_max = local_mach(&state.v, &grid, cfg.gamma).interior_max();
    let (out, monitor) = run_monitored(state, &grid, &cfg, t, usize::MAX, |_| {})?;
    let mut normalized = local_mach(&out.state.v, &grid, cfg.gamma);
    let final_max = normalized.interior_max();
    normalized.as_mut_slice().iter_mut().for_each(|m| *m /= final_max);
    Ok(MachProfile { normalized, initial_max, final_max, steps: out.steps, monitor })
}

/// Largest interior difference between two fields on the same grid.
pub fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.interior().zip(b.interior()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max |V - V(U)|` over all interior cells and components.
pub fn branch_gap(state: &DualState, grid: &GridSpec, cfg: &SolverConfig) -> Result<f64> {
    let from_u = cons_to_prim(&state.u, grid, cfg.epsilon, cfg.gamma)?;
    let (a, b) = (state.v.components(), from_u.components());
    Ok((0..4).map(|c| max_abs_diff(a[c], b[c])).fold(0.0, f64::max))
}

/// Largest branch gap seen after any of `steps` steps.
pub fn branch_gap_history(case: BenchmarkCase, n: usize, eps: f64, steps: usize) -> Result<f64> {
    let (grid, cfg, state) = prepare(case, n, n, eps)?;
    let mut worst: f64 = 0.0;
    let mut err = None;
    run_monitored(state, &grid, &cfg, f64::INFINITY, steps, |e| match branch_gap(e.state, &grid, &cfg) {
        Ok(g) => worst = worst.max(g),
        Err(x) => err = err.take().or(Some(x)),
    })?;
    err.map_or(Ok(worst), Err)
}

fn totals(state: &DualState, grid: &GridSpec) -> (State4, State4) {
    let mut sum = [0.0; 4];
    let mut abs = [0.0; 4];
    for (c, f) in [&state.u.rho, &state.u.mx, &state.u.my, &state.u.e].into_iter().enumerate() {
        sum[c] = grid.cell_area() * f.interior_sum();
        abs[c] = grid.cell_area() * f.interior().map(f64::abs).sum::<f64>();
    }
    (sum, abs)
}

/// Componentwise drift of the conservative totals after `steps` steps, relative to
/// `max(|sum U0|, sum |U0|)` so that components with zero net total stay meaningful.
pub fn conservation_drift(case: BenchmarkCase, n: usize, eps: f64, steps: usize) -> Result<State4> {
    let (grid, cfg, state) = prepare(case, n, n, eps)?;
    let (s0, a0) = totals(&state, &grid);
    let (out, _) = run_monitored(state, &grid, &cfg, f64::INFINITY, steps, |_| {})?;
    let (s1, _) = totals(&out.state, &grid);
    Ok(std::array::from_fn(|c| (s1[c] - s0[c]).abs() / s0[c].abs().max(a0[c])))
}

#[derive(Debug, Clone)]
pub struct TrackedRun {
    pub grid: GridSpec,
    pub v: PrimitiveField,
    pub steps: usize,
    /// Worst `|mass + outflow - mass0| / mass0` over all steps.
    pub mass_defect: f64,
    pub min_rho: f64,
    pub min_p: f64,
    pub monitor: SolveMonitor,
}

/// Runs `case` to `t`, tracking mass against the accumulated boundary outflow and the
/// smallest density and pressure of the post-processed solution.
pub fn tracked_run(case: BenchmarkCase, nx: usize, ny: usize, eps: f64, t: f64) -> Result<TrackedRun> {
    let (grid, cfg, state) = prepare(case, nx, ny, eps)?;
    let mass = |s: &DualState| grid.cell_area() * s.u.rho.interior_sum();
    let m0 = mass(&state);
    let (mut outflow, mut defect) = (0.0, 0.0f64);
    let (mut min_rho, mut min_p) = (state.v.rho.interior_min(), state.v.p.interior_min());
    let (out, monitor) = run_monitored(state, &grid, &cfg, t, usize::MAX, |e| {
        outflow += e.report.boundary_outflow[0];
        defect = defect.max((mass(e.state) + outflow - m0).abs() / m0);
        min_rho = min_rho.min(e.state.v.rho.interior_min());
        min_p = min_p.min(e.state.v.p.interior_min());
    })?;
    Ok(TrackedRun { grid, v: out.state.v, steps: out.steps, mass_defect: defect, min_rho, min_p, monitor })
}

/// Average of each 2x2 block of a field on a twice finer grid.
pub fn restrict_2x2(fine: &ScalarField, coarse: &GridSpec) -> ScalarField {
    let mut out = ScalarField::zeros(coarse);
    for k in 0..coarse.ny as isize {
        for j in 0..coarse.nx as isize {
            let s = fine.at(2 * j, 2 * k) + fine.at(2 * j + 1, 2 * k) + fine.at(2 * j, 2 * k + 1) + fine.at(2 * j + 1, 2 * k + 1);
            out.set(j, k, 0.25 * s);
        }
    }
    out
}

/// L1 distance between a coarse field and the restriction of a fine one.
pub fn self_convergence_gap(coarse: &ScalarField, coarse_grid: &GridSpec, fine: &ScalarField) -> f64 {
    let r = restrict_2x2(fine, coarse_grid);
    coarse_grid.cell_area() * coarse.interior().zip(r.interior()).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// One line per probe of the low-Mach suite on the Gresho vortex.
pub fn diagnose_report(n: usize, eps_list: &[f64]) -> Result<String> {
    use std::fmt::Write as _;
    let case = BenchmarkCase::Gresho;
    let mut s = format!("# gresho {n}x{n}\n");
    let _ = writeln!(s, "{:>10} {:>12} {:>12} {:>12} {:>12} {:>8}", "eps", "dt0", "div0", "div20/div0", "dp(t=0.2)", "max_it");
    for &eps in eps_list {
        let dt = first_step_dt(case, n, eps)?;
        let (hist, m1) = divergence_history(case, n, eps, 20)?;
        let (dp, m2) = pressure_fluctuation(case, n, eps, 0.2)?;
        let growth = hist.iter().copied().fold(0.0, f64::max) / hist[0];
        let _ = writeln!(
            s,
            "{eps:>10.3e} {dt:>12.5e} {:>12.5e} {growth:>12.4} {dp:>12.5e} {:>8}",
            hist[0],
            m1.max_iterations.max(m2.max_iterations)
        );
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_of_constant_is_constant() {
        let coarse = GridSpec::periodic(4, 4, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let fine = GridSpec::periodic(8, 8, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let f = ScalarField::from_fn(&fine, |x, _| if x < 0.5 { 2.0 } else { 4.0 });
        let r = restrict_2x2(&f, &coarse);
        assert_eq!(r.interior().collect::<Vec<_>>()[..4], [2.0, 2.0, 4.0, 4.0]);
        let c = ScalarField::from_fn(&coarse, |x, _| if x < 0.5 { 2.0 } else { 4.0 });
        assert_eq!(self_convergence_gap(&c, &coarse, &f), 0.0);
    }

    #[test]
    fn first_step_dt_is_positive_and_mach_uniform() {
        let a = first_step_dt(BenchmarkCase::Gresho, 16, 1e-2).unwrap();
        let b = first_step_dt(BenchmarkCase::Gresho, 16, 1e-5).unwrap();
        assert!(a > 0.0 && (a / b - 1.0).abs() < 0.1, "{a} {b}");
    }

    #[test]
    fn open_ended_history_takes_every_step() {
        let (h, mon) = divergence_history(BenchmarkCase::Gresho, 16, 1e-3, 4).unwrap();
        assert_eq!(h.len(), 5);
        assert_eq!(mon.solves, 8);
    }

    #[test]
    fn sonic_branches_agree() {
        assert!(branch_gap_history(BenchmarkCase::Vortex, 16, 1.0, 3).unwrap() <= 1e-13);
    }

    #[test]
    fn periodic_totals_hold() {
        let d = conservation_drift(BenchmarkCase::Gresho, 16, 0.1, 5).unwrap();
        assert!(d.iter().all(|&x| x < 1e-12), "{d:?}");
    }

    #[test]
    fn report_has_one_line_per_eps() {
        let r = diagnose_report(16, &[1e-1, 1e-3]).unwrap();
        assert_eq!(r.lines().count(), 4);
    }
}
