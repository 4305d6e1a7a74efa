//! Two-stage semi-implicit deferred-correction step for the dual primitive/conservative
//! formulation, the CFL rule and the Mach-dependent post-processing.

use std::ops::ControlFlow;

use crate::config::{Order, SolverConfig};
use crate::conservative::{assemble_conservative_rhs, full_sound_speed};
use crate::elliptic::{assemble_stage1_system, assemble_stage2_system, solve_helmholtz, SolveStats};
use crate::error::{Result, SolverError};
use crate::nonstiff::{assemble_r_from, modified_sound_speed, split_scalars, SplitScalars};
use crate::reconstruction::reconstruct;
use crate::state::{
    cons_to_prim, fill_ghosts, prim_to_cons, Components, ConservativeField, GridSpec, OperatorField, PrimitiveField,
    ScalarField, State4,
};
use crate::stiff::{assemble_L, central_gradient, discrete_divergence, StiffScalars};

/// Primitive and conservative solutions evolved side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub v: PrimitiveField,
    pub u: ConservativeField,
    pub t: f64,
}

impl DualState {
    pub fn from_primitive(mut v: PrimitiveField, grid: &GridSpec, cfg: &SolverConfig, t: f64) -> Self {
        fill_ghosts(&mut v, grid);
        let u = prim_to_cons(&v, cfg.epsilon, cfg.gamma);
        DualState { v, u, t }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Iterations of the stage-one and stage-two pressure solves (second entry 0 in first-order mode).
    pub elliptic_iterations: [usize; 2],
    pub elliptic_residuals: [f64; 2],
    /// Max of the modified sound speed over cells at the start of the step.
    pub max_ctilde: f64,
    /// Max of the full sound speed over cells at the start of the step.
    pub max_c: f64,
    /// Max `|div u|` of the new primitive state.
    pub max_divergence: f64,
    /// `max p - min p` of the new primitive state.
    pub pressure_fluctuation: f64,
    /// Amount of each conserved quantity that left the domain during the step.
    pub boundary_outflow: State4,
}

/// Mach-dependent weight of the primitive solution: 1 at `eps -> 0`, 0 at `eps = 1`.
pub fn switching_function(eps: f64, cfg: &SolverConfig) -> f64 {
    let (e0, e1, a) = (cfg.eps0, cfg.eps1, cfg.alpha);
    if eps <= e0 {
        1.0 - eps.powf(a)
    } else if eps < e1 {
        let q = (eps - e0) / (e1 - e0);
        let bump = (1.0 - 1.0 / (1.0 - q * q)).exp();
        bump * ((1.0 - e0.powf(a)) - (1.0 - e1).powf(a)) + (1.0 - e1).powf(a)
    } else {
        (1.0 - eps).powf(a)
    }
}

/// CFL step `K min(dx / max(|u| + c~), dy / max(|v| + c~))` over interior cells.
pub fn compute_dt(v: &PrimitiveField, s: &SplitScalars, grid: &GridSpec, cfg: &SolverConfig) -> Result<f64> {
    let (mut ax, mut ay) = (0.0f64, 0.0f64);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let st = v.state_at(j, k);
            let c = modified_sound_speed(st[0], st[3], s, cfg.epsilon, cfg.gamma)
                .map_err(|_| SolverError::nonphysical("time step", j, k, st[0], st[3]))?;
            ax = ax.max(st[1].abs() + c);
            ay = ay.max(st[2].abs() + c);
        }
    }
    Ok(cfg.k_cfl * (grid.dx / ax.max(cfg.delta)).min(grid.dy / ay.max(cfg.delta)))
}

/// Step size for step number `step` (0-based): the override while it lasts, then the CFL rule,
/// never past `t_stop`.
pub fn step_dt(
    v: &PrimitiveField,
    s: &SplitScalars,
    grid: &GridSpec,
    cfg: &SolverConfig,
    step: usize,
    t: f64,
    t_stop: f64,
) -> Result<f64> {
    let dt = match cfg.dt_override {
        Some(o) if step < o.steps => o.dt,
        _ => compute_dt(v, s, grid, cfg)?,
    };
    Ok(dt.min(t_stop - t))
}

/// `(1 - s) V(U) + s V_raw`. When `1 - s` rounds to zero the conservative branch is not
/// inverted at all. For `0 < s < 1` the inversion is purely algebraic and only the blended
/// state has to be physical: at moderately low Mach numbers the explicit conservative update
/// runs far past its acoustic CFL limit and can leave the admissible set while carrying a
/// weight near `1e-14`.
pub fn post_process(
    v_raw: &PrimitiveField,
    u: &ConservativeField,
    grid: &GridSpec,
    cfg: &SolverConfig,
) -> Result<PrimitiveField> {
    let s = switching_function(cfg.epsilon, cfg);
    let w = 1.0 - s;
    if w == 0.0 {
        return Ok(v_raw.clone());
    }
    if s == 0.0 {
        return cons_to_prim(u, grid, cfg.epsilon, cfg.gamma);
    }
    let (eps, gamma) = (cfg.epsilon, cfg.gamma);
    let mut out = PrimitiveField::zeros(grid);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let c = u.state_at(j, k);
            let (rho, vx, vy) = (c[0], c[1] / c[0], c[2] / c[0]);
            let p = (gamma - 1.0) * (c[3] - 0.5 * eps * eps * rho * (vx * vx + vy * vy));
            let raw = v_raw.state_at(j, k);
            let b: State4 = std::array::from_fn(|i| w * [rho, vx, vy, p][i] + s * raw[i]);
            if !(b[0] > 0.0 && b[3] > 0.0) || !b.iter().all(|x| x.is_finite()) {
                return Err(SolverError::nonphysical("post-processing", j, k, b[0], b[3]));
            }
            out.set_state(j, k, b);
        }
    }
    fill_ghosts(&mut out, grid);
    Ok(out)
}

fn max_cell_speeds(v: &PrimitiveField, s: &SplitScalars, grid: &GridSpec, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let (mut ct, mut c) = (0.0f64, 0.0f64);
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let st = v.state_at(j, k);
            ct = ct.max(modified_sound_speed(st[0], st[3], s, cfg.epsilon, cfg.gamma)?);
            c = c.max(full_sound_speed(st[0], st[3], cfg.epsilon, cfg.gamma));
        }
    }
    Ok((ct, c))
}

/// Per-stage operator values.
struct StageOps {
    scalars: SplitScalars,
    stiff: StiffScalars,
    r: OperatorField,
    d: OperatorField,
    boundary_flux: State4,
}

fn stage_ops(v: &PrimitiveField, grid: &GridSpec, cfg: &SolverConfig) -> Result<StageOps> {
    let scalars = split_scalars(v, cfg.epsilon);
    let stiff = StiffScalars::new(&scalars, cfg.epsilon, cfg.gamma);
    let (_, iv) = reconstruct(v, grid, cfg.theta)?;
    let (r, _) = assemble_r_from(v, &iv, grid, cfg, &scalars)?;
    let cons = assemble_conservative_rhs(&iv, grid, cfg)?;
    Ok(StageOps {
        scalars,
        stiff,
        r,
        d: cons.rhs,
        boundary_flux: cons.boundary_flux,
    })
}

fn solve(
    sys: &crate::elliptic::HelmholtzSystem,
    guess: &ScalarField,
    grid: &GridSpec,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveStats)> {
    solve_helmholtz(sys, guess, grid, cfg.elliptic_tol, cfg.max_iter_for(grid.nx, grid.ny), cfg.jacobi)
}

/// `U + sum_i w_i D_i` on interior cells, ghosts refilled.
fn explicit_update(u: &ConservativeField, terms: &[(f64, &OperatorField)], grid: &GridSpec) -> ConservativeField {
    let mut out = u.clone();
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            let mut s = out.state_at(j, k);
            for (w, d) in terms {
                let ds = d.state_at(j, k);
                for c in 0..4 {
                    s[c] += w * ds[c];
                }
            }
            out.set_state(j, k, s);
        }
    }
    fill_ghosts(&mut out, grid);
    out
}

/// Maximum discrete divergence of the velocity and the pressure spread `max p - min p`.
pub fn ap_diagnostics(v: &PrimitiveField, grid: &GridSpec) -> (f64, f64) {
    let div = discrete_divergence(&v.u, &v.v, grid).interior_abs_max();
    (div, v.p.interior_max() - v.p.interior_min())
}

/// One full step of size `dt`. Second order runs both stages; first order stops after stage one.
pub fn si_dec_step(state: &DualState, grid: &GridSpec, cfg: &SolverConfig, dt: f64) -> Result<(DualState, StepReport)> {
    let vn = &state.v;
    let n = stage_ops(vn, grid, cfg)?;
    let (max_ctilde, max_c) = max_cell_speeds(vn, &n.scalars, grid, cfg)?;

    // Stage one.
    let mut vs = vn.clone();
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            vs.rho.set(j, k, vn.rho.at(j, k) - dt * n.r.comps[0].at(j, k));
        }
    }
    let sys1 = assemble_stage1_system(vn, &n.r, &n.stiff, dt, grid);
    let (p_star, stats1) = solve(&sys1, &vn.p, grid, cfg)?;
    let (gx, gy) = central_gradient(&p_star, grid);
    let ls = n.stiff.inv_eps2_rhomax;
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            vs.u.set(j, k, vn.u.at(j, k) - dt * n.r.comps[1].at(j, k) - dt * ls * gx.at(j, k));
            vs.v.set(j, k, vn.v.at(j, k) - dt * n.r.comps[2].at(j, k) - dt * ls * gy.at(j, k));
        }
    }
    vs.p = p_star;
    fill_ghosts(&mut vs, grid);
    vs.check_physical("stage one")?;
    let us = explicit_update(&state.u, &[(dt, &n.d)], grid);
    let vs = post_process(&vs, &us, grid, cfg)?;

    if cfg.order == Order::First {
        let (max_divergence, pressure_fluctuation) = ap_diagnostics(&vs, grid);
        let report = StepReport {
            dt,
            elliptic_iterations: [stats1.iterations, 0],
            elliptic_residuals: [stats1.relative_residual, 0.0],
            max_ctilde,
            max_c,
            max_divergence,
            pressure_fluctuation,
            boundary_outflow: n.boundary_flux.map(|f| dt * f),
        };
        return Ok((DualState { v: vs, u: us, t: state.t + dt }, report));
    }

    // Stage two.
    let st = stage_ops(&vs, grid, cfg)?;
    let lnn = assemble_L(&n.stiff, vn, grid);
    let lss = assemble_L(&st.stiff, &vs, grid);
    let h = 0.5 * dt;
    let mut vn1 = vn.clone();
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            vn1.rho.set(j, k, vn.rho.at(j, k) - h * (n.r.comps[0].at(j, k) + st.r.comps[0].at(j, k)));
        }
    }
    let sys2 = assemble_stage2_system(vn, &n.r, &st.r, &lnn, &lss, &st.stiff, dt, grid);
    let (p_new, stats2) = solve(&sys2, &vs.p, grid, cfg)?;
    let (gx, gy) = central_gradient(&p_new, grid);
    let ls = st.stiff.inv_eps2_rhomax;
    for k in 0..grid.ny as isize {
        for j in 0..grid.nx as isize {
            for (c, g) in [(1usize, &gx), (2usize, &gy)] {
                let old = vn.components()[c].at(j, k);
                let val = old
                    - h * (n.r.comps[c].at(j, k) + st.r.comps[c].at(j, k))
                    - h * (lnn.comps[c].at(j, k) - lss.comps[c].at(j, k))
                    - dt * ls * g.at(j, k);
                vn1.components_mut()[c].set(j, k, val);
            }
        }
    }
    vn1.p = p_new;
    fill_ghosts(&mut vn1, grid);
    vn1.check_physical("stage two")?;
    let un1 = explicit_update(&state.u, &[(h, &n.d), (h, &st.d)], grid);
    let vn1 = post_process(&vn1, &un1, grid, cfg)?;

    let (max_divergence, pressure_fluctuation) = ap_diagnostics(&vn1, grid);
    let report = StepReport {
        dt,
        elliptic_iterations: [stats1.iterations, stats2.iterations],
        elliptic_residuals: [stats1.relative_residual, stats2.relative_residual],
        max_ctilde,
        max_c,
        max_divergence,
        pressure_fluctuation,
        boundary_outflow: std::array::from_fn(|c| h * (n.boundary_flux[c] + st.boundary_flux[c])),
    };
    Ok((DualState { v: vn1, u: un1, t: state.t + dt }, report))
}

/// What the run callback sees after every completed step.
pub struct StepEvent<'a> {
    pub step: usize,
    pub state: &'a DualState,
    pub report: &'a StepReport,
    /// The step landed exactly on a requested snapshot time.
    pub snapshot: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub state: DualState,
    pub steps: usize,
    /// The callback asked to stop before `t_final`.
    pub stopped: bool,
}

/// Steps from `initial.t` to `t_final`, landing exactly on every snapshot time in between.
pub fn run(
    initial: DualState,
    grid: &GridSpec,
    cfg: &SolverConfig,
    t_final: f64,
    snapshot_times: &[f64],
    mut callback: impl FnMut(&StepEvent) -> ControlFlow<()>,
) -> Result<RunSummary> {
    cfg.validate()?;
    if !(t_final >= initial.t) {
        return Err(SolverError::InvalidConfig(format!(
            "final time {t_final} precedes start time {}",
            initial.t
        )));
    }
    let mut snaps: Vec<f64> = snapshot_times.iter().copied().filter(|&s| s > initial.t && s <= t_final).collect();
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let mut next_snap = 0;
    let mut state = initial;
    let mut steps = 0;
    while state.t < t_final {
        let stop_at = snaps.get(next_snap).copied().unwrap_or(t_final);
        let s = split_scalars(&state.v, cfg.epsilon);
        let dt = step_dt(&state.v, &s, grid, cfg, steps, state.t, stop_at)?;
        let (mut next, report) = si_dec_step(&state, grid, cfg, dt)?;
        let hit = next.t >= stop_at || (stop_at.is_finite() && stop_at - next.t <= 1e-14 * stop_at.abs().max(1.0));
        if hit {
            next.t = stop_at;
        }
        let snapshot = hit && next_snap < snaps.len();
        if snapshot {
            next_snap += 1;
        }
        state = next;
        steps += 1;
        let flow = callback(&StepEvent {
            step: steps,
            state: &state,
            report: &report,
            snapshot,
        });
        if flow.is_break() {
            return Ok(RunSummary { state, steps, stopped: true });
        }
    }
    Ok(RunSummary { state, steps, stopped: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DtOverride;
    use crate::state::Boundary;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn switching_function_values() {
        let cfg = SolverConfig::default();
        assert_eq!(switching_function(1.0, &cfg), 0.0);
        assert!(close(1.0 - switching_function(0.15, &cfg), 2.919331443251849e-12, 1e-3));
        assert!(close(switching_function(0.5, &cfg), 6.103515625e-05, 1e-14));
        assert!(close(switching_function(0.3, &cfg), 0.5701199608224566, 1e-13));
        assert_eq!(1.0 - switching_function(1e-6, &cfg), 0.0);
    }

    #[test]
    fn switching_function_is_continuous_and_monotone() {
        let cfg = SolverConfig::default();
        for e in [cfg.eps0, cfg.eps1] {
            let (l, r) = (switching_function(e - 1e-12, &cfg), switching_function(e + 1e-12, &cfg));
            assert!((l - r).abs() < 1e-9, "jump at {e}: {l} vs {r}");
        }
        let mut prev = 1.0;
        for i in 1..=1000 {
            let s = switching_function(i as f64 / 1000.0, &cfg);
            assert!(s <= prev + 1e-15 && (0.0..=1.0).contains(&s));
            prev = s;
        }
    }

    #[test]
    fn dt_examples() {
        let grid = GridSpec::periodic(10, 10, (0.0, 1.0), (0.0, 1.0)).unwrap();
        // c~ = 0 with rho at rho_max and eps = 0 shift mimicked by explicit scalars
        let v = PrimitiveField::uniform(&grid, [1.0, 2.0, 4.0, 1.0]);
        let s = SplitScalars { rho_max: 1.0, p_min: 0.0 };
        let cfg = SolverConfig::default();
        assert!(close(compute_dt(&v, &s, &grid, &cfg).unwrap(), 0.011875, 1e-14));

        let v = PrimitiveField::uniform(&grid, [1.0, 0.0, 0.0, 1.0]);
        let dt = compute_dt(&v, &s, &grid, &cfg).unwrap();
        assert!(close(dt, 0.475 * 0.1 / 1e-15, 1e-14));
        assert_eq!(step_dt(&v, &s, &grid, &cfg, 0, 0.3, 0.5).unwrap(), 0.5 - 0.3);

        let cfg = SolverConfig { dt_override: Some(DtOverride { steps: 2, dt: 1e-4 }), ..cfg };
        assert_eq!(step_dt(&v, &s, &grid, &cfg, 1, 0.0, 1.0).unwrap(), 1e-4);
        assert!(step_dt(&v, &s, &grid, &cfg, 2, 0.0, 1.0).unwrap() > 1e-4);
    }

    #[test]
    fn post_process_limits() {
        let grid = GridSpec::periodic(4, 4, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let v_raw = PrimitiveField::uniform(&grid, [1.0, 0.5, 0.0, 1.0]);
        let other = PrimitiveField::uniform(&grid, [1.2, 0.3, 0.1, 1.1]);
        for eps in [1.0, 0.3, 1e-6] {
            let cfg = SolverConfig::default().with_epsilon(eps);
            let u = prim_to_cons(&other, eps, cfg.gamma);
            let out = post_process(&v_raw, &u, &grid, &cfg).unwrap();
            let vc = cons_to_prim(&u, &grid, eps, cfg.gamma).unwrap();
            match eps {
                1.0 => assert_eq!(out, vc),
                1e-6 => assert_eq!(out, v_raw),
                _ => {
                    let s = switching_function(eps, &cfg);
                    let want = (1.0 - s) * vc.rho.at(1, 1) + s * 1.0;
                    assert!(close(out.rho.at(1, 1), want, 1e-15));
                }
            }
            // equal branches are a fixed point
            let u_same = prim_to_cons(&v_raw, eps, cfg.gamma);
            let same = post_process(&v_raw, &u_same, &grid, &cfg).unwrap();
            for (a, b) in same.components().iter().zip(v_raw.components()) {
                assert!(a.interior().zip(b.interior()).all(|(x, y)| (x - y).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn inadmissible_conservative_state_needs_weight_to_abort() {
        let grid = GridSpec::periodic(4, 4, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let v_raw = PrimitiveField::uniform(&grid, [1.0, 0.5, 0.0, 1.0]);
        let mut bad = ConservativeField::zeros(&grid);
        bad.rho = ScalarField::constant(&grid, -0.2);
        bad.e = ScalarField::constant(&grid, 1.0);
        let cfg = SolverConfig::default().with_epsilon(0.1);
        let out = post_process(&v_raw, &bad, &grid, &cfg).unwrap();
        assert!((out.rho.at(2, 2) - 1.0).abs() < 1e-13);
        for eps in [1.0, 0.5] {
            let cfg = SolverConfig::default().with_epsilon(eps);
            assert!(post_process(&v_raw, &bad, &grid, &cfg).is_err());
        }
    }

    #[test]
    fn resting_uniform_state_is_a_fixed_point() {
        let grid = GridSpec::periodic(8, 8, (0.0, 1.0), (0.0, 1.0)).unwrap();
        for eps in [1.0, 0.2, 1e-3] {
            for order in [Order::First, Order::Second] {
                let cfg = SolverConfig { order, ..SolverConfig::default().with_epsilon(eps) };
                let st = DualState::from_primitive(PrimitiveField::uniform(&grid, [1.0, 0.0, 0.0, 1.0]), &grid, &cfg, 0.0);
                let (next, report) = si_dec_step(&st, &grid, &cfg, 0.01).unwrap();
                for (a, b) in next.v.components().iter().zip(st.v.components()) {
                    assert!(a.interior().zip(b.interior()).all(|(x, y)| (x - y).abs() < 1e-13));
                }
                assert_eq!(report.dt, 0.01);
            }
        }
    }

    #[test]
    fn epsilon_one_keeps_branches_identical() {
        let tau = std::f64::consts::TAU;
        let grid = GridSpec::periodic(16, 16, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let cfg = SolverConfig::default();
        let v = PrimitiveField::from_fn(&grid, |x, y| [1.0 + 0.2 * (tau * x).sin(), 0.3 * (tau * y).cos(), 0.1, 1.0 + 0.1 * (tau * x).cos()]);
        let st = DualState::from_primitive(v, &grid, &cfg, 0.0);
        let s = split_scalars(&st.v, 1.0);
        let dt = compute_dt(&st.v, &s, &grid, &cfg).unwrap();
        let (next, _) = si_dec_step(&st, &grid, &cfg, dt).unwrap();
        assert_eq!(next.v, cons_to_prim(&next.u, &grid, 1.0, cfg.gamma).unwrap());
    }

    #[test]
    fn run_lands_on_snapshots_and_final_time() {
        let grid = GridSpec::new(8, 8, (0.0, 1.0), (0.0, 1.0), Boundary::Outflow, Boundary::Outflow).unwrap();
        let cfg = SolverConfig::default().with_epsilon(0.5);
        let v = PrimitiveField::from_fn(&grid, |x, _| [1.0, 0.0, 0.0, if x < 0.5 { 1.0 } else { 0.8 }]);
        let st = DualState::from_primitive(v, &grid, &cfg, 0.0);
        let mut snaps = vec![];
        let summary = run(st.clone(), &grid, &cfg, 0.05, &[0.01, 0.03], |e| {
            if e.snapshot {
                snaps.push(e.state.t);
            }
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(snaps, vec![0.01, 0.03]);
        assert_eq!(summary.state.t, 0.05);
        assert!(!summary.stopped);

        let same = run(st.clone(), &grid, &cfg, 0.0, &[], |_| ControlFlow::Continue(())).unwrap();
        assert_eq!((same.steps, &same.state), (0, &st));

        let stopped = run(st, &grid, &cfg, 10.0, &[], |e| if e.step == 2 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }).unwrap();
        assert!(stopped.stopped && stopped.steps == 2);
    }
}
