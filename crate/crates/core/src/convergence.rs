//! Error norms and mesh-refinement studies against exact solutions.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::benchmarks::BenchmarkCase;
use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::integrator::{run, DualState};
use crate::state::{Components, GridSpec, PrimitiveField, State4};

/// `dx dy sum |a - b|` for each primitive variable.
pub fn l1_error(numeric: &PrimitiveField, exact: &PrimitiveField, grid: &GridSpec) -> State4 {
    let mut out = [0.0; 4];
    let (a, b) = (numeric.components(), exact.components());
    for c in 0..4 {
        out[c] = grid.cell_area() * a[c].interior().zip(b[c].interior()).map(|(x, y)| (x - y).abs()).sum::<f64>();
    }
    out
}

/// `log2(coarse / fine)`.
pub fn observed_rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub n: usize,
    pub eps: f64,
    pub errors: State4,
    /// Against the previous row with the same `eps`; `None` for the coarsest mesh.
    pub rates: Option<State4>,
    pub steps: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    /// Rows grouped by `eps`, sorted by mesh size, with rates filled in.
    pub fn from_rows(mut rows: Vec<ErrorRow>) -> Self {
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps).then(a.n.cmp(&b.n)));
        for i in 1..rows.len() {
            let (prev, cur) = (&rows[i - 1], &rows[i]);
            let rates = (prev.eps == cur.eps && prev.failure.is_none() && cur.failure.is_none())
                .then(|| std::array::from_fn(|c| observed_rate(prev.errors[c], cur.errors[c])));
            rows[i].rates = rates;
        }
        if let Some(r) = rows.first_mut() {
            r.rates = None;
        }
        ErrorTable { rows }
    }

    pub fn rows_for(&self, eps: f64) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(move |r| r.eps == eps)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>6} {:>10} {:>12} {:>12} {:>12} {:>12} {:>6} {:>6} {:>6} {:>6}\n",
            "N", "eps", "L1(rho)", "L1(u)", "L1(v)", "L1(p)", "r_rho", "r_u", "r_v", "r_p"
        );
        for r in &self.rows {
            if let Some(f) = &r.failure {
                let _ = writeln!(s, "{:>6} {:>10.3e} failed: {f}", r.n, r.eps);
                continue;
            }
            let _ = write!(s, "{:>6} {:>10.3e}", r.n, r.eps);
            for e in r.errors {
                let _ = write!(s, " {e:>12.5e}");
            }
            match r.rates {
                Some(rates) => rates.iter().for_each(|q| {
                    let _ = write!(s, " {q:>6.3}");
                }),
                None => s.push_str(&format!(" {:>6} {:>6} {:>6} {:>6}", "-", "-", "-", "-")),
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,eps,steps,err_rho,err_u,err_v,err_p,rate_rho,rate_u,rate_v,rate_p,failure\n");
        for r in &self.rows {
            let rates = r.rates.map_or_else(|| ",,,".to_string(), |q| q.map(|x| format!("{x:.6}")).join(","));
            let _ = writeln!(
                s,
                "{},{:e},{},{},{},{}",
                r.n,
                r.eps,
                r.steps,
                r.errors.map(|x| format!("{x:.10e}")).join(","),
                rates,
                r.failure.as_deref().unwrap_or("")
            );
        }
        s
    }
}

/// Runs `case` from its exact initial data to `t_final` and measures the L1 error.
pub fn error_at(case: BenchmarkCase, n: usize, eps: f64, t_final: f64, base: &SolverConfig) -> Result<(State4, usize)> {
    let grid = case.grid(n, n, eps)?;
    let cfg = SolverConfig { epsilon: eps, gamma: case.gamma(), ..base.clone() };
    let init = DualState::from_primitive(case.initial(&grid, eps), &grid, &cfg, 0.0);
    let out = run(init, &grid, &cfg, t_final, &[], |_| ControlFlow::Continue(()))?;
    let exact = case.exact(&grid, eps, t_final).expect("case has an exact solution");
    Ok((l1_error(&out.state.v, &exact, &grid), out.steps))
}

/// Every `(eps, n)` pair is run independently and in parallel; a failing run marks its row.
pub fn convergence_study(
    case: BenchmarkCase,
    eps_list: &[f64],
    n_list: &[usize],
    t_final: f64,
    base: &SolverConfig,
) -> Result<ErrorTable> {
    if !case.has_exact() {
        return Err(SolverError::InvalidConfig(format!("case `{}` has no exact solution", case.name())));
    }
    let jobs: Vec<(f64, usize)> = eps_list.iter().flat_map(|&e| n_list.iter().map(move |&n| (e, n))).collect();
    let rows = jobs
        .into_par_iter()
        .map(|(eps, n)| match error_at(case, n, eps, t_final, base) {
            Ok((errors, steps)) => ErrorRow { n, eps, errors, rates: None, steps, failure: None },
            Err(e) => ErrorRow { n, eps, errors: [f64::NAN; 4], rates: None, steps: 0, failure: Some(e.to_string()) },
        })
        .collect();
    Ok(ErrorTable::from_rows(rows))
}
