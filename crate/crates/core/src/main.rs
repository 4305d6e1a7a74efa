use std::collections::HashMap;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use allmach::benchmarks::BenchmarkCase;
use allmach::convergence::convergence_study;
use allmach::integrator::{run, DualState};
use allmach::probes::diagnose_report;
use allmach::snapshot::{snapshot_file_name, Snapshot};
use allmach::{DtOverride, Order, Result, SolverError};

#[derive(Parser)]
#[command(name = "allmach", version, about = "All-Mach-number finite-volume Euler solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark and write snapshots.
    Run(RunArgs),
    /// Mesh-refinement study against an exact solution.
    Convergence(ConvergenceArgs),
    /// Low-Mach probe suite on the Gresho vortex.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    theta: Option<f64>,
    /// Comma-separated output times.
    #[arg(long)]
    snap_times: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Fixed step for the first N steps, as `N:VALUE`.
    #[arg(long)]
    dt_override: Option<String>,
    #[arg(long)]
    elliptic_tol: Option<f64>,
    /// Flat `key=value` file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    eps_list: Option<String>,
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps_list: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> SolverError {
    SolverError::InvalidConfig(msg.into())
}

/// Values from a config file, looked up only when the matching flag is absent.
struct Settings(HashMap<String, String>);

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings(HashMap::new()));
        };
        let text = std::fs::read_to_string(path).map_err(|e| SolverError::Io(format!("{}: {e}", path.display())))?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            map.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Settings(map))
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.0
            .get(key)
            .map(|v| v.parse().map_err(|_| bad(format!("bad value `{v}` for `{key}`"))))
            .transpose()
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| bad(format!("bad entry `{x}` in {what}"))))
        .collect()
}

fn parse_override(s: &str) -> Result<DtOverride> {
    let (n, dt) = s.split_once(':').ok_or_else(|| bad(format!("dt override `{s}` is not N:VALUE")))?;
    let steps = n.trim().parse().map_err(|_| bad(format!("bad step count `{n}`")))?;
    let dt: f64 = dt.trim().parse().map_err(|_| bad(format!("bad step size `{dt}`")))?;
    if !(dt > 0.0) {
        return Err(bad(format!("dt override must be positive, got {dt}")));
    }
    Ok(DtOverride { steps, dt })
}

fn default_eps(case: BenchmarkCase) -> f64 {
    match case {
        BenchmarkCase::Vortex | BenchmarkCase::Explosion => 1.0,
        BenchmarkCase::Baroclinic => allmach::benchmarks::BAROCLINIC_EPS,
        BenchmarkCase::Gresho | BenchmarkCase::DoubleShear => 1e-2,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SolverError::Io(format!("{}: {e}", dir.display())))
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let file = Settings::load(a.config.as_deref())?;
    let case_name: String = file.pick(a.case, "case")?.ok_or_else(|| bad("missing --case"))?;
    let case = BenchmarkCase::from_name(&case_name)?;
    let eps = file.pick(a.eps, "eps")?.unwrap_or(default_eps(case));
    let nx = file.pick(a.nx, "nx")?.unwrap_or(64);
    let ny = file.pick(a.ny, "ny")?.unwrap_or(nx);
    let t_final = file.pick(a.t_final, "t-final")?.unwrap_or(case.default_t_final(eps));
    let out_dir = file.pick(a.out_dir, "out-dir")?.unwrap_or_else(|| PathBuf::from("output"));

    let mut cfg = case.config(eps);
    if let Some(k) = file.pick(a.cfl, "cfl")? {
        cfg.k_cfl = k;
    }
    if let Some(o) = file.pick(a.order, "order")? {
        cfg.order = Order::from_int(o)?;
    }
    if let Some(t) = file.pick(a.theta, "theta")? {
        cfg.theta = t;
    }
    if let Some(t) = file.pick(a.elliptic_tol, "elliptic-tol")? {
        cfg.elliptic_tol = t;
    }
    if let Some(o) = file.pick(a.dt_override, "dt-override")? {
        cfg.dt_override = Some(parse_override(&o)?);
    }
    let snap_times: Vec<f64> = match file.pick(a.snap_times, "snap-times")? {
        Some(s) => parse_list(&s, "snap times")?,
        None => Vec::new(),
    };
    cfg.validate()?;

    let grid = case.grid(nx, ny, eps)?;
    let v0 = case.initial(&grid, eps);
    create_dir(&out_dir)?;
    let init = DualState::from_primitive(v0, &grid, &cfg, 0.0);
    let write = |state: &DualState| -> Result<()> {
        let path = out_dir.join(snapshot_file_name(case.name(), eps, state.t));
        Snapshot::from_state(state, &grid, &cfg).write(&path)
    };
    write(&init)?;

    let mut io_err = None;
    let mut max_it = 0;
    let out = run(init, &grid, &cfg, t_final, &snap_times, |e| {
        max_it = max_it.max(e.report.elliptic_iterations[0].max(e.report.elliptic_iterations[1]));
        if e.snapshot && e.state.t < t_final {
            if let Err(err) = write(e.state) {
                io_err = Some(err);
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    write(&out.state)?;
    println!(
        "{} eps={eps:e} {nx}x{ny}: t={} after {} steps, max elliptic iterations {max_it}",
        case.name(),
        out.state.t,
        out.steps
    );
    Ok(())
}

fn cmd_convergence(a: ConvergenceArgs) -> Result<()> {
    let file = Settings::load(a.config.as_deref())?;
    let case_name: String = file.pick(a.case, "case")?.unwrap_or_else(|| "vortex".into());
    let case = BenchmarkCase::from_name(&case_name)?;
    let eps_list: Vec<f64> = parse_list(&file.pick(a.eps_list, "eps-list")?.unwrap_or_else(|| "1,0.01".into()), "eps list")?;
    let n_list: Vec<usize> = parse_list(&file.pick(a.n_list, "n-list")?.unwrap_or_else(|| "64,128,256".into()), "mesh list")?;
    let t_final = file.pick(a.t_final, "t-final")?.unwrap_or(0.1);
    let out_dir = file.pick(a.out_dir, "out-dir")?.unwrap_or_else(|| PathBuf::from("output"));
    let table = convergence_study(case, &eps_list, &n_list, t_final, &case.config(1.0))?;
    let text = table.to_text();
    print!("{text}");
    create_dir(&out_dir)?;
    for (ext, body) in [("txt", text), ("csv", table.to_csv())] {
        let path = out_dir.join(format!("{}_convergence.{ext}", case.name()));
        std::fs::write(&path, body).map_err(|e| SolverError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<()> {
    let file = Settings::load(a.config.as_deref())?;
    let n = file.pick(a.n, "n")?.unwrap_or(64);
    let eps_list: Vec<f64> =
        parse_list(&file.pick(a.eps_list, "eps-list")?.unwrap_or_else(|| "1e-2,1e-3,1e-4,1e-6".into()), "eps list")?;
    print!("{}", diagnose_report(n, &eps_list)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
