//! Plain-text snapshot files: `# key=value` header lines, then one comma-separated row per
//! interior cell in k-major order. Reals are written with 17 significant digits, so parsing a
//! file and writing it again reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::benchmarks::{local_mach, vorticity};
use crate::config::{DtOverride, SolverConfig};
use crate::error::{Result, SolverError};
use crate::integrator::DualState;
use crate::state::{Boundary, GridSpec};

pub const COLUMNS: [&str; 14] = ["j", "k", "x", "y", "rho", "u", "v", "p", "rho_cons", "mx", "my", "E", "mach", "vorticity"];

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub time: f64,
    pub eps: f64,
    pub gamma: f64,
    pub nx: usize,
    pub ny: usize,
    /// `(x_lo, x_hi, y_lo, y_hi)`.
    pub domain: [f64; 4],
    pub bc: [Boundary; 2],
    pub dt_override: Option<DtOverride>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub j: usize,
    pub k: usize,
    /// Every real column after `j, k`, in [`COLUMNS`] order.
    pub values: [f64; 12],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub rows: Vec<SnapshotRow>,
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn bc_name(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::Outflow => "outflow",
    }
}

fn parse_err(msg: impl Into<String>) -> SolverError {
    SolverError::InvalidConfig(format!("snapshot: {}", msg.into()))
}

fn parse_real(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| parse_err(format!("bad number `{s}`")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| parse_err(format!("bad integer `{s}`")))
}

fn parse_bc(s: &str) -> Result<Boundary> {
    match s {
        "periodic" => Ok(Boundary::Periodic),
        "outflow" => Ok(Boundary::Outflow),
        other => Err(parse_err(format!("unknown boundary `{other}`"))),
    }
}

impl Snapshot {
    /// Expects the primitive field with filled ghosts, as the integrator leaves it.
    pub fn from_state(state: &DualState, grid: &GridSpec, cfg: &SolverConfig) -> Self {
        let mach = local_mach(&state.v, grid, cfg.gamma);
        let omega = vorticity(&state.v, grid);
        let mut rows = Vec::with_capacity(grid.cell_count());
        for k in 0..grid.ny {
            for j in 0..grid.nx {
                let (ji, ki) = (j as isize, k as isize);
                let (v, u) = (&state.v, &state.u);
                rows.push(SnapshotRow {
                    j,
                    k,
                    values: [
                        grid.xc(ji),
                        grid.yc(ki),
                        v.rho.at(ji, ki),
                        v.u.at(ji, ki),
                        v.v.at(ji, ki),
                        v.p.at(ji, ki),
                        u.rho.at(ji, ki),
                        u.mx.at(ji, ki),
                        u.my.at(ji, ki),
                        u.e.at(ji, ki),
                        mach.at(ji, ki),
                        omega.at(ji, ki),
                    ],
                });
            }
        }
        Snapshot {
            header: SnapshotHeader {
                time: state.t,
                eps: cfg.epsilon,
                gamma: cfg.gamma,
                nx: grid.nx,
                ny: grid.ny,
                domain: [grid.x_lo, grid.x_hi, grid.y_lo, grid.y_hi],
                bc: [grid.bc_x, grid.bc_y],
                dt_override: cfg.dt_override,
            },
            rows,
        }
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut s = String::new();
        let _ = writeln!(s, "# time={}", real(h.time));
        let _ = writeln!(s, "# eps={}", real(h.eps));
        let _ = writeln!(s, "# gamma={}", real(h.gamma));
        let _ = writeln!(s, "# nx={}", h.nx);
        let _ = writeln!(s, "# ny={}", h.ny);
        let _ = writeln!(s, "# domain={}", h.domain.map(real).join(","));
        let _ = writeln!(s, "# bc={},{}", bc_name(h.bc[0]), bc_name(h.bc[1]));
        if let Some(o) = h.dt_override {
            let _ = writeln!(s, "# dt_override={}:{}", o.steps, real(o.dt));
        }
        let _ = writeln!(s, "# columns={}", COLUMNS.join(","));
        for r in &self.rows {
            let _ = write!(s, "{},{}", r.j, r.k);
            for x in r.values {
                s.push(',');
                s.push_str(&real(x));
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(kv) = line.strip_prefix("# ") {
                let (key, value) = kv.split_once('=').ok_or_else(|| parse_err(format!("bad header `{line}`")))?;
                fields.insert(key.to_string(), value.to_string());
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != COLUMNS.len() {
                return Err(parse_err(format!("expected {} columns, got {}", COLUMNS.len(), cols.len())));
            }
            let mut values = [0.0; 12];
            for (dst, src) in values.iter_mut().zip(&cols[2..]) {
                *dst = parse_real(src)?;
            }
            rows.push(SnapshotRow { j: parse_usize(cols[0])?, k: parse_usize(cols[1])?, values });
        }
        let get = |key: &str| fields.get(key).map(String::as_str).ok_or_else(|| parse_err(format!("missing `{key}`")));
        let domain: Vec<f64> = get("domain")?.split(',').map(parse_real).collect::<Result<_>>()?;
        let domain: [f64; 4] = domain.try_into().map_err(|_| parse_err("domain needs four values"))?;
        let (bx, by) = get("bc")?.split_once(',').ok_or_else(|| parse_err("bc needs two values"))?;
        let dt_override = match fields.get("dt_override") {
            Some(v) => {
                let (n, dt) = v.split_once(':').ok_or_else(|| parse_err("dt_override needs N:VALUE"))?;
                Some(DtOverride { steps: parse_usize(n)?, dt: parse_real(dt)? })
            }
            None => None,
        };
        let header = SnapshotHeader {
            time: parse_real(get("time")?)?,
            eps: parse_real(get("eps")?)?,
            gamma: parse_real(get("gamma")?)?,
            nx: parse_usize(get("nx")?)?,
            ny: parse_usize(get("ny")?)?,
            domain,
            bc: [parse_bc(bx)?, parse_bc(by)?],
            dt_override,
        };
        if rows.len() != header.nx * header.ny {
            return Err(parse_err(format!("expected {} rows, got {}", header.nx * header.ny, rows.len())));
        }
        Ok(Snapshot { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| SolverError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SolverError::Io(format!("{}: {e}", path.display())))?;
        Snapshot::parse(&text)
    }
}

/// File name for the snapshot at `t`, sortable by time.
pub fn snapshot_file_name(case: &str, eps: f64, t: f64) -> String {
    format!("{case}_eps{eps:.0e}_t{t:012.6}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::PrimitiveField;

    fn uniform_snapshot() -> Snapshot {
        let grid = GridSpec::new(3, 2, (0.0, 3.0), (0.0, 2.0), Boundary::Outflow, Boundary::Periodic).unwrap();
        let mut cfg = SolverConfig::default().with_epsilon(0.5);
        cfg.dt_override = Some(DtOverride { steps: 10, dt: 1e-4 });
        let state = DualState::from_primitive(PrimitiveField::uniform(&grid, [1.0, 0.3, -0.2, 2.0]), &grid, &cfg, 0.125);
        Snapshot::from_state(&state, &grid, &cfg)
    }

    #[test]
    fn uniform_rows_differ_only_in_coordinates() {
        let snap = uniform_snapshot();
        assert_eq!(snap.rows.len(), 6);
        assert_eq!((snap.rows[1].j, snap.rows[1].k), (1, 0));
        assert_eq!((snap.rows[3].j, snap.rows[3].k), (0, 1));
        for r in &snap.rows {
            assert_eq!(r.values[2..], snap.rows[0].values[2..]);
        }
        assert_eq!(snap.rows[4].values[..2], [1.5, 1.5]);
        assert_eq!(snap.rows[0].values[11], 0.0);
    }

    #[test]
    fn header_echoes_override() {
        let text = uniform_snapshot().to_text();
        assert!(text.contains("# dt_override=10:1.0000000000000000e-4\n"));
        assert!(text.contains("# time=1.2500000000000000e-1\n"));
        let mut snap = uniform_snapshot();
        snap.header.dt_override = None;
        assert!(!snap.to_text().contains("dt_override"));
    }

    #[test]
    fn reserialization_is_byte_identical() {
        let grid = GridSpec::periodic(8, 5, (-1.0, 1.0), (0.0, 0.7)).unwrap();
        let cfg = SolverConfig::default().with_epsilon(0.3);
        let v = PrimitiveField::from_fn(&grid, |x, y| [1.0 + 0.1 * (3.0 * x).sin(), y.cos() / 3.0, x * y, 1.0 + x * x / 7.0]);
        let state = DualState::from_primitive(v, &grid, &cfg, 1.0 / 3.0);
        let text = Snapshot::from_state(&state, &grid, &cfg).to_text();
        let parsed = Snapshot::parse(&text).unwrap();
        assert_eq!(parsed.to_text(), text);
        assert_eq!(parsed.header.time, 1.0 / 3.0);
    }

    #[test]
    fn malformed_input_is_rejected() {
        let text = uniform_snapshot().to_text();
        assert!(Snapshot::parse(&text.replace("# nx=3", "# nx=4")).is_err());
        assert!(Snapshot::parse(&text.replace("# bc=outflow", "# bc=wall")).is_err());
        assert!(Snapshot::parse(&format!("{text}1,2,3\n")).is_err());
    }

    #[test]
    fn file_names_sort_by_time() {
        let a = snapshot_file_name("gresho", 1e-3, 0.5);
        let b = snapshot_file_name("gresho", 1e-3, 10.0);
        assert!(a < b, "{a} {b}");
    }
}
