//! Run configuration shared by every operator.

use crate::error::{Result, SolverError};

/// Fixed time step used for a leading number of steps before the CFL rule takes over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtOverride {
    pub steps: usize,
    pub dt: f64,
}

/// Time-integration order: first-order semi-implicit or second-order deferred correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            other => Err(SolverError::InvalidConfig(format!(
                "order must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Reference Mach number, `0 < epsilon <= 1`.
    pub epsilon: f64,
    pub gamma: f64,
    pub k_cfl: f64,
    /// Generalized minmod parameter in `[1, 2]`.
    pub theta: f64,
    /// Floor for the one-sided speeds.
    pub delta: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub alpha: f64,
    /// Relative residual tolerance of the pressure solves.
    pub elliptic_tol: f64,
    /// Iteration cap; `None` means `10 * (nx + ny)`.
    pub elliptic_max_iter: Option<usize>,
    /// Diagonal scaling inside the conjugate-gradient iteration.
    pub jacobi: bool,
    pub order: Order,
    pub dt_override: Option<DtOverride>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1.0,
            gamma: 1.4,
            k_cfl: 0.475,
            theta: 1.3,
            delta: 1e-15,
            eps0: 0.15,
            eps1: 0.4,
            alpha: 14.0,
            elliptic_tol: 1e-10,
            elliptic_max_iter: None,
            jacobi: false,
            order: Order::Second,
            dt_override: None,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_cfl(mut self, k_cfl: f64) -> Self {
        self.k_cfl = k_cfl;
        self
    }

    pub fn max_iter_for(&self, nx: usize, ny: usize) -> usize {
        self.elliptic_max_iter.unwrap_or(10 * (nx + ny))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if !(self.k_cfl > 0.0) || !self.k_cfl.is_finite() {
            return bad(format!("CFL number must be positive, got {}", self.k_cfl));
        }
        if !(1.0..=2.0).contains(&self.theta) {
            return bad(format!("theta must lie in [1, 2], got {}", self.theta));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(0.0 < self.eps0 && self.eps0 < self.eps1 && self.eps1 < 1.0) {
            return bad(format!(
                "switching parameters need 0 < eps0 < eps1 < 1, got eps0 = {}, eps1 = {}",
                self.eps0, self.eps1
            ));
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.elliptic_tol > 0.0) {
            return bad(format!(
                "elliptic tolerance must be positive, got {}",
                self.elliptic_tol
            ));
        }
        if self.elliptic_max_iter == Some(0) {
            return bad("elliptic iteration cap must be positive".into());
        }
        if let Some(o) = self.dt_override {
            if !(o.dt > 0.0) || !o.dt.is_finite() {
                return bad(format!("dt override must be positive, got {}", o.dt));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SolverConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.theta, 1.3);
        assert_eq!(cfg.delta, 1e-15);
        assert_eq!((cfg.eps0, cfg.eps1, cfg.alpha), (0.15, 0.4, 14.0));
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let base = SolverConfig::default();
        for cfg in [
            base.clone().with_epsilon(0.0),
            base.clone().with_epsilon(1.5),
            SolverConfig { theta: 2.5, ..base.clone() },
            SolverConfig { eps0: 0.5, ..base.clone() },
            SolverConfig { alpha: -1.0, ..base.clone() },
            SolverConfig { delta: 0.0, ..base.clone() },
        ] {
            assert!(matches!(cfg.validate(), Err(SolverError::InvalidConfig(_))));
        }
    }

    #[test]
    fn default_iteration_cap_scales_with_mesh() {
        assert_eq!(SolverConfig::default().max_iter_for(64, 32), 960);
    }
}
