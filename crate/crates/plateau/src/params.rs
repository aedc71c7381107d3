//! Solver parameters and the default small-parameter schedule.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("parameter {0} must be positive")]
    NotPositive(&'static str),
    #[error("delta_eps must be nonnegative")]
    NegativeDelta,
}

/// Parameters of one run. The default schedule c_eps = sqrt(eps),
/// delta_eps = eps keeps both c_eps and delta_eps / c_eps decreasing as
/// eps decreases; both are user-overridable.
#[derive(Debug, Clone)]
pub struct SolverParams {
    pub epsilon: f64,
    pub c_eps: f64,
    pub delta_eps: f64,
    pub lambda_cap: f64,
    /// Grid spacing; the solve requires h <= epsilon / 2.
    pub h: f64,
    pub cg_tol: f64,
    pub max_outer: usize,
    /// Sheet descent sweeps between consecutive field solves.
    pub inner_sweeps: usize,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
}

impl SolverParams {
    pub fn from_epsilon(epsilon: f64, h: f64, lambda_cap: f64) -> Self {
        SolverParams {
            epsilon,
            c_eps: epsilon.sqrt(),
            delta_eps: epsilon,
            lambda_cap,
            h,
            cg_tol: 1e-8,
            max_outer: 50,
            inner_sweeps: 20,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("c_eps", self.c_eps),
            ("lambda_cap", self.lambda_cap),
            ("h", self.h),
            ("cg_tol", self.cg_tol),
            ("armijo_shrink", self.armijo_shrink),
            ("armijo_slope", self.armijo_slope),
        ] {
            if !(v > 0.0) {
                return Err(ParamsError::NotPositive(name));
            }
        }
        if self.delta_eps < 0.0 {
            return Err(ParamsError::NegativeDelta);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_decreases_with_epsilon() {
        // c_eps and delta_eps / c_eps both decrease as eps does.
        let mut eps = 0.4;
        let mut last_c = f64::INFINITY;
        let mut last_ratio = f64::INFINITY;
        while eps > 1e-4 {
            let p = SolverParams::from_epsilon(eps, eps / 4.0, 2.0);
            assert!(p.c_eps < last_c);
            let ratio = p.delta_eps / p.c_eps;
            assert!(ratio < last_ratio);
            last_c = p.c_eps;
            last_ratio = ratio;
            eps *= 0.5;
        }
    }

    #[test]
    fn default_schedule_values() {
        let p = SolverParams::from_epsilon(0.05, 0.0125, 2.0);
        assert!((p.c_eps - 0.05f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.delta_eps, 0.05);
        assert_eq!(p.cg_tol, 1e-8);
    }
}
