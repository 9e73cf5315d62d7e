//! Every numerical threshold used by the solver, the verification suites and the CLI.
//! A problem config may override any subset through its `"tolerances"` object.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted 1-norm condition estimate of a Robin system.
    pub cond_max: f64,
    /// Largest accepted relative residual of a triangular-system solve.
    pub residual_max: f64,
    /// Interior samples keep at least `min(sample_margin * h_max, inradius_fraction * inradius)`
    /// from the boundary.
    pub sample_margin: f64,
    pub inradius_fraction: f64,
    pub min_samples: usize,
    pub sample_seed: u64,
    /// Max error for the constant-solution case.
    pub constant_case: f64,
    /// Max relative error for manufactured solves at the reference refinement.
    pub manufactured: f64,
    /// Successive ratios of estimate surrogates must stay in `[1/ratio_band, ratio_band]`.
    pub ratio_band: f64,
    /// Minimum observed convergence order reported as passing.
    pub min_order: f64,
    /// Non-tangential cone aperture.
    pub aperture: f64,
    /// Accepted Monte Carlo points for interior norms.
    pub mc_points: usize,
    pub mc_seed: u64,
    /// Kernel recurrence: finite-difference step and residual bound.
    pub recurrence_step: f64,
    pub recurrence_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cond_max: 1e12,
            residual_max: 1e-10,
            sample_margin: 2.0,
            inradius_fraction: 0.6,
            min_samples: 50,
            sample_seed: 20_240_531,
            constant_case: 3e-2,
            manufactured: 5e-2,
            ratio_band: 2.0,
            min_order: 0.8,
            aperture: 2.0,
            mc_points: 10_000,
            mc_seed: 7,
            recurrence_step: 1e-3,
            recurrence_max: 1e-5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_override() {
        let t: Tolerances = serde_json::from_str(r#"{"cond_max": 1e8}"#).unwrap();
        assert_eq!(t.cond_max, 1e8);
        assert_eq!(t.residual_max, Tolerances::default().residual_max);
        assert!(serde_json::from_str::<Tolerances>(r#"{"nope": 1}"#).is_err());
    }
}
