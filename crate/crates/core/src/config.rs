//! Numerical tolerances shared by every module.

/// All tolerances in one record; the defaults are the values the test
/// suite is calibrated against.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Tolerances {
    /// Absolute tolerance on the curve parameter of the next impact.
    pub root: f64,
    pub max_root_iterations: usize,
    /// Angles closer than this to 0 or pi are rejected outright.
    pub theta_reject: f64,
    /// Admissible angles are clamped to `[theta_margin, pi - theta_margin]`.
    pub theta_margin: f64,
    /// Number of grid points for the curvature positivity check.
    pub curvature_grid: usize,
    pub closure_defect: f64,
    /// Half-width of the degenerate band `|tr -/+ 2| <= degeneracy`.
    pub degeneracy: f64,
    /// Gradient norm at which the periodic-orbit solver stops.
    pub solver_gradient: f64,
    pub solver_max_iterations: usize,
    /// Vertex-set distance under which two critical points are identified.
    pub dedup: f64,
    /// Relative threshold for zero Hessian eigenvalues.
    pub hessian_zero: f64,
    /// Crossing angles below this are reported as tangential.
    pub tangency_angle: f64,
    /// Coefficients `b_i` below this are treated as vanishing.
    pub decomposition_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            root: 1e-12,
            max_root_iterations: 200,
            theta_reject: 1e-12,
            theta_margin: 1e-9,
            curvature_grid: 4096,
            closure_defect: 1e-10,
            degeneracy: 1e-8,
            solver_gradient: 1e-11,
            solver_max_iterations: 100,
            dedup: 1e-6,
            hessian_zero: 1e-8,
            tangency_angle: 1e-4,
            decomposition_threshold: 1e-9,
        }
    }
}
