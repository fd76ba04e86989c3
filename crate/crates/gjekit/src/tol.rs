//! Central tolerance record. Every module reads its thresholds from here;
//! the CLI config may override individual fields.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tie tolerance on envelope values.
    pub tie: f64,
    /// `|G(x, x̄, H(x, x̄, u)) − u| ≤ h_inverse · max(1, |u|)`.
    pub h_inverse: f64,
    pub root_max_iter: usize,
    pub bracket_doublings: usize,
    pub newton_max_iter: usize,
    pub newton_halvings: usize,
    /// Residual bound promised by the exponential maps.
    pub newton_residual: f64,
    /// Agreement required between analytic and finite-difference derivatives.
    pub fd_relative: f64,
    /// Step (in p̄ units) of the fourth-order tensor stencils.
    pub tensor_step: f64,
    pub tol_mass: f64,
    pub stall_sweeps: usize,
    pub max_sweeps: usize,
    /// Snap distance for target assignment of reflected rays.
    pub snap: f64,
    /// Validity cap of sphere charts, as a polar angle in degrees.
    pub cap_angle_deg: f64,
    pub target_net: usize,
    pub hull_snap: f64,
    /// Section diameter bound, as a fraction of the domain diameter.
    pub epsilon_fraction: f64,
    /// Allowed negativity of the sampled tensor forms.
    pub g3w_negative: f64,
    /// Values of G-differences below this (times the local scale) count as zero
    /// in the quasiconvexity fits.
    pub qq_zero: f64,
    pub det_floor: f64,
    pub twist_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tie: 1e-9,
            h_inverse: 1e-10,
            root_max_iter: 100,
            bracket_doublings: 60,
            newton_max_iter: 50,
            newton_halvings: 30,
            newton_residual: 1e-8,
            fd_relative: 1e-5,
            tensor_step: 1e-2,
            tol_mass: 1e-6,
            stall_sweeps: 10_000,
            max_sweeps: 200_000,
            snap: 1e-6,
            cap_angle_deg: 80.0,
            target_net: 10_000,
            hull_snap: 1e-12,
            epsilon_fraction: 0.1,
            g3w_negative: 1e-8,
            qq_zero: 1e-9,
            det_floor: 1e-8,
            twist_floor: 1e-6,
        }
    }
}
