//! Closed-form model solutions and sharp constants.
//!
//! Everything here is an explicit formula: the defining function of the
//! round annulus and the disk, the blow-up solutions on the punctured
//! disk and the circular shell, the coefficient `c3` of the cubic term
//! in the boundary expansion, and the sharp lower bound for lambda on
//! doubly-connected domains. The other modules treat these as oracles.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("beta must lie in [0, 1), got {0}")]
    BetaOutOfRange(f64),
    #[error("radius {r} outside valid range ({lo}, {hi})")]
    RadiusOutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("point coincides with the puncture")]
    AtPuncture,
}

/// Constants attached to the round annulus `beta < |z| < 1`.
///
/// `beta = 0` denotes the punctured disk, where the constants are the
/// finite limits of the annulus formulas.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConstants {
    pub beta: f64,
    /// Cubic coefficient of the boundary expansion at the unit circle.
    pub c3: f64,
    /// Sharp lower bound for lambda over the conformal class.
    pub lambda_bound: f64,
    /// Curvature of the outer unit circle.
    pub kappa: f64,
}

/// `c3` and the sharp bound for modulus `beta`.
pub fn constants(beta: f64) -> Result<ModelConstants, ModelError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(ModelError::BetaOutOfRange(beta));
    }
    // (pi/ln beta)^2 -> 0 as beta -> 0, so the punctured disk is the limit.
    let p = if beta == 0.0 {
        0.0
    } else {
        let q = PI / beta.ln();
        q * q
    };
    Ok(ModelConstants {
        beta,
        c3: -(p + 1.0) / 6.0,
        lambda_bound: (2.0 * PI * PI / 3.0) * (p + 1.0),
        kappa: 1.0,
    })
}

/// Defining function of the round annulus `beta < r < 1`, as a function
/// of the radius: `v = -r (ln beta / pi) sin(pi ln r / ln beta)`.
///
/// Vanishes at both boundary circles and has radial derivative -1 at r = 1.
pub fn v_annulus(beta: f64, r: f64) -> Result<f64, ModelError> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(ModelError::BetaOutOfRange(beta));
    }
    if !(beta <= r && r <= 1.0) {
        return Err(ModelError::RadiusOutOfRange { r, lo: beta, hi: 1.0 });
    }
    let l = beta.ln();
    Ok(-r * (l / PI) * (PI * r.ln() / l).sin())
}

/// Defining function of the unit disk, `v = (1 - r^2) / 2`.
pub fn v_disk(r: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&r));
    0.5 * (1.0 - r * r)
}

/// Blow-up solution on the punctured disk `B_r(p) - {p}`:
/// `u = -log(-(s/r) log(s/r)) - 2 ln r` with `s = |x - p|`.
pub fn u_punctured_disk(r: f64, p: Complex64, x: Complex64) -> Result<f64, ModelError> {
    let s = (x - p).norm();
    if s == 0.0 {
        return Err(ModelError::AtPuncture);
    }
    if s >= r {
        return Err(ModelError::RadiusOutOfRange { r: s, lo: 0.0, hi: r });
    }
    let q = s / r;
    Ok(-(-q * q.ln()).ln() - 2.0 * r.ln())
}

/// Blow-up solution on the shell `B_1(p) - closure(B_r(p))`:
/// `u = -log((s/pi) log(1/r) sin(pi log(1/s) / log(1/r)))`.
pub fn u_shell(r: f64, p: Complex64, x: Complex64) -> Result<f64, ModelError> {
    let s = (x - p).norm();
    if !(r < s && s < 1.0) {
        return Err(ModelError::RadiusOutOfRange { r: s, lo: r, hi: 1.0 });
    }
    let lr = (1.0 / r).ln();
    Ok(-((s / PI) * lr * (PI * (1.0 / s).ln() / lr).sin()).ln())
}

/// Shell solution rescaled to `B_rho(p) - closure(B_r(p))`.
///
/// Uses the scaling law `u_{lambda D}(x) = u_D(x / lambda) - ln lambda`.
pub fn u_shell_scaled(rho: f64, r: f64, p: Complex64, x: Complex64) -> Result<f64, ModelError> {
    let y = (x - p) / rho;
    Ok(u_shell(r / rho, Complex64::new(0.0, 0.0), y)? - rho.ln())
}

/// Right-hand side of the growth condition near a puncture:
/// `u(x) >= -log(-r |x - p| log(|x - p| / r))`.
pub fn growth_barrier(r: f64, p: Complex64, x: Complex64) -> f64 {
    let s = (x - p).norm();
    -(-r * s * (s / r).ln()).ln()
}

/// True iff every sample `(x, u(x))` satisfies the growth condition with
/// slack at least -1e-8. Samples at or beyond radius `r` count as failures.
pub fn growth_barrier_check(u_values: &[(Complex64, f64)], p: Complex64, r: f64) -> bool {
    u_values.iter().all(|&(x, u)| {
        let s = (x - p).norm();
        if s == 0.0 || s >= r {
            return false;
        }
        u - growth_barrier(r, p, x) >= -1e-8
    })
}
