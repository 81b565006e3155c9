//! The analytic lambda pipeline for conformal images of the model annulus.
//!
//! Everything reduces to the Laurent coefficients of `g` with
//! `g^2 = 1/f'`: circle means of `1/|f_z|` are `sum |b_k|^2 r^(2k)`, the
//! radial-derivative terms of the pullback identity become exact series
//! sums, and the rigidity classes are coefficient-support conditions.

use crate::models;
use crate::series::{
    self, eval_circle, winding_on_circle, LaurentSeries, SeriesError,
};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

pub const DEFAULT_RIGIDITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("beta must lie in [0, 1), got {0}")]
    BetaOutOfRange(f64),
    #[error("series validity annulus ({0}, {1}) must contain (beta, 1]")]
    AnnulusNotCovered(f64, f64),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("map is not injective on sampled circles")]
    NotInjective,
    #[error("map does not send the unit circle to the outermost image boundary")]
    NotOuterNormalized,
    #[error("boundary quadrature did not converge at n = {0}")]
    QuadratureDivergence(usize),
    #[error("profile series disagrees with finite differences of A(t)")]
    ProfileCrossCheck,
    #[error("t = {0} outside (ln beta, 0)")]
    TOutOfRange(f64),
    #[error("point with |z| = {0} outside the open annulus")]
    PointOutsideAnnulus(f64),
    #[error(transparent)]
    Model(#[from] models::ModelError),
}

/// A conformal map of the model annulus (or disk, when `beta = 0`) with
/// its validation metadata and the cached square-root series.
#[derive(Debug, Clone)]
pub struct AnnulusMapSpec {
    f: LaurentSeries,
    beta: f64,
    g: LaurentSeries,
    winding_fprime: i32,
    outer_normalized: bool,
}

impl AnnulusMapSpec {
    pub fn f(&self) -> &LaurentSeries {
        &self.f
    }

    pub fn g(&self) -> &LaurentSeries {
        &self.g
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn winding_fprime(&self) -> i32 {
        self.winding_fprime
    }

    pub fn outer_normalized(&self) -> bool {
        self.outer_normalized
    }

    pub fn is_disk_mode(&self) -> bool {
        self.beta == 0.0
    }

    /// `sum |b_k|^2 e^(2 k t)`; the circle mean of `1/|f_z|` at `r = e^t`.
    fn mean_recip_fz(&self, t: f64) -> f64 {
        self.g.terms().map(|(k, b)| b.norm_sqr() * (2.0 * k as f64 * t).exp()).sum()
    }

    /// `sum |b_k|^2 2k(2k-2) e^(2kt)`; term-wise nonnegative.
    fn b_series(&self, t: f64) -> f64 {
        self.g
            .terms()
            .map(|(k, b)| {
                let k2 = 2.0 * k as f64;
                b.norm_sqr() * k2 * (k2 - 2.0) * (k2 * t).exp()
            })
            .sum()
    }

    fn sum_sq(&self) -> f64 {
        self.g.terms().map(|(_, b)| b.norm_sqr()).sum()
    }

    fn tail_sq(&self) -> f64 {
        self.g.terms().filter(|(k, _)| *k != 0 && *k != 1).map(|(_, b)| b.norm_sqr()).sum()
    }
}

/// Validates a series as an annulus map and caches `g` with `g^2 f' = 1`.
pub fn build_map(f: &LaurentSeries, beta: f64) -> Result<AnnulusMapSpec, MapError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(MapError::BetaOutOfRange(beta));
    }
    if f.r_inner() > beta || f.r_outer() <= 1.0 {
        return Err(MapError::AnnulusNotCovered(f.r_inner(), f.r_outer()));
    }
    // Clip to the annulus the map actually lives on before probing; the
    // declared validity region may extend past radii we care about.
    let clipped = f.clone().with_annulus(beta, f.r_outer().min(1.25))?;
    let g = series::sqrt_reciprocal_derivative(&clipped)?;
    let fp = clipped.derivative();
    let rmid = if beta > 0.0 { (beta + 1.0) / 2.0 } else { 0.6 };
    let winding = winding_on_circle(&fp, rmid)?;

    // Outer normalization: the unit-circle image is a positively traversed
    // Jordan curve with the inner-circle image strictly inside it.
    let n = ((4 * clipped.band_width().max(8)) as usize).next_power_of_two().max(512);
    let outer_img = eval_circle(&clipped, 1.0, n)?;
    // Probe circle strictly inside the open annulus; by continuity and
    // injectivity its image being inside the unit-circle image certifies
    // the same for the inner boundary circle.
    let r_probe = if beta > 0.0 { beta + 0.05 * (1.0 - beta) } else { 0.5 };
    let inner_img = eval_circle(&clipped, r_probe, n)?;

    injectivity_check(outer_img.values())?;
    injectivity_check(inner_img.values())?;

    let area = polygon_area(outer_img.values());
    let inner_inside = inner_img
        .values()
        .iter()
        .all(|q| polygon_winding(outer_img.values(), *q).abs() == 1);
    let outer_normalized = winding == 0 && area > 0.0 && inner_inside;

    Ok(AnnulusMapSpec { f: clipped, beta, g, winding_fprime: winding, outer_normalized })
}

fn polygon_area(p: &[Complex64]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|i| (p[i].conj() * p[(i + 1) % n]).im).sum::<f64>()
}

fn polygon_winding(p: &[Complex64], q: Complex64) -> i32 {
    let n = p.len();
    let mut total = 0.0;
    for i in 0..n {
        total += ((p[(i + 1) % n] - q) / (p[i] - q)).arg();
    }
    (total / (2.0 * PI)).round() as i32
}

fn injectivity_check(p: &[Complex64]) -> Result<(), MapError> {
    let n = p.len();
    let diameter = {
        let mut lo = p[0];
        let mut hi = p[0];
        for q in p {
            lo = Complex64::new(lo.re.min(q.re), lo.im.min(q.im));
            hi = Complex64::new(hi.re.max(q.re), hi.im.max(q.im));
        }
        (hi - lo).norm()
    };
    // Pairwise separation at matched resolution; neighbours are close by
    // construction, everything else must stay apart.
    let min_adjacent = (0..n).map(|i| (p[i] - p[(i + 1) % n]).norm()).fold(f64::INFINITY, f64::min);
    let floor = (1e-8 * diameter).min(0.2 * min_adjacent);
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if (p[i] - p[j]).norm() < floor {
                return Err(MapError::NotInjective);
            }
        }
    }
    Ok(())
}

/// The `A(t), B(t)` profile of circle means of `1/|f_z|`.
#[derive(Debug, Clone, Serialize)]
pub struct BTProfile {
    pub ts: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Evaluates `A(t) = sum |b_k|^2 e^(2kt)` and `B(t) = A_tt - 2 A_t` on the
/// given abscissas, cross-checking the closed series for `B` against
/// second differences of `A` at three interior points.
pub fn profile(map: &AnnulusMapSpec, ts: &[f64]) -> Result<BTProfile, MapError> {
    // Closed at the inner endpoint: the series sums converge on the
    // boundary circle, and the model profile is classically evaluated
    // there (A(ln beta) is the circle mean at r = beta).
    let t_lo = if map.beta > 0.0 { map.beta.ln() } else { f64::NEG_INFINITY };
    for &t in ts {
        if !(t_lo <= t && t < 0.0) {
            return Err(MapError::TOutOfRange(t));
        }
    }
    let a: Vec<f64> = ts.iter().map(|&t| map.mean_recip_fz(t)).collect();
    let b: Vec<f64> = ts.iter().map(|&t| map.b_series(t)).collect();

    // Sanity: B really is A_tt - 2 A_t.
    let checks = if map.beta > 0.0 {
        [0.25 * t_lo, 0.5 * t_lo, 0.75 * t_lo]
    } else {
        [-0.5, -1.0, -1.5]
    };
    for t in checks {
        let delta = 1e-4;
        let (ap, a0, am) =
            (map.mean_recip_fz(t + delta), map.mean_recip_fz(t), map.mean_recip_fz(t - delta));
        let fd = (ap - 2.0 * a0 + am) / (delta * delta) - (ap - am) / delta;
        let bt = map.b_series(t);
        // Fourth-derivative scale bounds the finite-difference truncation.
        let m4: f64 = map
            .g
            .terms()
            .map(|(k, c)| c.norm_sqr() * (2.0 * k as f64).powi(4) * (2.0 * k as f64 * t).exp())
            .sum();
        let tol = 1e-6 * bt.abs().max(1.0) + delta * delta * m4;
        if (fd - bt).abs() > tol {
            return Err(MapError::ProfileCrossCheck);
        }
    }
    Ok(BTProfile { ts: ts.to_vec(), a, b })
}

/// `B(t)` at a single abscissa (used by the property sweeps).
pub fn b_at(map: &AnnulusMapSpec, t: f64) -> f64 {
    map.b_series(t)
}

/// The boundary integral of `-6 c3` over the image of the unit circle,
/// via the pullback identity with the `r -> 1` limit taken term-wise.
pub fn c3_integral_via_map(map: &AnnulusMapSpec) -> Result<f64, MapError> {
    if !map.outer_normalized {
        return Err(MapError::NotOuterNormalized);
    }
    let b0 = map.b_series(0.0);
    if map.is_disk_mode() {
        // c3 of the disk vanishes; only the derivative means survive.
        return Ok(2.0 * PI * b0);
    }
    let k = (PI / map.beta.ln()).powi(2) + 1.0;
    Ok(k * 2.0 * PI * map.mean_recip_fz(0.0) + 2.0 * PI * b0)
}

/// `L = integral |f_z| dl = integral 1/|g|^2 dl` over the unit circle,
/// by trapezoid quadrature with doubling to 1e-10 relative.
pub fn boundary_length_via_map(map: &AnnulusMapSpec) -> Result<f64, MapError> {
    let quad = |n: usize| -> Result<f64, MapError> {
        let gs = eval_circle(&map.g, 1.0, n)?;
        Ok(gs.values().iter().map(|v| 1.0 / v.norm_sqr()).sum::<f64>() * 2.0 * PI / n as f64)
    };
    let mut n = ((2 * map.g.band_width() + 2).max(64) as usize).next_power_of_two();
    let mut prev = quad(n)?;
    loop {
        n *= 2;
        let cur = quad(n)?;
        if (cur - prev).abs() <= 1e-10 * cur.abs() {
            return Ok(cur);
        }
        if n >= (1 << 16) {
            return Err(MapError::QuadratureDivergence(n));
        }
        prev = cur;
    }
}

/// The lambda functional with equality diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaReport {
    pub lambda: f64,
    pub boundary_length: f64,
    /// The line integral of c3 itself (lambda = -L * this).
    pub c3_integral: f64,
    pub lower_bound: f64,
    pub defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_tail_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equality: Option<bool>,
}

/// Assembles lambda for an outer-normalized map.
pub fn lambda_via_map(map: &AnnulusMapSpec) -> Result<LambdaReport, MapError> {
    let minus6_c3 = c3_integral_via_map(map)?;
    let length = boundary_length_via_map(map)?;
    let lambda = length * minus6_c3 / 6.0;
    let lower_bound =
        if map.is_disk_mode() { 0.0 } else { models::constants(map.beta)?.lambda_bound };

    let sum = map.sum_sq();
    let tail = map.tail_sq();
    let holder = length * 2.0 * PI * map.mean_recip_fz(0.0) - 4.0 * PI * PI;
    let tol = DEFAULT_RIGIDITY_TOL;
    // On the disk the equality class is the full Moebius family: |f_z|
    // need not be constant on the circle for lambda to vanish.
    let equality = if map.is_disk_mode() {
        tail < tol * sum
    } else {
        tail < tol * sum && holder < tol * 4.0 * PI * PI
    };

    Ok(LambdaReport {
        lambda,
        boundary_length: length,
        c3_integral: -minus6_c3 / 6.0,
        lower_bound,
        defect: lambda - lower_bound,
        b_tail_norm: Some(tail),
        holder_defect: Some(holder),
        equality: Some(equality),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MobiusParams {
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    /// Absent for the affine form `C1 + C2 z`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityClass {
    pub is_mobius: bool,
    pub is_similarity: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<MobiusParams>,
}

/// Coefficient-support classification of the equality classes:
/// `g = b0 + b1 z` means Moebius, and additionally `b0 = 0` or `b1 = 0`
/// means similarity.
pub fn classify_rigidity(map: &AnnulusMapSpec, tol: f64) -> RigidityClass {
    let sum = map.sum_sq();
    let tail = map.tail_sq();
    let is_mobius = tail < tol * sum;
    if !is_mobius {
        return RigidityClass { is_mobius: false, is_similarity: false, params: None };
    }
    let b0 = map.g.coeff(0);
    let b1 = map.g.coeff(1);
    let is_similarity = b0.norm_sqr() < tol * sum || b1.norm_sqr() < tol * sum;

    let pair = |c: Complex64| [c.re, c.im];
    let params = if b1.norm_sqr() < tol * sum {
        // f = C1 + C2 z with C2 = 1/b0^2; read C1 from the series.
        Some(MobiusParams {
            c1: pair(map.f.coeff(0)),
            c2: pair(1.0 / (b0 * b0)),
            c3: None,
        })
    } else {
        // f = C1 + C2/(z + C3) with C3 = b0/b1, C2 = -1/b1^2.
        let c3 = b0 / b1;
        let c2 = -1.0 / (b1 * b1);
        let z0 = Complex64::new((map.beta + 1.0) / 2.0, 0.0);
        let c1 = map
            .f
            .eval_point(z0)
            .map(|w| w - c2 / (z0 + c3))
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        Some(MobiusParams { c1: pair(c1), c2: pair(c2), c3: Some(pair(c3)) })
    };
    RigidityClass { is_mobius, is_similarity, params }
}

/// Ground-truth defining function on the image domain:
/// pairs `(f(z), v_model(|z|) |f'(z)|)`.
pub fn pullback_v(
    map: &AnnulusMapSpec,
    points: &[Complex64],
) -> Result<Vec<(Complex64, f64)>, MapError> {
    let fp = map.f.derivative();
    points
        .iter()
        .map(|&z| {
            let r = z.norm();
            if !(map.beta < r && r < 1.0) {
                return Err(MapError::PointOutsideAnnulus(r));
            }
            let v_model =
                if map.is_disk_mode() { models::v_disk(r) } else { models::v_annulus(map.beta, r)? };
            Ok((map.f.eval_point(z)?, v_model * fp.eval_point(z)?.norm()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn identity_map(beta: f64) -> AnnulusMapSpec {
        let f = LaurentSeries::from_terms(&[(1, c(1.0, 0.0))], 0.0, 2.0).unwrap();
        build_map(&f, beta).unwrap()
    }

    fn mobius_map(c1: Complex64, c2: Complex64, c3: Complex64, beta: f64) -> AnnulusMapSpec {
        build_map(&LaurentSeries::mobius(c1, c2, c3).unwrap(), beta).unwrap()
    }

    #[test]
    fn build_identity() {
        let map = identity_map(0.5);
        assert_eq!(map.winding_fprime(), 0);
        assert!(map.outer_normalized());
        assert!((map.g().coeff(0) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn build_mobius_fixture() {
        let map = mobius_map(c(0.7, 0.0), c(-1.0, 0.0), c(2.0, 0.0), 0.5);
        assert_eq!(map.winding_fprime(), 0);
        assert!(map.outer_normalized());
        assert!((map.g().coeff(0) - c(2.0, 0.0)).norm() < 1e-9);
        assert!((map.g().coeff(1) - c(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn reciprocal_map_is_not_outer_normalized() {
        let f = LaurentSeries::from_terms(&[(-1, c(1.0, 0.0))], 0.05, 20.0).unwrap();
        let map = build_map(&f, 0.5).unwrap();
        assert_eq!(map.winding_fprime(), -2);
        assert!(!map.outer_normalized());
        assert!(matches!(lambda_via_map(&map), Err(MapError::NotOuterNormalized)));
        // Recomposing with beta/z restores outer normalization.
        let f2 = f.recompose_beta_over_z(0.5).unwrap();
        let f2 = f2.with_annulus(0.3, 1.6).unwrap();
        let map2 = build_map(&f2, 0.5).unwrap();
        assert!(map2.outer_normalized());
    }

    #[test]
    fn profile_of_identity_and_mobius() {
        let map = identity_map(0.5);
        let ts: Vec<f64> = (1..20).map(|i| -0.69 * i as f64 / 20.0).collect();
        let p = profile(&map, &ts).unwrap();
        for (a, b) in p.a.iter().zip(&p.b) {
            assert!((a - 1.0).abs() < 1e-14);
            assert!(b.abs() < 1e-14);
        }

        let map = mobius_map(c(0.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0), 0.5);
        let t = -(2f64.ln());
        let p = profile(&map, &[t]).unwrap();
        assert!((p.a[0] - 4.25).abs() < 1e-8, "A = {}", p.a[0]);
        assert!(p.b[0].abs() < 1e-8);
    }

    #[test]
    fn profile_with_pure_b2_coefficient() {
        // f = -1/(3 z^3) has f' = z^-4 and g = z^2, so B(t) = 8 e^(4t).
        let f = LaurentSeries::from_terms(&[(-3, c(-1.0 / 3.0, 0.0))], 0.05, 20.0).unwrap();
        let map = build_map(&f, 0.5).unwrap();
        let ts = [-0.5, -0.2, -0.05];
        let p = profile(&map, &ts).unwrap();
        for (t, b) in ts.iter().zip(&p.b) {
            assert!((b - 8.0 * (4.0 * t).exp()).abs() < 1e-10);
        }
        assert!((b_at(&map, -1e-9) - 8.0).abs() < 1e-6);
    }

    #[test]
    fn profile_rejects_out_of_range_t() {
        let map = identity_map(0.5);
        assert!(matches!(profile(&map, &[0.1]), Err(MapError::TOutOfRange(_))));
        assert!(matches!(profile(&map, &[-0.8]), Err(MapError::TOutOfRange(_))));
    }

    #[test]
    fn c3_integral_values() {
        let map = identity_map(0.5);
        let i6 = c3_integral_via_map(&map).unwrap();
        assert!((i6 - 135.35419030488674).abs() < 1e-10, "i6 = {i6}");

        let map = mobius_map(c(0.7, 0.0), c(-1.0, 0.0), c(2.0, 0.0), 0.5);
        let i6 = c3_integral_via_map(&map).unwrap();
        assert!((i6 - 676.77095152443370).abs() < 1e-7, "i6 = {i6}");

        let f = LaurentSeries::from_terms(&[(1, c(1.0, 0.0))], 0.0, 2.0).unwrap();
        let disk = build_map(&f, 0.0).unwrap();
        assert!(c3_integral_via_map(&disk).unwrap().abs() < 1e-12);
    }

    #[test]
    fn boundary_length_values() {
        assert!((boundary_length_via_map(&identity_map(0.5)).unwrap() - 2.0 * PI).abs() < 1e-12);

        let f = LaurentSeries::affine(c(3.0, 0.0), c(7.0, 0.0));
        let map = build_map(&f, 0.5).unwrap();
        assert!((boundary_length_via_map(&map).unwrap() - 6.0 * PI).abs() < 1e-11);

        // g = z + 2: closed form 2 pi / sqrt(25 - 16) = 2 pi / 3.
        let map = mobius_map(c(0.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0), 0.5);
        let l = boundary_length_via_map(&map).unwrap();
        assert!((l - 2.0 * PI / 3.0).abs() < 1e-9, "L = {l}");
    }

    #[test]
    fn lambda_identity_is_sharp() {
        let report = lambda_via_map(&identity_map(0.5)).unwrap();
        assert!((report.lambda - 141.74257663147567).abs() < 1e-10 * 141.7);
        assert!(report.defect.abs() < 1e-9);
        assert_eq!(report.equality, Some(true));
        // Internal identity lambda = -L * integral(c3).
        let recon = -report.boundary_length * report.c3_integral;
        assert!((report.lambda - recon).abs() <= 1e-12 * report.lambda.abs());
    }

    #[test]
    fn lambda_mobius_fixture() {
        let map = mobius_map(c(0.7, -0.3), c(-1.0, 0.0), c(2.0, 0.0), 0.5);
        let report = lambda_via_map(&map).unwrap();
        assert!((report.lambda - 236.23762771912611).abs() < 1e-6, "lambda = {}", report.lambda);
        assert!(report.defect > 90.0);
        assert_eq!(report.equality, Some(false));
        assert!(report.b_tail_norm.unwrap() < 1e-12);
        assert!(report.holder_defect.unwrap() > 1.0);
    }

    #[test]
    fn lambda_similarity_invariance() {
        let f = LaurentSeries::affine(c(5.0, 0.0), c(3.0, 4.0));
        let report = lambda_via_map(&build_map(&f, 0.5).unwrap()).unwrap();
        assert!((report.lambda - 141.74257663147567).abs() < 1e-9);
        assert_eq!(report.equality, Some(true));
    }

    #[test]
    fn disk_mode_lambda() {
        let f = LaurentSeries::affine(c(2.0, 1.0), c(-0.3, 0.0));
        let report = lambda_via_map(&build_map(&f, 0.0).unwrap()).unwrap();
        assert!(report.lambda.abs() < 1e-10);
        assert_eq!(report.lower_bound, 0.0);
        assert_eq!(report.equality, Some(true));

        // A disk-mode Moebius map still has lambda = 0 (its image is a
        // round disk) even though |f_z| is not constant.
        let map = mobius_map(c(0.0, 0.0), c(-1.0, 0.0), c(2.5, 0.0), 0.0);
        let report = lambda_via_map(&map).unwrap();
        assert!(report.lambda.abs() < 1e-9, "lambda = {}", report.lambda);
        assert_eq!(report.equality, Some(true));

        // A genuine tail makes it positive.
        let mut terms: Vec<(i32, Complex64)> = vec![(0, c(0.1, 0.0)), (1, c(1.0, 0.0)), (3, c(0.04, 0.01))];
        let f = LaurentSeries::from_terms(&mut terms, 0.0, 1.8).unwrap();
        let report = lambda_via_map(&build_map(&f, 0.0).unwrap()).unwrap();
        assert!(report.lambda > 1e-4);
        assert_eq!(report.equality, Some(false));
    }

    #[test]
    fn rigidity_classification() {
        let m = classify_rigidity(&identity_map(0.5), DEFAULT_RIGIDITY_TOL);
        assert!(m.is_mobius && m.is_similarity);

        let map = mobius_map(c(0.7, 0.0), c(-1.0, 0.0), c(2.0, 0.0), 0.5);
        let m = classify_rigidity(&map, DEFAULT_RIGIDITY_TOL);
        assert!(m.is_mobius && !m.is_similarity);
        let p = m.params.unwrap();
        let c3 = p.c3.unwrap();
        assert!((c3[0] - 2.0).abs() < 1e-7 && c3[1].abs() < 1e-7);
        assert!((p.c2[0] + 1.0).abs() < 1e-7 && p.c2[1].abs() < 1e-7);
        assert!((p.c1[0] - 0.7).abs() < 1e-7 && p.c1[1].abs() < 1e-7);

        // Tail coefficient kills the Moebius property.
        let base = LaurentSeries::mobius(c(0.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)).unwrap();
        let mut terms: Vec<(i32, Complex64)> = base.terms().collect();
        terms.push((3, c(0.02, 0.0)));
        let f = LaurentSeries::from_terms(&terms, 0.0, base.r_outer()).unwrap();
        let m = classify_rigidity(&build_map(&f, 0.5).unwrap(), DEFAULT_RIGIDITY_TOL);
        assert!(!m.is_mobius);
    }

    #[test]
    fn pullback_values() {
        let map = identity_map(0.5);
        let pts = [c(0.75, 0.0), c(0.0, 0.6)];
        let out = pullback_v(&map, &pts).unwrap();
        for (i, (w, v)) in out.iter().enumerate() {
            assert!((w - pts[i]).norm() < 1e-12);
            assert!((v - models::v_annulus(0.5, pts[i].norm()).unwrap()).abs() < 1e-12);
        }

        let map = build_map(&LaurentSeries::affine(c(2.0, 0.0), c(0.0, 0.0)), 0.5).unwrap();
        let out = pullback_v(&map, &[c(0.75, 0.0)]).unwrap();
        assert!((out[0].0 - c(1.5, 0.0)).norm() < 1e-12);
        assert!((out[0].1 - 2.0 * models::v_annulus(0.5, 0.75).unwrap()).abs() < 1e-12);

        let map = mobius_map(c(0.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0), 0.5);
        let out = pullback_v(&map, &[c(0.75, 0.0)]).unwrap();
        assert!((out[0].1 - 0.021106369800167831).abs() < 1e-10, "v = {}", out[0].1);

        assert!(pullback_v(&map, &[c(0.3, 0.0)]).is_err());
    }
}
