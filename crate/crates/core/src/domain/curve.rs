//! Boundary curves as finite trigonometric polynomials.
//!
//! The smooth subclass keeps derivatives, curvature and quadrature exact,
//! which is what the quantitative checks downstream rely on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

fn default_orientation() -> Orientation {
    Orientation::Positive
}

/// Periodic map `[0, 2 pi) -> C`:
/// `gamma(t) = const + sum_m cos[m-1] cos(m t) + sin[m-1] sin(m t)`
/// with complex coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    #[serde(rename = "const", with = "complex_pair")]
    pub(crate) constant: Complex64,
    #[serde(with = "complex_pairs")]
    pub(crate) cos: Vec<Complex64>,
    #[serde(with = "complex_pairs")]
    pub(crate) sin: Vec<Complex64>,
    #[serde(default = "default_orientation")]
    pub(crate) orientation: Orientation,
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let p = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(p[0], p[1]))
    }
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let v = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(v.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

/// Geometry attached to one boundary sample point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryFrame {
    #[serde(with = "complex_pair")]
    pub point: Complex64,
    /// Unit normal pointing into the region enclosed by the curve.
    #[serde(with = "complex_pair")]
    pub inward_normal: Complex64,
    /// Geometric curvature relative to the inward normal (1/R for a circle).
    pub curvature: f64,
    /// Quadrature weight: speed times parameter spacing.
    pub arc_weight: f64,
    /// Parameter value of the sample.
    pub param: f64,
}

impl BoundaryCurve {
    pub fn new(
        constant: Complex64,
        cos: Vec<Complex64>,
        sin: Vec<Complex64>,
        orientation: Orientation,
    ) -> Self {
        Self { constant, cos, sin, orientation }
    }

    /// Circle of radius `r` around `center`, positively oriented.
    pub fn circle(center: Complex64, r: f64) -> Self {
        Self {
            constant: center,
            cos: vec![Complex64::new(r, 0.0)],
            sin: vec![Complex64::new(0.0, r)],
            orientation: Orientation::Positive,
        }
    }

    /// Axis-aligned ellipse `(a cos t, b sin t)` around the origin.
    pub fn ellipse(a: f64, b: f64) -> Self {
        Self {
            constant: Complex64::new(0.0, 0.0),
            cos: vec![Complex64::new(a, 0.0)],
            sin: vec![Complex64::new(0.0, b)],
            orientation: Orientation::Positive,
        }
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Highest frequency present.
    pub fn max_freq(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    /// Number of stored coefficients (constant included).
    pub fn coeff_count(&self) -> usize {
        1 + self.cos.len() + self.sin.len()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut z = self.constant;
        for (m, &c) in self.cos.iter().enumerate() {
            z += c * ((m + 1) as f64 * t).cos();
        }
        for (m, &s) in self.sin.iter().enumerate() {
            z += s * ((m + 1) as f64 * t).sin();
        }
        z
    }

    pub fn deriv(&self, t: f64) -> Complex64 {
        let mut z = Complex64::new(0.0, 0.0);
        for (m, &c) in self.cos.iter().enumerate() {
            let k = (m + 1) as f64;
            z -= c * k * (k * t).sin();
        }
        for (m, &s) in self.sin.iter().enumerate() {
            let k = (m + 1) as f64;
            z += s * k * (k * t).cos();
        }
        z
    }

    pub fn deriv2(&self, t: f64) -> Complex64 {
        let mut z = Complex64::new(0.0, 0.0);
        for (m, &c) in self.cos.iter().enumerate() {
            let k = (m + 1) as f64;
            z -= c * k * k * (k * t).cos();
        }
        for (m, &s) in self.sin.iter().enumerate() {
            let k = (m + 1) as f64;
            z -= s * k * k * (k * t).sin();
        }
        z
    }

    /// Signed curvature along the stored parameterization.
    pub fn raw_curvature(&self, t: f64) -> f64 {
        let d = self.deriv(t);
        let dd = self.deriv2(t);
        (d.conj() * dd).im / d.norm().powi(3)
    }

    /// Curvature relative to the inward normal; +1/R for any circle,
    /// independent of traversal direction.
    pub fn curvature(&self, t: f64) -> f64 {
        self.orientation.sign() * self.raw_curvature(t)
    }

    /// Unit normal into the enclosed region.
    pub fn inward_normal(&self, t: f64) -> Complex64 {
        let d = self.deriv(t);
        Complex64::new(0.0, self.orientation.sign()) * d / d.norm()
    }

    /// Enclosed signed area, `1/2 integral Im(conj(gamma) gamma') dt`.
    /// Trapezoid quadrature is exact for trigonometric polynomials here.
    pub fn signed_area(&self) -> f64 {
        let n = (4 * self.max_freq() + 8).next_power_of_two();
        let mut a = 0.0;
        for j in 0..n {
            let t = 2.0 * PI * j as f64 / n as f64;
            a += (self.eval(t).conj() * self.deriv(t)).im;
        }
        0.5 * a * 2.0 * PI / n as f64
    }

    /// Curve length by trapezoid quadrature with doubling to 1e-12 relative.
    pub fn length(&self) -> f64 {
        let mut n = (8 * self.max_freq() + 16).next_power_of_two();
        let quad = |n: usize| -> f64 {
            (0..n).map(|j| self.deriv(2.0 * PI * j as f64 / n as f64).norm()).sum::<f64>()
                * 2.0
                * PI
                / n as f64
        };
        let mut prev = quad(n);
        loop {
            n *= 2;
            let cur = quad(n);
            if (cur - prev).abs() <= 1e-12 * cur.abs() || n >= (1 << 16) {
                return cur;
            }
            prev = cur;
        }
    }

    fn speed_floor(&self) -> f64 {
        let n = 16 * self.max_freq().max(4);
        (0..n)
            .map(|j| self.deriv(2.0 * PI * j as f64 / n as f64).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest point on the curve to `z` by multi-start damped Newton on
    /// the squared distance, accurate to ~1e-10 of the curve scale.
    pub fn nearest(&self, z: Complex64) -> Result<CurvePoint, DomainError> {
        let starts = 32;
        let mut best: Option<CurvePoint> = None;
        for s in 0..starts {
            let t0 = 2.0 * PI * s as f64 / starts as f64;
            if let Some(p) = self.newton_project(z, t0) {
                if best.as_ref().map_or(true, |b| p.dist < b.dist) {
                    best = Some(p);
                }
            }
        }
        best.ok_or(DomainError::ProjectionFailed {
            best: f64::NAN,
        })
    }

    /// Single-start projection, for callers that already hold a good seed.
    pub fn nearest_seeded(&self, z: Complex64, t0: f64) -> Option<CurvePoint> {
        self.newton_project(z, t0)
    }

    fn newton_project(&self, z: Complex64, t0: f64) -> Option<CurvePoint> {
        let rho = |t: f64| (self.eval(t) - z).norm_sqr();
        let mut t = t0;
        let mut val = rho(t);
        let scale2 = {
            let s = self.eval(t0) - self.constant;
            (s.norm_sqr()).max(1.0e-30)
        };
        let max_step = PI / 8.0;
        for _ in 0..60 {
            let g = self.eval(t) - z;
            let d = self.deriv(t);
            let dd = self.deriv2(t);
            let grad = 2.0 * (g.conj() * d).re;
            let hess = 2.0 * (d.norm_sqr() + (g.conj() * dd).re);
            let mut step = if hess.abs() > 1e-300 { -grad / hess } else { -grad.signum() * max_step };
            step = step.clamp(-max_step, max_step);
            // Damping: halve until the squared distance does not increase.
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..24 {
                let cand = rho(t + s * step);
                if cand <= val + 1e-18 * scale2 {
                    t += s * step;
                    val = cand;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted || (s * step).abs() < 1e-13 {
                break;
            }
        }
        let g = self.eval(t) - z;
        let grad = 2.0 * (g.conj() * self.deriv(t)).re;
        // Reject starts stuck on a non-critical point.
        if grad.abs() > 1e-6 * (scale2 + val) {
            return None;
        }
        Some(CurvePoint { t: t.rem_euclid(2.0 * PI), point: self.eval(t), dist: val.sqrt() })
    }

    /// Signed distance to the enclosed region: positive inside, negative
    /// outside. The sign comes from the inward normal at the foot point.
    pub fn signed_distance_enclosed(&self, z: Complex64) -> Result<f64, DomainError> {
        let p = self.nearest(z)?;
        if p.dist == 0.0 {
            return Ok(0.0);
        }
        let n = self.inward_normal(p.t);
        let side = (n.conj() * (z - p.point)).re;
        Ok(if side >= 0.0 { p.dist } else { -p.dist })
    }

    /// Winding-number membership test (used as a cross-check on the
    /// normal-side test; dense argument summation).
    pub fn contains_winding(&self, z: Complex64) -> bool {
        let n = (64 * self.max_freq()).max(512);
        let mut total = 0.0;
        let mut prev = self.eval(0.0) - z;
        for j in 1..=n {
            let cur = self.eval(2.0 * PI * j as f64 / n as f64) - z;
            total += (cur / prev).arg();
            prev = cur;
        }
        (total / (2.0 * PI)).round() as i32 != 0
    }

    /// Curve with the traversal direction reversed (t -> -t).
    pub fn reversed(&self) -> Self {
        // cos(m(-t)) = cos(mt), sin(m(-t)) = -sin(mt)
        Self {
            constant: self.constant,
            cos: self.cos.clone(),
            sin: self.sin.iter().map(|s| -s).collect(),
            orientation: match self.orientation {
                Orientation::Positive => Orientation::Negative,
                Orientation::Negative => Orientation::Positive,
            },
        }
    }
}

/// Result of a projection onto a curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub t: f64,
    pub point: Complex64,
    pub dist: f64,
}

/// `n` equispaced frames along the curve.
pub fn frames(curve: &BoundaryCurve, n: usize) -> Result<Vec<BoundaryFrame>, DomainError> {
    if n < 8 {
        return Err(DomainError::Invalid("frames need n >= 8"));
    }
    let floor = curve.speed_floor();
    let scale = curve.length() / (2.0 * PI);
    if floor <= 1e-9 * scale {
        // Locate a near-degenerate parameter for the error report.
        let m = 16 * curve.max_freq().max(4);
        let t = (0..m)
            .map(|j| 2.0 * PI * j as f64 / m as f64)
            .min_by(|a, b| curve.deriv(*a).norm().total_cmp(&curve.deriv(*b).norm()))
            .unwrap();
        return Err(DomainError::DegenerateCurve { t });
    }
    let dt = 2.0 * PI / n as f64;
    Ok((0..n)
        .map(|j| {
            let t = j as f64 * dt;
            BoundaryFrame {
                point: curve.eval(t),
                inward_normal: curve.inward_normal(t),
                curvature: curve.curvature(t),
                arc_weight: curve.deriv(t).norm() * dt,
                param: t,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn unit_circle_frames() {
        let curve = BoundaryCurve::circle(c(0.0, 0.0), 1.0);
        let fr = frames(&curve, 16).unwrap();
        let total: f64 = fr.iter().map(|f| f.arc_weight).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        for f in &fr {
            assert!((f.curvature - 1.0).abs() < 1e-10);
            assert!((f.inward_normal.norm() - 1.0).abs() < 1e-12);
            // Inward means toward the center here.
            assert!((f.inward_normal + f.point).norm() < 1e-12);
        }
    }

    #[test]
    fn shifted_circle_curvature() {
        let curve = BoundaryCurve::circle(c(1.0, 0.0), 2.0);
        for f in frames(&curve, 32).unwrap() {
            assert!((f.curvature - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn ellipse_curvature_at_vertex() {
        // (2 cos t, sin t): curvature at t = 0 is a/b^2 = 2.
        let curve = BoundaryCurve::ellipse(2.0, 1.0);
        let fr = frames(&curve, 64).unwrap();
        assert!((fr[0].curvature - 2.0).abs() < 1e-10);
        // And at the co-vertex t = pi/2 it is b/a^2 = 1/4.
        assert!((fr[16].curvature - 0.25).abs() < 1e-10);
    }

    #[test]
    fn reversal_flips_orientation_and_area() {
        let curve = BoundaryCurve::ellipse(2.0, 1.0);
        let rev = curve.reversed();
        assert_eq!(curve.orientation(), Orientation::Positive);
        assert_eq!(rev.orientation(), Orientation::Negative);
        let a = curve.signed_area();
        let b = rev.signed_area();
        assert!((a + b).abs() < 1e-12 * a.abs());
        assert!((a - 2.0 * PI).abs() < 1e-12);
        // Geometric curvature is traversal-independent.
        assert!((rev.curvature(0.0) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn frames_reject_degenerate_curve() {
        // gamma = cos t + i sin(t) with the sin coefficient zeroed out on
        // one axis collapses to a segment; speed vanishes at the ends.
        let curve = BoundaryCurve::new(
            c(0.0, 0.0),
            vec![c(1.0, 0.0)],
            vec![],
            Orientation::Positive,
        );
        assert!(matches!(frames(&curve, 16), Err(DomainError::DegenerateCurve { .. })));
    }

    #[test]
    fn nearest_point_on_ellipse() {
        let curve = BoundaryCurve::ellipse(2.0, 1.0);
        let p = curve.nearest(c(3.0, 0.0)).unwrap();
        assert!((p.point - c(2.0, 0.0)).norm() < 1e-10);
        assert!((p.dist - 1.0).abs() < 1e-10);
        // A point on the curve projects to itself.
        let q = curve.eval(0.7);
        let p = curve.nearest(q).unwrap();
        assert!(p.dist < 1e-10);
    }

    #[test]
    fn signed_distance_side() {
        let curve = BoundaryCurve::circle(c(0.0, 0.0), 1.0);
        assert!((curve.signed_distance_enclosed(c(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((curve.signed_distance_enclosed(c(0.0, 2.0)).unwrap() + 1.0).abs() < 1e-12);
        assert!(curve.contains_winding(c(0.3, 0.2)));
        assert!(!curve.contains_winding(c(1.3, 0.2)));
    }

    #[test]
    fn curve_json_field_names() {
        let curve = BoundaryCurve::circle(c(0.5, 0.0), 1.0);
        let j = serde_json::to_value(&curve).unwrap();
        assert!(j.get("const").is_some());
        assert!(j.get("cos").is_some());
        assert!(j.get("sin").is_some());
        let back: BoundaryCurve = serde_json::from_value(j).unwrap();
        assert_eq!(curve, back);
        // Orientation defaults to positive when omitted.
        let b: BoundaryCurve = serde_json::from_str(
            "{\"const\":[0.0,0.0],\"cos\":[[1.0,0.0]],\"sin\":[[0.0,1.0]]}",
        )
        .unwrap();
        assert_eq!(b.orientation(), Orientation::Positive);
    }
}
