//! Domain descriptions, distance geometry and validation.

mod curve;

pub use curve::{frames, BoundaryCurve, BoundaryFrame, CurvePoint, Orientation};

use crate::series::LaurentSeries;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid domain: {0}")]
    Invalid(&'static str),
    #[error("curve derivative vanishes near t = {t}")]
    DegenerateCurve { t: f64 },
    #[error("distance projection did not converge (best candidate {best})")]
    ProjectionFailed { best: f64 },
    #[error("domain fails validation: {0}")]
    Validation(String),
}

/// Map data carried by a `mapped_annulus` domain. The cached square-root
/// series and the normalization flags live in the map layer; this is just
/// the declarative part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSketch {
    pub f: LaurentSeries,
    pub beta: f64,
}

/// Declarative description of the input domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DomainSpec {
    UnitDisk,
    Annulus {
        beta: f64,
    },
    MappedAnnulus {
        map: MapSketch,
    },
    Punctured {
        outer: BoundaryCurve,
        punctures: Vec<[f64; 2]>,
    },
    CurveBounded {
        outer: BoundaryCurve,
        inner: Option<BoundaryCurve>,
    },
}

impl DomainSpec {
    pub fn puncture_points(&self) -> Vec<Complex64> {
        match self {
            DomainSpec::Punctured { punctures, .. } => {
                punctures.iter().map(|p| Complex64::new(p[0], p[1])).collect()
            }
            // beta = 0 is the punctured disk.
            DomainSpec::Annulus { beta } if *beta == 0.0 => vec![Complex64::new(0.0, 0.0)],
            _ => vec![],
        }
    }

    pub fn is_doubly_connected(&self) -> bool {
        match self {
            DomainSpec::Annulus { beta } => *beta > 0.0,
            DomainSpec::MappedAnnulus { map } => map.beta > 0.0,
            DomainSpec::CurveBounded { inner, .. } => inner.is_some(),
            _ => false,
        }
    }
}

/// Distance to the nearest boundary component, positive inside the domain.
pub fn signed_distance(spec: &DomainSpec, z: Complex64) -> Result<f64, DomainError> {
    match spec {
        DomainSpec::UnitDisk => Ok(1.0 - z.norm()),
        DomainSpec::Annulus { beta } => {
            if !(0.0..1.0).contains(beta) {
                return Err(DomainError::Invalid("beta out of range"));
            }
            let r = z.norm();
            Ok(if *beta == 0.0 { (1.0 - r).min(r) } else { (1.0 - r).min(r - beta) })
        }
        _ => Ok(DomainGeometry::build(spec)?.signed_distance(z)?),
    }
}

/// Image curve of `|z| = radius` under a Laurent series, as an exact
/// trigonometric polynomial (the series is banded, so the image is too).
pub fn image_circle_curve(f: &LaurentSeries, radius: f64) -> Result<BoundaryCurve, DomainError> {
    let k_hi = f.k_max().max(-f.k_min()).max(1) as usize;
    let mut cos = vec![Complex64::new(0.0, 0.0); k_hi];
    let mut sin = vec![Complex64::new(0.0, 0.0); k_hi];
    let mut constant = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    for (k, b) in f.terms() {
        let a = b * radius.powi(k);
        match k.cmp(&0) {
            std::cmp::Ordering::Equal => constant += a,
            std::cmp::Ordering::Greater => {
                cos[(k - 1) as usize] += a;
                sin[(k - 1) as usize] += i * a;
            }
            std::cmp::Ordering::Less => {
                cos[(-k - 1) as usize] += a;
                sin[(-k - 1) as usize] -= i * a;
            }
        }
    }
    // Trim zero high frequencies.
    while cos.len() > 1 && cos.last().unwrap().norm() == 0.0 && sin.last().unwrap().norm() == 0.0 {
        cos.pop();
        sin.pop();
    }
    let mut curve = BoundaryCurve::new(constant, cos, sin, Orientation::Positive);
    let area = curve.signed_area();
    if area.abs() < 1e-14 {
        return Err(DomainError::Invalid("image circle degenerates"));
    }
    if area < 0.0 {
        curve = BoundaryCurve::new(
            curve.constant,
            curve.cos.clone(),
            curve.sin.clone(),
            Orientation::Negative,
        );
    }
    Ok(curve)
}

/// Role of a boundary component relative to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentRole {
    Outer,
    Inner,
}

/// Shape with closed-form fast paths for circles.
#[derive(Debug, Clone)]
pub enum ComponentShape {
    Circle { center: Complex64, radius: f64 },
    Trig(BoundaryCurve),
}

#[derive(Debug, Clone)]
pub struct BoundaryComponent {
    pub shape: ComponentShape,
    pub role: ComponentRole,
}

#[derive(Debug, Clone, Copy)]
pub struct Puncture {
    pub point: Complex64,
    /// Radius of a disk around the puncture containing the whole domain;
    /// enters the growth-condition barrier.
    pub enclosing_radius: f64,
}

/// Foot-point data for the nearest boundary component.
#[derive(Debug, Clone, Copy)]
pub struct NearestBoundary {
    pub component: usize,
    pub point: Complex64,
    pub dist: f64,
    /// Curvature with the domain-side sign convention (negative on inner
    /// components: the boundary curves away from the domain).
    pub curvature: f64,
    /// Unit normal pointing into the domain.
    pub inward: Complex64,
}

/// Resolved geometry of a domain: components with roles, punctures with
/// their growth radii, and a bounding box.
#[derive(Debug, Clone)]
pub struct DomainGeometry {
    pub components: Vec<BoundaryComponent>,
    pub punctures: Vec<Puncture>,
    pub bbox_min: Complex64,
    pub bbox_max: Complex64,
    /// Characteristic length (outer component diameter).
    pub scale: f64,
}

fn as_circle(curve: &BoundaryCurve) -> Option<(Complex64, f64)> {
    if curve.cos.len() == 1 && curve.sin.len() == 1 {
        let a = curve.cos[0];
        let b = curve.sin[0];
        let i = Complex64::new(0.0, 1.0);
        if (b - i * a).norm() <= 1e-13 * a.norm() || (b + i * a).norm() <= 1e-13 * a.norm() {
            return Some((curve.constant, a.norm()));
        }
    }
    None
}

fn shape_of(curve: &BoundaryCurve) -> ComponentShape {
    match as_circle(curve) {
        Some((center, radius)) => ComponentShape::Circle { center, radius },
        None => ComponentShape::Trig(curve.clone()),
    }
}

impl ComponentShape {
    /// Signed distance to the region enclosed by the component
    /// (positive inside the enclosed region).
    pub fn sd_enclosed(&self, z: Complex64) -> Result<f64, DomainError> {
        match self {
            ComponentShape::Circle { center, radius } => Ok(radius - (z - center).norm()),
            ComponentShape::Trig(c) => c.signed_distance_enclosed(z),
        }
    }

    pub fn sample(&self, n: usize) -> Vec<Complex64> {
        match self {
            ComponentShape::Circle { center, radius } => (0..n)
                .map(|j| center + Complex64::from_polar(*radius, 2.0 * PI * j as f64 / n as f64))
                .collect(),
            ComponentShape::Trig(c) => {
                (0..n).map(|j| c.eval(2.0 * PI * j as f64 / n as f64)).collect()
            }
        }
    }

    pub fn max_curvature(&self) -> f64 {
        match self {
            ComponentShape::Circle { radius, .. } => 1.0 / radius,
            ComponentShape::Trig(c) => {
                let n = (32 * c.max_freq()).max(256);
                (0..n)
                    .map(|j| c.curvature(2.0 * PI * j as f64 / n as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

impl DomainGeometry {
    pub fn build(spec: &DomainSpec) -> Result<Self, DomainError> {
        let origin = Complex64::new(0.0, 0.0);
        let (components, punctures): (Vec<BoundaryComponent>, Vec<Complex64>) = match spec {
            DomainSpec::UnitDisk => (
                vec![BoundaryComponent {
                    shape: ComponentShape::Circle { center: origin, radius: 1.0 },
                    role: ComponentRole::Outer,
                }],
                vec![],
            ),
            DomainSpec::Annulus { beta } => {
                if !(0.0..1.0).contains(beta) {
                    return Err(DomainError::Invalid("beta out of range"));
                }
                let mut comps = vec![BoundaryComponent {
                    shape: ComponentShape::Circle { center: origin, radius: 1.0 },
                    role: ComponentRole::Outer,
                }];
                let mut punct = vec![];
                if *beta > 0.0 {
                    comps.push(BoundaryComponent {
                        shape: ComponentShape::Circle { center: origin, radius: *beta },
                        role: ComponentRole::Inner,
                    });
                } else {
                    punct.push(origin);
                }
                (comps, punct)
            }
            DomainSpec::MappedAnnulus { map } => {
                if !(0.0..1.0).contains(&map.beta) {
                    return Err(DomainError::Invalid("beta out of range"));
                }
                let outer = image_circle_curve(&map.f, 1.0)?;
                let mut comps = vec![BoundaryComponent { shape: shape_of(&outer), role: ComponentRole::Outer }];
                if map.beta > 0.0 {
                    let inner = image_circle_curve(&map.f, map.beta)?;
                    comps.push(BoundaryComponent { shape: shape_of(&inner), role: ComponentRole::Inner });
                }
                (comps, vec![])
            }
            DomainSpec::Punctured { outer, punctures } => (
                vec![BoundaryComponent { shape: shape_of(outer), role: ComponentRole::Outer }],
                punctures.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            ),
            DomainSpec::CurveBounded { outer, inner } => {
                let mut comps =
                    vec![BoundaryComponent { shape: shape_of(outer), role: ComponentRole::Outer }];
                if let Some(inner) = inner {
                    comps.push(BoundaryComponent { shape: shape_of(inner), role: ComponentRole::Inner });
                }
                (comps, vec![])
            }
        };

        // Bounding box and scale from the outer component.
        let outer_samples = components[0].shape.sample(1024);
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &outer_samples {
            lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        let scale = ((hi.re - lo.re).powi(2) + (hi.im - lo.im).powi(2)).sqrt();

        // Growth radii: a disk around the puncture containing the domain.
        let punctures = punctures
            .into_iter()
            .map(|p| {
                let r = match &components[0].shape {
                    ComponentShape::Circle { center, radius } => (p - center).norm() + radius,
                    ComponentShape::Trig(_) => outer_samples
                        .iter()
                        .map(|y| (y - p).norm())
                        .fold(0.0, f64::max)
                        * (1.0 + 1e-12),
                };
                Puncture { point: p, enclosing_radius: r }
            })
            .collect();

        Ok(Self { components, punctures, bbox_min: lo, bbox_max: hi, scale })
    }

    /// Signed distance to the domain: positive inside.
    pub fn signed_distance(&self, z: Complex64) -> Result<f64, DomainError> {
        let mut d = f64::INFINITY;
        for comp in &self.components {
            let s = comp.shape.sd_enclosed(z)?;
            d = d.min(match comp.role {
                ComponentRole::Outer => s,
                ComponentRole::Inner => -s,
            });
        }
        for p in &self.punctures {
            d = d.min((z - p.point).norm());
        }
        Ok(d)
    }

    /// Nearest true-boundary component (punctures excluded), with the
    /// domain-side curvature sign.
    pub fn nearest_boundary(&self, z: Complex64) -> Result<NearestBoundary, DomainError> {
        let mut best: Option<NearestBoundary> = None;
        for (ci, comp) in self.components.iter().enumerate() {
            let cand = match &comp.shape {
                ComponentShape::Circle { center, radius } => {
                    let w = z - center;
                    let r = w.norm();
                    let dir = if r > 1e-300 { w / r } else { Complex64::new(1.0, 0.0) };
                    let point = center + dir * *radius;
                    let (kappa, inward) = match comp.role {
                        ComponentRole::Outer => (1.0 / radius, -dir),
                        ComponentRole::Inner => (-1.0 / radius, dir),
                    };
                    NearestBoundary { component: ci, point, dist: (r - radius).abs(), curvature: kappa, inward }
                }
                ComponentShape::Trig(curve) => {
                    let p = curve.nearest(z)?;
                    let kappa_geom = curve.curvature(p.t);
                    let n_enclosed = curve.inward_normal(p.t);
                    let (kappa, inward) = match comp.role {
                        ComponentRole::Outer => (kappa_geom, n_enclosed),
                        ComponentRole::Inner => (-kappa_geom, -n_enclosed),
                    };
                    NearestBoundary { component: ci, point: p.point, dist: p.dist, curvature: kappa, inward }
                }
            };
            if best.as_ref().map_or(true, |b| cand.dist < b.dist) {
                best = Some(cand);
            }
        }
        best.ok_or(DomainError::Invalid("domain has no boundary components"))
    }

    /// Largest offset at which the inward-offset boundary stays smooth:
    /// limited by curvature and by half the gap between components.
    pub fn reach_estimate(&self) -> f64 {
        let mut reach = f64::INFINITY;
        for comp in &self.components {
            let k = comp.shape.max_curvature();
            if k > 0.0 {
                reach = reach.min(0.5 / k);
            }
        }
        if self.components.len() > 1 {
            let a = self.components[0].shape.sample(512);
            let mut gap = f64::INFINITY;
            for comp in &self.components[1..] {
                for p in comp.shape.sample(512) {
                    for q in &a {
                        gap = gap.min((p - q).norm());
                    }
                }
            }
            reach = reach.min(gap / 2.0);
        }
        for p in &self.punctures {
            for comp in &self.components {
                for q in comp.shape.sample(256) {
                    reach = reach.min((q - p.point).norm() / 2.0);
                }
            }
        }
        reach
    }

    /// Outer component as a boundary curve (circles included).
    pub fn outer_curve(&self) -> BoundaryCurve {
        match &self.components[0].shape {
            ComponentShape::Circle { center, radius } => BoundaryCurve::circle(*center, *radius),
            ComponentShape::Trig(c) => c.clone(),
        }
    }
}

/// Frames along the outermost boundary component of a domain.
pub fn outer_frames(spec: &DomainSpec, n: usize) -> Result<Vec<BoundaryFrame>, DomainError> {
    let geo = DomainGeometry::build(spec)?;
    frames(&geo.outer_curve(), n)
}

/// One validation check with its measured margin (positive = satisfied).
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainDiagnostics {
    pub checks: Vec<CheckRecord>,
}

impl DomainDiagnostics {
    pub fn pass_all(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &str, pass: bool, margin: f64, detail: &str) {
        self.checks.push(CheckRecord {
            name: name.to_string(),
            pass,
            margin,
            detail: detail.to_string(),
        });
    }
}

fn curve_checks(diag: &mut DomainDiagnostics, label: &str, curve: &BoundaryCurve) {
    // Non-vanishing derivative over dense samples.
    let n = (16 * curve.max_freq().max(4)).max(64);
    let min_speed = (0..n)
        .map(|j| curve.deriv(2.0 * PI * j as f64 / n as f64).norm())
        .fold(f64::INFINITY, f64::min);
    let scale = curve.length() / (2.0 * PI);
    diag.push(
        &format!("{label}_speed"),
        min_speed > 1e-9 * scale,
        min_speed,
        "derivative must not vanish",
    );

    // Simplicity via a chord-arc test at 4x the coefficient count.
    let m = (4 * curve.coeff_count()).max(32);
    let pts: Vec<Complex64> = (0..m).map(|j| curve.eval(2.0 * PI * j as f64 / m as f64)).collect();
    let mut worst = f64::INFINITY;
    for i in 0..m {
        for j in (i + 1)..m {
            let dt = {
                let d = 2.0 * PI * (j - i) as f64 / m as f64;
                d.min(2.0 * PI - d)
            };
            if dt == 0.0 {
                continue;
            }
            let ratio = (pts[i] - pts[j]).norm() / (0.05 * min_speed.max(1e-300) * dt);
            worst = worst.min(ratio - 1.0);
        }
    }
    diag.push(
        &format!("{label}_simple"),
        worst > 0.0,
        worst,
        "curve must be simple at sampled resolution",
    );

    // Stored orientation against the enclosed signed area.
    let area = curve.signed_area();
    let matches = area * curve.orientation().sign() > 0.0;
    diag.push(
        &format!("{label}_orientation"),
        matches,
        area * curve.orientation().sign(),
        "stored orientation must match the signed area",
    );
}

/// Run all type invariants; failures are data, not errors.
pub fn validate(spec: &DomainSpec) -> DomainDiagnostics {
    let mut diag = DomainDiagnostics { checks: vec![] };
    match spec {
        DomainSpec::UnitDisk => {
            diag.push("unit_disk", true, 1.0, "nothing to check");
        }
        DomainSpec::Annulus { beta } => {
            let pass = (0.0..1.0).contains(beta);
            let margin = if pass { (1.0 - beta).min(*beta) } else { -(beta - 1.0).max(-beta) };
            diag.push("beta_in_range", pass, margin, if pass { "ok" } else { "beta out of range" });
        }
        DomainSpec::MappedAnnulus { map } => {
            let pass = (0.0..1.0).contains(&map.beta);
            diag.push(
                "beta_in_range",
                pass,
                if pass { (1.0 - map.beta).min(map.beta) } else { -1.0 },
                if pass { "ok" } else { "beta out of range" },
            );
            let covers = map.f.r_inner() <= map.beta && map.f.r_outer() > 1.0;
            diag.push(
                "map_annulus_coverage",
                covers,
                (map.f.r_outer() - 1.0).min(map.beta - map.f.r_inner()),
                "series validity annulus must contain (beta, 1]",
            );
            if pass && covers {
                match (image_circle_curve(&map.f, 1.0), map.beta) {
                    (Ok(outer), b) => {
                        curve_checks(&mut diag, "outer_image", &outer);
                        if b > 0.0 {
                            if let Ok(inner) = image_circle_curve(&map.f, b) {
                                curve_checks(&mut diag, "inner_image", &inner);
                                inner_outer_checks(&mut diag, &outer, &inner);
                            }
                        }
                    }
                    (Err(_), _) => diag.push("outer_image", false, -1.0, "image curve degenerate"),
                }
            }
        }
        DomainSpec::Punctured { outer, punctures } => {
            curve_checks(&mut diag, "outer", outer);
            let mut min_sd = f64::INFINITY;
            for p in punctures {
                let z = Complex64::new(p[0], p[1]);
                match outer.signed_distance_enclosed(z) {
                    Ok(sd) => min_sd = min_sd.min(sd),
                    Err(_) => min_sd = f64::NEG_INFINITY,
                }
            }
            if punctures.is_empty() {
                min_sd = 1.0;
            }
            diag.push(
                "punctures_inside",
                min_sd > 0.0,
                min_sd,
                if min_sd > 0.0 { "ok" } else { "puncture outside" },
            );
            let mut min_pair = f64::INFINITY;
            for i in 0..punctures.len() {
                for j in (i + 1)..punctures.len() {
                    let a = Complex64::new(punctures[i][0], punctures[i][1]);
                    let b = Complex64::new(punctures[j][0], punctures[j][1]);
                    min_pair = min_pair.min((a - b).norm());
                }
            }
            diag.push(
                "punctures_distinct",
                min_pair > 0.0,
                min_pair,
                "puncture points must be pairwise distinct",
            );
        }
        DomainSpec::CurveBounded { outer, inner } => {
            curve_checks(&mut diag, "outer", outer);
            if let Some(inner) = inner {
                curve_checks(&mut diag, "inner", inner);
                inner_outer_checks(&mut diag, outer, inner);
            }
        }
    }
    diag
}

fn inner_outer_checks(diag: &mut DomainDiagnostics, outer: &BoundaryCurve, inner: &BoundaryCurve) {
    let n = 256;
    let mut min_sd = f64::INFINITY;
    for j in 0..n {
        let z = inner.eval(2.0 * PI * j as f64 / n as f64);
        match outer.signed_distance_enclosed(z) {
            Ok(sd) => min_sd = min_sd.min(sd),
            Err(_) => min_sd = f64::NEG_INFINITY,
        }
    }
    diag.push(
        "inner_inside_outer",
        min_sd > 0.0,
        min_sd,
        "inner curve must lie strictly inside the outer curve",
    );
    diag.push(
        "components_disjoint",
        min_sd > 0.0,
        min_sd,
        "boundary components must have disjoint closures",
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn signed_distance_closed_forms() {
        assert_eq!(signed_distance(&DomainSpec::UnitDisk, c(0.0, 0.0)).unwrap(), 1.0);
        let annulus = DomainSpec::Annulus { beta: 0.5 };
        assert!((signed_distance(&annulus, c(0.75, 0.0)).unwrap() - 0.25).abs() < 1e-15);
        assert!((signed_distance(&annulus, c(0.9, 0.0)).unwrap() - 0.1).abs() < 1e-15);
        assert!(signed_distance(&annulus, c(0.3, 0.0)).unwrap() < 0.0);
        // Punctured disk.
        let pd = DomainSpec::Annulus { beta: 0.0 };
        assert!((signed_distance(&pd, c(0.2, 0.0)).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn signed_distance_on_curve_is_zero() {
        let outer = BoundaryCurve::ellipse(2.0, 1.0);
        let spec = DomainSpec::CurveBounded { outer: outer.clone(), inner: None };
        for t in [0.0, 0.9, 2.4, 5.1] {
            let z = outer.eval(t);
            assert!(signed_distance(&spec, z).unwrap().abs() < 1e-10);
        }
        assert!(signed_distance(&spec, c(0.0, 0.0)).unwrap() > 0.99);
        assert!(signed_distance(&spec, c(3.0, 0.0)).unwrap() < -0.99);
    }

    #[test]
    fn signed_distance_is_lipschitz_on_segments() {
        let spec = DomainSpec::CurveBounded {
            outer: BoundaryCurve::ellipse(2.0, 1.0),
            inner: Some(BoundaryCurve::circle(c(0.3, 0.0), 0.4)),
        };
        let pts = [c(1.0, 0.3), c(-1.2, 0.1), c(0.3, 0.8), c(1.8, 0.0), c(0.0, -0.7)];
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if i == j {
                    continue;
                }
                let di = signed_distance(&spec, pts[i]).unwrap();
                let dj = signed_distance(&spec, pts[j]).unwrap();
                assert!((di - dj).abs() <= (pts[i] - pts[j]).norm() + 1e-10);
            }
        }
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&DomainSpec::Annulus { beta: 0.5 }).pass_all());

        let bad = validate(&DomainSpec::Annulus { beta: 1.2 });
        assert!(!bad.pass_all());
        assert!(bad.checks.iter().any(|c| !c.pass && c.detail.contains("beta out of range")));

        let outside = validate(&DomainSpec::Punctured {
            outer: BoundaryCurve::circle(c(0.0, 0.0), 1.0),
            punctures: vec![[2.0, 0.0]],
        });
        assert!(!outside.pass_all());
        assert!(outside.checks.iter().any(|c| !c.pass && c.detail.contains("puncture outside")));

        let ok = validate(&DomainSpec::Punctured {
            outer: BoundaryCurve::circle(c(0.0, 0.0), 1.0),
            punctures: vec![[0.0, 0.0], [0.4, 0.1]],
        });
        assert!(ok.pass_all());
    }

    #[test]
    fn validate_curve_bounded_fixture() {
        let spec = DomainSpec::CurveBounded {
            outer: BoundaryCurve::circle(c(0.0, 0.0), 1.0),
            inner: Some(BoundaryCurve::circle(c(0.4, 0.0), 0.4)),
        };
        let d = validate(&spec);
        assert!(d.pass_all(), "{:?}", d.checks);
        // Not when the inner circle pokes out.
        let bad = DomainSpec::CurveBounded {
            outer: BoundaryCurve::circle(c(0.0, 0.0), 1.0),
            inner: Some(BoundaryCurve::circle(c(0.8, 0.0), 0.4)),
        };
        assert!(!validate(&bad).pass_all());
    }

    #[test]
    fn geometry_of_mapped_annulus() {
        // f = 2 - 3/(z+2) maps the 0.5-annulus onto the unit disk minus
        // the disk of radius 0.4 around 0.4.
        let f = LaurentSeries::mobius(c(2.0, 0.0), c(-3.0, 0.0), c(2.0, 0.0)).unwrap();
        let spec = DomainSpec::MappedAnnulus { map: MapSketch { f, beta: 0.5 } };
        let geo = DomainGeometry::build(&spec).unwrap();
        assert_eq!(geo.components.len(), 2);
        match &geo.components[0].shape {
            ComponentShape::Trig(curve) => {
                // The image is a circle but with many harmonics; check points.
                for t in [0.0, 1.0, 2.0, 4.0] {
                    assert!((curve.eval(t).norm() - 1.0).abs() < 1e-9);
                }
            }
            ComponentShape::Circle { center, radius } => {
                assert!(center.norm() < 1e-9 && (radius - 1.0).abs() < 1e-9);
            }
        }
        // Equidistant from the outer circle and the hole: 1 - 0.5 = 0.5
        // and |(-0.5) - 0.4| - 0.4 = 0.5.
        let sd = geo.signed_distance(c(-0.5, 0.0)).unwrap();
        assert!((sd - 0.5).abs() < 1e-8, "sd = {sd}");
        let sd = geo.signed_distance(c(0.9, 0.0)).unwrap();
        assert!((sd - 0.1).abs() < 1e-8, "sd = {sd}");
        let near = geo.nearest_boundary(c(0.75, 0.0)).unwrap();
        assert!((near.curvature + 2.5).abs() < 1e-6, "kappa = {}", near.curvature);
        assert!(validate(&spec).pass_all());
    }

    #[test]
    fn nearest_boundary_curvature_signs() {
        let geo = DomainGeometry::build(&DomainSpec::Annulus { beta: 0.5 }).unwrap();
        let nb = geo.nearest_boundary(c(0.9, 0.0)).unwrap();
        assert!((nb.curvature - 1.0).abs() < 1e-12);
        assert!((nb.inward - c(-1.0, 0.0)).norm() < 1e-12);
        let nb = geo.nearest_boundary(c(0.6, 0.0)).unwrap();
        assert!((nb.curvature + 2.0).abs() < 1e-12);
        assert!((nb.inward - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn puncture_growth_radius_for_punctured_disk() {
        let spec = DomainSpec::Punctured {
            outer: BoundaryCurve::circle(c(0.0, 0.0), 1.0),
            punctures: vec![[0.0, 0.0]],
        };
        let geo = DomainGeometry::build(&spec).unwrap();
        assert_eq!(geo.punctures.len(), 1);
        assert!((geo.punctures[0].enclosing_radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_spec_json_shapes() {
        let j = serde_json::to_value(&DomainSpec::Annulus { beta: 0.5 }).unwrap();
        assert_eq!(j["variant"], "annulus");
        assert_eq!(j["beta"], 0.5);
        let back: DomainSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, DomainSpec::Annulus { beta: 0.5 });

        let spec = DomainSpec::CurveBounded {
            outer: BoundaryCurve::circle(c(0.0, 0.0), 1.0),
            inner: None,
        };
        let j = serde_json::to_value(&spec).unwrap();
        assert_eq!(j["variant"], "curve_bounded");
        assert!(j["outer"]["cos"].is_array());
    }

    #[test]
    fn reach_of_annulus() {
        let geo = DomainGeometry::build(&DomainSpec::Annulus { beta: 0.5 }).unwrap();
        let reach = geo.reach_estimate();
        // Curvature bound gives 0.5/2 = 0.25 from the inner circle, the
        // gap bound gives 0.25 as well.
        assert!((reach - 0.25).abs() < 1e-6, "reach = {reach}");
    }
}
