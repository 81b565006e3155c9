//! Acceptance checks: closed-form values, randomized property sweeps,
//! and the cross-validation of the analytic and PDE pipelines.
//!
//! The same checks back the `acceptance` integration suite and the
//! `verify` subcommand of the CLI. Heavy PDE fixtures are solved once
//! per process and cached.

use crate::domain::{
    outer_frames, BoundaryCurve, DomainGeometry, DomainSpec, MapSketch,
};
use crate::expansion::{
    extract_c3_fit_per_frame, extract_c3_flux_per_frame, frame_clearances, frame_flux_params,
    frame_window, lambda_numeric, ExpansionProfile,
};
use crate::liouville::{modulus, solve_liouville, to_v, InitGuess, ScalarField, SolveOptions};
use crate::mapcalc::{
    build_map, classify_rigidity, lambda_via_map, AnnulusMapSpec, LambdaReport,
    DEFAULT_RIGIDITY_TOL,
};
use crate::models;
use crate::series::LaurentSeries;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

pub const LAMBDA_SHARP_HALF: f64 = 141.74257663147567;
pub const LAMBDA_MOBIUS_FIXTURE: f64 = 236.23762771912611;
pub const C3_HALF: f64 = -3.5903814092039701;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Acceptance criterion this check belongs to (0 = supporting).
    pub criterion: u8,
    pub pass: bool,
    pub measured: f64,
    pub required: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(
        criterion: u8,
        name: &str,
        pass: bool,
        measured: f64,
        required: f64,
        detail: String,
    ) -> Self {
        Self { name: name.to_string(), criterion, pass, measured, required, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {}: {:<36} {}  measured {:.6e} vs {:.6e}  {}",
            self.criterion,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.measured,
            self.required,
            self.detail
        )
    }

    /// Wall-clock checks; excluded from determinism comparisons.
    pub fn is_timing(&self) -> bool {
        self.name.ends_with("_runtime")
    }
}

fn identity_series() -> LaurentSeries {
    LaurentSeries::from_terms(&[(1, Complex64::new(1.0, 0.0))], 0.0, 2.0).unwrap()
}

fn sharp_bound(beta: f64) -> f64 {
    (2.0 * PI * PI / 3.0) * ((PI / beta.ln()).powi(2) + 1.0)
}

/// Closed-form and theorem-value checks (criteria 1 and 5).
pub fn paper_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();

    // Criterion 1: sharp value on the identity map at three moduli.
    for (label, beta) in
        [("0.5", 0.5), ("exp(-pi)", (-PI).exp()), ("0.9", 0.9f64)]
    {
        let t0 = Instant::now();
        let map = build_map(&identity_series(), beta).unwrap();
        let report = lambda_via_map(&map).unwrap();
        let elapsed = t0.elapsed().as_secs_f64();
        let expect = sharp_bound(beta);
        let rel = (report.lambda - expect).abs() / expect;
        out.push(CheckResult::new(
            1,
            &format!("sharp_value_beta_{label}"),
            rel <= 1e-10,
            rel,
            1e-10,
            format!("lambda = {:.8}", report.lambda),
        ));
        out.push(CheckResult::new(
            1,
            &format!("sharp_value_runtime_{label}"),
            elapsed < 1.0,
            elapsed,
            1.0,
            "seconds".into(),
        ));
    }

    // Criterion 5: the bound decreases to the gap constant as beta -> 0.
    let limit = 2.0 * PI * PI / 3.0;
    let mut monotone = true;
    let mut formula_err = 0.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..=6 {
        let beta = 10f64.powi(-k);
        let b = models::constants(beta).unwrap().lambda_bound;
        formula_err = formula_err.max((b - sharp_bound(beta)).abs() / b);
        monotone &= b < prev && b > limit;
        prev = b;
    }
    out.push(CheckResult::new(
        5,
        "gap_constant_monotone",
        monotone,
        prev - limit,
        0.0,
        format!("bound(1e-6) - 2pi^2/3 = {:.6}", prev - limit),
    ));
    out.push(CheckResult::new(
        5,
        "gap_constant_formula",
        formula_err <= 1e-12,
        formula_err,
        1e-12,
        "relative error against the closed form".into(),
    ));

    // Supporting closed-form values of the model layer.
    let c3 = models::constants(0.5).unwrap().c3;
    out.push(CheckResult::new(
        0,
        "model_c3_half",
        (c3 - C3_HALF).abs() < 1e-12,
        c3,
        C3_HALF,
        "c3 at beta = 0.5".into(),
    ));
    let v = models::v_annulus(0.5, 0.75).unwrap();
    out.push(CheckResult::new(
        0,
        "model_v_annulus_075",
        (v - 0.15961692161376922).abs() < 1e-14,
        v,
        0.15961692161376922,
        "closed form at r = 0.75".into(),
    ));
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

/// Outer-normalized random Moebius map `C1 + C2/(z + C3)`.
fn random_mobius(rng: &mut ChaCha8Rng) -> (LaurentSeries, Complex64, Complex64, Complex64) {
    let c3 = random_unit(rng) * rng.random_range(1.05..10.0);
    let c2 = random_unit(rng) * rng.random_range(0.2..5.0);
    let c1 = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    (LaurentSeries::mobius(c1, c2, c3).unwrap(), c1, c2, c3)
}

fn random_similarity(rng: &mut ChaCha8Rng) -> LaurentSeries {
    let a = random_unit(rng) * rng.random_range(0.3..3.0);
    let b = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    LaurentSeries::affine(a, b)
}

/// Moebius map with an analytic tail small enough to keep f' zero-free
/// but far above the rigidity tolerance.
fn random_perturbed(rng: &mut ChaCha8Rng) -> LaurentSeries {
    loop {
        let c3 = random_unit(rng) * rng.random_range(1.6..6.0);
        let c2 = random_unit(rng) * rng.random_range(0.5..2.0);
        let base = LaurentSeries::mobius(Complex64::new(0.0, 0.0), c2, c3).unwrap();
        let m = rng.random_range(2..5);
        let eps = rng.random_range(1e-3..4e-3) * c2.norm() / c3.norm_sqr();
        let mut terms: Vec<(i32, Complex64)> = base.terms().collect();
        terms.push((m, random_unit(rng) * eps));
        let f = LaurentSeries::from_terms(&terms, 0.0, 1.1).unwrap();
        if let Ok(map) = build_map(&f, 0.5) {
            if map.outer_normalized() {
                return f;
            }
        }
    }
}

fn random_taylor_disk_map(rng: &mut ChaCha8Rng) -> LaurentSeries {
    let a = random_unit(rng) * rng.random_range(0.5..2.0);
    let b = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut terms = vec![(0, b), (1, a)];
    // Tail small enough that f' stays away from zero on |z| <= 1.1.
    let mut budget = 0.4 * a.norm();
    for m in 2..=6 {
        let cap = budget / (m as f64 * 1.1f64.powi(m - 1)) * rng.random_range(0.0..0.5);
        budget -= cap * m as f64 * 1.1f64.powi(m - 1);
        terms.push((m, random_unit(rng) * cap));
    }
    LaurentSeries::from_terms(&terms, 0.0, 1.1).unwrap()
}

/// Randomized property sweeps (criteria 2, 3, 4).
pub fn property_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Criterion 2: strict inequality for 50 random Moebius maps.
    let t0 = Instant::now();
    let mut min_defect = f64::INFINITY;
    for _ in 0..50 {
        let (f, _, _, _) = random_mobius(&mut rng);
        let report = lambda_via_map(&build_map(&f, 0.5).unwrap()).unwrap();
        min_defect = min_defect.min(report.defect);
    }
    out.push(CheckResult::new(
        2,
        "strict_inequality_50_mobius",
        min_defect > 0.0,
        min_defect,
        0.0,
        "smallest defect over the sweep".into(),
    ));
    let fixture = LaurentSeries::mobius(
        Complex64::new(0.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(2.0, 0.0),
    )
    .unwrap();
    let report = lambda_via_map(&build_map(&fixture, 0.5).unwrap()).unwrap();
    let err = (report.lambda - LAMBDA_MOBIUS_FIXTURE).abs();
    out.push(CheckResult::new(
        2,
        "mobius_fixture_lambda",
        err <= 1e-6,
        err,
        1e-6,
        format!("lambda = {:.9}", report.lambda),
    ));
    let elapsed = t0.elapsed().as_secs_f64();
    out.push(CheckResult::new(
        2,
        "strict_inequality_runtime",
        elapsed < 5.0,
        elapsed,
        5.0,
        "seconds".into(),
    ));

    // Criterion 3: equality exactly for similarities in a 500-map sweep,
    // and B(t) >= 0 at 10^4 random (map, t) pairs.
    let mut agree = true;
    let mut b_min = f64::INFINITY;
    let mut maps: Vec<AnnulusMapSpec> = Vec::with_capacity(500);
    for k in 0..500 {
        let f = match k % 3 {
            0 => random_similarity(&mut rng),
            1 => random_mobius(&mut rng).0,
            _ => random_perturbed(&mut rng),
        };
        let map = build_map(&f, 0.5).unwrap();
        let report = lambda_via_map(&map).unwrap();
        let class = classify_rigidity(&map, DEFAULT_RIGIDITY_TOL);
        if report.equality != Some(class.is_similarity) {
            agree = false;
        }
        maps.push(map);
    }
    for _ in 0..10_000 {
        let map = &maps[rng.random_range(0..maps.len())];
        let t = rng.random_range(0.5f64.ln()..0.0);
        b_min = b_min.min(crate::mapcalc::b_at(map, t));
    }
    out.push(CheckResult::new(
        3,
        "rigidity_equality_sweep_500",
        agree,
        if agree { 1.0 } else { 0.0 },
        1.0,
        "equality flag iff similarity class".into(),
    ));
    out.push(CheckResult::new(
        3,
        "b_profile_nonnegative_1e4",
        b_min >= -1e-12,
        b_min,
        -1e-12,
        "smallest B(t) over the sweep".into(),
    ));

    // Criterion 4: disk recovery.
    let mut min_lambda = f64::INFINITY;
    for _ in 0..200 {
        let f = random_taylor_disk_map(&mut rng);
        let report = lambda_via_map(&build_map(&f, 0.0).unwrap()).unwrap();
        min_lambda = min_lambda.min(report.lambda);
    }
    out.push(CheckResult::new(
        4,
        "disk_lambda_nonnegative_200",
        min_lambda >= -1e-8,
        min_lambda,
        -1e-8,
        "smallest disk-mode lambda".into(),
    ));
    let f = LaurentSeries::affine(
        Complex64::new(rng.random_range(0.5..2.0), 0.3),
        Complex64::new(0.1, -0.4),
    );
    let report = lambda_via_map(&build_map(&f, 0.0).unwrap()).unwrap();
    out.push(CheckResult::new(
        4,
        "disk_affine_lambda_zero",
        report.lambda.abs() <= 1e-10,
        report.lambda.abs(),
        1e-10,
        "affine map".into(),
    ));

    // Supporting property: similarity invariance of the full report.
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (f, _, _, _) = random_mobius(&mut rng);
        let a = random_unit(&mut rng) * rng.random_range(0.3..3.0);
        let b = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let r1 = lambda_via_map(&build_map(&f, 0.5).unwrap()).unwrap();
        let r2 = lambda_via_map(&build_map(&f.scale_add(a, b), 0.5).unwrap()).unwrap();
        worst = worst.max((r1.lambda - r2.lambda).abs() / r1.lambda.abs());
    }
    out.push(CheckResult::new(
        0,
        "lambda_similarity_invariance",
        worst <= 1e-9,
        worst,
        1e-9,
        "relative drift under a f + b".into(),
    ));

    out
}

/// One solved PDE fixture with both extractions.
pub struct PdeFixture {
    pub spec: DomainSpec,
    pub unit: f64,
    pub u: ScalarField,
    pub v: ScalarField,
    pub frames: Vec<crate::domain::BoundaryFrame>,
    pub clearances: Vec<f64>,
    pub fit: ExpansionProfile,
    pub flux: ExpansionProfile,
    pub lambda_fit: LambdaReport,
    pub solve_seconds: f64,
    pub max_drop: f64,
    pub max_rise: f64,
}

pub const PDE_H: f64 = 1.0 / 256.0;

fn solve_fixture(
    spec: DomainSpec,
    unit: f64,
    beta: Option<f64>,
    flux_depth: Option<f64>,
    schedule: &[f64],
) -> PdeFixture {
    let h = PDE_H * unit;
    let eps_final = schedule.last().copied().unwrap() * unit;
    let mut opts = SolveOptions::new(h);
    opts.schedule = schedule.iter().map(|e| e * unit).collect();
    let t0 = Instant::now();
    let out = solve_liouville(&spec, &opts).expect("fixture solve");
    let solve_seconds = t0.elapsed().as_secs_f64();
    let v = to_v(&out.u);
    let geo = DomainGeometry::build(&spec).unwrap();
    let frames = outer_frames(&spec, 64).unwrap();
    let clearances = frame_clearances(&geo, &frames);
    let windows: Vec<(f64, f64)> =
        clearances.iter().map(|&cl| frame_window(h, eps_final, unit, cl)).collect();
    let fit = extract_c3_fit_per_frame(&v, &frames, &windows).unwrap();
    let depths: Vec<(f64, f64)> = clearances
        .iter()
        .map(|&cl| match flux_depth {
            Some(d) => (d * unit, 4.0 * h),
            None => frame_flux_params(h, eps_final, unit, cl),
        })
        .collect();
    let flux = extract_c3_flux_per_frame(&v, &frames, &depths).unwrap();
    let lambda_fit = lambda_numeric(&fit, beta).unwrap();
    let max_drop = out.drifts.iter().map(|d| d.max_drop).fold(0.0, f64::max);
    let max_rise = out.drifts.iter().map(|d| d.max_rise).fold(0.0, f64::max);
    PdeFixture {
        spec,
        unit,
        u: out.u,
        v,
        frames,
        clearances,
        fit,
        flux,
        lambda_fit,
        solve_seconds,
        max_drop,
        max_rise,
    }
}

pub fn annulus_fixture() -> &'static PdeFixture {
    static CELL: OnceLock<PdeFixture> = OnceLock::new();
    CELL.get_or_init(|| solve_fixture(DomainSpec::Annulus { beta: 0.5 }, 1.0, Some(0.5), None, &[0.04, 0.02, 0.01]))
}

pub fn disk_fixture() -> &'static PdeFixture {
    static CELL: OnceLock<PdeFixture> = OnceLock::new();
    // The disk's defining function is exactly d - d^2/2, so deeper flux
    // probes have no model truncation to fear and less layer noise.
    CELL.get_or_init(|| solve_fixture(DomainSpec::UnitDisk, 1.0, None, Some(0.12), &[0.04, 0.02, 0.01]))
}

pub fn mobius_image_spec() -> DomainSpec {
    DomainSpec::CurveBounded {
        outer: BoundaryCurve::circle(Complex64::new(0.0, 0.0), 1.0),
        inner: Some(BoundaryCurve::circle(Complex64::new(0.4, 0.0), 0.4)),
    }
}

pub fn mobius_fixture() -> &'static PdeFixture {
    static CELL: OnceLock<PdeFixture> = OnceLock::new();
    CELL.get_or_init(|| solve_fixture(mobius_image_spec(), 1.0, Some(0.5), None, &[0.04, 0.02, 0.01]))
}

pub fn scaled_annulus_fixture() -> &'static PdeFixture {
    static CELL: OnceLock<PdeFixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let c0 = Complex64::new(0.3, -0.2);
        let spec = DomainSpec::CurveBounded {
            outer: BoundaryCurve::circle(c0, 1.7),
            inner: Some(BoundaryCurve::circle(c0, 0.85)),
        };
        // A different offset path than the base fixture: the comparison
        // then certifies invariance across genuinely different solves,
        // not just exact scale equivariance of the lattice.
        solve_fixture(spec, 1.7, Some(0.5), None, &[0.05, 0.025, 0.0125])
    })
}

/// Criterion 6: PDE pipeline against the analytic values.
pub fn criterion6_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();

    let ann = annulus_fixture();
    let worst_rel = ann
        .fit
        .c3
        .iter()
        .map(|c| (c - C3_HALF).abs() / C3_HALF.abs())
        .fold(0.0, f64::max);
    out.push(CheckResult::new(
        6,
        "annulus_c3_per_frame",
        worst_rel <= 0.05,
        worst_rel,
        0.05,
        format!("mean c3 = {:.5}", ann.fit.mean_c3()),
    ));
    let spread = {
        let mean = ann.fit.mean_c3();
        ann.fit.c3.iter().map(|c| (c - mean).abs()).fold(0.0, f64::max) / mean.abs()
    };
    out.push(CheckResult::new(
        6,
        "annulus_c3_spread",
        spread <= 0.02,
        spread,
        0.02,
        "frame spread around the mean".into(),
    ));
    let rel = (ann.lambda_fit.lambda - LAMBDA_SHARP_HALF).abs() / LAMBDA_SHARP_HALF;
    out.push(CheckResult::new(
        6,
        "annulus_lambda",
        rel <= 0.05,
        rel,
        0.05,
        format!("lambda = {:.4}", ann.lambda_fit.lambda),
    ));
    out.push(CheckResult::new(
        6,
        "annulus_solve_runtime",
        ann.solve_seconds < 180.0,
        ann.solve_seconds,
        180.0,
        "seconds".into(),
    ));
    // Spot value of u itself against the closed form.
    let u_num = ann.u.bicubic(Complex64::new(0.75, 0.0)).unwrap();
    let u_true = -models::v_annulus(0.5, 0.75).unwrap().ln();
    out.push(CheckResult::new(
        6,
        "annulus_u_probe_075",
        (u_num - u_true).abs() <= 1e-3,
        (u_num - u_true).abs(),
        1e-3,
        "u against -log v at r = 0.75".into(),
    ));

    let disk = disk_fixture();
    out.push(CheckResult::new(
        6,
        "disk_lambda_small",
        disk.lambda_fit.lambda.abs() < 0.3,
        disk.lambda_fit.lambda.abs(),
        0.3,
        format!("lambda = {:.4}", disk.lambda_fit.lambda),
    ));
    let mob = mobius_fixture();
    let rel = (mob.lambda_fit.lambda - LAMBDA_MOBIUS_FIXTURE).abs() / LAMBDA_MOBIUS_FIXTURE;
    out.push(CheckResult::new(
        6,
        "mobius_image_lambda",
        rel <= 0.05,
        rel,
        0.05,
        format!("lambda = {:.4}", mob.lambda_fit.lambda),
    ));

    // Ground-truth v on the image domain via the pullback.
    let f = LaurentSeries::mobius(
        Complex64::new(2.0, 0.0),
        Complex64::new(-3.0, 0.0),
        Complex64::new(2.0, 0.0),
    )
    .unwrap();
    let map = build_map(&f, 0.5).unwrap();
    let pts: Vec<Complex64> = (0..16)
        .map(|k| Complex64::from_polar(0.6 + 0.02 * (k % 4) as f64, 0.41 * k as f64))
        .collect();
    let truth = crate::mapcalc::pullback_v(&map, &pts).unwrap();
    let mut worst = 0.0f64;
    for (w, v_true) in truth {
        if let Ok(v_num) = mob.v.bicubic(w) {
            worst = worst.max((v_num - v_true).abs());
        }
    }
    out.push(CheckResult::new(
        6,
        "mobius_pullback_v_crosscheck",
        worst <= 2e-3,
        worst,
        2e-3,
        "PDE v against the conformal ground truth".into(),
    ));

    // Similarity invariance of the numeric pipeline.
    let scaled = scaled_annulus_fixture();
    let drift = (scaled.lambda_fit.lambda - ann.lambda_fit.lambda).abs() / ann.lambda_fit.lambda;
    out.push(CheckResult::new(
        6,
        "scaled_annulus_similarity",
        drift <= 0.02,
        drift,
        0.02,
        format!("lambda = {:.4} on the scaled copy", scaled.lambda_fit.lambda),
    ));
    out
}

/// Criterion 7: modulus recovery.
pub fn criterion7_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let t0 = Instant::now();
    let m = modulus(&DomainSpec::Annulus { beta: 0.5 }, 1.0 / 128.0).unwrap();
    out.push(CheckResult::new(
        7,
        "modulus_annulus",
        (m.beta - 0.5).abs() <= 1e-3,
        (m.beta - 0.5).abs(),
        1e-3,
        format!("beta = {:.6}", m.beta),
    ));
    let f = LaurentSeries::mobius(
        Complex64::new(2.0, 0.0),
        Complex64::new(-3.0, 0.0),
        Complex64::new(2.0, 0.0),
    )
    .unwrap();
    let spec = DomainSpec::MappedAnnulus { map: MapSketch { f, beta: 0.5 } };
    let m = modulus(&spec, 1.0 / 128.0).unwrap();
    out.push(CheckResult::new(
        7,
        "modulus_mobius_image",
        (m.beta - 0.5).abs() <= 1e-3,
        (m.beta - 0.5).abs(),
        1e-3,
        format!("beta = {:.6} (conformal invariance)", m.beta),
    ));
    let elapsed = t0.elapsed().as_secs_f64();
    out.push(CheckResult::new(
        7,
        "modulus_runtime",
        elapsed < 60.0,
        elapsed,
        60.0,
        "seconds for both recoveries".into(),
    ));
    out
}

fn punctured_disk_spec() -> DomainSpec {
    DomainSpec::Punctured {
        outer: BoundaryCurve::circle(Complex64::new(0.0, 0.0), 1.0),
        punctures: vec![[0.0, 0.0]],
    }
}

/// Criterion 8: appendix scheme properties on the punctured disk.
pub fn criterion8_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let spec = punctured_disk_spec();
    let h = PDE_H;

    // Blow-up exhaustion: fixed offset, shrinking puncture disks carrying
    // large data. Domain growth with blow-up data forces a pointwise
    // decrease by the discrete maximum principle.
    let mut prev: Option<ScalarField> = None;
    let mut worst_rise = f64::NEG_INFINITY;
    for r0 in [0.05f64, 0.025, 0.0125] {
        let mut o = SolveOptions::new(h);
        o.schedule = vec![0.01];
        o.puncture_radius0 = Some(r0);
        o.puncture_data_offset = 10.0;
        o.check_barriers = false;
        let sol = solve_liouville(&spec, &o).unwrap();
        if let Some(p) = &prev {
            for (a, b) in p.values.iter().zip(&sol.u.values) {
                if !a.is_nan() && !b.is_nan() {
                    worst_rise = worst_rise.max(b - a);
                }
            }
        }
        prev = Some(sol.u);
    }
    out.push(CheckResult::new(
        8,
        "exhaustion_monotone_decrease",
        worst_rise <= 1e-6,
        worst_rise,
        1e-6,
        "largest pointwise increase across blow-up stages".into(),
    ));

    // Production solve with barrier data: bracketing at 100 random
    // samples and the two-initialization uniqueness surrogate.
    let mut opts = SolveOptions::new(h);
    opts.schedule = vec![0.04, 0.02, 0.01];
    let out_a = solve_liouville(&spec, &opts).unwrap();
    let r_final = out_a.stages.last().unwrap().puncture_radii[0];
    let origin = Complex64::new(0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower_viol = f64::NEG_INFINITY;
    let mut upper_viol = f64::NEG_INFINITY;
    let mut n_ok = 0;
    while n_ok < 100 {
        let x = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let s = x.norm();
        if s < r_final + 0.02 || s > 0.9 {
            continue;
        }
        let u = match out_a.u.bicubic(x) {
            Ok(u) => u,
            Err(_) => continue,
        };
        n_ok += 1;
        lower_viol = lower_viol.max(models::growth_barrier(1.0, origin, x) - u);
        upper_viol = upper_viol.max(u - models::u_shell(r_final, origin, x).unwrap());
    }
    out.push(CheckResult::new(
        8,
        "barrier_bracketing_100_samples",
        lower_viol <= 1e-3 && upper_viol <= 1e-3,
        lower_viol.max(upper_viol),
        1e-3,
        format!("lower {:.2e}, upper {:.2e}", lower_viol, upper_viol),
    ));

    let mut opts_b = opts.clone();
    opts_b.init = InitGuess::BarrierEnvelope;
    let out_b = solve_liouville(&spec, &opts_b).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in out_a.u.values.iter().zip(&out_b.u.values) {
        if !a.is_nan() && !b.is_nan() {
            worst = worst.max((a - b).abs());
        }
    }
    out.push(CheckResult::new(
        8,
        "two_initializations_agree",
        worst <= 1e-6,
        worst,
        1e-6,
        "uniqueness surrogate".into(),
    ));
    out
}

/// Criterion 9: estimator coherence and the boundary Laplacian intercept.
pub fn criterion9_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (name, fx) in [("annulus", annulus_fixture()), ("disk", disk_fixture())] {
        let mut worst_ratio = 0.0f64;
        for k in 0..fx.frames.len() {
            let tol = (0.05 * fx.fit.c3[k].abs()).max(0.05);
            worst_ratio = worst_ratio.max((fx.fit.c3[k] - fx.flux.c3[k]).abs() / tol);
        }
        out.push(CheckResult::new(
            9,
            &format!("estimator_agreement_{name}"),
            worst_ratio <= 1.0,
            worst_ratio,
            1.0,
            "worst frame-wise |fit - flux| over max(5%, 0.05)".into(),
        ));
    }
    let ann = annulus_fixture();
    let worst_ic = ann
        .flux
        .lap_intercept
        .iter()
        .map(|ic| (ic + 2.0).abs() / 2.0)
        .fold(0.0, f64::max);
    out.push(CheckResult::new(
        9,
        "lap_intercept_annulus",
        worst_ic <= 0.05,
        worst_ic,
        0.05,
        "extrapolated boundary Delta v against -2".into(),
    ));
    out
}

/// The heavy cross-validation suite (criteria 6 through 9).
pub fn cross_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = criterion6_checks();
    out.extend(criterion7_checks());
    out.extend(criterion8_checks(seed));
    out.extend(criterion9_checks());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_suite_passes() {
        for check in paper_suite() {
            assert!(check.pass, "{}", check.line());
        }
    }

    #[test]
    fn property_suite_is_deterministic() {
        let a = property_suite(7);
        let b = property_suite(7);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pass, y.pass, "{}", x.name);
            if !x.is_timing() {
                assert_eq!(x.measured.to_bits(), y.measured.to_bits(), "{}", x.name);
            }
        }
    }
}
