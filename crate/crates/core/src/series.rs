//! Laurent-series calculus on annuli.
//!
//! Series are finitely banded two-sided coefficient tables tagged with the
//! annulus on which they are declared valid. Sampling and coefficient
//! recovery go through the FFT; the square-root construction produces the
//! holomorphic `g` with `g^2 = 1 / f'` by winding-number reduction and
//! continuous branch tracking of the logarithm.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("invalid series: {0}")]
    Invalid(&'static str),
    #[error("radius {r} outside validity annulus ({rin}, {rout})")]
    RadiusOutsideAnnulus { r: f64, rin: f64, rout: f64 },
    #[error("sample count {n} must be a power of two >= {min}")]
    BadSampleCount { n: usize, min: usize },
    #[error("aliasing: band [{k_min}, {k_max}] too wide for {n} samples")]
    Aliasing { k_min: i32, k_max: i32, n: usize },
    #[error("sample within 1e-12 of zero; winding number undefined")]
    NearZeroSample,
    #[error("argument jump >= pi between consecutive samples at n = {0}")]
    ArgumentJump(usize),
    #[error("winding number of f' is odd ({0}); no single-valued square root")]
    OddWinding(i32),
    #[error("winding of f' differs between circles ({0} vs {1}); zeros inside the annulus")]
    WindingInconsistent(i32, i32),
    #[error("derivative vanishes on a sample circle")]
    VanishingDerivative,
    #[error("square-root series did not converge within band {0}")]
    BandExhausted(i32),
}

/// Two-sided coefficient table of a function holomorphic on an annulus.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSeries {
    k_min: i32,
    coeffs: Vec<Complex64>,
    r_inner: f64,
    r_outer: f64,
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    kmin: i32,
    coeffs: Vec<[f64; 2]>,
    rin: f64,
    rout: f64,
}

impl Serialize for LaurentSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SeriesJson {
            kmin: self.k_min,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            rin: self.r_inner,
            rout: self.r_outer,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = SeriesJson::deserialize(d)?;
        LaurentSeries::new(
            j.kmin,
            j.coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect(),
            j.rin,
            j.rout,
        )
        .map_err(serde::de::Error::custom)
    }
}

impl LaurentSeries {
    /// `coeffs[i]` is the coefficient of `z^(k_min + i)`.
    pub fn new(
        k_min: i32,
        coeffs: Vec<Complex64>,
        r_inner: f64,
        r_outer: f64,
    ) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::Invalid("empty coefficient table"));
        }
        if !(r_inner >= 0.0 && r_outer > r_inner && r_outer.is_finite()) {
            return Err(SeriesError::Invalid("need 0 <= r_inner < r_outer < inf"));
        }
        if r_inner == 0.0 && k_min < 0 {
            return Err(SeriesError::Invalid("principal part on a disk"));
        }
        if !coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(SeriesError::Invalid("non-finite coefficient"));
        }
        Ok(Self { k_min, coeffs, r_inner, r_outer })
    }

    pub fn from_terms(
        terms: &[(i32, Complex64)],
        r_inner: f64,
        r_outer: f64,
    ) -> Result<Self, SeriesError> {
        let k_min = terms.iter().map(|t| t.0).min().ok_or(SeriesError::Invalid("no terms"))?;
        let k_max = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (k_max - k_min + 1) as usize];
        for &(k, b) in terms {
            coeffs[(k - k_min) as usize] += b;
        }
        Self::new(k_min, coeffs, r_inner, r_outer)
    }

    /// Truncated Taylor series of the Moebius map `c1 + c2 / (z + c3)`,
    /// valid on a disk reaching strictly past the unit circle. Requires
    /// the pole at `-c3` to lie outside the closed unit disk.
    pub fn mobius(c1: Complex64, c2: Complex64, c3: Complex64) -> Result<Self, SeriesError> {
        let rho = c3.norm();
        if rho <= 1.0 {
            return Err(SeriesError::Invalid("moebius pole inside the closed unit disk"));
        }
        let r_out = (1.0 + 0.5 * (rho - 1.0)).min(rho * 0.99);
        // Geometric tail below 1e-16 at the validity radius.
        let band = ((-37.0 / (r_out / rho).ln()).ceil() as usize).clamp(8, 6000);
        // c2/(z+c3) = (c2/c3) * sum_k (-z/c3)^k
        let mut coeffs = Vec::with_capacity(band + 1);
        let mut term = c2 / c3;
        for _ in 0..=band {
            coeffs.push(term);
            term *= -1.0 / c3;
        }
        coeffs[0] += c1;
        Self::new(0, coeffs, 0.0, r_out)
    }

    /// Affine map `a z + b`.
    pub fn affine(a: Complex64, b: Complex64) -> Self {
        Self::new(0, vec![b, a], 0.0, 1e6).unwrap()
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_min + self.coeffs.len() as i32 - 1
    }

    pub fn band_width(&self) -> i32 {
        self.k_max() - self.k_min()
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn coeff(&self, k: i32) -> Complex64 {
        if k < self.k_min || k > self.k_max() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k - self.k_min) as usize]
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &c)| (self.k_min + i as i32, c))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Declares a different validity annulus (used after coefficient
    /// recovery, where the sampling radius alone says nothing about it).
    pub fn with_annulus(mut self, r_inner: f64, r_outer: f64) -> Result<Self, SeriesError> {
        if !(r_inner >= 0.0 && r_outer > r_inner) {
            return Err(SeriesError::Invalid("need 0 <= r_inner < r_outer"));
        }
        if r_inner == 0.0 && self.k_min < 0 {
            return Err(SeriesError::Invalid("principal part on a disk"));
        }
        self.r_inner = r_inner;
        self.r_outer = r_outer;
        Ok(self)
    }

    /// Term-wise derivative: `k b_k` at index `k - 1`.
    pub fn derivative(&self) -> LaurentSeries {
        let coeffs: Vec<Complex64> =
            self.terms().map(|(k, b)| b * k as f64).collect();
        // The k = 0 entry contributes nothing; keep the table aligned anyway.
        LaurentSeries {
            k_min: self.k_min - 1,
            coeffs,
            r_inner: self.r_inner,
            r_outer: self.r_outer,
        }
    }

    /// Direct two-sided Horner evaluation at a point of the annulus.
    pub fn eval_point(&self, z: Complex64) -> Result<Complex64, SeriesError> {
        let r = z.norm();
        if !(self.r_inner < r && r < self.r_outer) {
            return Err(SeriesError::RadiusOutsideAnnulus {
                r,
                rin: self.r_inner,
                rout: self.r_outer,
            });
        }
        // Split at k = 0: positive part by Horner in z, negative in 1/z.
        let mut pos = Complex64::new(0.0, 0.0);
        let k0 = 0.max(self.k_min);
        for k in (k0..=self.k_max()).rev() {
            pos = pos * z + self.coeff(k);
        }
        if k0 > 0 {
            pos *= z.powi(k0 as u32 as i32);
        }
        let mut neg = Complex64::new(0.0, 0.0);
        if self.k_min < 0 {
            let w = 1.0 / z;
            for k in self.k_min..0 {
                neg = neg * w + self.coeff(k);
            }
            neg *= w;
        }
        Ok(pos + neg)
    }

    /// Scale and translate the function: `a f + b`.
    pub fn scale_add(&self, a: Complex64, b: Complex64) -> LaurentSeries {
        let mut s = self.clone();
        for c in &mut s.coeffs {
            *c *= a;
        }
        if s.k_min <= 0 && s.k_max() >= 0 {
            let i = (-s.k_min) as usize;
            s.coeffs[i] += b;
        } else if b != Complex64::new(0.0, 0.0) {
            // Extend the table to include k = 0.
            let mut terms: Vec<(i32, Complex64)> = s.terms().collect();
            terms.push((0, b));
            return LaurentSeries::from_terms(&terms, s.r_inner, s.r_outer).unwrap();
        }
        s
    }

    /// Precomposition with `z -> beta / z`, turning an inner-normalized
    /// annulus map into an outer-normalized one: `b_k -> b_k beta^k z^{-k}`.
    pub fn recompose_beta_over_z(&self, beta: f64) -> Result<LaurentSeries, SeriesError> {
        if beta <= 0.0 {
            return Err(SeriesError::Invalid("recomposition needs beta > 0"));
        }
        let terms: Vec<(i32, Complex64)> = self
            .terms()
            .map(|(k, b)| (-k, b * beta.powi(k)))
            .collect();
        // beta/z maps the annulus (beta, 1) to itself reversed; the composed
        // series certainly holds there.
        LaurentSeries::from_terms(&terms, beta * 0.999, 1.001)
    }
}

/// Equispaced samples of a function on the circle `|z| = radius`.
#[derive(Debug, Clone)]
pub struct CircleSamples {
    radius: f64,
    values: Vec<Complex64>,
}

impl CircleSamples {
    pub fn new(radius: f64, values: Vec<Complex64>) -> Result<Self, SeriesError> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(SeriesError::BadSampleCount { n, min: 2 });
        }
        Ok(Self { radius, values })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Angle of the j-th sample.
    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.values.len() as f64
    }
}

fn min_samples(k_min: i32, k_max: i32) -> usize {
    (2 * (k_max - k_min) + 2).max(2) as usize
}

/// Synthesize `sum_k b_k z^k` on `|z| = r` by FFT.
pub fn eval_circle(s: &LaurentSeries, r: f64, n: usize) -> Result<CircleSamples, SeriesError> {
    if !(s.r_inner < r && r < s.r_outer) {
        return Err(SeriesError::RadiusOutsideAnnulus { r, rin: s.r_inner, rout: s.r_outer });
    }
    let min = min_samples(s.k_min(), s.k_max());
    if !n.is_power_of_two() || n < min {
        return Err(SeriesError::BadSampleCount { n, min });
    }
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for (k, b) in s.terms() {
        let bin = (k.rem_euclid(n as i32)) as usize;
        spectrum[bin] += b * r.powi(k);
    }
    // Unnormalized inverse FFT is exactly sum_m c_m e^{+i 2 pi m j / n}.
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    CircleSamples::new(r, spectrum)
}

/// Recover `b_k = (angular DFT coefficient k) / r^k` on the given band.
///
/// The band must respect the anti-aliasing margin `n >= 2 (k_max - k_min) + 2`.
/// The validity annulus of the result is the caller's claim; the samples
/// alone only witness the circle they were taken on.
pub fn coeffs_from_circle(
    c: &CircleSamples,
    k_min: i32,
    k_max: i32,
    r_inner: f64,
    r_outer: f64,
) -> Result<LaurentSeries, SeriesError> {
    if k_max < k_min {
        return Err(SeriesError::Invalid("empty band"));
    }
    let n = c.n();
    if n < min_samples(k_min, k_max) {
        return Err(SeriesError::Aliasing { k_min, k_max, n });
    }
    let mut buf = c.values.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let r = c.radius;
    let coeffs: Vec<Complex64> = (k_min..=k_max)
        .map(|k| {
            let bin = (k.rem_euclid(n as i32)) as usize;
            buf[bin] / (n as f64 * r.powi(k))
        })
        .collect();
    LaurentSeries::new(k_min, coeffs, r_inner, r_outer)
}

/// Total continuous argument change around the circle divided by 2 pi.
///
/// Errors if a sample sits within 1e-12 of zero (relative to the largest
/// sample) or if a principal-branch step reaches pi, which means the
/// sampling is too coarse to certify the count.
pub fn winding_number(c: &CircleSamples) -> Result<i32, SeriesError> {
    let scale = c.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 || c.values.iter().any(|v| v.norm() <= 1e-12 * scale) {
        return Err(SeriesError::NearZeroSample);
    }
    let n = c.n();
    let mut total = 0.0;
    for j in 0..n {
        let step = (c.values[(j + 1) % n] / c.values[j]).arg();
        if step.abs() >= PI * (1.0 - 1e-9) {
            return Err(SeriesError::ArgumentJump(n));
        }
        total += step;
    }
    let w = total / (2.0 * PI);
    let rounded = w.round();
    if (w - rounded).abs() > 1e-6 {
        return Err(SeriesError::ArgumentJump(n));
    }
    Ok(rounded as i32)
}

/// Winding of a series on `|z| = r`, resampling with doubled `n` until the
/// argument steps are certified (capped at 2^16 samples).
pub fn winding_on_circle(s: &LaurentSeries, r: f64) -> Result<i32, SeriesError> {
    let mut n = min_samples(s.k_min(), s.k_max()).next_power_of_two().max(64);
    loop {
        match winding_number(&eval_circle(s, r, n)?) {
            Ok(w) => return Ok(w),
            Err(SeriesError::ArgumentJump(_)) if n < (1 << 16) => n *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// The square-root construction: returns `g` with `g^2 f' = 1`.
///
/// `g = z^(-w/2) exp(-L/2)` where `w` is the winding of `f'` and `L` a
/// single-valued logarithm of `z^(-w) f'`, obtained by continuous branch
/// tracking on sample circles followed by coefficient recovery. The branch
/// sign is fixed so the largest-modulus coefficient has argument in
/// `(-pi/2, pi/2]`.
pub fn sqrt_reciprocal_derivative(f: &LaurentSeries) -> Result<LaurentSeries, SeriesError> {
    let fp = f.derivative();
    sqrt_reciprocal(&fp)
}

/// Same construction applied directly to a derivative series `fp`.
pub fn sqrt_reciprocal(fp: &LaurentSeries) -> Result<LaurentSeries, SeriesError> {
    if fp.max_abs() == 0.0 {
        return Err(SeriesError::VanishingDerivative);
    }
    let (rin, rout) = (fp.r_inner(), fp.r_outer());
    // Two probe circles around the geometric mean. The log-spread is
    // capped: widely separated radii make the cross-radius coefficient
    // comparison noise-dominated at high |k|.
    let (r1, r2) = if rin > 0.0 {
        let rm = (rin * rout).sqrt();
        let sigma = (0.5 * (rout / rin).ln() / 2.0).min(0.5);
        (rm * (-sigma).exp(), rm * sigma.exp())
    } else {
        (0.45 * rout, 0.8 * rout)
    };

    let w1 = winding_on_circle(fp, r1)?;
    let w2 = winding_on_circle(fp, r2)?;
    if w1 != w2 {
        return Err(SeriesError::WindingInconsistent(w1, w2));
    }
    if w1.rem_euclid(2) != 0 {
        return Err(SeriesError::OddWinding(w1));
    }
    let w = w1;

    let mut band = fp.band_width().clamp(16, 64);
    loop {
        let attempt = sqrt_attempt(fp, w, band, r1, r2)
            .and_then(|g| verify_square(&g, fp, r1, r2).map(|_| g));
        match attempt {
            Ok(g) => return Ok(g),
            Err(SeriesError::BandExhausted(_)) if band < 4096 => band *= 2,
            Err(e) => return Err(e),
        }
    }
}

fn sqrt_attempt(
    fp: &LaurentSeries,
    w: i32,
    band: i32,
    r1: f64,
    r2: f64,
) -> Result<LaurentSeries, SeriesError> {
    let k_lo = -band - w / 2;
    let k_hi = band - w / 2;
    // Samples must resolve both the recovery band and the input series.
    let n = (((2 * (k_hi - k_lo) + 8) as usize).max(2 * fp.band_width() as usize + 8))
        .next_power_of_two();

    // Recovery happens on a two-sided band even for Taylor inputs (the
    // negative side is checked to vanish below), so the working annulus
    // must stay away from zero until the trim.
    let work_rin = if fp.r_inner() == 0.0 { 0.5 * r1 } else { fp.r_inner() };
    // Anchor both circles on one branch of the logarithm: take the
    // principal argument at (r1, 0) and continue it radially out to r2,
    // otherwise the two recoveries can land on opposite square roots.
    let phase0_r1 = {
        let m = fp.eval_point(Complex64::new(r1, 0.0))? * r1.powi(-w);
        m.arg()
    };
    let phase0_r2 = {
        let steps = 64;
        let mut phase = phase0_r1;
        let mut prev = fp.eval_point(Complex64::new(r1, 0.0))? * r1.powi(-w);
        for j in 1..=steps {
            let r = r1 * (r2 / r1).powf(j as f64 / steps as f64);
            let cur = fp.eval_point(Complex64::new(r, 0.0))? * r.powi(-w);
            if cur.norm() == 0.0 {
                return Err(SeriesError::VanishingDerivative);
            }
            let step = (cur / prev).arg();
            if step.abs() >= PI / 2.0 {
                return Err(SeriesError::ArgumentJump(steps));
            }
            phase += step;
            prev = cur;
        }
        phase
    };
    let mut recovered: Vec<LaurentSeries> = Vec::with_capacity(2);
    let mut magnitude = [0.0f64; 2];
    for (i, &(r, phase0)) in [(r1, phase0_r1), (r2, phase0_r2)].iter().enumerate() {
        let samples = eval_circle(fp, r, n)?;
        let g = branch_tracked_sqrt(&samples, w, phase0)?;
        magnitude[i] = g.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        recovered.push(coeffs_from_circle(&g, k_lo, k_hi, work_rin, fp.r_outer())?);
    }

    // Recovery at radius r amplifies FFT noise in b_k by r^(-k), so each
    // side of the band is trusted from the radius that conditions it:
    // non-positive k from the inner circle, positive k from the outer.
    // Agreement and decay are measured in the weighted norm at the
    // geometric mean, where both recoveries are well conditioned.
    let gm = (r1 * r2).sqrt();
    let lgm = gm.ln();
    let scale_log = (magnitude[0] * magnitude[1]).sqrt().max(1e-300).ln();
    let weighted = |b: Complex64, k: i32| -> f64 {
        if b.norm() == 0.0 {
            f64::NEG_INFINITY
        } else {
            b.norm().ln() + k as f64 * lgm - scale_log
        }
    };

    // Per-k agreement threshold accounts for the unavoidable noise floor:
    // recovery at radius r carries FFT noise amplified by (gm/r)^k in the
    // gm-weighted norm, i.e. e^(|k| s) with s the log half-spread.
    let s = (r2 / gm).ln().abs();
    let noise_floor = |k: i32| (1e-14f64).ln() + k.abs() as f64 * s + (50.0f64).ln();
    for k in k_lo..=k_hi {
        let wd = weighted(recovered[0].coeff(k) - recovered[1].coeff(k), k);
        if wd > (1e-10f64).ln().max(noise_floor(k)) {
            return Err(SeriesError::BandExhausted(band));
        }
    }
    let edge_thr = |k: i32| (1e-11f64).ln().max(noise_floor(k));
    if weighted(recovered[0].coeff(k_lo), k_lo) > edge_thr(k_lo)
        || weighted(recovered[1].coeff(k_hi), k_hi) > edge_thr(k_hi)
    {
        return Err(SeriesError::BandExhausted(band));
    }

    let mut terms: Vec<(i32, Complex64)> = (k_lo..=k_hi)
        .map(|k| {
            let b = match k.cmp(&0) {
                std::cmp::Ordering::Less => recovered[0].coeff(k),
                std::cmp::Ordering::Greater => recovered[1].coeff(k),
                std::cmp::Ordering::Equal => {
                    0.5 * (recovered[0].coeff(k) + recovered[1].coeff(k))
                }
            };
            (k, b)
        })
        .collect();
    // Trim terms negligible at both probe radii (hence on the whole
    // annulus between them).
    let thresh = (1e-13f64).ln();
    let negligible = |t: &(i32, Complex64)| -> bool {
        let (k, b) = (t.0, t.1);
        if b.norm() == 0.0 {
            return true;
        }
        let l = b.norm().ln() - scale_log;
        l + k as f64 * r1.ln() < thresh && l + k as f64 * r2.ln() < thresh
    };
    while terms.len() > 1 && negligible(&terms[0]) {
        terms.remove(0);
    }
    while terms.len() > 1 && negligible(&terms[terms.len() - 1]) {
        terms.pop();
    }
    if fp.r_inner() == 0.0 {
        // A Taylor input has a Taylor square root; drop the (zero) tail.
        let bad = terms.iter().any(|t| t.0 < 0 && !negligible(t));
        if bad {
            return Err(SeriesError::BandExhausted(band));
        }
        terms.retain(|t| t.0 >= 0);
    }

    let g = LaurentSeries::from_terms(&terms, fp.r_inner(), fp.r_outer())?;
    Ok(normalize_sign(g))
}

/// Pointwise `z^(-w/2) exp(-log(z^(-w) fp)/2)` with the logarithm branch
/// tracked continuously around the circle, anchored at `phase0` for the
/// first sample.
fn branch_tracked_sqrt(
    samples: &CircleSamples,
    w: i32,
    phase0: f64,
) -> Result<CircleSamples, SeriesError> {
    let n = samples.n();
    let r = samples.radius();
    let scale = samples.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if samples.values().iter().any(|v| v.norm() <= 1e-13 * scale) {
        return Err(SeriesError::VanishingDerivative);
    }
    // m_j = fp_j * z_j^(-w)
    let m: Vec<Complex64> = (0..n)
        .map(|j| {
            let th = samples.theta(j);
            samples.values()[j] * Complex64::from_polar(r.powi(-w), -w as f64 * th)
        })
        .collect();
    // Unwrap the argument of m around the circle.
    let mut phase = vec![0.0f64; n];
    phase[0] = phase0;
    for j in 1..n {
        let step = (m[j] / m[j - 1]).arg();
        if step.abs() >= PI / 2.0 {
            return Err(SeriesError::ArgumentJump(n));
        }
        phase[j] = phase[j - 1] + step;
    }
    // Closure: with the winding removed the phase must return to start.
    let closure = phase[n - 1] + (m[0] / m[n - 1]).arg() - phase[0];
    if closure.abs() > 1e-6 {
        return Err(SeriesError::ArgumentJump(n));
    }

    let half_r = r.powf(-0.5 * w as f64);
    let values: Vec<Complex64> = (0..n)
        .map(|j| {
            let th = samples.theta(j);
            let log_half = Complex64::new(-0.5 * m[j].norm().ln(), -0.5 * phase[j]);
            Complex64::from_polar(half_r, -0.5 * w as f64 * th) * log_half.exp()
        })
        .collect();
    CircleSamples::new(r, values)
}

fn normalize_sign(mut g: LaurentSeries) -> LaurentSeries {
    let mut best = (0usize, 0.0f64);
    for (i, c) in g.coeffs.iter().enumerate() {
        if c.norm() > best.1 {
            best = (i, c.norm());
        }
    }
    let a = g.coeffs[best.0].arg();
    if a <= -PI / 2.0 || a > PI / 2.0 {
        for c in &mut g.coeffs {
            *c = -*c;
        }
    }
    g
}

/// `g^2 fp = 1` at fresh sample points on both probe circles, 1e-10 relative.
fn verify_square(g: &LaurentSeries, fp: &LaurentSeries, r1: f64, r2: f64) -> Result<(), SeriesError> {
    let n = ((2 * g.band_width().max(fp.band_width()) + 8) as usize)
        .next_power_of_two()
        .max(256);
    for &r in &[(r1 * r2).sqrt(), r1, r2] {
        let gs = eval_circle(g, r, n)?;
        let fs = eval_circle(fp, r, n)?;
        for j in 0..n {
            let prod = gs.values()[j] * gs.values()[j] * fs.values()[j];
            if (prod - 1.0).norm() > 1e-10 {
                return Err(SeriesError::BandExhausted(g.band_width()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_identity_series_gives_roots_of_unity() {
        let s = LaurentSeries::from_terms(&[(1, c(1.0, 0.0))], 0.0, 2.0).unwrap();
        let out = eval_circle(&s, 1.0, 8).unwrap();
        for j in 0..8 {
            let expect = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / 8.0);
            assert!((out.values()[j] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn eval_constant_and_reciprocal() {
        let s = LaurentSeries::from_terms(&[(0, c(2.0, 0.0))], 0.0, 5.0).unwrap();
        for v in eval_circle(&s, 0.3, 4).unwrap().values() {
            assert!((v - c(2.0, 0.0)).norm() < 1e-14);
        }
        let s = LaurentSeries::from_terms(&[(-1, c(1.0, 0.0))], 0.1, 1.0).unwrap();
        let out = eval_circle(&s, 0.5, 8).unwrap();
        for (j, v) in out.values().iter().enumerate() {
            assert!((v.norm() - 2.0).abs() < 1e-13);
            let z = Complex64::from_polar(0.5, out.theta(j));
            assert!((v - 1.0 / z).norm() < 1e-13);
        }
    }

    #[test]
    fn recover_z_plus_reciprocal() {
        let s = LaurentSeries::from_terms(&[(-1, c(1.0, 0.0)), (1, c(1.0, 0.0))], 0.2, 3.0).unwrap();
        let samples = eval_circle(&s, 1.0, 16).unwrap();
        let back = coeffs_from_circle(&samples, -2, 2, 0.2, 3.0).unwrap();
        assert!((back.coeff(-1) - c(1.0, 0.0)).norm() < 1e-13);
        assert!((back.coeff(1) - c(1.0, 0.0)).norm() < 1e-13);
        assert!(back.coeff(0).norm() < 1e-13);
        assert!(back.coeff(2).norm() < 1e-13);
    }

    #[test]
    fn roundtrip_random_band_limited_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let k_min = rng.random_range(-6..0);
            let k_max = rng.random_range(1..7);
            let coeffs: Vec<Complex64> = (k_min..=k_max)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let s = LaurentSeries::new(k_min, coeffs, 0.3, 1.4).unwrap();
            let n = min_samples(k_min, k_max).next_power_of_two() * 2;
            let samples = eval_circle(&s, 0.7, n).unwrap();
            let back = coeffs_from_circle(&samples, k_min, k_max, 0.3, 1.4).unwrap();
            let scale = s.max_abs();
            for k in k_min..=k_max {
                assert!((back.coeff(k) - s.coeff(k)).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn two_radius_recovery_agrees_for_holomorphic_data() {
        let s = LaurentSeries::from_terms(
            &[(-2, c(0.3, 0.1)), (0, c(1.0, 0.0)), (3, c(0.0, -0.7))],
            0.2,
            2.0,
        )
        .unwrap();
        let mut out = Vec::new();
        for r in [0.5, 1.3] {
            let samples = eval_circle(&s, r, 64).unwrap();
            out.push(coeffs_from_circle(&samples, -2, 3, 0.2, 2.0).unwrap());
        }
        for k in -2..=3 {
            assert!((out[0].coeff(k) - out[1].coeff(k)).norm() < 1e-10);
        }
    }

    #[test]
    fn aliasing_is_rejected() {
        let s = LaurentSeries::from_terms(&[(5, c(1.0, 0.0))], 0.0, 2.0).unwrap();
        let samples = eval_circle(&s, 1.0, 16).unwrap();
        assert!(matches!(
            coeffs_from_circle(&samples, -4, 4, 0.0, 2.0),
            Err(SeriesError::Aliasing { .. })
        ));
    }

    #[test]
    fn winding_numbers() {
        let z = LaurentSeries::from_terms(&[(1, c(1.0, 0.0))], 0.0, 2.0).unwrap();
        assert_eq!(winding_on_circle(&z, 1.0).unwrap(), 1);

        // (z - 2)^2 = z^2 - 4z + 4: zeros outside the unit circle.
        let s = LaurentSeries::from_terms(
            &[(0, c(4.0, 0.0)), (1, c(-4.0, 0.0)), (2, c(1.0, 0.0))],
            0.0,
            1.9,
        )
        .unwrap();
        assert_eq!(winding_on_circle(&s, 1.0).unwrap(), 0);

        let s = LaurentSeries::from_terms(&[(-2, c(1.0, 0.0))], 0.1, 2.0).unwrap();
        assert_eq!(winding_on_circle(&s, 1.0).unwrap(), -2);
    }

    #[test]
    fn winding_rejects_zero_on_circle() {
        // z - 1 vanishes on |z| = 1.
        let s = LaurentSeries::from_terms(&[(0, c(-1.0, 0.0)), (1, c(1.0, 0.0))], 0.0, 2.0).unwrap();
        assert!(winding_on_circle(&s, 1.0).is_err());
    }

    #[test]
    fn winding_agrees_on_two_circles_without_zeros_between() {
        let s = LaurentSeries::from_terms(
            &[(-1, c(0.2, 0.0)), (1, c(1.0, 0.0)), (2, c(0.1, 0.05))],
            0.4,
            1.6,
        )
        .unwrap();
        let w1 = winding_on_circle(&s, 0.8).unwrap();
        let w2 = winding_on_circle(&s, 1.2).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn derivative_shifts_indices() {
        let s = LaurentSeries::from_terms(&[(1, c(1.0, 0.0))], 0.0, 2.0).unwrap();
        let d = s.derivative();
        assert!((d.coeff(0) - c(1.0, 0.0)).norm() < 1e-16);

        let s = LaurentSeries::from_terms(&[(-1, c(1.0, 0.0))], 0.1, 2.0).unwrap();
        let d = s.derivative();
        assert!((d.coeff(-2) - c(-1.0, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coeffs: Vec<Complex64> =
            (-4..=4).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let s = LaurentSeries::new(-4, coeffs, 0.3, 2.0).unwrap();
        let d = s.derivative();
        for i in 0..20 {
            let z = Complex64::from_polar(0.6 + 0.03 * i as f64, 0.37 * i as f64);
            let h = 1e-6;
            let fd = (s.eval_point(z + h).unwrap() - s.eval_point(z - h).unwrap()) / (2.0 * h);
            assert!((fd - d.eval_point(z).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn sqrt_of_identity_map() {
        let f = LaurentSeries::from_terms(&[(1, c(1.0, 0.0))], 0.2, 2.0).unwrap();
        let g = sqrt_reciprocal_derivative(&f).unwrap();
        assert!((g.coeff(0) - c(1.0, 0.0)).norm() < 1e-12);
        assert!(g.max_abs() - 1.0 < 1e-12);
    }

    #[test]
    fn sqrt_of_moebius_derivative_is_linear() {
        // f = C1 - 1/(z+2) has f' = (z+2)^-2 and g = z + 2.
        let f = LaurentSeries::mobius(c(0.3, -0.4), c(-1.0, 0.0), c(2.0, 0.0)).unwrap();
        let g = sqrt_reciprocal_derivative(&f).unwrap();
        assert!((g.coeff(0) - c(2.0, 0.0)).norm() < 1e-9, "b0 = {}", g.coeff(0));
        assert!((g.coeff(1) - c(1.0, 0.0)).norm() < 1e-9, "b1 = {}", g.coeff(1));
        let tail: f64 = g
            .terms()
            .filter(|(k, _)| *k != 0 && *k != 1)
            .map(|(_, b)| b.norm_sqr())
            .sum();
        assert!(tail < 1e-18);
    }

    #[test]
    fn sqrt_handles_even_negative_winding() {
        // f = -1/z has f' = 1/z^2, winding -2, and g = z.
        let f = LaurentSeries::from_terms(&[(-1, c(-1.0, 0.0))], 0.05, 10.0).unwrap();
        let g = sqrt_reciprocal_derivative(&f).unwrap();
        assert!((g.coeff(1) - c(1.0, 0.0)).norm() < 1e-11);
        let fp = f.derivative();
        for i in 0..16 {
            let z = Complex64::from_polar(0.7, 0.4 * i as f64);
            let gv = g.eval_point(z).unwrap();
            let prod = gv * gv * fp.eval_point(z).unwrap();
            assert!((prod - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn sqrt_rejects_vanishing_derivative() {
        // f = z^2 / 2 has f' = z which vanishes at the origin and has odd
        // winding on circles around it.
        let f = LaurentSeries::from_terms(&[(2, c(0.5, 0.0))], 0.1, 2.0).unwrap();
        assert!(matches!(
            sqrt_reciprocal_derivative(&f),
            Err(SeriesError::OddWinding(1))
        ));
        // Constant map: derivative identically zero.
        let f = LaurentSeries::from_terms(&[(0, c(1.0, 0.0))], 0.1, 2.0).unwrap();
        assert!(sqrt_reciprocal_derivative(&f).is_err());
    }

    #[test]
    fn sqrt_square_times_derivative_is_one_on_fresh_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            // Perturbed Moebius map with a small analytic tail. The tail
            // is kept small enough that f' stays zero-free on the
            // declared annulus.
            let c3 = c(rng.random_range(1.6..4.0), rng.random_range(-1.0..1.0));
            let eps = rng.random_range(0.0..0.005);
            let mut f = LaurentSeries::mobius(c(0.0, 0.0), c(-1.0, 0.0), c3).unwrap();
            let m = rng.random_range(2..5);
            f = add_term(&f, m, c(eps, 0.5 * eps));
            f = f.with_annulus(0.0, 1.1).unwrap();
            let g = sqrt_reciprocal_derivative(&f).unwrap();
            let fp = f.derivative();
            for i in 0..64 {
                let z = Complex64::from_polar(0.55 + 0.005 * (i % 8) as f64, 0.1 * i as f64);
                let gv = g.eval_point(z).unwrap();
                let prod = gv * gv * fp.eval_point(z).unwrap();
                assert!((prod - 1.0).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let s = LaurentSeries::from_terms(&[(-2, c(0.5, -0.25)), (1, c(1.0, 2.0))], 0.5, 1.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"kmin\":-2") && j.contains("\"rin\":0.5") && j.contains("\"rout\":1.0"));
        let back: LaurentSeries = serde_json::from_str(&j).unwrap();
        assert_eq!(s, back);
        // The disk invariant is enforced on deserialization too.
        assert!(serde_json::from_str::<LaurentSeries>(
            "{\"kmin\":-1,\"coeffs\":[[1.0,0.0]],\"rin\":0.0,\"rout\":1.0}"
        )
        .is_err());
    }

    fn add_term(s: &LaurentSeries, k: i32, b: Complex64) -> LaurentSeries {
        let mut terms: Vec<(i32, Complex64)> = s.terms().collect();
        terms.push((k, b));
        LaurentSeries::from_terms(&terms, s.r_inner(), s.r_outer()).unwrap()
    }
}
