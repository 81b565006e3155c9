use lambda_core::mapcalc::build_map;
use lambda_core::series::LaurentSeries;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_unit(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

fn random_mobius(rng: &mut ChaCha8Rng) -> LaurentSeries {
    let c3 = random_unit(rng) * rng.random_range(1.05..10.0);
    let c2 = random_unit(rng) * rng.random_range(0.2..5.0);
    let c1 = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    LaurentSeries::mobius(c1, c2, c3).unwrap()
}

fn random_similarity(rng: &mut ChaCha8Rng) -> LaurentSeries {
    let a = random_unit(rng) * rng.random_range(0.3..3.0);
    let b = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    LaurentSeries::affine(a, b)
}

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

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 { let f = random_mobius(&mut rng); build_map(&f, 0.5).unwrap(); }
    for k in 0..500 {
        let f = match k % 3 {
            0 => random_similarity(&mut rng),
            1 => random_mobius(&mut rng),
            _ => random_perturbed(&mut rng),
        };
        if let Err(e) = build_map(&f, 0.5) {
            println!("sweep {k} (kind {}): {e}  band {}", k % 3, f.band_width());
        }
    }
    println!("done");
}
