// SPDX-License-Identifier: MIT OR Apache-2.0

//! Poisson variate generation: sequential inversion for small means and
//! Hörmann's transformed rejection with squeeze (PTRS) for large ones.

use rand::Rng;

/// Means at or above this use rejection sampling.
pub const INVERSION_LIMIT: f64 = 10.0;

pub fn sample<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    debug_assert!(mean.is_finite() && mean >= 0.0);
    if mean <= 0.0 {
        0
    } else if mean < INVERSION_LIMIT {
        inversion(rng, mean)
    } else {
        ptrs(rng, mean)
    }
}

fn inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    let u: f64 = rng.gen();
    let mut k = 0u32;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // the tail beyond 200 has probability below 1e-100 for mean < 10
    while u > cdf && k < 200 {
        k += 1;
        p *= mean / f64::from(k);
        cdf += p;
    }
    k
}

fn ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u32;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u32;
        }
    }
}

/// `ln(k!)`, exact summation below 30 and a Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 30 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        let n = k as f64;
        let inv = 1.0 / n;
        let inv2 = inv * inv;
        n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    }
}
