//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Monte-Carlo estimate of KL(p || q) for diagonal Gaussians given as (mu, sigma) lists.
pub fn mc_kl(p: &[(f64, f64)], q: &[(f64, f64)], samples: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let log_pdf = |x: f64, mu: f64, s: f64| -0.5 * ((x - mu) / s).powi(2) - s.ln();
    let mut acc = 0.0;
    for _ in 0..samples {
        let mut l = 0.0;
        for (&(mp, sp), &(mq, sq)) in p.iter().zip(q) {
            let x = Normal::new(mp, sp).unwrap().sample(&mut r);
            l += log_pdf(x, mp, sp) - log_pdf(x, mq, sq);
        }
        acc += l;
    }
    acc / samples as f64
}

/// Two-branch Huber reference with beta = 1, mean over elements.
pub fn huber_oracle(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = (a - b).abs();
        s += if d < 1.0 { 0.5 * d * d } else { d - 0.5 };
    }
    s / x.len() as f64
}

/// Central-difference gradient of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + h;
            let up = f(&buf);
            buf[i] = x[i] - h;
            let down = f(&buf);
            buf[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Uniform random rotation as a row-major 3x3 matrix, via a normalized 4-d Gaussian quaternion.
pub fn random_rotation(r: &mut StdRng) -> [[f64; 3]; 3] {
    let mut q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(r));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= n);
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn uniform(r: &mut StdRng, lo: f64, hi: f64) -> f64 {
    r.random_range(lo..hi)
}
