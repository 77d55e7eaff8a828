//! Seeded random fixtures: admissible weights, points and commuting tuples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::{self, c, CMat, C64};
use crate::tuple::{self, OperatorTuple};
use crate::weights::WeightSequence;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut SeededRng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian(rng: &mut SeededRng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// `X_k = A_k A_k*` (with `X_1` shifted away from singular), rescaled so that
/// `Σ_k ||X_k|| = total`.
pub fn admissible_weights(rng: &mut SeededRng, d: usize, kmax: usize, total: f64) -> Result<WeightSequence> {
    let mut x = Vec::with_capacity(kmax);
    let mut dim = 1;
    for k in 1..=kmax {
        dim *= d;
        let a = complex_gaussian(rng, dim, dim);
        let mut xk = linalg::hermitian_part(&(&a * a.adjoint()));
        let share = if k == 1 {
            1.0
        } else {
            rng.random_range(0.1..0.5)
        };
        if k == 1 {
            let floor = 0.5 * linalg::spectral_norm(&xk);
            xk += linalg::identity(dim) * c(floor, 0.0);
        }
        let norm = linalg::spectral_norm(&xk);
        x.push(xk * c(share / norm, 0.0));
    }
    let sum: f64 = x.iter().map(linalg::spectral_norm).sum();
    let x = x.into_iter().map(|xk| xk * c(total / sum, 0.0)).collect();
    WeightSequence::new(d, x)
}

/// Positive scalar weights `x_1, …, x_kmax` summing to `total`.
pub fn scalar_sequence(rng: &mut SeededRng, kmax: usize, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..kmax).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|v| v * total / sum).collect()
}

/// Uniform point in the complex ball of the given radius.
pub fn point_in_ball(rng: &mut SeededRng, d: usize, radius: f64) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| complex_normal(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let u: f64 = rng.random_range(0.0..1.0);
    let r = radius * u.powf(1.0 / (2 * d) as f64);
    v.into_iter().map(|z| z * (r / norm)).collect()
}

/// Rescale `t` so that `||Φ_{sT}(I)|| = target`.
pub fn scale_to(t: &OperatorTuple, x: &WeightSequence, target: f64) -> Result<OperatorTuple> {
    let id = linalg::identity(t.m());
    let rho = |s: f64| -> Result<f64> { Ok(linalg::spectral_norm(&tuple::phi(&t.scaled(s), x, &id)?)) };
    if rho(1.0)? == 0.0 {
        return Ok(t.clone());
    }
    let mut hi = 1.0;
    while rho(hi)? < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rho(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(t.scaled(0.5 * (lo + hi)))
}

/// `T_i = p_i(A)` for a random `A` and random quadratic `p_i`, scaled to `||Φ_T(I)|| = target`.
pub fn commuting_tuple(
    rng: &mut SeededRng,
    d: usize,
    m: usize,
    x: &WeightSequence,
    target: f64,
) -> Result<OperatorTuple> {
    let a = complex_gaussian(rng, m, m);
    polynomial_tuple(rng, d, &a, true, x, target)
}

/// Like [`commuting_tuple`] with `A` strictly upper triangular and no constant terms.
pub fn nilpotent_tuple(
    rng: &mut SeededRng,
    d: usize,
    m: usize,
    x: &WeightSequence,
    target: f64,
) -> Result<OperatorTuple> {
    let mut a = complex_gaussian(rng, m, m);
    for j in 0..m {
        for i in j..m {
            a[(i, j)] = linalg::ZERO;
        }
    }
    polynomial_tuple(rng, d, &a, false, x, target)
}

fn polynomial_tuple(
    rng: &mut SeededRng,
    d: usize,
    a: &CMat,
    constant: bool,
    x: &WeightSequence,
    target: f64,
) -> Result<OperatorTuple> {
    let m = a.nrows();
    let a2 = a * a;
    let ops = (0..d)
        .map(|_| {
            let c0 = if constant { complex_normal(rng) * 0.3 } else { linalg::ZERO };
            let c1 = complex_normal(rng);
            let c2 = complex_normal(rng) * 0.5;
            linalg::identity(m) * c0 + a * c1 + &a2 * c2
        })
        .collect();
    scale_to(&OperatorTuple::new(ops)?, x, target)
}
