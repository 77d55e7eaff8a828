//! Admissible weight sequences `X = {X_k}` and the radial data `R_k`, `Z_k`
//! derived from them.
//!
//! `R_k²` is computed two ways: by the convolution recursion
//! `R_k² = Σ_{l=1}^{k} X_l ⊗ R_{k-l}²` and by summing `⊗_i X_{α(i)}` over all
//! compositions `α` of `k`. The second is kept as an oracle for the first.

use nalgebra::{Cholesky, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, ONE};
use crate::words::{self, compositions, DEFAULT_CAP};

/// Finitely supported weights `X_1..X_Kmax` over `C^d`; `X_k = 0` beyond `Kmax`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSequence {
    d: usize,
    x: Vec<CMat>,
}

impl WeightSequence {
    pub fn new(d: usize, x: Vec<CMat>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Shape("d must be at least 1".into()));
        }
        for (i, m) in x.iter().enumerate() {
            let k = i + 1;
            let n = words::checked_pow(d, k, DEFAULT_CAP)?;
            if m.shape() != (n, n) {
                return Err(Error::Shape(format!(
                    "X_{k} has shape {:?}, expected ({n}, {n})",
                    m.shape()
                )));
            }
        }
        Ok(WeightSequence { d, x })
    }

    /// `X_k = x_k I` for scalar weights.
    pub fn scalar(d: usize, coeffs: &[f64]) -> Result<Self> {
        let x = coeffs
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let n = d.pow(i as u32 + 1);
                CMat::identity(n, n) * c(v, 0.0)
            })
            .collect();
        Self::new(d, x)
    }

    /// `X_1 = I`, `X_k = 0` otherwise: the Drury-Arveson weights.
    pub fn drury_arveson(d: usize) -> Self {
        Self::scalar(d, &[1.0]).expect("identity weights are well formed")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kmax(&self) -> usize {
        self.x.len()
    }

    /// `X_k` for `k >= 1`, `None` outside the support.
    pub fn get(&self, k: usize) -> Option<&CMat> {
        if k == 0 {
            None
        } else {
            self.x.get(k - 1)
        }
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.x
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition {
    pub name: String,
    pub passed: bool,
    pub witness: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub conditions: Vec<Condition>,
    /// `max_k ||X_k||^{1/k}`; the growth condition holds for any finite support.
    pub growth: f64,
    pub admissible: bool,
}

impl AdmissibilityReport {
    pub fn first_failure(&self) -> Option<&Condition> {
        self.conditions.iter().find(|c| !c.passed)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdmissibilityTol {
    pub eps_inv: f64,
    pub eps_psd: f64,
    pub eps_herm: f64,
}

impl Default for AdmissibilityTol {
    fn default() -> Self {
        AdmissibilityTol {
            eps_inv: 1e-10,
            eps_psd: 1e-10,
            eps_herm: 1e-12,
        }
    }
}

pub fn validate_admissible(x: &WeightSequence) -> AdmissibilityReport {
    validate_admissible_with(x, AdmissibilityTol::default())
}

pub fn validate_admissible_with(x: &WeightSequence, tol: AdmissibilityTol) -> AdmissibilityReport {
    let mut conditions = Vec::new();
    match x.get(1) {
        Some(x1) => {
            let sv = x1.singular_values();
            let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
            conditions.push(Condition {
                name: "X_1 invertible (min singular value)".into(),
                passed: smin >= tol.eps_inv,
                witness: smin,
                tolerance: tol.eps_inv,
            });
        }
        None => conditions.push(Condition {
            name: "X_1 invertible (min singular value)".into(),
            passed: false,
            witness: 0.0,
            tolerance: tol.eps_inv,
        }),
    }
    let mut growth: f64 = 0.0;
    for (i, m) in x.matrices().iter().enumerate() {
        let k = i + 1;
        let herm = linalg::hermitian_defect(m);
        conditions.push(Condition {
            name: format!("X_{k} hermitian (max |X - X*|)"),
            passed: herm <= tol.eps_herm,
            witness: herm,
            tolerance: tol.eps_herm,
        });
        let lo = linalg::min_eig(m);
        conditions.push(Condition {
            name: format!("X_{k} positive (min eigenvalue)"),
            passed: lo >= -tol.eps_psd,
            witness: lo,
            tolerance: -tol.eps_psd,
        });
        growth = growth.max(linalg::spectral_norm(m).powf(1.0 / k as f64));
    }
    let admissible = conditions.iter().all(|c| c.passed);
    AdmissibilityReport {
        conditions,
        growth,
        admissible,
    }
}

/// `R_k`, `R_k²` and `Z_k` for `k = 0..=n`.
#[derive(Clone, Debug)]
pub struct RadialData {
    pub d: usize,
    /// `r2[k] = R_k²`, `r2[0] = [1]`.
    pub r2: Vec<CMat>,
    /// `r[k] = R_k`.
    pub r: Vec<CMat>,
    /// `z[k] = Z_k = R_k^{-1}(I ⊗ R_{k-1})`, `z[0] = [1]`.
    pub z: Vec<CMat>,
    pub z_norms: Vec<f64>,
    /// Smallest eigenvalue of each `R_k`.
    pub r_min_eig: Vec<f64>,
    /// `max_{1<=k<=n} ||Z_k||`.
    pub zbound: f64,
}

impl RadialData {
    pub fn n(&self) -> usize {
        self.r2.len() - 1
    }

    /// Extend to degree `n` by the recursion.
    pub fn extend(&mut self, x: &WeightSequence, n: usize) -> Result<()> {
        for k in self.n() + 1..=n {
            let sq = recursion_step(x, &self.r2, k)?;
            self.push(sq)?;
        }
        Ok(())
    }

    /// Copy restricted to degrees `0..=n`.
    pub fn prefix(&self, n: usize) -> RadialData {
        assert!(n <= self.n(), "prefix beyond computed degree");
        let zbound = self.z_norms[1..=n].iter().copied().fold(0.0, f64::max);
        RadialData {
            d: self.d,
            r2: self.r2[..=n].to_vec(),
            r: self.r[..=n].to_vec(),
            z: self.z[..=n].to_vec(),
            z_norms: self.z_norms[..=n].to_vec(),
            r_min_eig: self.r_min_eig[..=n].to_vec(),
            zbound,
        }
    }

    fn start(d: usize) -> Self {
        let one = CMat::from_element(1, 1, ONE);
        RadialData {
            d,
            r2: vec![one.clone()],
            r: vec![one.clone()],
            z: vec![one],
            z_norms: vec![1.0],
            r_min_eig: vec![1.0],
            zbound: 0.0,
        }
    }

    fn push(&mut self, r2: CMat) -> Result<()> {
        let k = self.r2.len();
        let r2 = linalg::hermitian_part(&r2);
        let (vals, vecs) = linalg::eigh(&r2);
        let lo = vals.first().copied().unwrap_or(0.0);
        let hi = vals.last().copied().unwrap_or(0.0);
        if lo < -1e-10 * hi.max(1.0) {
            return Err(Error::NotPsd {
                min_eig: lo,
                context: format!("R_{k}^2"),
            });
        }
        if lo <= 1e-14 * hi.max(1.0) {
            return Err(Error::RankLoss(format!(
                "R_{k}^2 is singular (min eigenvalue {lo:e})"
            )));
        }
        let rhs = linalg::kron(&linalg::identity(self.d), &self.r[k - 1]);
        let (r, z) = if linalg::is_diagonal(&r2) {
            let roots: Vec<f64> = (0..r2.nrows()).map(|i| r2[(i, i)].re.sqrt()).collect();
            let mut z = rhs;
            for (i, root) in roots.iter().enumerate() {
                z.row_mut(i).scale_mut(1.0 / root);
            }
            (linalg::real_diag(&roots), z)
        } else {
            let roots: Vec<f64> = vals.iter().map(|v| v.sqrt()).collect();
            let r = linalg::hermitian_part(&(linalg::scale_columns(&vecs, &roots) * vecs.adjoint()));
            let z = solve_pd(&r, &rhs)?;
            (r, z)
        };
        let zn = linalg::spectral_norm(&z);
        self.r2.push(r2);
        self.r.push(r);
        self.z.push(z);
        self.z_norms.push(zn);
        self.r_min_eig.push(lo.sqrt());
        self.zbound = self.zbound.max(zn);
        Ok(())
    }
}

fn solve_pd(a: &CMat, b: &CMat) -> Result<CMat> {
    if let Some(ch) = Cholesky::new(a.clone()) {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::RankLoss("R_k not invertible".into()))
}

fn recursion_step(x: &WeightSequence, r2: &[CMat], k: usize) -> Result<CMat> {
    let n = words::checked_pow(x.d(), k, DEFAULT_CAP)?;
    let mut acc: CMat = DMatrix::zeros(n, n);
    for l in 1..=k.min(x.kmax()) {
        acc += linalg::kron(x.get(l).expect("l <= kmax"), &r2[k - l]);
    }
    Ok(acc)
}

/// `R_k²` for `k = 0..=n` by the recursion, without square roots.
pub fn radial_squares(x: &WeightSequence, n: usize) -> Result<Vec<CMat>> {
    let mut r2 = vec![CMat::from_element(1, 1, ONE)];
    for k in 1..=n {
        let sq = recursion_step(x, &r2, k)?;
        r2.push(sq);
    }
    Ok(r2)
}

pub fn radial_from_recursion(x: &WeightSequence, n: usize) -> Result<RadialData> {
    let mut rd = RadialData::start(x.d());
    rd.extend(x, n)?;
    Ok(rd)
}

/// Same data, with `R_k²` summed over compositions of `k`.
pub fn radial_from_compositions(x: &WeightSequence, n: usize) -> Result<RadialData> {
    let mut rd = RadialData::start(x.d());
    for k in 1..=n {
        let dim = words::checked_pow(x.d(), k, DEFAULT_CAP)?;
        let mut acc: CMat = DMatrix::zeros(dim, dim);
        for alpha in compositions(k)?.iter() {
            if alpha.iter().any(|&p| p > x.kmax()) {
                continue;
            }
            let mut term = CMat::from_element(1, 1, ONE);
            for &p in alpha {
                term = linalg::kron(&term, x.get(p).expect("p <= kmax"));
            }
            acc += term;
        }
        rd.push(acc)?;
    }
    Ok(rd)
}

/// `X(μ, n) = Σ_{k_1+…+k_n=μ} X_{k_1} ⊗ … ⊗ X_{k_n}`.
pub fn weight_power(x: &WeightSequence, mu: usize, n: usize) -> Result<CMat> {
    let dim = words::checked_pow(x.d(), mu, DEFAULT_CAP)?;
    let mut acc: CMat = DMatrix::zeros(dim, dim);
    for parts in words::bounded_compositions(mu, n, x.kmax()) {
        let mut term = CMat::from_element(1, 1, ONE);
        for &p in &parts {
            term = linalg::kron(&term, x.get(p).expect("p <= kmax"));
        }
        acc += term;
    }
    Ok(acc)
}

/// Max deviation of the two radial routes over `R_k²`, `R_k` and `Z_k`.
pub fn radial_discrepancy(a: &RadialData, b: &RadialData) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..=a.n().min(b.n()) {
        worst = worst
            .max(linalg::max_abs(&(&a.r2[k] - &b.r2[k])))
            .max(linalg::max_abs(&(&a.r[k] - &b.r[k])))
            .max(linalg::max_abs(&(&a.z[k] - &b.z[k])));
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesCheck {
    /// `r_k²`, `k = 0..=n`.
    pub r2: Vec<f64>,
    /// Max coefficient error of `(1 - Σ x_k z^k)(Σ r_k² z^k) = 1`.
    pub product_mismatch: f64,
    /// Max coefficient error of `1 - 1/(Σ r_k² z^k) = Σ x_k z^k`.
    pub inverse_mismatch: f64,
}

impl SeriesCheck {
    pub fn max_mismatch(&self) -> f64 {
        self.product_mismatch.max(self.inverse_mismatch)
    }
}

/// One-variable weights: the radial recursion against the generating-function
/// identities, coefficient-wise up to degree `n`.
pub fn scalar_series_check(x: &[f64], n: usize) -> Result<SeriesCheck> {
    let ws = WeightSequence::scalar(1, x)?;
    let r2: Vec<f64> = radial_squares(&ws, n)?.iter().map(|m| m[(0, 0)].re).collect();
    let xk = |k: usize| if k >= 1 && k <= x.len() { x[k - 1] } else { 0.0 };

    let mut product_mismatch: f64 = 0.0;
    for j in 0..=n {
        let mut coeff = r2[j];
        for k in 1..=j {
            coeff -= xk(k) * r2[j - k];
        }
        let target = if j == 0 { 1.0 } else { 0.0 };
        product_mismatch = product_mismatch.max((coeff - target).abs());
    }

    // Reciprocal series of Σ r_k² z^k.
    let mut inv = vec![0.0; n + 1];
    inv[0] = 1.0 / r2[0];
    for j in 1..=n {
        let s: f64 = (1..=j).map(|i| r2[i] * inv[j - i]).sum();
        inv[j] = -s / r2[0];
    }
    let mut inverse_mismatch = (1.0 - inv[0]).abs();
    for j in 1..=n {
        inverse_mismatch = inverse_mismatch.max((-inv[j] - xk(j)).abs());
    }
    Ok(SeriesCheck {
        r2,
        product_mismatch,
        inverse_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diag;

    #[test]
    fn identity_weights_pass() {
        let x = WeightSequence::drury_arveson(2);
        assert!(validate_admissible(&x).admissible);
    }

    #[test]
    fn singular_first_weight_fails() {
        let x = WeightSequence::new(2, vec![real_diag(&[1.0, 0.0])]).unwrap();
        let rep = validate_admissible(&x);
        assert!(!rep.admissible);
        assert!(rep.first_failure().unwrap().name.contains("invertible"));
    }

    #[test]
    fn nonconvex_domain_weights_pass() {
        let x = WeightSequence::new(
            2,
            vec![linalg::identity(2), real_diag(&[1.0, 120.0, 120.0, 1.0])],
        )
        .unwrap();
        let rep = validate_admissible(&x);
        assert!(rep.admissible);
        assert!((rep.growth - 120f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn negative_weight_fails() {
        let x = WeightSequence::new(
            1,
            vec![real_diag(&[1.0]), real_diag(&[-0.5])],
        )
        .unwrap();
        assert!(!validate_admissible(&x).admissible);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(matches!(
            WeightSequence::new(2, vec![linalg::identity(3)]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn first_radial_square_is_first_weight() {
        let x = WeightSequence::new(2, vec![real_diag(&[1.0, 2.0]), real_diag(&[0.5, 0.1, 0.1, 0.3])]).unwrap();
        let rd = radial_from_recursion(&x, 3).unwrap();
        assert!((&rd.r2[1] - x.get(1).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn one_recursion_step_by_hand() {
        let x = WeightSequence::new(2, vec![real_diag(&[1.0, 2.0])]).unwrap();
        let rd = radial_from_recursion(&x, 2).unwrap();
        assert!((&rd.r2[2] - real_diag(&[1.0, 2.0, 2.0, 4.0])).norm() < 1e-14);
        let s2 = 2f64.sqrt();
        assert!((&rd.r[2] - real_diag(&[1.0, s2, s2, 2.0])).norm() < 1e-14);
    }

    #[test]
    fn drury_arveson_radial_weights_are_identity() {
        let rd = radial_from_recursion(&WeightSequence::drury_arveson(2), 5).unwrap();
        for k in 0..=5 {
            let n = 2usize.pow(k as u32);
            assert!((&rd.r[k] - linalg::identity(n)).norm() < 1e-14);
            assert!((&rd.z[k] - linalg::identity(n)).norm() < 1e-14);
        }
        assert!((rd.zbound - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degree_two_compositions() {
        let x = WeightSequence::new(2, vec![real_diag(&[1.0, 2.0]), real_diag(&[0.5, 0.1, 0.2, 0.3])]).unwrap();
        let rd = radial_from_compositions(&x, 2).unwrap();
        let expect = x.get(2).unwrap() + linalg::kron(x.get(1).unwrap(), x.get(1).unwrap());
        assert!((&rd.r2[2] - expect).norm() < 1e-14);
        assert_eq!(compositions(3).unwrap().total(), 4);
    }

    #[test]
    fn z_reconstructs_lifted_previous_weight() {
        let x = WeightSequence::new(2, vec![real_diag(&[1.0, 2.0]), real_diag(&[0.5, 0.1, 0.2, 0.3])]).unwrap();
        let rd = radial_from_recursion(&x, 4).unwrap();
        for k in 1..=4 {
            let lhs = &rd.r[k] * &rd.z[k];
            let rhs = linalg::kron(&linalg::identity(2), &rd.r[k - 1]);
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn extend_matches_fresh_computation() {
        let x = WeightSequence::scalar(2, &[0.6, 0.2]).unwrap();
        let mut a = radial_from_recursion(&x, 2).unwrap();
        a.extend(&x, 4).unwrap();
        let b = radial_from_recursion(&x, 4).unwrap();
        assert!(radial_discrepancy(&a, &b) < 1e-14);
        let p = b.prefix(2);
        assert_eq!(p.n(), 2);
    }

    #[test]
    fn geometric_series_weights() {
        let chk = scalar_series_check(&[1.0], 10).unwrap();
        assert!(chk.r2.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(chk.max_mismatch() <= 1e-12);
    }

    #[test]
    fn half_quarter_series_by_hand() {
        // r0=1, r1=1/2, r2=1/4+1/4, r3=1/4+1/8
        let chk = scalar_series_check(&[0.5, 0.25], 3).unwrap();
        let expect = [1.0, 0.5, 0.5, 0.375];
        for (a, b) in chk.r2.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(chk.max_mismatch() <= 1e-12);
    }

    #[test]
    fn weight_power_single_composition() {
        let x = WeightSequence::new(2, vec![real_diag(&[1.0, 3.0])]).unwrap();
        let x22 = weight_power(&x, 2, 2).unwrap();
        let expect = linalg::kron(x.get(1).unwrap(), x.get(1).unwrap());
        assert!((x22 - expect).norm() < 1e-15);
        assert_eq!(weight_power(&x, 3, 2).unwrap().norm(), 0.0);
    }
}
