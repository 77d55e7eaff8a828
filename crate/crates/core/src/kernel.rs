//! Scalar and map-valued kernels over the domains, the Neumann identity for
//! `Φ_{T,L}`, and complete positivity tests through Choi matrices.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE};
use crate::tuple::{self, OperatorTuple, PhiMap};
use crate::weights::{RadialData, WeightSequence};

/// Verdict tolerance on the smallest Choi eigenvalue, scaled by `max(1, ||C||)`.
pub const CP_TOL: f64 = 1e-9;
/// Largest `n·m` accepted by the Choi assembly.
pub const CHOI_CAP: usize = 16;

#[derive(Clone, Debug, Serialize)]
pub struct CpReport {
    pub choi_min_eig: f64,
    /// Set when the sample is scalar and the Choi matrix is the Gram matrix.
    pub gram_min_eig: Option<f64>,
    pub norm: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub dim: usize,
}

impl CpReport {
    pub fn from_matrix(m: CMat, tol: f64) -> Self {
        let vals = linalg::eigvalsh(&m);
        let lo = vals.first().copied().unwrap_or(0.0);
        let norm = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        CpReport {
            choi_min_eig: lo,
            gram_min_eig: None,
            norm,
            tolerance: tol,
            pass: lo >= -tol * norm.max(1.0),
            dim: m.nrows(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelOptions {
    /// Target for the a-posteriori truncation bound.
    pub tol: f64,
    pub max_degree: usize,
    /// Degrees up to this (and within the radial data) are summed with `R_k²`
    /// directly; later degrees use the term recursion.
    pub explicit_degree: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            tol: 1e-12,
            max_degree: 5000,
            explicit_degree: usize::MAX,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelEval {
    pub value: CMat,
    /// Last degree summed.
    pub n: usize,
    /// Bound on the norm of the omitted tail.
    pub tail_bound: f64,
    /// Upper bound on `||Φ_{V,W}||`.
    pub q: f64,
}

fn phi_norm(t: &OperatorTuple, x: &WeightSequence) -> Result<f64> {
    Ok(linalg::spectral_norm(&tuple::phi(t, x, &linalg::identity(t.m()))?))
}

/// `K^R(V,W)(a) = Σ_k V^(k)(R_k² ⊗ a)W^(k)*`.
///
/// Stops once the last three increments are below `tol/10` and
/// `||a - (id - Φ)(S_N)|| / (1 - q) ≤ tol`, with `q = (||Φ_V(I)|| ||Φ_W(I)||)^{1/2}`.
pub fn kernel_map(
    x: &WeightSequence,
    rd: &RadialData,
    v: &OperatorTuple,
    w: &OperatorTuple,
    a: &CMat,
    opts: KernelOptions,
) -> Result<KernelEval> {
    let rho_v = phi_norm(v, x)?;
    let rho_w = phi_norm(w, x)?;
    if rho_v >= 1.0 || rho_w >= 1.0 {
        return Err(Error::OutsideDomain {
            phi_norm: rho_v.max(rho_w),
        });
    }
    let q = (rho_v * rho_w).sqrt();
    let map = PhiMap::new(v, w, x)?;
    let kmax = x.kmax();
    let explicit = opts.explicit_degree.min(rd.n());

    let mut terms = vec![a.clone()];
    let mut sum = a.clone();
    let mut pv = linalg::identity(v.m());
    let mut pw = linalg::identity(w.m());
    let mut quiet = 0;
    for k in 1..=opts.max_degree {
        let term = if k <= explicit {
            pv = tuple::tuple_powers_step(v, &pv);
            pw = tuple::tuple_powers_step(w, &pw);
            &pv * linalg::kron_apply(&rd.r2[k], a, &pw.adjoint())
        } else {
            let mut t = CMat::zeros(v.m(), v.m());
            for l in 1..=k.min(kmax) {
                t += map.apply_degree(l, &terms[k - l]);
            }
            t
        };
        let size = linalg::spectral_norm(&term);
        sum += &term;
        terms.push(term);
        quiet = if size < opts.tol / 10.0 { quiet + 1 } else { 0 };
        if quiet >= 3 {
            let resid = a - (&sum - map.apply(&sum));
            let bound = linalg::spectral_norm(&resid) / (1.0 - q);
            if bound <= opts.tol {
                return Ok(KernelEval {
                    value: sum,
                    n: k,
                    tail_bound: bound,
                    q,
                });
            }
        }
    }
    Err(Error::Divergent(format!(
        "no certified truncation within {} degrees (q = {q})",
        opts.max_degree
    )))
}

/// `K^R(z,w)` for scalar points.
pub fn kernel_scalar(
    x: &WeightSequence,
    rd: &RadialData,
    z: &[C64],
    w: &[C64],
    opts: KernelOptions,
) -> Result<(C64, KernelEval)> {
    let ev = kernel_map(
        x,
        rd,
        &OperatorTuple::point(z)?,
        &OperatorTuple::point(w)?,
        &linalg::identity(1),
        opts,
    )?;
    Ok((ev.value[(0, 0)], ev))
}

/// `Φ_{T,L}(a) = Σ_k T^(k)(X_k ⊗ a)L^(k)*`.
pub fn phi_tl(t: &OperatorTuple, l: &OperatorTuple, x: &WeightSequence, a: &CMat) -> Result<CMat> {
    Ok(PhiMap::new(t, l, x)?.apply(a))
}

/// `||(id - Φ_{T,L})(K^R(T,L)(a)) - a||`.
pub fn neumann_identity_residual(
    x: &WeightSequence,
    rd: &RadialData,
    t: &OperatorTuple,
    l: &OperatorTuple,
    a: &CMat,
    opts: KernelOptions,
) -> Result<f64> {
    let k = kernel_map(x, rd, t, l, a, opts)?.value;
    let back = &k - phi_tl(t, l, x, &k)?;
    Ok(linalg::spectral_norm(&(back - a)))
}

/// A kernel whose values are maps on `m x m` matrices.
#[derive(Clone, Debug)]
pub enum Kernel {
    /// `K^R` by the adaptive series.
    Reproducing {
        x: WeightSequence,
        rd: RadialData,
        opts: KernelOptions,
    },
    /// `Σ_{k≤N} V^(k)(C_k² ⊗ a)W^(k)*` with explicit weights `C_0², …, C_N²`.
    Weighted { squares: Vec<CMat> },
}

impl Kernel {
    pub fn apply(&self, v: &OperatorTuple, w: &OperatorTuple, a: &CMat) -> Result<CMat> {
        match self {
            Kernel::Reproducing { x, rd, opts } => Ok(kernel_map(x, rd, v, w, a, *opts)?.value),
            Kernel::Weighted { squares } => Ok(weighted_sum(squares, v, w, a)),
        }
    }

    /// `m² x m²` matrix of `a ↦ K(V,W)(a)`.
    pub fn map_matrix(&self, v: &OperatorTuple, w: &OperatorTuple) -> Result<CMat> {
        let m = v.m();
        let mut out = CMat::zeros(m * m, m * m);
        for t in 0..m {
            for s in 0..m {
                let mut e = CMat::zeros(m, m);
                e[(s, t)] = ONE;
                let img = self.apply(v, w, &e)?;
                out.column_mut(s + t * m).copy_from_slice(img.as_slice());
            }
        }
        Ok(out)
    }
}

fn weighted_sum(squares: &[CMat], v: &OperatorTuple, w: &OperatorTuple, a: &CMat) -> CMat {
    let mut sum = CMat::zeros(v.m(), v.m());
    let mut pv = linalg::identity(v.m());
    let mut pw = linalg::identity(w.m());
    for (k, c2) in squares.iter().enumerate() {
        if k > 0 {
            pv = tuple::tuple_powers_step(v, &pv);
            pw = tuple::tuple_powers_step(w, &pw);
        }
        sum += &pv * linalg::kron_apply(c2, a, &pw.adjoint());
    }
    sum
}

/// Kernel values `K(V_i, V_j)` as map matrices.
#[derive(Clone, Debug)]
pub struct KernelSample {
    pub points: Vec<OperatorTuple>,
    pub values: Vec<Vec<CMat>>,
}

impl KernelSample {
    pub fn m(&self) -> usize {
        self.points[0].m()
    }

    /// `max ||K(V_i,V_j)(a)* - K(V_j,V_i)(a*)||` over matrix units `a`.
    pub fn hermitian_defect(&self) -> f64 {
        let m = self.m();
        let n = self.points.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for s in 0..m {
                    for t in 0..m {
                        let mut e = CMat::zeros(m, m);
                        e[(s, t)] = ONE;
                        let lhs = linalg::apply_map_matrix(&self.values[i][j], &e).adjoint();
                        let rhs = linalg::apply_map_matrix(&self.values[j][i], &e.adjoint());
                        worst = worst.max(linalg::max_abs(&(lhs - rhs)));
                    }
                }
            }
        }
        worst
    }
}

pub fn sample_kernel(kernel: &Kernel, points: &[OperatorTuple]) -> Result<KernelSample> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Shape("empty sample".into()));
    }
    let m = points[0].m();
    if points.iter().any(|p| p.m() != m || p.d() != points[0].d()) {
        return Err(Error::Shape("sample points disagree on d or m".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let flat: Vec<CMat> = pairs
        .par_iter()
        .map(|&(i, j)| kernel.map_matrix(&points[i], &points[j]))
        .collect::<Result<_>>()?;
    let values = flat.chunks(n).map(|row| row.to_vec()).collect();
    Ok(KernelSample {
        points: points.to_vec(),
        values,
    })
}

/// Choi matrix `Σ_{P,Q} E_PQ ⊗ Ψ(E_PQ)` of `(b_ij) ↦ (Ψ_ij(b_ij))` on `M_n(M_m)`.
pub fn block_choi(values: &[Vec<CMat>], m: usize) -> CMat {
    let n = values.len();
    let nm = n * m;
    let mut choi = CMat::zeros(nm * nm, nm * nm);
    for i in 0..n {
        for j in 0..n {
            let map = &values[i][j];
            for p in 0..m {
                for q in 0..m {
                    let big_p = i * m + p;
                    let big_q = j * m + q;
                    let col = map.column(p + q * m);
                    for r in 0..m {
                        for s in 0..m {
                            let row_idx = big_p * nm + i * m + r;
                            let col_idx = big_q * nm + j * m + s;
                            choi[(row_idx, col_idx)] = col[r + s * m];
                        }
                    }
                }
            }
        }
    }
    choi
}

/// Choi test of the sampled kernel. For `m = 1` the Choi matrix is the Gram
/// matrix `(K(z_i, z_j))` padded by zeros, and its spectrum is reported as such.
pub fn choi_cp_check(sample: &KernelSample) -> Result<CpReport> {
    choi_cp_check_values(&sample.values, sample.m())
}

pub fn choi_cp_check_values(values: &[Vec<CMat>], m: usize) -> Result<CpReport> {
    let nm = values.len() * m;
    if nm > CHOI_CAP {
        return Err(Error::Cap {
            what: "n*m in Choi assembly",
            needed: nm as u128,
            cap: CHOI_CAP as u128,
        });
    }
    if m == 1 {
        let n = values.len();
        let gram = CMat::from_fn(n, n, |i, j| values[i][j][(0, 0)]);
        let mut rep = CpReport::from_matrix(gram, CP_TOL);
        rep.gram_min_eig = Some(rep.choi_min_eig);
        return Ok(rep);
    }
    Ok(CpReport::from_matrix(block_choi(values, m), CP_TOL))
}

/// Both routes of the contractivity criterion on one sample.
#[derive(Clone, Debug, Serialize)]
pub struct ContractivityReport {
    /// Choi test of `(id - Φ_{V_i,V_j}) ∘ K(V_i,V_j)`.
    pub route_phi: CpReport,
    /// Choi test of `K^R(V_i,V_j)^{-1} ∘ K(V_i,V_j)`.
    pub route_inverse: CpReport,
    /// Largest difference between the two routes' map matrices.
    pub route_gap: f64,
    /// PSD test of `((id - Φ_ij) ∘ K_ij(a_i a_j*))` when `a_i` are given.
    pub pairing: Option<CpReport>,
    pub pass: bool,
}

pub fn contractivity_check(
    kernel: &Kernel,
    x: &WeightSequence,
    rd: &RadialData,
    points: &[OperatorTuple],
    a: Option<&[CMat]>,
    opts: KernelOptions,
) -> Result<ContractivityReport> {
    let sample = sample_kernel(kernel, points)?;
    let reproducing = Kernel::Reproducing {
        x: x.clone(),
        rd: rd.clone(),
        opts,
    };
    let kr = sample_kernel(&reproducing, points)?;
    let n = points.len();
    let m = sample.m();
    let mut via_phi = vec![Vec::with_capacity(n); n];
    let mut via_inv = vec![Vec::with_capacity(n); n];
    let mut gap: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let phi = PhiMap::new(&points[i], &points[j], x)?.matrix();
            let left = (linalg::identity(m * m) - phi) * &sample.values[i][j];
            let inv = kr.values[i][j]
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Divergent("K^R map is singular".into()))?;
            let right = inv * &sample.values[i][j];
            gap = gap.max(linalg::max_abs(&(&left - &right)));
            via_phi[i].push(left);
            via_inv[i].push(right);
        }
    }
    let route_phi = choi_cp_check_values(&via_phi, m)?;
    let route_inverse = choi_cp_check_values(&via_inv, m)?;
    let pairing = a.map(|a| {
        let mut g = CMat::zeros(n * m, n * m);
        for i in 0..n {
            for j in 0..n {
                let arg = &a[i] * a[j].adjoint();
                let blk = linalg::apply_map_matrix(&via_phi[i][j], &arg);
                g.view_mut((i * m, j * m), (m, m)).copy_from(&blk);
            }
        }
        CpReport::from_matrix(g, CP_TOL)
    });
    let pass = route_phi.pass && route_inverse.pass && pairing.as_ref().is_none_or(|p| p.pass);
    Ok(ContractivityReport {
        route_phi,
        route_inverse,
        route_gap: gap,
        pairing,
        pass,
    })
}

/// `C_k² = Σ_{j=0}^k R_j² ⊗ B_{k-j}²` for `k = 0..=n`; missing `B` terms are zero.
pub fn kc_weights(rd: &RadialData, b2: &[CMat], n: usize) -> Result<Vec<CMat>> {
    if rd.n() < n {
        return Err(Error::Shape(format!("radial data covers degree {} < {n}", rd.n())));
    }
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let dim = rd.r2[k].nrows();
        let mut acc = CMat::zeros(dim, dim);
        for j in 0..=k {
            if let Some(b) = b2.get(k - j) {
                acc += linalg::kron(&rd.r2[j], b);
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// `||K^C(V,W)(a) - Σ_k V^(k)(R_k² ⊗ K^B_{≤N-k}(V,W)(a))W^(k)*||`, the
/// factorization `K^C = K^R ∘ K^B` at truncation `N = c2.len() - 1`.
pub fn kc_factorization_residual(
    rd: &RadialData,
    b2: &[CMat],
    c2: &[CMat],
    v: &OperatorTuple,
    w: &OperatorTuple,
    a: &CMat,
) -> f64 {
    let n = c2.len() - 1;
    let lhs = weighted_sum(c2, v, w, a);
    let mut rhs = CMat::zeros(v.m(), v.m());
    let mut pv = linalg::identity(v.m());
    let mut pw = linalg::identity(w.m());
    for k in 0..=n {
        if k > 0 {
            pv = tuple::tuple_powers_step(v, &pv);
            pw = tuple::tuple_powers_step(w, &pw);
        }
        let inner_len = (n - k + 1).min(b2.len());
        let inner = weighted_sum(&b2[..inner_len], v, w, a);
        rhs += &pv * linalg::kron_apply(&rd.r2[k], &inner, &pw.adjoint());
    }
    linalg::spectral_norm(&(lhs - rhs))
}

/// `C_1² ← C_1² - 10 R_1²`: a kernel whose contractivity test must fail.
pub fn corrupt_weights(c2: &mut [CMat], rd: &RadialData) {
    if c2.len() > 1 {
        c2[1] -= &rd.r2[1] * C64::new(10.0, 0.0);
    }
}

/// Gram test of `K''(z,w) = (C - ⟨z,w⟩) K^R(z,w)` with `C = max_k ||Z_k||²`.
pub fn multiplier_defect_check(
    x: &WeightSequence,
    rd: &RadialData,
    points: &[Vec<C64>],
    opts: KernelOptions,
) -> Result<CpReport> {
    let c = rd.zbound * rd.zbound;
    let n = points.len();
    let mut gram = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (k, _) = kernel_scalar(x, rd, &points[i], &points[j], opts)?;
            let inner: C64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b.conj()).sum();
            gram[(i, j)] = (C64::new(c, 0.0) - inner) * k;
        }
    }
    let mut rep = CpReport::from_matrix(gram, CP_TOL);
    rep.gram_min_eig = Some(rep.choi_min_eig);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real_diag};
    use crate::weights::radial_from_recursion;

    fn hardy() -> WeightSequence {
        WeightSequence::scalar(1, &[1.0]).unwrap()
    }

    #[test]
    fn kernel_at_origin_is_one() {
        let x = WeightSequence::drury_arveson(2);
        let rd = radial_from_recursion(&x, 3).unwrap();
        let z = [c(0.0, 0.0), c(0.0, 0.0)];
        let (k, _) = kernel_scalar(&x, &rd, &z, &z, KernelOptions::default()).unwrap();
        assert!((k - ONE).norm() < 1e-15);
    }

    #[test]
    fn szego_and_drury_arveson_values() {
        let x = hardy();
        let rd = radial_from_recursion(&x, 5).unwrap();
        let (k, ev) = kernel_scalar(&x, &rd, &[c(0.6, 0.0)], &[c(0.6, 0.0)], KernelOptions::default()).unwrap();
        assert!((k.re - 1.0 / (1.0 - 0.36)).abs() < 1e-11, "{k} at n = {}", ev.n);

        let x = WeightSequence::drury_arveson(2);
        let rd = radial_from_recursion(&x, 4).unwrap();
        let z = [c(0.5, 0.0), c(0.0, 0.0)];
        let (k, _) = kernel_scalar(&x, &rd, &z, &z, KernelOptions::default()).unwrap();
        assert!((k.re - 4.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn rejects_points_outside() {
        let x = hardy();
        let rd = radial_from_recursion(&x, 2).unwrap();
        assert!(matches!(
            kernel_scalar(&x, &rd, &[c(1.0, 0.0)], &[c(0.1, 0.0)], KernelOptions::default()),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn zero_tuples_give_identity_map() {
        let x = WeightSequence::drury_arveson(2);
        let rd = radial_from_recursion(&x, 2).unwrap();
        let z = OperatorTuple::zero(2, 2);
        let a = real_diag(&[1.0, -2.0]);
        let ev = kernel_map(&x, &rd, &z, &z, &a, KernelOptions::default()).unwrap();
        assert_eq!(ev.value, a);
        assert_eq!(neumann_identity_residual(&x, &rd, &z, &z, &a, KernelOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn hybrid_matches_pure_recursion() {
        let x = WeightSequence::new(2, vec![real_diag(&[0.6, 0.3]), real_diag(&[0.1, 0.05, 0.05, 0.2])]).unwrap();
        let rd = radial_from_recursion(&x, 5).unwrap();
        let v = OperatorTuple::point(&[c(0.4, 0.1), c(-0.3, 0.2)]).unwrap();
        let w = OperatorTuple::point(&[c(0.2, -0.3), c(0.5, 0.0)]).unwrap();
        let a = linalg::identity(1);
        let hybrid = kernel_map(&x, &rd, &v, &w, &a, KernelOptions::default()).unwrap();
        let rec = kernel_map(
            &x,
            &rd,
            &v,
            &w,
            &a,
            KernelOptions { explicit_degree: 0, ..Default::default() },
        )
        .unwrap();
        assert!((hybrid.value - rec.value).norm() < 1e-13);
    }

    #[test]
    fn choi_of_identity_is_entangled_projector() {
        let m = 2;
        let values = vec![vec![linalg::identity(m * m)]];
        let choi = block_choi(&values, m);
        // Σ E_pq ⊗ E_pq = |Ω><Ω| with Ω = Σ e_p ⊗ e_p
        let mut omega = linalg::CVec::zeros(m * m);
        for p in 0..m {
            omega[p * m + p] = ONE;
        }
        assert!((choi - &omega * omega.adjoint()).norm() < 1e-15);
        assert!(choi_cp_check_values(&values, m).unwrap().pass);
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let m = 2;
        let t = linalg::map_matrix(m, |a| a.transpose());
        let rep = choi_cp_check_values(&[vec![t]], m).unwrap();
        assert!(!rep.pass);
        assert!((rep.choi_min_eig + 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_constant_kernel_fails() {
        let values = vec![vec![CMat::from_element(1, 1, c(-1.0, 0.0))]];
        let rep = choi_cp_check_values(&values, 1).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.gram_min_eig, Some(-1.0));
    }

    #[test]
    fn choi_cap_enforced() {
        let values = vec![vec![linalg::identity(1); 17]; 17];
        assert!(matches!(choi_cp_check_values(&values, 1), Err(Error::Cap { .. })));
    }

    #[test]
    fn kc_weight_examples() {
        let x = WeightSequence::drury_arveson(2);
        let rd = radial_from_recursion(&x, 3).unwrap();
        let delta = vec![linalg::identity(1)];
        let c2 = kc_weights(&rd, &delta, 3).unwrap();
        for k in 0..=3 {
            assert!((&c2[k] - &rd.r2[k]).norm() < 1e-15);
        }
        let c2 = kc_weights(&rd, &rd.r2, 3).unwrap();
        for k in 0..=3 {
            let want = linalg::identity(c2[k].nrows()) * c((k + 1) as f64, 0.0);
            assert!((&c2[k] - want).norm() < 1e-13);
        }
        let rd1 = radial_from_recursion(&hardy(), 5).unwrap();
        let c2 = kc_weights(&rd1, &rd1.r2, 5).unwrap();
        for (k, ck) in c2.iter().enumerate() {
            assert!((ck[(0, 0)].re - (k + 1) as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn multiplier_defect_hardy_is_constant_one() {
        let x = hardy();
        let rd = radial_from_recursion(&x, 6).unwrap();
        assert!((rd.zbound - 1.0).abs() < 1e-14);
        let pts = vec![vec![c(0.3, 0.1)], vec![c(-0.5, 0.2)], vec![c(0.0, 0.7)]];
        let rep = multiplier_defect_check(&x, &rd, &pts, KernelOptions::default()).unwrap();
        assert!(rep.pass);
        // K'' ≡ 1: the Gram matrix is all ones, eigenvalues {0, 0, 3}.
        assert!(rep.choi_min_eig.abs() < 1e-10);
        assert!((rep.norm - 3.0).abs() < 1e-10);
        let origin = multiplier_defect_check(&x, &rd, &[vec![c(0.0, 0.0)]], KernelOptions::default()).unwrap();
        assert!((origin.choi_min_eig - 1.0).abs() < 1e-14);
    }
}
