//! Operator tuples on a finite-dimensional `H = C^m`: the row powers
//! `T^(k)`, the weighted map `Φ_T`, membership in the domains and purity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};
use crate::weights::{self, WeightSequence};
use crate::words::{self, DEFAULT_CAP};

/// `d` square matrices of size `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTuple {
    t: Vec<CMat>,
    m: usize,
}

impl OperatorTuple {
    pub fn new(t: Vec<CMat>) -> Result<Self> {
        let Some(first) = t.first() else {
            return Err(Error::Shape("tuple needs at least one operator".into()));
        };
        let m = first.nrows();
        for (i, op) in t.iter().enumerate() {
            if op.shape() != (m, m) {
                return Err(Error::Shape(format!(
                    "T_{} has shape {:?}, expected ({m}, {m})",
                    i + 1,
                    op.shape()
                )));
            }
        }
        Ok(OperatorTuple { t, m })
    }

    /// A point `z ∈ C^d` as a tuple on `H = C`.
    pub fn point(z: &[C64]) -> Result<Self> {
        Self::new(z.iter().map(|&zi| CMat::from_element(1, 1, zi)).collect())
    }

    /// `(λ_1 I, …, λ_d I)` on `C^m`.
    pub fn scalar(lambdas: &[C64], m: usize) -> Result<Self> {
        Self::new(lambdas.iter().map(|&l| CMat::identity(m, m) * l).collect())
    }

    pub fn zero(d: usize, m: usize) -> Self {
        OperatorTuple {
            t: vec![CMat::zeros(m, m); d],
            m,
        }
    }

    pub fn d(&self) -> usize {
        self.t.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ops(&self) -> &[CMat] {
        &self.t
    }

    pub fn op(&self, i: usize) -> &CMat {
        &self.t[i]
    }

    /// Coordinates of a scalar point (`m = 1`).
    pub fn coords(&self) -> Vec<C64> {
        assert_eq!(self.m, 1, "coords of a non-scalar tuple");
        self.t.iter().map(|op| op[(0, 0)]).collect()
    }

    /// `T ⊗ I_g` on `H ⊗ C^g`.
    pub fn ampliate(&self, g: usize) -> Self {
        let id = linalg::identity(g);
        OperatorTuple {
            t: self.t.iter().map(|op| linalg::kron(op, &id)).collect(),
            m: self.m * g,
        }
    }

    /// Compression `S* T_i S` to the range of an isometry `S`.
    pub fn compress(&self, s: &CMat) -> Self {
        OperatorTuple {
            t: self.t.iter().map(|op| s.adjoint() * op * s).collect(),
            m: s.ncols(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        OperatorTuple {
            t: self.t.iter().map(|op| op * c(s, 0.0)).collect(),
            m: self.m,
        }
    }

    pub fn commutator_max(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.d() {
            for j in i + 1..self.d() {
                let comm = &self.t[i] * &self.t[j] - &self.t[j] * &self.t[i];
                worst = worst.max(linalg::spectral_norm(&comm));
            }
        }
        worst
    }

    pub fn max_norm(&self) -> f64 {
        self.t.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }
}

/// `T^(k)`: the `m x d^k m` row whose block `α` is `T_{α(1)}⋯T_{α(k)}`.
pub fn tuple_power(t: &OperatorTuple, k: usize) -> Result<CMat> {
    Ok(tuple_powers(t, k)?.pop().expect("k+1 powers"))
}

/// `T^(0), …, T^(kmax)`.
pub fn tuple_powers(t: &OperatorTuple, kmax: usize) -> Result<Vec<CMat>> {
    let mut out = vec![linalg::identity(t.m())];
    for k in 1..=kmax {
        words::checked_pow(t.d(), k, DEFAULT_CAP)?;
        let next = tuple_powers_step(t, &out[k - 1]);
        out.push(next);
    }
    Ok(out)
}

/// `T^(k+1) = [T_1 T^(k), …, T_d T^(k)]`.
pub fn tuple_powers_step(t: &OperatorTuple, prev: &CMat) -> CMat {
    let m = t.m();
    let block = prev.ncols();
    let mut row = CMat::zeros(m, t.d() * block);
    for (i, op) in t.ops().iter().enumerate() {
        row.view_mut((0, i * block), (m, block)).copy_from(&(op * prev));
    }
    row
}

/// `Φ_{T,L}(a) = Σ_k T^(k)(X_k ⊗ a)L^(k)*` with the row powers precomputed.
#[derive(Clone, Debug)]
pub struct PhiMap {
    weights: Vec<CMat>,
    rows: Vec<CMat>,
    cols: Vec<CMat>,
    m: usize,
}

impl PhiMap {
    pub fn new(t: &OperatorTuple, l: &OperatorTuple, x: &WeightSequence) -> Result<Self> {
        if t.d() != x.d() || l.d() != x.d() || t.m() != l.m() {
            return Err(Error::Shape("tuples and weights disagree on d or m".into()));
        }
        let kmax = x.kmax();
        let rows = tuple_powers(t, kmax)?.split_off(1);
        let cols = tuple_powers(l, kmax)?
            .split_off(1)
            .into_iter()
            .map(|p| p.adjoint())
            .collect();
        Ok(PhiMap {
            weights: x.matrices().to_vec(),
            rows,
            cols,
            m: t.m(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn apply(&self, a: &CMat) -> CMat {
        let mut out = CMat::zeros(self.m, self.m);
        for ((xk, row), col) in self.weights.iter().zip(&self.rows).zip(&self.cols) {
            out += row * linalg::kron_apply(xk, a, col);
        }
        out
    }

    /// The single-degree piece `T^(k)(X_k ⊗ a)L^(k)*`.
    pub fn apply_degree(&self, k: usize, a: &CMat) -> CMat {
        &self.rows[k - 1] * linalg::kron_apply(&self.weights[k - 1], a, &self.cols[k - 1])
    }

    pub fn kmax(&self) -> usize {
        self.weights.len()
    }

    /// `m² x m²` matrix of the map on column-stacked vectorizations.
    pub fn matrix(&self) -> CMat {
        linalg::map_matrix(self.m, |a| self.apply(a))
    }
}

pub fn phi(t: &OperatorTuple, x: &WeightSequence, a: &CMat) -> Result<CMat> {
    Ok(PhiMap::new(t, t, x)?.apply(a))
}

/// `Φ_T^n(a)`.
pub fn phi_power(t: &OperatorTuple, x: &WeightSequence, a: &CMat, n: usize) -> Result<CMat> {
    let map = PhiMap::new(t, t, x)?;
    let mut cur = a.clone();
    for _ in 0..n {
        cur = map.apply(&cur);
    }
    Ok(cur)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `||Φ_T(I)|| < 1`.
    Interior,
    /// `||Φ_T(I)|| = 1` within the boundary tolerance.
    Boundary,
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Purity {
    Pure,
    NotCertifiedPure,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassifyOptions {
    pub n_max: usize,
    pub tol: f64,
    pub boundary: f64,
    pub commute_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            n_max: 200,
            tol: 1e-9,
            boundary: 1e-10,
            commute_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub phi_norm: f64,
    pub commutator_max: f64,
    /// `||Φ_T^n(I)||` for `n = 1, 2, …` (stops early once certified).
    pub purity: Vec<f64>,
    pub region: Region,
    pub commuting: bool,
    pub purity_status: Purity,
    pub options: ClassifyOptions,
}

impl MembershipReport {
    /// Membership in the closed commuting pure class.
    pub fn in_closed_commuting_pure(&self) -> bool {
        self.region != Region::Outside && self.commuting && self.purity_status == Purity::Pure
    }

    pub fn is_strict(&self) -> bool {
        self.region == Region::Interior
    }
}

pub fn classify(t: &OperatorTuple, x: &WeightSequence, opts: ClassifyOptions) -> Result<MembershipReport> {
    let map = PhiMap::new(t, t, x)?;
    let mut cur = linalg::identity(t.m());
    let mut purity = Vec::new();
    let mut status = Purity::NotCertifiedPure;
    for _ in 0..opts.n_max {
        cur = linalg::hermitian_part(&map.apply(&cur));
        let norm = linalg::spectral_norm(&cur);
        purity.push(norm);
        if norm <= opts.tol {
            status = Purity::Pure;
            break;
        }
        if !norm.is_finite() || norm > 1e100 {
            break;
        }
    }
    let phi_norm = purity[0];
    let region = if phi_norm < 1.0 - opts.boundary {
        Region::Interior
    } else if phi_norm <= 1.0 + opts.boundary {
        Region::Boundary
    } else {
        Region::Outside
    };
    let commutator_max = t.commutator_max();
    let scale = t.max_norm().powi(2).max(1.0);
    Ok(MembershipReport {
        phi_norm,
        commutator_max,
        purity,
        region,
        commuting: commutator_max <= opts.commute_tol * scale,
        purity_status: status,
        options: opts,
    })
}

/// The row `b(T)^(n)` with blocks `T^(μ)(X(μ,n)^{1/2} ⊗ I)`.
#[derive(Clone, Debug)]
pub struct BRow {
    pub n: usize,
    /// `(μ, block)` for `μ = n..=m_max`.
    pub blocks: Vec<(usize, CMat)>,
    /// `||Φ_T^n(I) - b b*||`.
    pub residual: f64,
}

impl BRow {
    /// `||b(T)^(n)* h||`.
    pub fn adjoint_norm(&self, h: &[C64]) -> f64 {
        let h = linalg::CVec::from_column_slice(h);
        self.blocks
            .iter()
            .map(|(_, b)| (b.adjoint() * &h).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

pub fn b_row_n(t: &OperatorTuple, x: &WeightSequence, n: usize, m_max: usize) -> Result<BRow> {
    if n == 0 {
        return Err(Error::Shape("b_row_n needs n >= 1".into()));
    }
    let phi_i = phi(t, x, &linalg::identity(t.m()))?;
    let top = linalg::max_eig(&phi_i);
    if top > 1.0 + 1e-10 {
        return Err(Error::NotContractive(top));
    }
    let hi = m_max.min(n * x.kmax());
    let powers = tuple_powers(t, hi)?;
    let id = linalg::identity(t.m());
    let mut blocks = Vec::new();
    let mut bbstar = CMat::zeros(t.m(), t.m());
    for mu in n..=hi {
        let xmn = weights::weight_power(x, mu, n)?;
        let root = linalg::psd_sqrt(&xmn, 1e-10, "X(mu,n)")?;
        // T^(μ)(A ⊗ I) = ((A* ⊗ I) T^(μ)*)*
        let block = linalg::kron_apply(&root.adjoint(), &id, &powers[mu].adjoint()).adjoint();
        bbstar += &block * block.adjoint();
        blocks.push((mu, block));
    }
    let direct = phi_power(t, x, &id, n)?;
    Ok(BRow {
        n,
        blocks,
        residual: linalg::spectral_norm(&(direct - bbstar)),
    })
}

/// The defect `Δ_*(T) = (I - Φ_T(I))^{1/2}` and an orthonormal basis of its range.
#[derive(Clone, Debug)]
pub struct Defect {
    pub delta: CMat,
    /// `m x r` isometry onto the range of `Δ_*`, one column per kept eigenvalue.
    pub basis: CMat,
    /// Eigenvalues of `Δ_*` on the basis columns.
    pub values: Vec<f64>,
    pub rank: usize,
}

impl Defect {
    /// `U* Δ_*` (`r x m`), the defect followed by the coordinate map onto its range.
    pub fn range_map(&self) -> CMat {
        linalg::scale_columns(&self.basis, &self.values).adjoint()
    }
}

pub const DEFECT_RANK_TOL: f64 = 1e-8;

pub fn defect(t: &OperatorTuple, x: &WeightSequence) -> Result<Defect> {
    let m = t.m();
    let phi_i = phi(t, x, &linalg::identity(m))?;
    let gap = linalg::identity(m) - phi_i;
    let (vals, vecs) = linalg::eigh(&gap);
    if let Some(&lo) = vals.first() {
        if lo < -1e-10 {
            return Err(Error::NotContractive(1.0 - lo));
        }
    }
    let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let delta = linalg::hermitian_part(&(linalg::scale_columns(&vecs, &roots) * vecs.adjoint()));
    // Largest eigenvalues first.
    let keep: Vec<usize> = (0..m).rev().filter(|&j| roots[j] > DEFECT_RANK_TOL).collect();
    let mut basis = CMat::from_element(m, keep.len(), ZERO);
    for (col, &j) in keep.iter().enumerate() {
        let v = linalg::fix_phase(&vecs.column(j).into_owned());
        basis.column_mut(col).copy_from(&v);
    }
    Ok(Defect {
        delta,
        basis,
        values: keep.iter().map(|&j| roots[j]).collect(),
        rank: keep.len(),
    })
}

/// `z^(k)` for a scalar point, as a row of length `d^k`.
pub fn point_power(z: &[C64], k: usize) -> Vec<C64> {
    let mut out = vec![ONE];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * z.len());
        for &zi in z {
            for &p in &out {
                next.push(zi * p);
            }
        }
        out = next;
    }
    out
}
