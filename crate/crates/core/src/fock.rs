//! The truncated weighted symmetric Fock space `F_N(R) = ⊕_{k≤N} R_k(C^d)^⊛k`
//! in frame coordinates, and its shift tuple.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::tuple::{self, OperatorTuple, PhiMap};
use crate::weights::{RadialData, WeightSequence};
use crate::words;

/// Orthonormal frames `V_k` for `R_k(C^d)^⊛k`, `k = 0..=N`.
#[derive(Clone, Debug)]
pub struct FockFrame {
    pub d: usize,
    pub n: usize,
    /// `V_k`, shape `d^k x D_k`.
    pub frames: Vec<CMat>,
    /// Start of degree `k` in frame coordinates.
    pub offsets: Vec<usize>,
    pub dims: Vec<usize>,
}

impl FockFrame {
    pub fn dim(&self) -> usize {
        self.offsets[self.n] + self.dims[self.n]
    }

    /// The frame of `F_n(R)` for `n ≤ N`.
    pub fn prefix(&self, n: usize) -> FockFrame {
        assert!(n <= self.n, "prefix beyond truncation");
        FockFrame {
            d: self.d,
            n,
            frames: self.frames[..=n].to_vec(),
            offsets: self.offsets[..=n].to_vec(),
            dims: self.dims[..=n].to_vec(),
        }
    }

    pub fn block(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k] + self.dims[k]
    }

    /// Grading projection `Q_k`; `Q_0 = P_0`.
    pub fn grading_projection(&self, k: usize) -> CMat {
        let r = self.block(k);
        CMat::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j && r.contains(&i) {
                ONE
            } else {
                ZERO
            }
        })
    }

    pub fn vacuum(&self) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[0] = ONE;
        v
    }

    /// Frame coordinates of a degree-`k` tensor lying in `R_k(C^d)^⊛k`.
    pub fn coords(&self, k: usize, xi: &CVec) -> CVec {
        self.frames[k].adjoint() * xi
    }

    /// Coordinates of the truncated kernel vector `Σ_{k≤n} R_k (w̄)^⊗k`.
    pub fn kernel_vector(&self, rd: &RadialData, w: &[C64], n: usize) -> CVec {
        let conj: Vec<C64> = w.iter().map(|z| z.conj()).collect();
        let mut out = CVec::zeros(self.dim());
        for k in 0..=n.min(self.n) {
            let xi = CVec::from_vec(tuple::point_power(&conj, k));
            let c = self.coords(k, &(&rd.r[k] * xi));
            out.rows_mut(self.offsets[k], self.dims[k]).copy_from(&c);
        }
        out
    }
}

pub fn build_frame(rd: &RadialData, n: usize) -> Result<FockFrame> {
    if rd.n() < n {
        return Err(Error::Shape(format!("radial data covers degree {} < N = {n}", rd.n())));
    }
    let d = rd.d;
    let mut frames = Vec::with_capacity(n + 1);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut dims = Vec::with_capacity(n + 1);
    let mut off = 0;
    for k in 0..=n {
        let s = words::symmetric_frame(d, k)?;
        let m = &rd.r[k] * &s.isometry;
        let qr = m.qr();
        let r = qr.r();
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let smallest = (0..r.nrows()).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if smallest <= 1e-12 * scale.max(1.0) {
            return Err(Error::RankLoss(format!("R_{k} S_{k} has a pivot of size {smallest:e}")));
        }
        let v = qr.q();
        offsets.push(off);
        dims.push(v.ncols());
        off += v.ncols();
        frames.push(v);
    }
    Ok(FockFrame {
        d,
        n,
        frames,
        offsets,
        dims,
    })
}

/// The compressed shifts `W_i` on `F_N(R)`; degree `N` is mapped to zero.
#[derive(Clone, Debug)]
pub struct ShiftTuple {
    pub tuple: OperatorTuple,
}

impl ShiftTuple {
    pub fn ops(&self) -> &[CMat] {
        self.tuple.ops()
    }
}

pub fn build_shift(frame: &FockFrame, rd: &RadialData) -> Result<ShiftTuple> {
    let d = frame.d;
    let dim = frame.dim();
    let mut ops = vec![CMat::zeros(dim, dim); d];
    for k in 0..frame.n {
        let dk = words::checked_pow(d, k, words::DEFAULT_CAP)?;
        let z = &rd.z[k + 1];
        let vk = &frame.frames[k];
        let vk1 = &frame.frames[k + 1];
        for (i, op) in ops.iter_mut().enumerate() {
            // Z_{k+1}(e_i ⊗ V_k) reads the i-th column block of Z_{k+1}.
            let block = vk1.adjoint() * (z.columns(i * dk, dk) * vk);
            op.view_mut((frame.offsets[k + 1], frame.offsets[k]), (frame.dims[k + 1], frame.dims[k]))
                .copy_from(&block);
        }
    }
    Ok(ShiftTuple {
        tuple: OperatorTuple::new(ops)?,
    })
}

/// `||Σ_k W^(k)(X_k ⊗ I)W^(k)* - (I - P_0)||`.
pub fn row_identity_residual(frame: &FockFrame, shift: &ShiftTuple, x: &WeightSequence) -> Result<f64> {
    let dim = frame.dim();
    let lhs = PhiMap::new(&shift.tuple, &shift.tuple, x)?.apply(&linalg::identity(dim));
    let target = linalg::identity(dim) - frame.grading_projection(0);
    Ok(linalg::spectral_norm(&(lhs - target)))
}

/// `||[W_i, W_j]||` maximized over pairs.
pub fn commutator_residual(shift: &ShiftTuple) -> f64 {
    shift.tuple.commutator_max()
}

/// Degree-`k` residual of `W_i*(R_{k+1} ξ) = R_k L_i* ξ` with `ξ = (w̄)^⊗(k+1)`,
/// maximized over `i` and `k ≤ N-1`.
pub fn backward_shift_residual(
    frame: &FockFrame,
    shift: &ShiftTuple,
    rd: &RadialData,
    x: &WeightSequence,
    w: &[C64],
) -> Result<f64> {
    let point = OperatorTuple::point(w)?;
    let phi_w = tuple::phi(&point, x, &linalg::identity(1))?[(0, 0)].re;
    if phi_w >= 1.0 {
        return Err(Error::OutsideDomain { phi_norm: phi_w });
    }
    let d = frame.d;
    let conj: Vec<C64> = w.iter().map(|z| z.conj()).collect();
    let mut worst: f64 = 0.0;
    for k in 0..frame.n {
        let xi = CVec::from_vec(tuple::point_power(&conj, k + 1));
        let src = frame.coords(k + 1, &(&rd.r[k + 1] * &xi));
        let mut full = CVec::zeros(frame.dim());
        full.rows_mut(frame.offsets[k + 1], frame.dims[k + 1]).copy_from(&src);
        let dk = words::checked_pow(d, k, words::DEFAULT_CAP)?;
        for i in 0..d {
            let lhs = shift.ops()[i].adjoint() * &full;
            let lhs_k = lhs.rows(frame.offsets[k], frame.dims[k]).into_owned();
            // L_i* picks the i-th block of d^k entries.
            let li_xi = xi.rows(i * dk, dk).into_owned();
            let rhs_tensor = &rd.r[k] * li_xi;
            let rhs = frame.coords(k, &rhs_tensor);
            // The right side must lie in the frame span for the comparison to be exact.
            let outside = (&frame.frames[k] * &rhs - &rhs_tensor).norm();
            let stray = (lhs.norm_squared() - lhs_k.norm_squared()).max(0.0).sqrt();
            worst = worst.max((lhs_k - rhs).norm()).max(outside).max(stray);
        }
    }
    Ok(worst)
}

/// Result of the joint eigenvector computation.
#[derive(Clone, Debug)]
pub struct JointEigen {
    pub dim: usize,
    /// Unit spanning vector of the joint kernel, frame coordinates.
    pub vector: CVec,
    /// Normalized truncated kernel vector `Σ_{k≤N} R_k (w̄)^⊗k`.
    pub kernel_vector: CVec,
    /// Distance between the two unit vectors after phase alignment.
    pub mismatch: f64,
    pub singular_values: Vec<f64>,
}

/// Joint kernel of `W_i* - w̄_i`, with the equations restricted to output
/// degrees `≤ N-1`.
pub fn joint_eigenvector(
    frame: &FockFrame,
    shift: &ShiftTuple,
    rd: &RadialData,
    x: &WeightSequence,
    w: &[C64],
) -> Result<JointEigen> {
    let point = OperatorTuple::point(w)?;
    let phi_w = tuple::phi(&point, x, &linalg::identity(1))?[(0, 0)].re;
    if phi_w >= 1.0 {
        return Err(Error::OutsideDomain { phi_norm: phi_w });
    }
    let d = frame.d;
    let dim = frame.dim();
    let rows = frame.offsets[frame.n];
    let mut eq = CMat::zeros(d * rows, dim);
    for i in 0..d {
        let mut op = shift.ops()[i].adjoint();
        for j in 0..dim {
            op[(j, j)] -= w[i].conj();
        }
        eq.view_mut((i * rows, 0), (rows, dim)).copy_from(&op.rows(0, rows));
    }
    let scale = linalg::spectral_norm(&eq).max(1.0);
    let (null, sv) = linalg::null_space(&eq, 1e-9 * scale);
    if null.ncols() != 1 {
        return Err(Error::Degenerate(null.ncols()));
    }
    let v = null.column(0).into_owned();
    let k = frame.kernel_vector(rd, w, frame.n);
    let k = &k / C64::new(k.norm(), 0.0);
    let p = k.dotc(&v);
    let aligned = if p.norm() > 0.0 { &v * (p.conj() / p.norm()) } else { v.clone() };
    let mismatch = (&aligned - &k).norm();
    Ok(JointEigen {
        dim: 1,
        vector: aligned,
        kernel_vector: k,
        mismatch,
        singular_values: sv,
    })
}
