//! Poisson kernel dilation of pure commuting tuples and the factorization of
//! invariant subspaces through the shift on `F_N(R) ⊗ D`.

use std::borrow::Cow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{self, FockFrame, ShiftTuple};
use crate::kernel::CpReport;
use crate::linalg::{self, CMat, CVec, C64};
use crate::tuple::{self, ClassifyOptions, Defect, MembershipReport, OperatorTuple, Purity};
use crate::weights::{self, RadialData, WeightSequence};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PoissonOptions {
    /// Target for `||Π*Π - I||`.
    pub tol: f64,
    /// Fixed truncation; adaptive when `None`.
    pub n: Option<usize>,
    /// Overrides the default degree cap.
    pub n_cap: Option<usize>,
    pub classify: ClassifyOptions,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        PoissonOptions {
            tol: 1e-8,
            n: None,
            n_cap: None,
            classify: ClassifyOptions::default(),
        }
    }
}

/// Largest truncation tried by the adaptive schedule.
pub fn default_cap(d: usize) -> usize {
    match d {
        1 => 24,
        2 => 10,
        3 => 7,
        _ => {
            let mut n = 1;
            while d.pow(n as u32 + 1) <= 4096 {
                n += 1;
            }
            n
        }
    }
}

fn schedule(opts: &PoissonOptions, d: usize) -> Vec<usize> {
    if let Some(n) = opts.n {
        return vec![n];
    }
    let cap = opts.n_cap.unwrap_or_else(|| default_cap(d)).max(1);
    let mut out = Vec::new();
    let mut n = 4.min(cap);
    while n < cap {
        out.push(n);
        n *= 2;
    }
    out.push(cap);
    out
}

/// `Π(T) : H → F_N(R) ⊗ D_*` in frame coordinates; row `f·r + j` pairs frame
/// coordinate `f` with defect coordinate `j`.
#[derive(Clone, Debug)]
pub struct PoissonOperator {
    pub pi: CMat,
    pub n: usize,
    pub isometry_residual: f64,
    pub converged: bool,
    /// `(N, ||Π*Π - I||)` for every truncation tried.
    pub history: Vec<(usize, f64)>,
    pub defect: Defect,
    pub rd: RadialData,
    pub frame: FockFrame,
    pub shift: ShiftTuple,
    pub membership: MembershipReport,
}

impl PoissonOperator {
    pub fn rank(&self) -> usize {
        self.defect.rank
    }
}

pub fn poisson(t: &OperatorTuple, x: &WeightSequence, rd: &RadialData, opts: PoissonOptions) -> Result<PoissonOperator> {
    let membership = tuple::classify(t, x, opts.classify)?;
    if !membership.commuting {
        return Err(Error::NotCommuting(membership.commutator_max));
    }
    if membership.phi_norm > 1.0 + opts.classify.boundary {
        return Err(Error::NotContractive(membership.phi_norm));
    }
    if membership.purity_status != Purity::Pure {
        return Err(Error::NotPure {
            last: membership.purity.last().copied().unwrap_or(f64::NAN),
            iterations: membership.purity.len(),
        });
    }
    let defect = tuple::defect(t, x)?;
    let r = defect.rank;
    let m = t.m();
    let coef = defect.range_map();

    let plan = schedule(&opts, t.d());
    let mut rd_work = Cow::Borrowed(rd);
    let mut blocks: Vec<CMat> = Vec::new();
    let mut power = linalg::identity(m);
    let mut gram = CMat::zeros(m, m);
    let mut history = Vec::new();
    let mut chosen = 0;
    let mut frame = None;
    for &n in &plan {
        if rd_work.n() < n {
            rd_work.to_mut().extend(x, n)?;
        }
        let fr = fock::build_frame(&rd_work, n)?;
        while blocks.len() <= n {
            let k = blocks.len();
            if k > 0 {
                power = tuple::tuple_powers_step(t, &power);
            }
            let left = &fr.frames[k].adjoint() * &rd_work.r[k];
            let block = linalg::kron_apply(&left, &coef, &power.adjoint());
            gram += block.adjoint() * &block;
            blocks.push(block);
        }
        let resid = linalg::spectral_norm(&(&gram - linalg::identity(m)));
        history.push((n, resid));
        chosen = n;
        frame = Some(fr);
        if resid <= opts.tol {
            break;
        }
    }
    let frame = frame.expect("non-empty schedule");
    let rd_n = rd_work.prefix(chosen);
    let shift = fock::build_shift(&frame, &rd_n)?;
    let mut pi = CMat::zeros(frame.dim() * r, m);
    for (k, block) in blocks.iter().enumerate().take(chosen + 1) {
        pi.view_mut((frame.offsets[k] * r, 0), (block.nrows(), m)).copy_from(block);
    }
    let isometry_residual = history.last().expect("at least one truncation").1;
    Ok(PoissonOperator {
        pi,
        n: chosen,
        isometry_residual,
        converged: isometry_residual <= opts.tol,
        history,
        defect,
        rd: rd_n,
        frame,
        shift,
        membership,
    })
}

/// `||Π T_i* - (W_i* ⊗ I)Π||` on degrees `≤ N-1`, one entry per `i`.
pub fn intertwine_residual(po: &PoissonOperator, t: &OperatorTuple) -> Vec<f64> {
    let r = po.rank();
    let rows = po.frame.offsets[po.n] * r;
    let id_r = linalg::identity(r);
    t.ops()
        .iter()
        .zip(po.shift.ops())
        .map(|(ti, wi)| {
            let lhs = &po.pi * ti.adjoint();
            let rhs = linalg::kron_apply(&wi.adjoint(), &id_r, &po.pi);
            let diff = (lhs - rhs).rows(0, rows).into_owned();
            linalg::spectral_norm(&diff)
        })
        .collect()
}

/// An invariant subspace, given either by an isometry or by its projection.
#[derive(Clone, Debug)]
pub enum Subspace {
    Isometry(CMat),
    Projection(CMat),
}

impl Subspace {
    /// Orthonormal basis of the subspace.
    pub fn isometry(&self) -> Result<CMat> {
        match self {
            Subspace::Isometry(s) => {
                let q = linalg::orthonormal_basis(s, 1e-10);
                if q.ncols() != s.ncols() {
                    return Err(Error::RankLoss(format!(
                        "subspace columns have rank {} < {}",
                        q.ncols(),
                        s.ncols()
                    )));
                }
                Ok(q)
            }
            Subspace::Projection(p) => {
                if p.nrows() != p.ncols() {
                    return Err(Error::Shape("projection must be square".into()));
                }
                let defect = linalg::max_abs(&(p * p - p)).max(linalg::hermitian_defect(p));
                if defect > 1e-8 {
                    return Err(Error::Shape(format!("not an orthogonal projection (defect {defect:e})")));
                }
                Ok(linalg::orthonormal_basis(p, 1e-8))
            }
        }
    }
}

/// `max_i ||(I - SS*)T_i S||`.
pub fn invariance_witness(t: &OperatorTuple, s: &CMat) -> f64 {
    let p = s * s.adjoint();
    let q = linalg::identity(t.m()) - p;
    t.ops()
        .iter()
        .map(|ti| linalg::spectral_norm(&(&q * ti * s)))
        .fold(0.0, f64::max)
}

/// Smallest invariant subspace containing the columns of `generators`.
pub fn cyclic_subspace(t: &OperatorTuple, generators: &CMat) -> CMat {
    let mut basis = linalg::orthonormal_basis(generators, 1e-10);
    loop {
        let mut cols = vec![basis.clone()];
        for ti in t.ops() {
            cols.push(ti * &basis);
        }
        let refs: Vec<&CMat> = cols.iter().collect();
        let stacked = hstack(&refs);
        let next = linalg::orthonormal_basis(&stacked, 1e-10);
        if next.ncols() == basis.ncols() {
            return next;
        }
        basis = next;
    }
}

fn hstack(parts: &[&CMat]) -> CMat {
    let rows = parts[0].nrows();
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.columns_mut(at, p.ncols()).copy_from(p);
        at += p.ncols();
    }
    out
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BlhOptions {
    pub poisson: PoissonOptions,
    /// Invariance tolerance, relative to `max(1, max_i ||T_i||)`.
    pub invariance_tol: f64,
}

impl Default for BlhOptions {
    fn default() -> Self {
        BlhOptions {
            poisson: PoissonOptions::default(),
            invariance_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlhResiduals {
    /// `||ΠΠ*Π - Π||`.
    pub partial_isometry: f64,
    /// `||ΠΠ* - P_S||`.
    pub range: f64,
    /// `||T_iΠ - Π(W_i ⊗ I_D)||` per coordinate.
    pub intertwine: Vec<f64>,
    /// `||(ΠΠ*)² - ΠΠ*||`.
    pub projection: f64,
    /// `max_i ||(I - P_ran)T_i P_ran||` for the range of `Π`.
    pub range_invariance: f64,
    /// `||Π_S*Π_S - I||` for the Poisson operator of `T|S`.
    pub poisson_isometry: f64,
}

impl BlhResiduals {
    pub fn intertwine_max(&self) -> f64 {
        self.intertwine.iter().copied().fold(0.0, f64::max)
    }
}

/// `Π = ι_S ∘ Π_S* : F_N(R) ⊗ D → H`.
#[derive(Clone, Debug)]
pub struct BlhFactorization {
    pub pi: CMat,
    pub d_dim: usize,
    pub n: usize,
    pub residuals: BlhResiduals,
    pub subspace: CMat,
    /// `||Φ_T^n(I)||` for the ambient tuple.
    pub purity_ambient: Vec<f64>,
    /// `||Φ_{T|S}^n(I_S)||`.
    pub purity_restricted: Vec<f64>,
    /// The restricted trace never exceeds the ambient one.
    pub restriction_purity_ok: bool,
    pub poisson: PoissonOperator,
}

pub fn invariant_subspace_factor(
    t: &OperatorTuple,
    x: &WeightSequence,
    rd: &RadialData,
    s: &CMat,
    opts: BlhOptions,
) -> Result<BlhFactorization> {
    let witness = invariance_witness(t, s);
    if witness > opts.invariance_tol * t.max_norm().max(1.0) {
        return Err(Error::NotInvariant(witness));
    }
    let ambient = tuple::classify(t, x, opts.poisson.classify)?;
    if ambient.phi_norm > 1.0 + opts.poisson.classify.boundary {
        return Err(Error::NotContractive(ambient.phi_norm));
    }
    if ambient.purity_status != Purity::Pure {
        return Err(Error::NotPure {
            last: ambient.purity.last().copied().unwrap_or(f64::NAN),
            iterations: ambient.purity.len(),
        });
    }
    let restricted = t.compress(s);
    let po = poisson(&restricted, x, rd, opts.poisson)?;
    let pi = s * po.pi.adjoint();

    let pps = &pi * pi.adjoint();
    let p_s = s * s.adjoint();
    let r = po.rank();
    let id_r = linalg::identity(r);
    let intertwine = t
        .ops()
        .iter()
        .zip(po.shift.ops())
        .map(|(ti, wi)| {
            // Π(W_i ⊗ I) = ((W_i* ⊗ I)Π*)*
            let right = linalg::kron_apply(&wi.adjoint(), &id_r, &pi.adjoint()).adjoint();
            linalg::spectral_norm(&(ti * &pi - right))
        })
        .collect();
    let ran = linalg::orthonormal_basis(&pi, 1e-8);
    let residuals = BlhResiduals {
        partial_isometry: linalg::spectral_norm(&(&pps * &pi - &pi)),
        range: linalg::spectral_norm(&(&pps - &p_s)),
        intertwine,
        projection: linalg::spectral_norm(&(&pps * &pps - &pps)),
        range_invariance: invariance_witness(t, &ran),
        poisson_isometry: po.isometry_residual,
    };
    let purity_restricted = po.membership.purity.clone();
    let restriction_purity_ok = purity_restricted
        .iter()
        .zip(&ambient.purity)
        .all(|(a, b)| *a <= b + 1e-12);
    Ok(BlhFactorization {
        d_dim: r,
        n: po.n,
        pi,
        residuals,
        subspace: s.clone(),
        purity_ambient: ambient.purity,
        purity_restricted,
        restriction_purity_ok,
        poisson: po,
    })
}

/// `W ⊗ I_G` on `F_M(R) ⊗ C^g`; ambient row `f·g + j`.
#[derive(Clone, Debug)]
pub struct ScalarSetting {
    pub x: WeightSequence,
    pub rd: RadialData,
    pub frame: FockFrame,
    pub shift: ShiftTuple,
    pub g: usize,
    pub tuple: OperatorTuple,
}

impl ScalarSetting {
    pub fn new(x: &WeightSequence, m: usize, g: usize) -> Result<Self> {
        let rd = weights::radial_from_recursion(x, m)?;
        let frame = fock::build_frame(&rd, m)?;
        let shift = fock::build_shift(&frame, &rd)?;
        let tuple = shift.tuple.ampliate(g);
        Ok(ScalarSetting {
            x: x.clone(),
            rd,
            frame,
            shift,
            g,
            tuple,
        })
    }

    pub fn dim(&self) -> usize {
        self.frame.dim() * self.g
    }

    /// `k_w ⊗ I_G`, shape `dim x g`.
    pub fn kernel_block(&self, w: &[C64]) -> CMat {
        let k = self.frame.kernel_vector(&self.rd, w, self.frame.n);
        linalg::kron(&CMat::from_column_slice(k.len(), 1, k.as_slice()), &linalg::identity(self.g))
    }
}

/// `Θ(w) : D → G` read off from `Π*(k_w ⊗ g) = k^R_w ⊗ Θ(w)*g`.
#[derive(Clone, Debug)]
pub struct Symbol {
    pub theta: CMat,
    /// `||Π*(k_w ⊗ I) - k^R_w ⊗ Θ(w)*|| / ||k_w||`.
    pub eigen_residual: f64,
    /// `||R_M (w̄)^⊗M|| / ||k_w||` for the ambient top degree.
    pub tail: f64,
}

pub const SYMBOL_TAIL_TOL: f64 = 1e-4;

pub fn multiplier_symbol(blh: &BlhFactorization, setting: &ScalarSetting, w: &[C64]) -> Result<Symbol> {
    let point = OperatorTuple::point(w)?;
    let phi_w = tuple::phi(&point, &setting.x, &linalg::identity(1))?[(0, 0)].re;
    if phi_w >= 1.0 {
        return Err(Error::OutsideDomain { phi_norm: phi_w });
    }
    let amb = setting.frame.kernel_vector(&setting.rd, w, setting.frame.n);
    let top = amb.rows(setting.frame.offsets[setting.frame.n], setting.frame.dims[setting.frame.n]).norm();
    let tail = top / amb.norm();
    if tail > SYMBOL_TAIL_TOL {
        return Err(Error::Divergent(format!(
            "kernel vector tail {tail:e} exceeds {SYMBOL_TAIL_TOL:e}"
        )));
    }
    let po = &blh.poisson;
    let r = blh.d_dim;
    let g = setting.g;
    let kb = setting.kernel_block(w);
    let p = blh.pi.adjoint() * &kb;
    let kr = po.frame.kernel_vector(&po.rd, w, po.n);
    let kr2 = kr.norm_squared();
    let mut theta_star = CMat::zeros(r, g);
    for j in 0..g {
        let col = p.column(j);
        let mat = CMat::from_column_slice(r, po.frame.dim(), col.as_slice());
        let v = mat * kr.map(|z| z.conj()) / C64::new(kr2, 0.0);
        theta_star.column_mut(j).copy_from(&v);
    }
    let kr_col = CMat::from_column_slice(kr.len(), 1, kr.as_slice());
    let model = linalg::kron(&kr_col, &theta_star);
    let eigen_residual = (p - model).norm() / kb.norm();
    Ok(Symbol {
        theta: theta_star.adjoint(),
        eigen_residual,
        tail,
    })
}

/// Gram test of `A(z,w) = K(z,w)I_G - Θ(z)K^R(z,w)Θ(w)*` on the sample.
pub fn symbol_defect_gram(blh: &BlhFactorization, setting: &ScalarSetting, points: &[Vec<C64>]) -> Result<CpReport> {
    let g = setting.g;
    let po = &blh.poisson;
    let mut thetas = Vec::with_capacity(points.len());
    let mut amb: Vec<CVec> = Vec::with_capacity(points.len());
    let mut model: Vec<CVec> = Vec::with_capacity(points.len());
    for w in points {
        thetas.push(multiplier_symbol(blh, setting, w)?.theta);
        amb.push(setting.frame.kernel_vector(&setting.rd, w, setting.frame.n));
        model.push(po.frame.kernel_vector(&po.rd, w, po.n));
    }
    let n = points.len();
    let mut gram = CMat::zeros(n * g, n * g);
    for i in 0..n {
        for j in 0..n {
            let k = amb[i].dotc(&amb[j]);
            let kr = model[i].dotc(&model[j]);
            let block = linalg::identity(g) * k - &thetas[i] * thetas[j].adjoint() * kr;
            gram.view_mut((i * g, j * g), (g, g)).copy_from(&block);
        }
    }
    Ok(CpReport::from_matrix(gram, crate::kernel::CP_TOL))
}
