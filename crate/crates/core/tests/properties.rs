use proptest::prelude::*;
use rand::Rng;

use wfock::dilation::{self, BlhOptions, ScalarSetting};
use wfock::fock;
use wfock::kernel::{self, Kernel, KernelOptions};
use wfock::linalg::{self, c, CMat, C64};
use wfock::sampling::{self, SeededRng};
use wfock::tuple::{self, PhiMap};
use wfock::weights::{self, WeightSequence};
use wfock::words::{self, Word};
use wfock::OperatorTuple;

fn weights_for(rng: &mut SeededRng, d: usize, kmax: usize) -> WeightSequence {
    let total = rng.random_range(0.3..0.95);
    sampling::admissible_weights(rng, d, kmax, total).unwrap()
}

fn random_vec(rng: &mut SeededRng, n: usize) -> Vec<C64> {
    (0..n).map(|_| sampling::complex_normal(rng)).collect()
}

fn column(v: &[C64]) -> CMat {
    CMat::from_column_slice(v.len(), 1, v)
}

/// Upper triangular commuting tuple, so every span of leading basis vectors is invariant.
fn triangular_tuple(rng: &mut SeededRng, d: usize, m: usize, x: &WeightSequence, target: f64) -> OperatorTuple {
    let mut a = sampling::complex_gaussian(rng, m, m);
    for j in 0..m {
        for i in j + 1..m {
            a[(i, j)] = linalg::ZERO;
        }
    }
    let a2 = &a * &a;
    let ops = (0..d)
        .map(|_| {
            linalg::identity(m) * (sampling::complex_normal(rng) * 0.3)
                + &a * sampling::complex_normal(rng)
                + &a2 * (sampling::complex_normal(rng) * 0.5)
        })
        .collect();
    sampling::scale_to(&OperatorTuple::new(ops).unwrap(), x, target).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn concatenation_index(d in 1usize..5, a in prop::collection::vec(0usize..4, 0..6), b in prop::collection::vec(0usize..4, 0..6)) {
        let a = Word(a.into_iter().map(|i| i % d + 1).collect());
        let b = Word(b.into_iter().map(|i| i % d + 1).collect());
        let expect = a.index(d) * d.pow(b.len() as u32) + b.index(d);
        prop_assert_eq!(a.concat(&b).index(d), expect);
        prop_assert_eq!(Word::from_index(expect, d, a.len() + b.len()), a.concat(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tensor_powers_are_symmetric(seed in any::<u64>(), d in 1usize..4, k in 0usize..5) {
        let mut rng = sampling::rng(seed);
        let x = random_vec(&mut rng, d);
        let frame = words::symmetric_frame(d, k).unwrap();
        let v = column(&tuple::point_power(&x, k));
        let s = &frame.isometry;
        let resid = (&v - s * (s.adjoint() * &v)).norm() / v.norm().max(1.0);
        prop_assert!(resid <= 1e-10, "residual {resid:e}");
    }

    #[test]
    fn symmetrizer_is_orthogonal_projection(d in 1usize..4, k in 0usize..5) {
        let p = words::symmetric_frame(d, k).unwrap().projector();
        prop_assert!(linalg::max_abs(&(&p * &p - &p)) <= 1e-12);
        prop_assert!(linalg::hermitian_defect(&p) <= 1e-12);
    }

    #[test]
    fn z_operator_inequality(seed in any::<u64>(), d in 1usize..4, kmax in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, d, kmax);
        let n = if d == 3 { 4 } else { 5 };
        let rd = weights::radial_from_recursion(&x, n).unwrap();
        for k in 1..=n {
            prop_assert!(rd.z_norms[k].is_finite());
            let gap = &rd.r2[k] * c(rd.z_norms[k].powi(2), 0.0)
                - linalg::kron(&linalg::identity(d), &rd.r2[k - 1]);
            let scale = linalg::spectral_norm(&rd.r2[k]).max(1.0);
            prop_assert!(linalg::min_eig(&gap) >= -1e-10 * scale, "degree {k}");
        }
    }

    #[test]
    fn recursion_matches_compositions(seed in any::<u64>(), d in 1usize..3, kmax in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, d, kmax);
        let a = weights::radial_from_recursion(&x, 4).unwrap();
        let b = weights::radial_from_compositions(&x, 4).unwrap();
        prop_assert!(weights::radial_discrepancy(&a, &b) <= 1e-10);
    }

    #[test]
    fn scalar_recursion_inverts_series(seed in any::<u64>(), kmax in 1usize..6) {
        let mut rng = sampling::rng(seed);
        let total = rng.random_range(0.2..0.95);
        let xs = sampling::scalar_sequence(&mut rng, kmax, total);
        prop_assert!(weights::scalar_series_check(&xs, 20).unwrap().max_mismatch() <= 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shift_commutes_is_nilpotent_and_bounded(seed in any::<u64>(), d in 1usize..4, kmax in 1usize..3) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, d, kmax);
        let n = 4;
        let rd = weights::radial_from_recursion(&x, n).unwrap();
        let frame = fock::build_frame(&rd, n).unwrap();
        let shift = fock::build_shift(&frame, &rd).unwrap();
        prop_assert!(fock::commutator_residual(&shift) <= 1e-12);
        let id = linalg::identity(frame.dim());
        let top = tuple::phi_power(&shift.tuple, &x, &id, n + 1).unwrap();
        prop_assert!(linalg::max_abs(&top) == 0.0);
        for w in shift.ops() {
            prop_assert!(linalg::spectral_norm(w) <= rd.zbound + 1e-12);
        }
    }

    #[test]
    fn scalar_tuples_span_weighted_symmetric_tensors(seed in any::<u64>(), k in 1usize..4, m in 1usize..3) {
        let mut rng = sampling::rng(seed);
        let d = 2;
        let x = weights_for(&mut rng, d, 2);
        let rd = weights::radial_from_recursion(&x, k).unwrap();
        let mut cols = Vec::with_capacity(20);
        for _ in 0..20 {
            let lambdas = random_vec(&mut rng, d);
            let t = OperatorTuple::scalar(&lambdas, m).unwrap();
            let a = sampling::complex_gaussian(&mut rng, m, m);
            let h = sampling::complex_gaussian(&mut rng, m, 1);
            let tk = tuple::tuple_power(&t, k).unwrap();
            cols.push(linalg::kron_apply(&rd.r[k], &a, &(tk.adjoint() * h)));
        }
        let mut span = CMat::zeros(cols[0].nrows(), cols.len());
        for (j, v) in cols.iter().enumerate() {
            span.set_column(j, &v.column(0));
        }
        let rank = linalg::orthonormal_basis(&span, 1e-8).ncols();
        prop_assert_eq!(rank, words::sym_dim(d, k) * m);
    }

    #[test]
    fn phi_is_completely_positive(seed in any::<u64>(), d in 1usize..3, m in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, d, 2);
        let ops = (0..d).map(|_| sampling::complex_gaussian(&mut rng, m, m)).collect();
        let t = sampling::scale_to(&OperatorTuple::new(ops).unwrap(), &x, 0.9).unwrap();
        let map = PhiMap::new(&t, &t, &x).unwrap().matrix();
        let rep = kernel::choi_cp_check_values(&[vec![map]], m).unwrap();
        prop_assert!(rep.choi_min_eig >= -1e-10 * rep.norm.max(1.0), "min {:e}", rep.choi_min_eig);
    }

    #[test]
    fn purity_is_monotone(seed in any::<u64>(), d in 1usize..3, m in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, d, 2);
        let ops = (0..d).map(|_| sampling::complex_gaussian(&mut rng, m, m)).collect();
        let target = rng.random_range(0.3..1.0);
        let t = sampling::scale_to(&OperatorTuple::new(ops).unwrap(), &x, target).unwrap();
        let mut prev = linalg::identity(m);
        for _ in 0..=10 {
            let next = tuple::phi(&t, &x, &prev).unwrap();
            prop_assert!(linalg::min_eig(&(&prev - &next)) >= -1e-10);
            prev = next;
        }
    }

    #[test]
    fn restriction_identity(seed in any::<u64>(), m in 2usize..5) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, 2, 2);
        let t = triangular_tuple(&mut rng, 2, m, &x, 0.8);
        let j = rng.random_range(1..m);
        let s = linalg::identity(m).columns(0, j).into_owned();
        prop_assert!(dilation::invariance_witness(&t, &s) <= 1e-12);
        let restricted = t.compress(&s);
        let p = &s * s.adjoint();
        for n in 0..=4 {
            let lhs = tuple::phi_power(&restricted, &x, &linalg::identity(j), n).unwrap();
            let rhs = s.adjoint() * tuple::phi_power(&t, &x, &p, n).unwrap() * &s;
            prop_assert!(linalg::max_abs(&(lhs - rhs)) <= 1e-10, "n = {n}");
        }
    }

    #[test]
    fn sampled_kernels_are_hermitian(seed in any::<u64>(), d in 1usize..3, m in 1usize..3) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, d, 2);
        let rd = weights::radial_from_recursion(&x, 4).unwrap();
        let pts: Vec<OperatorTuple> = (0..3)
            .map(|_| {
                let target = rng.random_range(0.1..0.7);
                sampling::commuting_tuple(&mut rng, d, m, &x, target).unwrap()
            })
            .collect();
        let kr = Kernel::Reproducing { x: x.clone(), rd: rd.clone(), opts: KernelOptions::default() };
        prop_assert!(kernel::sample_kernel(&kr, &pts).unwrap().hermitian_defect() <= 1e-10);
        let kc = Kernel::Weighted { squares: kernel::kc_weights(&rd, &rd.r2, 4).unwrap() };
        prop_assert!(kernel::sample_kernel(&kc, &pts).unwrap().hermitian_defect() <= 1e-10);
    }

    #[test]
    fn reproducing_gram_is_psd(seed in any::<u64>(), d in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, d, 2);
        let rd = weights::radial_from_recursion(&x, 3).unwrap();
        let pts: Vec<OperatorTuple> = (0..6)
            .map(|_| {
                let z = sampling::point_in_ball(&mut rng, d, 1.0);
                let target = rng.random_range(0.05..0.9);
                sampling::scale_to(&OperatorTuple::point(&z).unwrap(), &x, target).unwrap()
            })
            .collect();
        let kr = Kernel::Reproducing { x, rd, opts: KernelOptions::default() };
        let rep = kernel::choi_cp_check(&kernel::sample_kernel(&kr, &pts).unwrap()).unwrap();
        prop_assert!(rep.gram_min_eig.unwrap() >= -1e-10, "min {:e}", rep.choi_min_eig);
    }

    #[test]
    fn kernel_vectors_are_isometric(seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, 2, 2);
        let n = 8;
        let rd = weights::radial_from_recursion(&x, n).unwrap();
        let frame = fock::build_frame(&rd, n).unwrap();
        let pts: Vec<Vec<C64>> = (0..3)
            .map(|_| {
                let z = sampling::point_in_ball(&mut rng, 2, 1.0);
                let target = rng.random_range(0.001..0.02);
                sampling::scale_to(&OperatorTuple::point(&z).unwrap(), &x, target).unwrap().coords()
            })
            .collect();
        for z in &pts {
            for w in &pts {
                let (k, ev) = kernel::kernel_scalar(&x, &rd, z, w, KernelOptions::default()).unwrap();
                let inner = frame.kernel_vector(&rd, z, n).dotc(&frame.kernel_vector(&rd, w, n));
                prop_assert!((inner - k).norm() <= 1e-10 + ev.tail_bound, "gap {:e}", (inner - k).norm());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn factorizations_have_invariant_ranges(seed in any::<u64>(), lowest in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, 2, 2);
        let set = ScalarSetting::new(&x, 5, 2).unwrap();
        let mut v = sampling::complex_gaussian(&mut rng, set.dim(), 1);
        v.rows_mut(0, set.frame.offsets[lowest] * set.g).fill(linalg::ZERO);
        let s = dilation::cyclic_subspace(&set.tuple, &v);
        let f = dilation::invariant_subspace_factor(&set.tuple, &x, &set.rd, &s, BlhOptions::default()).unwrap();
        prop_assert!(f.residuals.range_invariance <= 1e-9);
        prop_assert!(f.residuals.projection <= 1e-9);
        prop_assert!(f.restriction_purity_ok);
    }

    #[test]
    fn poisson_is_isometric_on_strict_pure_tuples(seed in any::<u64>(), m in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let x = weights_for(&mut rng, 2, 2);
        let target = rng.random_range(0.02..0.12);
        let t = sampling::commuting_tuple(&mut rng, 2, m, &x, target).unwrap();
        let rd = weights::radial_from_recursion(&x, 1).unwrap();
        let po = dilation::poisson(&t, &x, &rd, Default::default()).unwrap();
        prop_assert!(po.isometry_residual <= 1e-8);
    }
}
