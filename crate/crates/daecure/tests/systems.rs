//! Generated systems checked against the dense Weierstrass oracle.

use daecure::bench_io::{gen_semi_explicit_index1, gen_stokes_index2};
use daecure::daemodel::{polynomial_part, DaeSystem, DenseSplit, PolyPart, ProjectorKit, StructureTag};
use daecure::numkernel::dense::{eig_pencil_dense, inverse, singular_values};
use ndarray::{s, Array1, Array2};
use proptest::prelude::*;

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Applies a vector map column by column.
fn apply_cols(n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        out.column_mut(j).assign(&Array1::from(f(&e)));
    }
    out
}

fn check_projectors_against_oracle(sys: &DaeSystem) {
    let n = sys.n();
    let kit = ProjectorKit::build(sys).unwrap();
    let (e, a, b, c) = sys.to_dense().unwrap();
    let split = DenseSplit::new(&e, &a).unwrap();
    assert_eq!(split.n_f, sys.n_f(), "finite dimension");
    let pl = apply_cols(n, |x| kit.apply_pl(x).unwrap());
    let pr = apply_cols(n, |x| kit.apply_pr(x).unwrap());
    let scale = 1.0 + max_abs(&split.left_projector());
    assert!(max_abs(&(&pl - &split.left_projector())) < 1e-8 * scale);
    assert!(max_abs(&(&pr - &split.right_projector())) < 1e-8 * scale);
    // Idempotence and the commutation E·Π_r = Π_l·E.
    assert!(max_abs(&(pl.dot(&pl) - &pl)) < 1e-8 * scale);
    assert!(max_abs(&(pr.dot(&pr) - &pr)) < 1e-8 * scale);
    assert!(max_abs(&(e.dot(&pr) - pl.dot(&e))) < 1e-8 * scale * (1.0 + max_abs(&e)));
    // Transposed maps are transposes.
    let plt = apply_cols(n, |x| kit.apply_pl_t(x).unwrap());
    assert!(max_abs(&(&plt - &pl.t())) < 1e-8 * scale);
    let pb = kit.project_input(sys.b()).unwrap();
    assert!(max_abs(&(&pb - &split.left_projector().dot(&b))) < 1e-8 * scale * (1.0 + max_abs(&b)));
    let cp = kit.project_output(sys.c()).unwrap();
    assert!(max_abs(&(&cp - &c.dot(&split.right_projector()))) < 1e-8 * scale * (1.0 + max_abs(&c)));
}

fn finite_eigs_stable(sys: &DaeSystem) -> usize {
    // Eigenvalues of the finite block of the Weierstrass split.
    let (e, a, _, _) = sys.to_dense().unwrap();
    let split = DenseSplit::new(&e, &a).unwrap();
    let eigs = eig_pencil_dense(&split.e_f, &split.a_f).unwrap();
    let finite: Vec<_> = eigs.iter().filter_map(|p| p.value).collect();
    for l in &finite {
        assert!(l.re < 0.0, "unstable finite eigenvalue {l}");
    }
    finite.len()
}

#[test]
fn index1_small_instance() {
    let sys = gen_semi_explicit_index1(3, 2, 7).unwrap();
    assert_eq!(sys.n_f(), 3);
    assert_eq!(*sys.structure(), StructureTag::SemiExplicitIndex1 { n1: 3 });
    check_projectors_against_oracle(&sys);
    assert_eq!(finite_eigs_stable(&sys), 3);
}

#[test]
fn index1_polynomial_part_is_schur_constant() {
    let sys = gen_semi_explicit_index1(20, 6, 5).unwrap();
    let (_, a, b, c) = sys.to_dense().unwrap();
    let n1 = 20;
    let a22 = a.slice(s![n1.., n1..]).to_owned();
    let b2 = b.slice(s![n1.., ..]).to_owned();
    let c2 = c.slice(s![.., n1..]).to_owned();
    let expected = -c2.dot(&inverse(&a22).unwrap()).dot(&b2);
    match polynomial_part(&sys).unwrap() {
        PolyPart::Constant(p) => {
            assert!(max_abs(&(&p - &expected)) < 1e-12 * (1.0 + max_abs(&expected)));
            assert!(max_abs(&p) > 1e-3, "constant part should be nonzero");
        }
        PolyPart::StrictlyProper => panic!("expected a constant part"),
    }
}

#[test]
fn index1_desk_scale_is_stable_and_consistent() {
    let sys = gen_semi_explicit_index1(150, 40, 3).unwrap();
    check_projectors_against_oracle(&sys);
    assert_eq!(finite_eigs_stable(&sys), 150);
}

#[test]
fn stokes_pinned_pressure_and_counts() {
    let sys = gen_stokes_index2(4, 1).unwrap();
    let StructureTag::StokesIndex2 { n_v, n_p } = *sys.structure() else {
        panic!("wrong tag")
    };
    assert_eq!((n_v, n_p), (24, 15));
    let (e, a, _, _) = sys.to_dense().unwrap();
    let a12 = a.slice(s![..n_v, n_v..]).to_owned();
    let a21 = a.slice(s![n_v.., ..n_v]).to_owned();
    assert_eq!(a21, a12.t());
    let sv = singular_values(&a21.dot(&a12)).unwrap();
    let cond = sv[0] / sv[sv.len() - 1];
    assert!(cond.is_finite() && cond < 1e8, "cond(A21 A12) = {cond}");
    let k = Array2::eye(n_v) - a12.dot(&inverse(&a21.dot(&a12)).unwrap()).dot(&a21);
    assert!(max_abs(&(k.dot(&k) - &k)) < 1e-10);
    let split = DenseSplit::new(&e, &a).unwrap();
    assert_eq!(split.n_f, n_v - n_p);
    assert_eq!(sys.n() - split.n_f, 2 * n_p);
    check_projectors_against_oracle(&sys);
    assert_eq!(finite_eigs_stable(&sys), n_v - n_p);
}

#[test]
fn stokes_is_strictly_proper() {
    let sys = gen_stokes_index2(5, 2).unwrap();
    assert!(matches!(polynomial_part(&sys).unwrap(), PolyPart::StrictlyProper));
}

#[test]
fn generators_are_deterministic() {
    let a = gen_semi_explicit_index1(30, 5, 9).unwrap();
    let b = gen_semi_explicit_index1(30, 5, 9).unwrap();
    assert_eq!(a.a().values(), b.a().values());
    assert_eq!(a.b().indices(), b.b().indices());
    let c = gen_semi_explicit_index1(30, 5, 10).unwrap();
    assert_ne!(a.a().values(), c.a().values());
    let s1 = gen_stokes_index2(6, 4).unwrap();
    let s2 = gen_stokes_index2(6, 4).unwrap();
    assert_eq!(s1.c().values(), s2.c().values());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn index1_generator_invariants(n1 in 1usize..25, n2 in 1usize..8, seed in 0u64..1000) {
        let sys = gen_semi_explicit_index1(n1, n2, seed).unwrap();
        prop_assert_eq!(sys.n_f(), n1);
        check_projectors_against_oracle(&sys);
        prop_assert_eq!(finite_eigs_stable(&sys), n1);
    }

    #[test]
    fn stokes_generator_invariants(m in 3usize..6, seed in 0u64..1000) {
        let sys = gen_stokes_index2(m, seed).unwrap();
        check_projectors_against_oracle(&sys);
        prop_assert_eq!(finite_eigs_stable(&sys), sys.n_f());
    }
}
