use nalgebra::DMatrix;
use proptest::prelude::*;
use qloop::qcore::{kappa, qnum, recip, relative_residual, swap, tensor, zeta_pow};
use qloop::{BasisSpace, Grading, LinOp, QScalar, RelationReport, SpectralPoint, TruncationPolicy, Weight, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn q2() -> QScalar {
    QScalar::new(c(2f64.ln(), 0.0)).unwrap()
}

fn default_q() -> QScalar {
    QScalar::new(c(-0.35, 0.21)).unwrap()
}

fn space(weights: &[f64]) -> BasisSpace {
    BasisSpace::finite(weights.iter().map(|&w| Weight::from_h1(c(w, 0.0))).collect())
}

fn rank(m: &DMatrix<C64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

#[test]
fn rejects_degenerate_q() {
    assert!(QScalar::new(c(0.0, 0.0)).is_err());
    assert!(QScalar::new(c(0.0, std::f64::consts::PI)).is_err());
    assert!(QScalar::new(c(0.3, 0.1)).is_ok());
}

#[test]
fn qnum_examples() {
    let qs = q2();
    assert!(qnum(&qs, c(0.0, 0.0)).norm() < 1e-15);
    assert!((qnum(&qs, c(1.0, 0.0)) - 1.0).norm() < 1e-15);
    // q^2 + 1 + q^{-2} at q = 2
    assert!((qnum(&qs, c(3.0, 0.0)) - 5.25).norm() < 1e-13);
}

#[test]
fn kappa_examples() {
    let qs = q2();
    assert!((kappa(&qs) - 1.5).norm() < 1e-15);
    let inv = QScalar::new(-qs.hbar()).unwrap();
    assert!((kappa(&inv) + kappa(&qs)).norm() < 1e-15);
    let nu = c(0.7, -0.4);
    let lhs = kappa(&qs) * qnum(&qs, nu);
    assert!((lhs - (qs.pow(nu) - qs.pow(-nu))).norm() < 1e-14);
}

#[test]
fn zeta_powers() {
    let qs = default_q();
    let pt = SpectralPoint::new(c(1.0, 0.0));
    assert!((zeta_pow(&qs, pt, c(0.0, 0.0)) - 1.0).norm() < 1e-15);
    assert!((zeta_pow(&qs, pt, c(1.0, 0.0)) - qs.q()).norm() < 1e-15);
    let pt = SpectralPoint::new(c(0.3, -1.2));
    let (a, b) = (c(0.4, 2.0), c(-1.3, 0.5));
    let lhs = zeta_pow(&qs, pt, a) * zeta_pow(&qs, pt, b);
    assert!((lhs - zeta_pow(&qs, pt, a + b)).norm() < 1e-14 * lhs.norm());
}

#[test]
fn grading_and_policy_validation() {
    assert!(Grading::new(0, 1).is_err());
    assert_eq!(Grading::new(2, 3).unwrap().s(), 5);
    assert!(TruncationPolicy::new(1, 1e-8).is_err());
    assert!(TruncationPolicy::new(10, 0.0).is_err());
}

#[test]
fn tensor_of_identities_and_diagonals() {
    let a = space(&[1.0, -1.0]);
    let b = space(&[2.0, 0.0, -2.0]);
    let t = tensor(&LinOp::identity(a.clone()), &LinOp::identity(b.clone())).unwrap();
    assert_eq!(t.mat, DMatrix::identity(6, 6));
    let w = [c(2.0, 0.0), c(0.0, 1.0)];
    let v = [c(1.0, 1.0), c(3.0, 0.0), c(-1.0, 0.5)];
    let da = LinOp::square(a.clone(), DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w))).unwrap();
    let db = LinOp::square(b.clone(), DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&v))).unwrap();
    let t = tensor(&da, &db).unwrap();
    for (i, wi) in w.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            let k = t.domain.index_of(&[i as i64, j as i64]).unwrap();
            assert!((t.mat[(k, k)] - wi * vj).norm() < 1e-15);
            assert!((t.domain.weights[k].h1 - (a.weights[i].h1 + b.weights[j].h1)).norm() < 1e-15);
        }
    }
}

#[test]
fn tensor_rank_is_multiplicative() {
    let mut seed = 7u64;
    let mut next = || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for (ra, rb) in [(1usize, 2usize), (2, 2), (3, 1)] {
        let low = |n: usize, r: usize, next: &mut dyn FnMut() -> f64| {
            let x = DMatrix::from_fn(n, r, |_, _| c(next(), next()));
            let y = DMatrix::from_fn(r, n, |_, _| c(next(), next()));
            x * y
        };
        let a = low(3, ra, &mut next);
        let b = low(3, rb, &mut next);
        let sa = space(&[0.0; 3]);
        let t = tensor(&LinOp::square(sa.clone(), a.clone()).unwrap(), &LinOp::square(sa, b.clone()).unwrap()).unwrap();
        assert_eq!(rank(&t.mat), rank(&a) * rank(&b));
    }
}

#[test]
fn swap_on_two_qubits() {
    let s = space(&[1.0, -1.0]);
    let p = swap(&s, &s);
    let mut expected = DMatrix::<C64>::zeros(4, 4);
    for (r, col) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        expected[(r, col)] = c(1.0, 0.0);
    }
    assert_eq!(p.mat, expected);
}

#[test]
fn swap_conjugates_tensor_factors() {
    let a = space(&[1.0, -1.0]);
    let b = space(&[2.0, 0.0, -2.0]);
    let ma = DMatrix::from_fn(2, 2, |i, j| c(i as f64 + 0.3, j as f64 - 1.0));
    let mb = DMatrix::from_fn(3, 3, |i, j| c((i * j) as f64, 0.5 + i as f64));
    let oa = LinOp::square(a.clone(), ma).unwrap();
    let ob = LinOp::square(b.clone(), mb).unwrap();
    let pab = swap(&a, &b);
    let pba = swap(&b, &a);
    assert_eq!(&pba.mat * &pab.mat, DMatrix::identity(6, 6));
    let lhs = &pab.mat * tensor(&oa, &ob).unwrap().mat * &pba.mat;
    let rhs = tensor(&ob, &oa).unwrap().mat;
    assert!((lhs - rhs).norm() < 1e-14);
}

#[test]
fn compose_checks_spaces() {
    let a = LinOp::identity(space(&[1.0, -1.0]));
    let b = LinOp::identity(space(&[0.0, 0.0, 0.0]));
    assert!(a.compose(&b).is_err());
    assert!(a.compose(&a).is_ok());
}

#[test]
fn report_verdict_uses_tail() {
    assert!(RelationReport::new("x", 1e-9, 0.0, 1e-8).passed());
    assert!(!RelationReport::new("x", 1e-7, 0.0, 1e-8).passed());
    assert!(RelationReport::new("x", 1e-7, 2e-7, 1e-8).passed());
    assert!(!RelationReport::new("x", f64::NAN, 1.0, 1.0).passed());
}

#[test]
fn relative_residual_is_scaled_by_largest_term() {
    let a = DMatrix::from_element(2, 2, c(1e10, 0.0));
    let b = DMatrix::from_element(2, 2, c(-1e10 + 1.0, 0.0));
    let r = relative_residual(&[a, b]);
    assert!((r - 1e-10).abs() < 1e-15);
}

#[test]
fn recip_survives_huge_moduli() {
    let z = C64::from_polar(1e200, 0.7);
    let r = recip(z);
    assert!(r.norm() > 0.0);
    assert!((r * z - 1.0).norm() < 1e-14);
}

proptest! {
    #[test]
    fn qnum_is_odd(re in -3.0f64..3.0, im in -3.0f64..3.0, hr in -1.0f64..1.0, hi in 0.05f64..3.0) {
        let qs = QScalar::new(c(hr, hi)).unwrap();
        let nu = c(re, im);
        let a = qnum(&qs, nu);
        let b = qnum(&qs, -nu);
        prop_assert!((a + b).norm() <= 1e-13 * a.norm().max(1.0));
    }

    #[test]
    fn powers_multiply(a_re in -4.0f64..4.0, a_im in -4.0f64..4.0, b_re in -4.0f64..4.0, b_im in -4.0f64..4.0) {
        let qs = default_q();
        let (a, b) = (c(a_re, a_im), c(b_re, b_im));
        let lhs = qs.pow(a) * qs.pow(b);
        let rhs = qs.pow(a + b);
        prop_assert!((lhs - rhs).norm() <= 1e-14 * lhs.norm().max(rhs.norm()));
    }

    #[test]
    fn zeta_pow_is_continuous(u_re in -2.0f64..2.0, u_im in -20.0f64..20.0) {
        // a path crossing many windings of q^u: no jump between nearby points
        let qs = default_q();
        let a = c(0.5, 0.0);
        let p0 = SpectralPoint::new(c(u_re, u_im));
        let p1 = p0.shifted(c(1e-7, 1e-7));
        let (z0, z1) = (zeta_pow(&qs, p0, a), zeta_pow(&qs, p1, a));
        prop_assert!((z0 - z1).norm() <= 1e-6 * z0.norm());
    }

    #[test]
    fn tensor_is_associative(seed in 0u64..1000) {
        let f = |i: usize, j: usize, k: u64| c(((i * 7 + j * 3) as u64 ^ (seed + k)) as f64 % 5.0 - 2.0, (i + j) as f64 * 0.1);
        let s2 = space(&[1.0, -1.0]);
        let s3 = space(&[2.0, 0.0, -2.0]);
        let a = LinOp::square(s2.clone(), DMatrix::from_fn(2, 2, |i, j| f(i, j, 1))).unwrap();
        let b = LinOp::square(s3.clone(), DMatrix::from_fn(3, 3, |i, j| f(i, j, 2))).unwrap();
        let d = LinOp::square(s2.clone(), DMatrix::from_fn(2, 2, |i, j| f(i, j, 3))).unwrap();
        let left = tensor(&tensor(&a, &b).unwrap(), &d).unwrap();
        let right = tensor(&a, &tensor(&b, &d).unwrap()).unwrap();
        prop_assert!((left.mat - right.mat).norm() < 1e-12);
    }
}
