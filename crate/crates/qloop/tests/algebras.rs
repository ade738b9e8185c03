use nalgebra::DMatrix;
use proptest::prelude::*;
use qloop::algebras::{
    casimir, casimir_forms, check_relations, opposite_tensor_rep, perturb_generator, tensor_rep, AlgebraTag, Gen, RepTable,
};
use qloop::qcore::{submatrix, swap_matrix};
use qloop::representations::{
    finite_dim, finite_dim_eval, highest_weight, jimbo_eval, osc_fock_minus, osc_fock_plus, rho_plus, verma_general,
    EvalWeight,
};
use qloop::{Grading, QScalar, SpectralPoint, TruncationPolicy, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn qs() -> QScalar {
    QScalar::new(c(-0.35, 0.21)).unwrap()
}

fn policy() -> TruncationPolicy {
    TruncationPolicy { n_max: 20, tol: 1e-12, tail_bound_required: false }
}

fn pt(re: f64, im: f64) -> SpectralPoint {
    SpectralPoint::new(c(re, im))
}

#[test]
fn spin_half_relations_hold_exactly() {
    let r = check_relations(&finite_dim(&qs(), 1), &policy());
    assert!(r.residual < 1e-13, "{r:?}");
    assert_eq!(r.components.len(), 4);
}

#[test]
fn fock_modules_satisfy_oscillator_relations() {
    for rep in [osc_fock_plus(&qs(), &policy()), osc_fock_minus(&qs(), &policy())] {
        let r = check_relations(&rep, &policy());
        assert!(r.residual < 1e-12, "{r:?}");
        assert!(r.components["b_bdag"] < 1e-13);
    }
}

#[test]
fn fock_plus_b_bdag_by_hand() {
    // b b^dag v_n = [n+1] v_n on W^+, compared with the explicit q-number
    let q = qs();
    let rep = osc_fock_plus(&q, &policy());
    let bbd = rep.get(Gen::B) * rep.get(Gen::Bdag);
    for n in 0..10 {
        let expected = (q.powf(n as f64 + 1.0) - q.powf(-(n as f64) - 1.0)) / q.kappa();
        assert!((bbd[(n, n)] - expected).norm() < 1e-13 * expected.norm());
    }
}

#[test]
fn scaled_e1_breaks_serre() {
    let q = qs();
    let g = Grading::default();
    let rep = rho_plus(&q, pt(0.2, 0.1), g, &policy());
    assert!(check_relations(&rep, &policy()).residual < 1e-12);
    let mut bad = rep.clone();
    let m = bad.action.get_mut(&Gen::E1).unwrap();
    // an entry in the middle of the truncated block, away from the cut
    let row = m.nrows() / 2;
    let col = m.row(row).map(|z| z.norm()).iamax_full().1;
    m[(row, col)] *= 1.01;
    let r = check_relations(&bad, &policy());
    assert!(r.components.iter().filter(|(k, _)| k.starts_with("serre")).any(|(_, v)| *v > 1e-4), "{r:?}");
}

#[test]
fn perturbations_are_detected() {
    let q = qs();
    let g = Grading::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reps = [
        finite_dim(&q, 2),
        highest_weight(&q, c(0.7, 0.3), &policy()),
        osc_fock_plus(&q, &policy()),
        jimbo_eval(&q, EvalWeight::Generic(c(0.4, -0.2)), pt(0.1, 0.0), g, &policy()),
        rho_plus(&q, pt(0.1, 0.2), g, &policy()),
    ];
    for rep in &reps {
        for &gen in rep.algebra.generators() {
            let r = check_relations(&perturb_generator(rep, gen, 0.01, &mut rng), &policy());
            assert!(r.residual > 1e-3, "{} {gen:?}: {}", rep.name, r.residual);
        }
    }
}

#[test]
fn casimir_is_scalar_on_verma_modules() {
    let q = qs();
    let (mu, lambda) = (c(0.8, -0.3), c(0.25, 0.4));
    let p = TruncationPolicy { n_max: 10, ..policy() };
    let rep = verma_general(&q, mu, lambda, &p);
    let (ef, fe) = casimir_forms(&rep).unwrap();
    // lambda enters unscaled: C v_n = c_{n+1} v_n + kappa^{-2}(q^{mu-2n-1} + q^{-mu+2n+1}) v_n
    let expected = lambda + (q.pow(mu + 1.0) + q.pow(-mu - 1.0)) / (q.kappa() * q.kappa());
    let idx = rep.space.interior(1);
    let ef_terms = rep.get(Gen::E) * rep.get(Gen::F);
    for &i in &idx {
        let scale = ef_terms[(i, i)].norm().max(expected.norm());
        assert!((ef[(i, i)] - expected).norm() < 1e-13 * scale, "row {i}");
    }
    let a = submatrix(&ef, &idx, &idx);
    let b = submatrix(&fe, &idx, &idx);
    assert!((a - b).norm() < 1e-13 * submatrix(&ef_terms, &idx, &idx).norm());
}

#[test]
fn casimir_on_trivial_module() {
    let q = qs();
    let c0 = casimir(&finite_dim(&q, 0)).unwrap();
    let expected = (q.q() + 1.0 / q.q()) / (q.kappa() * q.kappa());
    assert!((c0.mat[(0, 0)] - expected).norm() < 1e-14);
}

#[test]
fn casimir_is_central() {
    let q = qs();
    let p = TruncationPolicy { n_max: 10, ..policy() };
    let rep = verma_general(&q, c(-1.3, 0.2), c(0.1, 0.0), &p);
    let cm = casimir(&rep).unwrap().mat;
    let idx = rep.space.interior(2);
    let mut ops = vec![rep.get(Gen::E).clone(), rep.get(Gen::F).clone()];
    ops.push(rep.space.cartan_h1(&q, c(0.3, 0.1)));
    for x in ops {
        let comm = submatrix(&(&cm * &x - &x * &cm), &idx, &idx);
        let scale = submatrix(&cm, &idx, &idx).norm() * submatrix(&x, &idx, &idx).norm();
        assert!(comm.norm() / scale < 1e-12, "{}", comm.norm() / scale);
    }
}

#[test]
fn casimir_rejects_other_algebras() {
    assert!(casimir(&osc_fock_plus(&qs(), &policy())).is_err());
}

fn spin_half(u: f64) -> RepTable {
    finite_dim_eval(&qs(), 1, pt(u, 0.05), Grading::default())
}

#[test]
fn tensor_weights_add_and_relations_hold() {
    let a = spin_half(0.1);
    let b = finite_dim_eval(&qs(), 2, pt(-0.4, 0.2), Grading::default());
    let t = tensor_rep(&a, &b).unwrap();
    for i in 0..a.dim() {
        for j in 0..b.dim() {
            let k = t.space.index_of(&[i as i64, j as i64]).unwrap();
            assert!((t.space.weights[k].h1 - a.space.weights[i].h1 - b.space.weights[j].h1).norm() < 1e-15);
        }
    }
    assert!(check_relations(&t, &policy()).residual < 1e-12);
    let o = opposite_tensor_rep(&a, &b).unwrap();
    assert!(check_relations(&o, &policy()).residual < 1e-12);
}

#[test]
fn tensor_with_trivial_factor() {
    let q = qs();
    let g = Grading::default();
    let triv = finite_dim_eval(&q, 0, pt(0.0, 0.0), g);
    let a = spin_half(0.3);
    let t = tensor_rep(&triv, &a).unwrap();
    for &gen in AlgebraTag::Loop.generators() {
        assert!((t.get(gen) - a.get(gen)).norm() < 1e-15);
    }
}

#[test]
fn tensor_of_truncated_modules_on_interior() {
    let q = qs();
    let g = Grading::default();
    let p = TruncationPolicy { n_max: 8, ..policy() };
    let v = jimbo_eval(&q, EvalWeight::Generic(c(0.6, 0.2)), pt(0.2, 0.0), g, &p);
    let t = tensor_rep(&v, &spin_half(-0.2)).unwrap();
    assert!(check_relations(&t, &p).residual < 1e-12);
}

#[test]
fn opposite_is_swap_conjugate() {
    let a = spin_half(0.1);
    let b = finite_dim_eval(&qs(), 2, pt(-0.4, 0.2), Grading::default());
    let o = opposite_tensor_rep(&a, &b).unwrap();
    let t = tensor_rep(&b, &a).unwrap();
    let p = swap_matrix(a.dim(), b.dim());
    let pinv = swap_matrix(b.dim(), a.dim());
    for &gen in AlgebraTag::Loop.generators() {
        let lhs = o.get(gen);
        let rhs = &pinv * t.get(gen) * &p;
        assert!((lhs - rhs).norm() < 1e-13, "{gen:?}");
    }
    // group-like Cartan elements are cocommutative: same weights in both orders
    assert_eq!(o.space.weights, tensor_rep(&a, &b).unwrap().space.weights);
}

#[test]
fn characters_of_both_orders_agree() {
    let q = qs();
    let a = spin_half(0.1);
    let b = finite_dim_eval(&q, 3, pt(0.45, -0.1), Grading::default());
    let nu = c(0.3, 0.7);
    let tr = |r: &RepTable| -> C64 { r.space.cartan_h1(&q, nu).diagonal().iter().sum() };
    let x = tr(&tensor_rep(&a, &b).unwrap());
    let y = tr(&opposite_tensor_rep(&a, &b).unwrap());
    let direct = tr(&a) * tr(&b);
    assert!((x - y).norm() < 1e-13 * x.norm());
    assert!((x - direct).norm() < 1e-13 * x.norm());
}

#[test]
fn oscillator_has_no_coproduct() {
    let w = osc_fock_plus(&qs(), &policy());
    assert!(tensor_rep(&w, &w).is_err());
    assert!(tensor_rep(&spin_half(0.0), &finite_dim(&qs(), 1)).is_err());
}

#[test]
fn weights_sum_to_zero_on_loop_modules() {
    let rep = jimbo_eval(&qs(), EvalWeight::Generic(c(0.9, 0.1)), pt(0.3, 0.0), Grading::new(2, 1).unwrap(), &policy());
    let r = check_relations(&rep, &policy());
    assert_eq!(r.components["central_sum"], 0.0);
    let _ = DMatrix::<C64>::zeros(1, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evaluation_modules_pass_relation_checks(
        hr in -0.69f64..-0.06, hi in -3.0f64..3.0,
        mu_re in -3.0f64..3.0, mu_im in -1.0f64..1.0,
        u_re in -1.0f64..1.0, u_im in -0.5f64..0.5,
        s0 in 1u32..3, s1 in 1u32..3,
    ) {
        let q = QScalar::new(c(hr, hi)).unwrap();
        let g = Grading::new(s0, s1).unwrap();
        let rep = jimbo_eval(&q, EvalWeight::Generic(c(mu_re, mu_im)), pt(u_re, u_im), g, &policy());
        let r = check_relations(&rep, &policy());
        prop_assert!(r.residual < 1e-12, "{:?}", r);
    }

    #[test]
    fn coproduct_is_an_algebra_map(u1 in -1.0f64..1.0, u2 in -1.0f64..1.0, m in 1usize..4) {
        let q = qs();
        let g = Grading::default();
        let a = finite_dim_eval(&q, m, pt(u1, 0.1), g);
        let b = finite_dim_eval(&q, 1, pt(u2, -0.2), g);
        prop_assert!(check_relations(&tensor_rep(&a, &b).unwrap(), &policy()).residual < 1e-12);
        prop_assert!(check_relations(&opposite_tensor_rep(&a, &b).unwrap(), &policy()).residual < 1e-12);
    }
}
