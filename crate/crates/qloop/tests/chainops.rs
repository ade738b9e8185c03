use nalgebra::DMatrix;
use proptest::prelude::*;
use qloop::chainops::{
    aux_trace, commutator_residual, dense_monodromy, eigenvalues, monodromy, off_sector_norm, q_bar_operator, q_operator,
    q_operator_shifted, transfer_t_finite, transfer_t_mu, transfer_t_tilde, AuxFamily, ChainOperator, ChainSpec, Family,
    TopCorner,
};
use qloop::intertwiners::l_operator;
use qloop::qcore::{kron, swap_matrix};
use qloop::representations::{finite_dim_eval, rho_plus, ShiftWeight};
use qloop::{Grading, QScalar, SpectralPoint, TruncationPolicy, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn qs() -> QScalar {
    QScalar::new(c(-0.35, 0.21)).unwrap()
}

fn phi() -> C64 {
    c(1.3, 0.4)
}

fn policy() -> TruncationPolicy {
    TruncationPolicy { n_max: 40, tol: 1e-8, tail_bound_required: false }
}

fn oracle(n_max: usize) -> TruncationPolicy {
    TruncationPolicy { n_max, tol: 1e-8, tail_bound_required: true }
}

fn pt(re: f64, im: f64) -> SpectralPoint {
    SpectralPoint::new(c(re, im))
}

fn chain(sites: &[C64]) -> ChainSpec {
    ChainSpec::with_sites(qs(), sites.iter().map(|&u| SpectralPoint::new(u)).collect(), phi(), Grading::default()).unwrap()
}

fn inhomogeneous(l: usize) -> ChainSpec {
    let us = [c(0.0, 0.0), c(0.13, 0.05), c(-0.21, 0.1), c(0.07, -0.08)];
    chain(&us[..l])
}

fn rel(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn all_families(ch: &ChainSpec, u: C64) -> Vec<ChainOperator> {
    let p = pt(u.re, u.im);
    let n = TopCorner;
    vec![
        transfer_t_tilde(c(0.4, -0.3), p, ch, &policy(), &n).unwrap(),
        transfer_t_mu(c(-0.7, 0.2), p, ch, &policy(), &n).unwrap(),
        transfer_t_finite(1, p, ch, &n).unwrap(),
        transfer_t_finite(2, p, ch, &n).unwrap(),
        q_operator(p, ch, &policy(), &n).unwrap(),
        q_bar_operator(p, ch, &policy(), &n).unwrap(),
        q_operator_shifted(ShiftWeight::from_h0(c(0.3, 0.2)), p, ch, &policy(), &n).unwrap(),
    ]
}

#[test]
fn chain_spec_validation() {
    assert!(ChainSpec::new(qs(), 0, phi(), Grading::default()).is_err());
    let ch = ChainSpec::new(qs(), 3, phi(), Grading::default()).unwrap();
    assert_eq!(ch.dim(), 8);
    assert_eq!(ch.h1(), vec![3.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -3.0]);
    // the default twist lies outside the region where the traces converge as sums
    assert!(!ch.twist_converges());
    let conv = ChainSpec { twist_phi: c(1.6, 0.3) / qs().hbar(), ..ch };
    assert!(conv.twist_converges());
}

#[test]
fn single_site_monodromy_is_the_l_operator() {
    let q = qs();
    let p = TruncationPolicy { n_max: 12, ..policy() };
    let aux = rho_plus(&q, pt(0.3, 0.1), Grading::default(), &p);
    let ch = chain(&[c(-0.05, 0.02)]);
    let m = monodromy(&aux, &ch, &p).unwrap();
    let site = finite_dim_eval(&q, 1, ch.site_params[0], Grading::default());
    let l = l_operator(&aux, &site, &p).unwrap().r.mat;
    assert_eq!(m.mat, l);
}

#[test]
fn two_site_monodromy_is_the_ordered_product() {
    let q = qs();
    let g = Grading::default();
    let p = policy();
    let aux = finite_dim_eval(&q, 1, pt(0.3, 0.1), g);
    let ch = chain(&[c(-0.05, 0.02), c(0.2, -0.1)]);
    let m = monodromy(&aux, &ch, &p).unwrap();
    let l: Vec<DMatrix<C64>> = ch
        .site_params
        .iter()
        .map(|s| l_operator(&aux, &finite_dim_eval(&q, 1, *s, g), &p).unwrap().r.mat)
        .collect();
    let id = DMatrix::<C64>::identity(2, 2);
    let p23 = kron(&id, &swap_matrix(2, 2));
    let first = kron(&l[0], &id);
    let second = &p23 * kron(&l[1], &id) * &p23;
    assert!(rel(&m.mat, &(second * first)) < 1e-14);
    assert_eq!(dense_monodromy(&l, 2), m.mat);
    // total weight is conserved by the product
    let h = kron(&aux.space.cartan_h1(&q, c(0.3, 0.1)), &ch.cartan(c(0.3, 0.1)));
    assert!(commutator_residual(&m.mat, &h) < 1e-14);
}

#[test]
fn finite_transfer_matrices() {
    let ch = inhomogeneous(3);
    let t0 = transfer_t_finite(0, pt(0.2, 0.1), &ch, &TopCorner).unwrap();
    assert_eq!(*t0.mat(), DMatrix::identity(8, 8));
    assert_eq!(t0.meta.family, Family::TFinite);
    let single = inhomogeneous(1);
    let t1 = transfer_t_finite(1, pt(0.2, 0.1), &single, &TopCorner).unwrap();
    assert_eq!(t1.mat().shape(), (2, 2));
    // diagonalizable with two distinct eigenvalues
    let ev = eigenvalues(t1.mat());
    assert!((ev[0] - ev[1]).norm() > 1e-6 * ev[0].norm());
    let ch = inhomogeneous(2);
    let tm = transfer_t_finite(1, pt(0.2, 0.1), &ch, &TopCorner).unwrap();
    let ev = eigenvalues(tm.mat());
    for (i, a) in ev.iter().enumerate() {
        for b in &ev[i + 1..] {
            assert!((a - b).norm() > 1e-8);
        }
    }
}

#[test]
fn t_mu_identities() {
    let ch = inhomogeneous(2);
    let p = pt(0.15, -0.05);
    let n = TopCorner;
    let zero = transfer_t_mu(c(-1.0, 0.0), p, &ch, &policy(), &n).unwrap();
    assert!(zero.mat().iter().all(|z| z.norm() == 0.0));
    let mu = c(0.45, 0.3);
    let a = transfer_t_mu(mu, p, &ch, &policy(), &n).unwrap();
    let b = transfer_t_mu(-mu - 2.0, p, &ch, &policy(), &n).unwrap();
    assert!(rel(a.mat(), &-b.mat()) < 1e-14);
    assert!(a.mat().norm() > 0.0);
}

#[test]
fn families_commute_pairwise() {
    for l in 1..=3 {
        let ch = inhomogeneous(l);
        let a = all_families(&ch, c(0.21, -0.13));
        let b = all_families(&ch, c(-0.37, 0.08));
        for x in &a {
            for y in &b {
                let r = commutator_residual(x.mat(), y.mat());
                assert!(r < 1e-9, "L={l} {:?} vs {:?}: {r}", x.meta.family, y.meta.family);
            }
        }
    }
}

#[test]
fn operators_preserve_magnetization() {
    let ch = inhomogeneous(3);
    let h = ch.cartan(c(0.31, -0.4));
    for op in all_families(&ch, c(0.1, 0.05)) {
        assert!(commutator_residual(op.mat(), &h) < 1e-12, "{:?}", op.meta.family);
        assert!(off_sector_norm(&ch, op.mat()) < 1e-13, "{:?}", op.meta.family);
    }
}

#[test]
fn odd_chains_have_single_valued_prefactors() {
    let ch = inhomogeneous(3);
    let u = c(0.2, 0.1);
    let q = q_operator(pt(u.re, u.im), &ch, &policy(), &TopCorner).unwrap();
    // the prefactor q^{u s h1/4} on the h1 = 3 and h1 = 1 sectors
    let raw = aux_trace(&AuxFamily::RhoPlus, u, &ch, &policy()).unwrap().0;
    let s = Grading::default().sf();
    for (i, w) in ch.h1().into_iter().enumerate() {
        let pre = qs().pow(u * s * w / 4.0);
        for j in 0..ch.dim() {
            assert!((q.mat()[(i, j)] - pre * raw[(i, j)]).norm() <= 1e-14 * q.mat().norm());
        }
    }
}

fn convergent_chain(l: usize) -> ChainSpec {
    ChainSpec { twist_phi: c(1.6, 0.3) / qs().hbar(), ..inhomogeneous(l) }
}

#[test]
fn closed_forms_agree_with_truncated_sums() {
    for l in 1..=2 {
        let ch = convergent_chain(l);
        let u = c(0.17, -0.06);
        for fam in [AuxFamily::RhoPlus, AuxFamily::RhoBarMinus, AuxFamily::Verma(c(0.3, 0.2))] {
            let (closed, _) = aux_trace(&fam, u, &ch, &policy()).unwrap();
            let (numeric, tail) = aux_trace(&fam, u, &ch, &oracle(60)).unwrap();
            let worst = (&closed - &numeric).map(|z| z.norm()).max();
            assert!(worst <= tail + 1e-12 * closed.norm(), "L={l} {fam:?}: {worst} vs tail {tail}");
        }
    }
}

#[test]
fn doubling_the_truncation_stays_within_the_tail() {
    let ch = convergent_chain(2);
    let u = c(-0.11, 0.04);
    for fam in [AuxFamily::RhoPlus, AuxFamily::Verma(c(-0.6, 0.1))] {
        let (a, tail) = aux_trace(&fam, u, &ch, &oracle(30)).unwrap();
        let (b, _) = aux_trace(&fam, u, &ch, &oracle(60)).unwrap();
        let worst = (&a - &b).map(|z| z.norm()).max();
        assert!(worst <= tail + 1e-13 * a.norm(), "{fam:?}: {worst} vs {tail}");
    }
}

#[test]
fn divergent_twist_is_refused_by_the_oracle() {
    let ch = inhomogeneous(1);
    assert!(aux_trace(&AuxFamily::RhoPlus, c(0.1, 0.0), &ch, &oracle(40)).is_err());
}

#[test]
fn eigenvalues_are_sorted() {
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(-1.0, 3.0), c(-1.0, -3.0)]));
    assert_eq!(eigenvalues(&m), vec![c(-1.0, -3.0), c(-1.0, 3.0), c(2.0, 0.0)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn random_pairs_commute(
        l in 1usize..5, u1 in -0.6f64..0.6, v1 in -0.3f64..0.3, u2 in -0.6f64..0.6, v2 in -0.3f64..0.3,
        pick in 0usize..7, pick2 in 0usize..7,
    ) {
        let ch = inhomogeneous(l);
        let a = &all_families(&ch, c(u1, v1))[pick];
        let b = &all_families(&ch, c(u2, v2))[pick2];
        prop_assert!(commutator_residual(a.mat(), b.mat()) < 1e-9);
    }

    #[test]
    fn difference_property(l in 1usize..4, u in -0.5f64..0.5, v in -0.3f64..0.3, a in -0.8f64..0.8, b in -0.5f64..0.5) {
        let ch = inhomogeneous(l);
        let moved = ch.shifted(c(a, b));
        let (p, pm) = (pt(u, v), pt(u + a, v + b));
        let n = TopCorner;
        let x = transfer_t_tilde(c(0.3, 0.1), p, &ch, &policy(), &n).unwrap();
        let y = transfer_t_tilde(c(0.3, 0.1), pm, &moved, &policy(), &n).unwrap();
        prop_assert!(rel(x.mat(), y.mat()) < 1e-11);
        let x = transfer_t_finite(2, p, &ch, &n).unwrap();
        let y = transfer_t_finite(2, pm, &moved, &n).unwrap();
        prop_assert!(rel(x.mat(), y.mat()) < 1e-11);
        // Q carries the chain prefactor q^{u s h1/4}, which is removed before comparing
        let x = aux_trace(&AuxFamily::RhoPlus, p.u, &ch, &policy()).unwrap().0;
        let y = aux_trace(&AuxFamily::RhoPlus, pm.u, &moved, &policy()).unwrap().0;
        prop_assert!(rel(&x, &y) < 1e-11);
    }
}
