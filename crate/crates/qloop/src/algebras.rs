//! Representation tables of the algebras in play, with relation checks, coproducts and the Casimir.

use crate::qcore::{kron, relative_residual, submatrix, BasisSpace, LinOp, QScalar, RelationReport, TruncationPolicy};
use crate::{cr, Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraTag {
    Sl2,
    Osc,
    BorelPlus,
    Loop,
}

/// Non-Cartan generators. Cartan families are evaluated from weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gen {
    E,
    F,
    B,
    Bdag,
    E0,
    E1,
    F0,
    F1,
}

impl Gen {
    pub fn e(i: usize) -> Gen {
        if i == 0 {
            Gen::E0
        } else {
            Gen::E1
        }
    }

    pub fn f(i: usize) -> Gen {
        if i == 0 {
            Gen::F0
        } else {
            Gen::F1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeneratorSymbol {
    Plain(Gen),
    QH(C64),
    QN(C64),
    Qh0(C64),
    Qh1(C64),
}

impl AlgebraTag {
    pub fn generators(&self) -> &'static [Gen] {
        match self {
            AlgebraTag::Sl2 => &[Gen::E, Gen::F],
            AlgebraTag::Osc => &[Gen::B, Gen::Bdag],
            AlgebraTag::BorelPlus => &[Gen::E0, Gen::E1],
            AlgebraTag::Loop => &[Gen::E0, Gen::E1, Gen::F0, Gen::F1],
        }
    }

    pub fn has_coproduct(&self) -> bool {
        !matches!(self, AlgebraTag::Osc)
    }
}

/// A representation given by generator matrices on a graded basis.
#[derive(Clone, Debug)]
pub struct RepTable {
    pub name: String,
    pub algebra: AlgebraTag,
    pub qs: QScalar,
    pub space: BasisSpace,
    pub action: BTreeMap<Gen, DMatrix<C64>>,
    pub params: BTreeMap<String, C64>,
    pub notes: Vec<String>,
}

impl RepTable {
    pub fn new(name: impl Into<String>, algebra: AlgebraTag, qs: QScalar, space: BasisSpace) -> Self {
        Self { name: name.into(), algebra, qs, space, action: BTreeMap::new(), params: BTreeMap::new(), notes: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn with(mut self, g: Gen, m: DMatrix<C64>) -> Self {
        self.action.insert(g, m);
        self
    }

    pub fn param(mut self, key: &str, v: C64) -> Self {
        self.params.insert(key.to_string(), v);
        self
    }

    pub fn get(&self, g: Gen) -> &DMatrix<C64> {
        self.action.get(&g).unwrap_or_else(|| panic!("generator {g:?} missing from {}", self.name))
    }

    /// q^{nu h_i} for the loop and Borel algebras (i = 0, 1).
    pub fn qh(&self, i: usize, nu: C64) -> DMatrix<C64> {
        if i == 0 {
            self.space.cartan_h0(&self.qs, nu)
        } else {
            self.space.cartan_h1(&self.qs, nu)
        }
    }

    pub fn matrix(&self, sym: GeneratorSymbol) -> DMatrix<C64> {
        match sym {
            GeneratorSymbol::Plain(g) => self.get(g).clone(),
            GeneratorSymbol::QH(nu) | GeneratorSymbol::QN(nu) | GeneratorSymbol::Qh1(nu) => {
                self.space.cartan_h1(&self.qs, nu)
            }
            GeneratorSymbol::Qh0(nu) => self.space.cartan_h0(&self.qs, nu),
        }
    }

    pub fn op(&self, g: Gen) -> LinOp {
        LinOp { domain: self.space.clone(), codomain: self.space.clone(), mat: self.get(g).clone() }
    }

    /// Conjugate every generator by an invertible change of basis: new = S^{-1} old S.
    pub fn conjugate(&self, s: &DMatrix<C64>, s_inv: &DMatrix<C64>) -> RepTable {
        let mut out = self.clone();
        for m in out.action.values_mut() {
            *m = s_inv * &*m * s;
        }
        out
    }
}

const NU_TEST: C64 = C64 { re: 0.37, im: -0.21 };

fn rel(comp: &mut BTreeMap<String, f64>, name: &str, terms: &[DMatrix<C64>], idx: &[usize]) {
    let t: Vec<_> = terms.iter().map(|m| submatrix(m, idx, idx)).collect();
    let r = relative_residual(&t);
    comp.insert(name.to_string(), r);
}

fn qbracket_cartan(rep: &RepTable, i: usize) -> DMatrix<C64> {
    let k = rep.qs.kappa();
    (rep.qh(i, cr(1.0)) - rep.qh(i, cr(-1.0))) / k
}

/// Residuals of every defining relation of the tagged algebra on the interior block.
pub fn check_relations(rep: &RepTable, policy: &TruncationPolicy) -> RelationReport {
    let qs = &rep.qs;
    let nu = NU_TEST;
    let idx1 = rep.space.interior(1);
    let idx3 = rep.space.interior(3);
    let mut comp = BTreeMap::new();
    match rep.algebra {
        AlgebraTag::Sl2 => {
            let (e, f) = (rep.get(Gen::E), rep.get(Gen::F));
            let qh = |x: C64| rep.space.cartan_h1(qs, x);
            rel(&mut comp, "cartan_product", &[qh(nu) * qh(cr(0.5)), -qh(nu + 0.5)], &idx1);
            rel(&mut comp, "cartan_adjoint.E", &[qh(nu) * e * qh(-nu), -e * qs.pow(nu * 2.0)], &idx1);
            rel(&mut comp, "cartan_adjoint.F", &[qh(nu) * f * qh(-nu), -f * qs.pow(-nu * 2.0)], &idx1);
            rel(&mut comp, "e_f_commutator", &[e * f, -(f * e), -qbracket_cartan(rep, 1)], &idx1);
        }
        AlgebraTag::Osc => {
            let (b, bd) = (rep.get(Gen::B), rep.get(Gen::Bdag));
            let qn = |x: C64| rep.space.cartan_h1(qs, x);
            let k = qs.kappa();
            rel(&mut comp, "number_product", &[qn(nu) * qn(cr(0.5)), -qn(nu + 0.5)], &idx1);
            rel(&mut comp, "number_adjoint.bdag", &[qn(nu) * bd * qn(-nu), -bd * qs.pow(nu)], &idx1);
            rel(&mut comp, "number_adjoint.b", &[qn(nu) * b * qn(-nu), -b * qs.pow(-nu)], &idx1);
            rel(&mut comp, "bdag_b", &[bd * b, -(qn(cr(1.0)) - qn(cr(-1.0))) / k], &idx1);
            let q = qs.q();
            rel(&mut comp, "b_bdag", &[b * bd, -(qn(cr(1.0)) * q - qn(cr(-1.0)) / q) / k], &idx1);
        }
        AlgebraTag::BorelPlus | AlgebraTag::Loop => {
            let a = [[2.0, -2.0], [-2.0, 2.0]];
            let q3 = qs.qnum(cr(3.0));
            let full = rep.algebra == AlgebraTag::Loop;
            rel(&mut comp, "cartan_commute", &[rep.qh(0, nu) * rep.qh(1, cr(0.5)), -rep.qh(1, cr(0.5)) * rep.qh(0, nu)], &idx1);
            for i in 0..2 {
                for j in 0..2 {
                    let e = rep.get(Gen::e(j));
                    let lhs = rep.qh(i, nu) * e * rep.qh(i, -nu);
                    rel(&mut comp, &format!("cartan_adjoint.h{i}.e{j}"), &[lhs, -e * qs.pow(nu * a[i][j])], &idx1);
                    if full {
                        let f = rep.get(Gen::f(j));
                        let lhs = rep.qh(i, nu) * f * rep.qh(i, -nu);
                        rel(&mut comp, &format!("cartan_adjoint.h{i}.f{j}"), &[lhs, -f * qs.pow(-nu * a[i][j])], &idx1);
                    }
                }
            }
            if full {
                for i in 0..2 {
                    for j in 0..2 {
                        let (e, f) = (rep.get(Gen::e(i)), rep.get(Gen::f(j)));
                        let mut terms = vec![e * f, -(f * e)];
                        if i == j {
                            terms.push(-qbracket_cartan(rep, i));
                        }
                        rel(&mut comp, &format!("ef.e{i}.f{j}"), &terms, &idx1);
                    }
                }
            }
            let serre = |x: &DMatrix<C64>, y: &DMatrix<C64>| {
                let x2 = x * x;
                let x3 = &x2 * x;
                vec![&x3 * y, -(&x2 * y * x) * q3, (x * y * &x2) * q3, -(y * &x3)]
            };
            for (i, j) in [(0usize, 1usize), (1, 0)] {
                rel(&mut comp, &format!("serre_e.{i}{j}"), &serre(rep.get(Gen::e(i)), rep.get(Gen::e(j))), &idx3);
                if full {
                    rel(&mut comp, &format!("serre_f.{i}{j}"), &serre(rep.get(Gen::f(i)), rep.get(Gen::f(j))), &idx3);
                }
            }
            let central = rep
                .space
                .weights
                .iter()
                .map(|w| (w.h0 + w.h1).norm())
                .fold(0.0, f64::max);
            comp.insert("central_sum".into(), central);
        }
    }
    RelationReport::from_components(format!("relations/{}", rep.name), comp, 0.0, policy.tol)
        .with_param("algebra", rep.algebra)
        .with_param("dim", rep.dim())
}

/// Matrix of the Casimir C = EF + kappa^{-2}(q^{H-1} + q^{-H+1}) on an sl2 representation.
pub fn casimir(rep: &RepTable) -> Result<LinOp> {
    let (ef, _) = casimir_forms(rep)?;
    Ok(LinOp { domain: rep.space.clone(), codomain: rep.space.clone(), mat: ef })
}

/// The two displayed orderings of the Casimir: EF-form and FE-form.
pub fn casimir_forms(rep: &RepTable) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    if rep.algebra != AlgebraTag::Sl2 {
        return Err(Error::Incompatible("Casimir needs an sl2 representation".into()));
    }
    let qs = &rep.qs;
    let k2 = qs.kappa() * qs.kappa();
    let q = qs.q();
    let qh = |x: f64| rep.space.cartan_h1(qs, cr(x));
    let (e, f) = (rep.get(Gen::E), rep.get(Gen::F));
    let ef = e * f + (qh(1.0) / q + qh(-1.0) * q) / k2;
    let fe = f * e + (qh(1.0) * q + qh(-1.0) / q) / k2;
    Ok((ef, fe))
}

fn check_coproduct_pair(a: &RepTable, b: &RepTable) -> Result<()> {
    if a.algebra != b.algebra {
        return Err(Error::Incompatible(format!("{:?} vs {:?}", a.algebra, b.algebra)));
    }
    if !a.algebra.has_coproduct() {
        return Err(Error::Incompatible("no coproduct for the oscillator algebra".into()));
    }
    Ok(())
}

/// Coproduct images on V_A (x) V_B. With `opposite` the opposite coproduct is used.
fn coproduct_images(a: &RepTable, b: &RepTable, opposite: bool) -> BTreeMap<Gen, DMatrix<C64>> {
    let ia = DMatrix::<C64>::identity(a.dim(), a.dim());
    let ib = DMatrix::<C64>::identity(b.dim(), b.dim());
    let one = cr(1.0);
    let mut out = BTreeMap::new();
    // (generator, Cartan index, raising?)
    let table: Vec<(Gen, usize, bool)> = match a.algebra {
        AlgebraTag::Sl2 => vec![(Gen::E, 1, true), (Gen::F, 1, false)],
        AlgebraTag::BorelPlus => vec![(Gen::E0, 0, true), (Gen::E1, 1, true)],
        AlgebraTag::Loop => vec![(Gen::E0, 0, true), (Gen::E1, 1, true), (Gen::F0, 0, false), (Gen::F1, 1, false)],
        AlgebraTag::Osc => vec![],
    };
    for (g, i, raising) in table {
        let (xa, xb) = (a.get(g), b.get(g));
        let m = match (raising, opposite) {
            (true, false) => kron(xa, &ib) + kron(&a.qh(i, -one), xb),
            (true, true) => kron(&ia, xb) + kron(xa, &b.qh(i, -one)),
            (false, false) => kron(xa, &b.qh(i, one)) + kron(&ia, xb),
            (false, true) => kron(&a.qh(i, one), xb) + kron(xa, &ib),
        };
        out.insert(g, m);
    }
    out
}

fn merged_params(a: &RepTable, b: &RepTable) -> BTreeMap<String, C64> {
    let mut p = BTreeMap::new();
    for (k, v) in &a.params {
        p.insert(format!("a.{k}"), *v);
    }
    for (k, v) in &b.params {
        p.insert(format!("b.{k}"), *v);
    }
    p
}

/// The representation (A (x) B) o Delta.
pub fn tensor_rep(a: &RepTable, b: &RepTable) -> Result<RepTable> {
    check_coproduct_pair(a, b)?;
    Ok(RepTable {
        name: format!("({})x({})", a.name, b.name),
        algebra: a.algebra,
        qs: a.qs,
        space: a.space.tensor(&b.space),
        action: coproduct_images(a, b, false),
        params: merged_params(a, b),
        notes: Vec::new(),
    })
}

/// The representation (A (x) B) o Delta^op on V_A (x) V_B.
pub fn opposite_tensor_rep(a: &RepTable, b: &RepTable) -> Result<RepTable> {
    check_coproduct_pair(a, b)?;
    Ok(RepTable {
        name: format!("({})xop({})", a.name, b.name),
        algebra: a.algebra,
        qs: a.qs,
        space: a.space.tensor(&b.space),
        action: coproduct_images(a, b, true),
        params: merged_params(a, b),
        notes: Vec::new(),
    })
}

/// Multiply the entries of one generator by 1 + eps or 1 - eps, alternating with the row and
/// with a random overall sign. Any uniform rescaling, even on a few rows only, can be absorbed
/// by a grading automorphism and leaves the relations intact.
pub fn perturb_generator<R: rand::Rng>(rep: &RepTable, g: Gen, eps: f64, rng: &mut R) -> RepTable {
    let mut out = rep.clone();
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    if let Some(m) = out.action.get_mut(&g) {
        for (row, mut r) in m.row_iter_mut().enumerate() {
            let alt = if row % 2 == 0 { 1.0 } else { -1.0 };
            r *= cr(1.0 + eps * sign * alt);
        }
    }
    out
}
