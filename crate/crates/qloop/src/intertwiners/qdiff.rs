//! Auxiliary-space operators as q-difference operators in the basis label n, and
//! L-operators solved exactly in that ring. An operator with terms {(d, j): c}
//! sends v_n to sum c q^{jn} v_{n+d}; traces with twist are then geometric series
//! with closed-form sums.

use super::{null_vector, NullVector};
use crate::qcore::{Grading, QScalar};
use crate::representations::{GeneralizedRepSpec, ShiftWeight};
use crate::{cr, Error, Result, C64};
use nalgebra::DMatrix;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuxOp {
    pub terms: BTreeMap<(i32, i32), C64>,
}

impl AuxOp {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::term(0, 0, cr(1.0))
    }

    pub fn term(d: i32, j: i32, c: C64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((d, j), c);
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect() }
    }

    pub fn add_assign(&mut self, other: &AuxOp, c: C64) {
        for (k, v) in &other.terms {
            *self.terms.entry(*k).or_insert(cr(0.0)) += v * c;
        }
    }

    /// Composition self o other.
    pub fn mul(&self, other: &AuxOp, qs: &QScalar) -> AuxOp {
        let mut out = AuxOp::zero();
        for (&(d1, j1), c1) in &self.terms {
            for (&(d2, j2), c2) in &other.terms {
                let f = qs.powf((j1 * d2) as f64);
                *out.terms.entry((d1 + d2, j1 + j2)).or_insert(cr(0.0)) += c1 * c2 * f;
            }
        }
        out
    }

    /// Coefficient of v_{n+d} in the image of v_n.
    pub fn coefficient(&self, qs: &QScalar, d: i32, n: i64) -> C64 {
        self.terms
            .iter()
            .filter(|((dd, _), _)| *dd == d)
            .map(|(&(_, j), c)| c * qs.powf(j as f64 * n as f64))
            .sum()
    }

    /// Matrix on labels lo..=hi; terms leaving the range are dropped.
    pub fn materialize(&self, qs: &QScalar, lo: i64, hi: i64) -> DMatrix<C64> {
        let dim = (hi - lo + 1) as usize;
        let mut m = DMatrix::zeros(dim, dim);
        for (&(d, j), c) in &self.terms {
            for k in 0..dim {
                let t = k as i64 + d as i64;
                if t >= 0 && (t as usize) < dim {
                    let n = lo + k as i64;
                    m[(t as usize, k)] += c * qs.powf(j as f64 * n as f64);
                }
            }
        }
        m
    }

    /// sum_{n >= 0} <v_n| X |v_n> q^{phi (w0 + slope n)}, continued analytically.
    pub fn twisted_trace(&self, qs: &QScalar, phi: C64, w0: C64, slope: i32) -> Result<C64> {
        let mut sum = cr(0.0);
        for (&(d, j), c) in &self.terms {
            if d != 0 {
                continue;
            }
            let den = 1.0 - qs.pow(cr(j as f64) + phi * slope as f64);
            if den.norm() < 1e-13 {
                return Err(Error::Pole(format!("twisted trace term q^({j} n) at phi = {phi}")));
            }
            sum += c / den;
        }
        Ok(qs.pow(phi * w0) * sum)
    }
}

/// A Borel or loop module on labels n >= 0 given by q-difference operators, with
/// h1 weight w0 + slope n and h0 = -h1.
#[derive(Clone, Debug, PartialEq)]
pub struct SymModule {
    pub name: String,
    pub qs: QScalar,
    pub e: [AuxOp; 2],
    pub f: Option<[AuxOp; 2]>,
    pub w0: C64,
    pub slope: i32,
}

fn z(qs: &QScalar, u: C64, a: f64) -> C64 {
    qs.pow(u * a)
}

impl SymModule {
    /// Evaluation Verma module of highest weight mu at spectral argument u.
    pub fn verma(qs: &QScalar, mu: C64, u: C64, g: Grading) -> Self {
        let k2 = qs.kappa() * qs.kappa();
        // [n][mu-n+1] = kappa^-2 (q^{mu+1} + q^{-mu-1} - q^{mu+1} q^{-2n} - q^{-mu-1} q^{2n})
        let mut p = AuxOp::zero();
        p.terms.insert((-1, 0), (qs.pow(mu + 1.0) + qs.pow(-mu - 1.0)) / k2);
        p.terms.insert((-1, -2), -qs.pow(mu + 1.0) / k2);
        p.terms.insert((-1, 2), -qs.pow(-mu - 1.0) / k2);
        let (s0, s1) = (g.s0 as f64, g.s1 as f64);
        Self {
            name: format!("verma({mu})"),
            qs: *qs,
            e: [AuxOp::term(1, 0, z(qs, u, s0)), p.scale(z(qs, u, s1))],
            f: Some([p.scale(z(qs, u, -s0)), AuxOp::term(1, 0, z(qs, u, -s1))]),
            w0: mu,
            slope: -2,
        }
    }

    pub fn rho_plus(qs: &QScalar, u: C64, g: Grading) -> Self {
        let k2 = qs.kappa() * qs.kappa();
        let c = z(qs, u, g.s1 as f64) / k2;
        let mut e1 = AuxOp::term(-1, 0, c);
        e1.terms.insert((-1, -2), -c);
        Self {
            name: "rho+".into(),
            qs: *qs,
            e: [AuxOp::term(1, 0, z(qs, u, g.s0 as f64)), e1],
            f: None,
            w0: cr(0.0),
            slope: -2,
        }
    }

    pub fn rho_bar_minus(qs: &QScalar, u: C64, g: Grading) -> Self {
        let k = qs.kappa();
        let c = z(qs, u, g.s1 as f64) / k;
        let mut e1 = AuxOp::term(-1, 1, -c);
        e1.terms.insert((-1, -1), c);
        Self {
            name: "rhobar-".into(),
            qs: *qs,
            e: [AuxOp::term(1, 1, z(qs, u, g.s0 as f64) * qs.q() / k), e1],
            f: None,
            w0: cr(-2.0),
            slope: -2,
        }
    }

    pub fn rho_plus_mu(qs: &QScalar, mu: C64, u: C64, g: Grading) -> Self {
        let k2 = qs.kappa() * qs.kappa();
        let c = z(qs, u, g.s1 as f64) / k2;
        let a = qs.pow(-2.0 * mu - 2.0);
        let mut e1 = AuxOp::zero();
        e1.terms.insert((-1, 0), c * (1.0 + a));
        e1.terms.insert((-1, -2), -c);
        e1.terms.insert((-1, 2), -c * a);
        Self {
            name: format!("rho+({mu})"),
            qs: *qs,
            e: [AuxOp::term(1, 0, z(qs, u, g.s0 as f64)), e1],
            f: None,
            w0: cr(0.0),
            slope: -2,
        }
    }

    /// Generalized representation; requires the invariant half-space condition.
    pub fn generalized(qs: &QScalar, spec: &GeneralizedRepSpec, g: Grading) -> Result<Self> {
        if !spec.has_invariant_half() {
            return Err(Error::Unclassified("generalized representation without an invariant half-space".into()));
        }
        let c = z(qs, spec.zeta.u, g.s1 as f64);
        let mut e1 = AuxOp::zero();
        e1.terms.insert((-1, 0), c * spec.gamma0);
        e1.terms.insert((-1, -2), -c * spec.gamma1);
        e1.terms.insert((-1, 2), -c * spec.gamma2);
        e1.terms.retain(|_, v| v.norm() > 0.0);
        Ok(Self {
            name: "generalized".into(),
            qs: *qs,
            e: [AuxOp::term(1, 0, z(qs, spec.zeta.u, g.s0 as f64)), e1],
            f: None,
            w0: -spec.delta,
            slope: -2,
        })
    }

    /// The shifted module: h1 weights move by xi(h1), the f-actions are dropped.
    pub fn shifted(&self, xi: ShiftWeight) -> Self {
        Self { name: format!("{}[{}]", self.name, xi.xi_h0), f: None, w0: self.w0 + xi.xi_h1, ..self.clone() }
    }

    /// q^{nu h_i} as a q-difference operator; nu * slope must be an integer.
    pub fn cartan(&self, i: usize, nu: f64) -> AuxOp {
        let sign = if i == 0 { -1.0 } else { 1.0 };
        let j = sign * nu * self.slope as f64;
        debug_assert!((j - j.round()).abs() < 1e-12);
        AuxOp::term(0, j.round() as i32, self.qs.pow(self.w0 * sign * nu))
    }
}

/// Two-by-two block operator on aux (x) C^2, blocks indexed (site row, site column).
pub type Blocks = [[AuxOp; 2]; 2];

fn blocks_zero() -> Blocks {
    Default::default()
}

fn kron_blocks(x: &AuxOp, m: &[[C64; 2]; 2]) -> Blocks {
    let mut b = blocks_zero();
    for r in 0..2 {
        for c in 0..2 {
            if m[r][c].norm() > 0.0 {
                b[r][c] = x.scale(m[r][c]);
            }
        }
    }
    b
}

fn add_blocks(a: &Blocks, b: &Blocks) -> Blocks {
    let mut out = a.clone();
    for r in 0..2 {
        for c in 0..2 {
            out[r][c].add_assign(&b[r][c], cr(1.0));
        }
    }
    out
}

fn mul_blocks(a: &Blocks, b: &Blocks, qs: &QScalar) -> Blocks {
    let mut out = blocks_zero();
    for r in 0..2 {
        for c in 0..2 {
            for k in 0..2 {
                if !a[r][k].is_zero() && !b[k][c].is_zero() {
                    let p = a[r][k].mul(&b[k][c], qs);
                    out[r][c].add_assign(&p, cr(1.0));
                }
            }
        }
    }
    out
}

/// The two-dimensional evaluation module at spectral argument 0: generator
/// matrices and h1 weights (+1, -1).
struct Site {
    e: [[[C64; 2]; 2]; 2],
    f: [[[C64; 2]; 2]; 2],
    w: [f64; 2],
}

impl Site {
    fn spin_half() -> Self {
        let (o, l) = (cr(0.0), cr(1.0));
        let raise = [[o, o], [l, o]];
        let lower = [[o, l], [o, o]];
        Site { e: [raise, lower], f: [lower, raise], w: [1.0, -1.0] }
    }

    fn cartan(&self, qs: &QScalar, i: usize, nu: f64) -> [[C64; 2]; 2] {
        let sign = if i == 0 { -1.0 } else { 1.0 };
        let (o, a, b) = (cr(0.0), qs.powf(sign * nu * self.w[0]), qs.powf(sign * nu * self.w[1]));
        [[a, o], [o, b]]
    }
}

fn identity2() -> [[C64; 2]; 2] {
    [[cr(1.0), cr(0.0)], [cr(0.0), cr(1.0)]]
}

/// Pairs (D, D^op) of coproduct images on aux (x) site for every generator in use.
fn coproduct_pairs(m: &SymModule, site: &Site) -> Vec<(Blocks, Blocks)> {
    let qs = &m.qs;
    let one = AuxOp::one();
    let mut out = Vec::new();
    for i in 0..2 {
        let d = add_blocks(&kron_blocks(&m.e[i], &identity2()), &kron_blocks(&m.cartan(i, -1.0), &site.e[i]));
        let dop = add_blocks(&kron_blocks(&one, &site.e[i]), &kron_blocks(&m.e[i], &site.cartan(qs, i, -1.0)));
        out.push((d, dop));
    }
    if let Some(f) = &m.f {
        for i in 0..2 {
            let d = add_blocks(&kron_blocks(&f[i], &site.cartan(qs, i, 1.0)), &kron_blocks(&one, &site.f[i]));
            let dop = add_blocks(&kron_blocks(&m.cartan(i, 1.0), &site.f[i]), &kron_blocks(&f[i], &identity2()));
            out.push((d, dop));
        }
    }
    out
}

/// An L-operator on aux (x) C^2 as q-difference blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SymLOperator {
    pub blocks: Blocks,
    /// Ratio of the two smallest singular values of the scaled intertwining system.
    pub gap: f64,
    /// Smallest singular value of the scaled system relative to the largest.
    pub residual: f64,
}

/// Label shift of block (a, b): weight conservation fixes it from the site weights.
fn block_shift(m: &SymModule, site: &Site, a: usize, b: usize) -> i32 {
    ((site.w[a] - site.w[b]) / -(m.slope as f64)).round() as i32
}

/// An unknown coefficient: block (a, b) and the q-power j of the diagonal factor.
pub type Unknown = (usize, usize, i32);

fn assemble(m: &SymModule, site: &Site, unknowns: &[Unknown]) -> DMatrix<C64> {
    let qs = &m.qs;
    let pairs = coproduct_pairs(m, site);
    let mut keys: BTreeMap<(usize, usize, usize, i32, i32), usize> = BTreeMap::new();
    let mut cols: Vec<Vec<((usize, usize, usize, i32, i32), C64)>> = Vec::with_capacity(unknowns.len());
    for &(a, b, j) in unknowns {
        let mut x = blocks_zero();
        x[a][b] = AuxOp::term(block_shift(m, site, a, b), j, cr(1.0));
        let mut col = Vec::new();
        for (e, (d, dop)) in pairs.iter().enumerate() {
            let lhs = mul_blocks(&x, d, qs);
            let rhs = mul_blocks(dop, &x, qs);
            for r in 0..2 {
                for c in 0..2 {
                    let mut diff = lhs[r][c].clone();
                    diff.add_assign(&rhs[r][c], cr(-1.0));
                    for (&(dd, jj), v) in &diff.terms {
                        let size = lhs[r][c].terms.get(&(dd, jj)).map_or(0.0, |z| z.norm())
                            + rhs[r][c].terms.get(&(dd, jj)).map_or(0.0, |z| z.norm());
                        // exact cancellations must not survive as rounding noise
                        if v.norm() <= 1e-13 * size {
                            continue;
                        }
                        let key = (e, r, c, dd, jj);
                        let n = keys.len();
                        keys.entry(key).or_insert(n);
                        col.push((key, *v));
                    }
                }
            }
        }
        cols.push(col);
    }
    let mut s = DMatrix::zeros(keys.len().max(unknowns.len()), unknowns.len());
    for (ci, col) in cols.iter().enumerate() {
        for (key, v) in col {
            s[(keys[key], ci)] += v;
        }
    }
    s
}

fn solve_on(m: &SymModule, site: &Site, unknowns: &[Unknown], tol: f64) -> Result<(Vec<C64>, NullVector)> {
    let mut s = assemble(m, site, unknowns);
    // alternating row and column equilibration keeps coefficients of very different
    // size on an equal footing; row scaling leaves the null space unchanged
    let mut norms = vec![1.0; s.ncols()];
    for _ in 0..3 {
        for r in 0..s.nrows() {
            let n = s.row(r).norm();
            if n > 0.0 {
                s.row_mut(r).unscale_mut(n);
            }
        }
        for (c, acc) in norms.iter_mut().enumerate() {
            let n = s.column(c).norm();
            if n > 0.0 {
                s.column_mut(c).unscale_mut(n);
                *acc *= n;
            }
        }
    }
    let nv = null_vector(&s, tol)?;
    let v = nv
        .vector
        .iter()
        .zip(&norms)
        .map(|(x, n)| x / n)
        .collect();
    Ok((v, nv))
}

const SUPPORT_RANGE: i32 = 4;
const SUPPORT_CUTOFF: f64 = 1e-9;

/// The q-powers occurring in the L-operator of a module family, found by solving over
/// the full range of powers at a well-conditioned member `reference` of the family.
pub fn l_operator_support(reference: &SymModule, tol: f64) -> Result<Vec<Unknown>> {
    let site = Site::spin_half();
    let mut all = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for j in -SUPPORT_RANGE..=SUPPORT_RANGE {
                all.push((a, b, j));
            }
        }
    }
    let (v0, _) = solve_on(reference, &site, &all, tol)?;
    let vmax = v0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(all
        .iter()
        .zip(&v0)
        .filter(|(_, z)| z.norm() > SUPPORT_CUTOFF * vmax)
        .map(|(u, _)| *u)
        .collect())
}

/// Solve the intertwining equations L (rho (x) pi)(Delta x) = (rho (x) pi)(Delta^op x) L
/// for x among the generators of `m`, with pi the two-dimensional evaluation module at
/// spectral argument 0, over the unknowns in `support`.
/// Normalized so that the block (0,0) acts on v_0 as 1.
pub fn solve_l_operator_on(m: &SymModule, support: &[Unknown], tol: f64) -> Result<SymLOperator> {
    let site = Site::spin_half();
    let (v, nv) = solve_on(m, &site, support, tol)?;
    let mut blocks = blocks_zero();
    for (&(a, b, j), c) in support.iter().zip(&v) {
        blocks[a][b].terms.insert((block_shift(m, &site, a, b), j), *c);
    }
    let top: C64 = blocks[0][0].coefficient(&m.qs, 0, 0);
    if top.norm() < 1e-300 {
        return Err(Error::DegenerateIntertwiner { nullity: nv.nullity });
    }
    for row in blocks.iter_mut() {
        for x in row.iter_mut() {
            *x = x.scale(1.0 / top);
        }
    }
    Ok(SymLOperator { blocks, gap: nv.gap, residual: nv.smallest })
}

/// Solve for the L-operator of `m`, taking the support from `reference`.
pub fn solve_l_operator(m: &SymModule, reference: &SymModule, tol: f64) -> Result<SymLOperator> {
    solve_l_operator_on(m, &l_operator_support(reference, tol)?, tol)
}

/// Residual of the intertwining equations for given blocks, relative to the size of the terms.
pub fn l_operator_residual(m: &SymModule, l: &Blocks) -> f64 {
    let site = Site::spin_half();
    let qs = &m.qs;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (d, dop) in coproduct_pairs(m, &site) {
        let lhs = mul_blocks(l, &d, qs);
        let rhs = mul_blocks(&dop, l, qs);
        for r in 0..2 {
            for c in 0..2 {
                let mut diff = lhs[r][c].clone();
                diff.add_assign(&rhs[r][c], cr(-1.0));
                let keys: BTreeSet<_> = lhs[r][c].terms.keys().chain(rhs[r][c].terms.keys()).collect();
                for k in keys {
                    let a = lhs[r][c].terms.get(k).map_or(0.0, |z| z.norm());
                    let b = rhs[r][c].terms.get(k).map_or(0.0, |z| z.norm());
                    den = den.max(a).max(b);
                }
                for v in diff.terms.values() {
                    num = num.max(v.norm());
                }
            }
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Dense matrix of the L-operator on aux labels 0..=n_max tensored with C^2, basis index 2n + a.
pub fn materialize_l(qs: &QScalar, l: &Blocks, n_max: usize) -> DMatrix<C64> {
    let na = n_max + 1;
    let mut out = DMatrix::zeros(2 * na, 2 * na);
    for a in 0..2 {
        for b in 0..2 {
            let m = l[a][b].materialize(qs, 0, n_max as i64);
            for r in 0..na {
                for c in 0..na {
                    out[(2 * r + a, 2 * c + b)] = m[(r, c)];
                }
            }
        }
    }
    out
}
