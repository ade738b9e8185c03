//! R-matrices, R-check operators and L-operators as null vectors of linear
//! intertwining systems, plus the Yang-Baxter check.

pub mod qdiff;

use crate::algebras::{opposite_tensor_rep, tensor_rep, AlgebraTag, Gen, RepTable};
use crate::qcore::{relative_residual, submatrix, swap_matrix, LinOp, RelationReport, TruncationPolicy};
use crate::representations::{shift_rep, ShiftWeight};
use crate::{cr, Error, Result, C64};
use nalgebra::DMatrix;
use std::collections::HashMap;

/// Singular value decomposition data of a homogeneous linear system.
#[derive(Clone, Debug)]
pub struct NullSpace {
    /// Singular values in decreasing order.
    pub singular: Vec<f64>,
    /// Right singular vectors whose singular values are at most tol times the largest,
    /// as columns; at least the last one is always present.
    pub basis: DMatrix<C64>,
    pub nullity: usize,
}

/// A unique null vector with its conditioning data.
#[derive(Clone, Debug)]
pub struct NullVector {
    pub vector: Vec<C64>,
    /// Smallest singular value relative to the largest.
    pub smallest: f64,
    /// Second smallest over smallest singular value.
    pub gap: f64,
    pub nullity: usize,
}

pub fn null_space(s: &DMatrix<C64>, tol: f64) -> NullSpace {
    let n = s.ncols();
    let padded = if s.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (s.nrows(), n)).copy_from(s);
        p
    } else {
        s.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = singular.first().copied().unwrap_or(0.0);
    let nullity = singular.iter().filter(|&&x| x <= tol * top).count();
    let k = nullity.max(1);
    let basis = DMatrix::from_fn(n, k, |r, c| v_t[(order[n - 1 - c], r)].conj());
    NullSpace { singular, basis, nullity }
}

/// The null vector of `s`, required to be unique at relative threshold `tol`.
pub fn null_vector(s: &DMatrix<C64>, tol: f64) -> Result<NullVector> {
    let ns = null_space(s, tol);
    let n = ns.singular.len();
    let top = ns.singular[0];
    let smallest = ns.singular[n - 1] / top;
    if ns.nullity == 0 {
        return Err(Error::NoIntertwiner { smallest });
    }
    if ns.nullity > 1 {
        return Err(Error::DegenerateIntertwiner { nullity: ns.nullity });
    }
    let gap = if n >= 2 { ns.singular[n - 2] / ns.singular[n - 1].max(f64::MIN_POSITIVE) } else { f64::INFINITY };
    Ok(NullVector { vector: ns.basis.column(0).iter().copied().collect(), smallest, gap, nullity: 1 })
}

/// A solved intertwiner. `op` is the R-check operator V_A (x) V_B -> V_B (x) V_A and
/// `r` the R-operator on V_A (x) V_B with `op = P r`.
#[derive(Clone, Debug)]
pub struct IntertwinerSolution {
    pub op: LinOp,
    pub r: LinOp,
    pub nullspace_dim: usize,
    pub residual: f64,
    pub gap: f64,
    pub normalization: String,
}

const TOP_CORNER: &str = "top-corner";
const LARGEST_ENTRY: &str = "largest-entry";

fn same_weight(a: &crate::qcore::Weight, b: &crate::qcore::Weight) -> bool {
    (a.h1 - b.h1).norm() < 1e-9 && (a.h0 - b.h0).norm() < 1e-9
}

/// Relative size below which a solved intertwiner counts as singular. At the reducibility
/// locus of a tensor product the null space stays one-dimensional but the solution loses rank.
const SINGULAR_TOL: f64 = 1e-9;

/// Distance from the truncation edges beyond which a solved intertwiner is trusted.
const ACCEPT_BUFFER: usize = 3;

/// Solve R (A (x) B)(Delta g) = (A (x) B)(Delta^op g) R over the weight-conserving
/// entries of R, using only equations unaffected by truncation.
pub fn solve_intertwiner(a: &RepTable, b: &RepTable, policy: &TruncationPolicy) -> Result<IntertwinerSolution> {
    solve(a, b, policy, false)
}

/// As [`solve_intertwiner`], but a solution that loses rank is accepted. When its top corner
/// vanishes it is scaled so that its largest entry is 1 instead.
pub fn solve_intertwiner_allowing_rank_loss(
    a: &RepTable,
    b: &RepTable,
    policy: &TruncationPolicy,
) -> Result<IntertwinerSolution> {
    solve(a, b, policy, true)
}

fn solve(a: &RepTable, b: &RepTable, policy: &TruncationPolicy, allow_rank_loss: bool) -> Result<IntertwinerSolution> {
    let direct = tensor_rep(a, b)?;
    let opp = opposite_tensor_rep(a, b)?;
    let space = &direct.space;
    let n = space.dim();
    let unknowns: Vec<(usize, usize)> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|&(r, c)| same_weight(&space.weights[r], &space.weights[c]))
        .collect();
    let gens: Vec<Gen> = direct.action.keys().copied().collect();
    let mut rows: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut entries: Vec<(usize, usize, C64)> = Vec::new();
    let ok = |i: usize| space.edge[i] >= 1;
    for (gi, g) in gens.iter().enumerate() {
        let d = direct.get(*g);
        let dop = opp.get(*g);
        for (ui, &(r, k)) in unknowns.iter().enumerate() {
            // R[r,k] D[k,c] contributes to equation (r,c)
            for c in 0..n {
                let v = d[(k, c)];
                if v.norm() > 0.0 && ok(r) && ok(c) {
                    let len = rows.len();
                    let row = *rows.entry((gi, r, c)).or_insert(len);
                    entries.push((row, ui, v));
                }
            }
            // -Dop[r', r] R[r, k] contributes to equation (r', k)
            for rr in 0..n {
                let v = dop[(rr, r)];
                if v.norm() > 0.0 && ok(rr) && ok(k) {
                    let len = rows.len();
                    let row = *rows.entry((gi, rr, k)).or_insert(len);
                    entries.push((row, ui, -v));
                }
            }
        }
    }
    let mut s = DMatrix::zeros(rows.len().max(1), unknowns.len());
    for (r, c, v) in entries {
        s[(r, c)] += v;
    }
    let ns = null_space(&s, policy.tol);
    let len = ns.singular.len();
    if ns.nullity == 0 {
        return Err(Error::NoIntertwiner { smallest: ns.singular[len - 1] / ns.singular[0] });
    }
    let truncated = space.is_truncated();
    let (vector, nullity, gap) = if !truncated {
        if ns.nullity > 1 {
            return Err(Error::DegenerateIntertwiner { nullity: ns.nullity });
        }
        let gap = if len >= 2 { ns.singular[len - 2] / ns.singular[len - 1].max(f64::MIN_POSITIVE) } else { f64::INFINITY };
        (ns.basis.column(0).into_owned(), 1, gap)
    } else {
        // entries near the cutoff are not determined; uniqueness is judged on the interior
        let inner: Vec<usize> = unknowns
            .iter()
            .enumerate()
            .filter(|(_, &(r, c))| space.edge[r] >= ACCEPT_BUFFER && space.edge[c] >= ACCEPT_BUFFER)
            .map(|(i, _)| i)
            .collect();
        if inner.is_empty() {
            return Err(Error::TruncationTooSmall("no interior block left after the boundary buffer".into()));
        }
        let restricted = DMatrix::from_fn(inner.len(), ns.basis.ncols(), |i, j| ns.basis[(inner[i], j)]);
        let svd = restricted.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors");
        let mut sv: Vec<(f64, usize)> = svd.singular_values.iter().copied().zip(0..).collect();
        sv.sort_by(|x, y| y.0.total_cmp(&x.0));
        let rank = sv.iter().filter(|x| x.0 > 1e-8 * sv[0].0).count();
        if rank != 1 {
            return Err(Error::DegenerateIntertwiner { nullity: rank });
        }
        let coeff: Vec<C64> = (0..ns.basis.ncols()).map(|j| v_t[(sv[0].1, j)].conj()).collect();
        let v = &ns.basis * nalgebra::DVector::from_vec(coeff);
        let gap = if sv.len() >= 2 { sv[0].0 / sv[1].0.max(f64::MIN_POSITIVE) } else { f64::INFINITY };
        (v, 1, gap)
    };
    let mut r = DMatrix::zeros(n, n);
    for (i, &(a_, b_)) in unknowns.iter().enumerate() {
        r[(a_, b_)] = vector[i];
    }
    let top = r[(0, 0)];
    let largest = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut normalization = TOP_CORNER;
    if top.norm() > SINGULAR_TOL * largest {
        r /= top;
    } else if allow_rank_loss {
        let k = r.iter().map(|z| z.norm()).enumerate().fold((0, 0.0), |m, (i, x)| if x > m.1 { (i, x) } else { m }).0;
        let pivot = r[k];
        r /= pivot;
        normalization = LARGEST_ENTRY;
    } else {
        return Err(Error::SingularIntertwiner { smallest: top.norm() / largest });
    }
    if !truncated && !allow_rank_loss {
        let sv = r.singular_values();
        let smallest = sv.min() / sv.max();
        if smallest <= SINGULAR_TOL {
            return Err(Error::SingularIntertwiner { smallest });
        }
    }
    let idx = space.interior(ACCEPT_BUFFER);
    let residual = gens
        .iter()
        .map(|g| {
            let lhs = &r * direct.get(*g);
            let rhs = opp.get(*g) * &r;
            relative_residual(&[submatrix(&lhs, &idx, &idx), -submatrix(&rhs, &idx, &idx)])
        })
        .fold(0.0, f64::max);
    let p = swap_matrix(a.dim(), b.dim());
    let r_op = LinOp::new(space.clone(), space.clone(), r.clone())?;
    let op = LinOp::new(space.clone(), b.space.tensor(&a.space), p * r)?;
    Ok(IntertwinerSolution { op, r: r_op, nullspace_dim: nullity, residual, gap, normalization: normalization.into() })
}

/// Singular values of the intertwining system relative to the largest, in increasing
/// order; used to locate degenerate spectral ratios.
pub fn intertwiner_spectrum(a: &RepTable, b: &RepTable) -> Result<Vec<f64>> {
    let policy = TruncationPolicy { tol: 0.0, ..Default::default() };
    let direct = tensor_rep(a, b)?;
    let opp = opposite_tensor_rep(a, b)?;
    let n = direct.dim();
    let unknowns: Vec<(usize, usize)> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|&(r, c)| same_weight(&direct.space.weights[r], &direct.space.weights[c]))
        .collect();
    let mut blocks = Vec::new();
    for g in direct.action.keys() {
        let (d, dop) = (direct.get(*g), opp.get(*g));
        let m = DMatrix::from_fn(n * n, unknowns.len(), |row, ui| {
            let (r, c) = (row / n, row % n);
            let (a_, b_) = unknowns[ui];
            let mut v = cr(0.0);
            if a_ == r {
                v += d[(b_, c)];
            }
            if b_ == c {
                v -= dop[(r, a_)];
            }
            v
        });
        blocks.push(m);
    }
    let rows: usize = blocks.iter().map(|m| m.nrows()).sum();
    let mut s = DMatrix::zeros(rows, unknowns.len());
    let mut off = 0;
    for m in blocks {
        s.view_mut((off, 0), (m.nrows(), m.ncols())).copy_from(&m);
        off += m.nrows();
    }
    let ns = null_space(&s, policy.tol);
    let top = ns.singular[0];
    Ok(ns.singular.iter().rev().map(|x| x / top).collect())
}

/// R = P^{-1} R-check on V_A (x) V_B.
pub fn r_matrix(a: &RepTable, b: &RepTable, policy: &TruncationPolicy) -> Result<LinOp> {
    Ok(solve_intertwiner(a, b, policy)?.r)
}

fn restrict_to_borel(rep: &RepTable) -> Result<RepTable> {
    match rep.algebra {
        AlgebraTag::Loop => shift_rep(rep, ShiftWeight::zero()),
        AlgebraTag::BorelPlus => Ok(rep.clone()),
        _ => Err(Error::Incompatible(format!("{} is not a loop or Borel representation", rep.name))),
    }
}

/// L-operator on W (x) C^2 for a Borel representation on W and a finite-dimensional
/// quantum space representation, solved densely from the e0, e1 and Cartan actions.
pub fn l_operator(rho_rep: &RepTable, quantum_rep: &RepTable, policy: &TruncationPolicy) -> Result<IntertwinerSolution> {
    if quantum_rep.space.is_truncated() {
        return Err(Error::Incompatible("the quantum space must be finite-dimensional".into()));
    }
    let a = restrict_to_borel(rho_rep)?;
    let b = restrict_to_borel(quantum_rep)?;
    solve_intertwiner(&a, &b, policy)
}

fn embed_13(r: &DMatrix<C64>, da: usize, db: usize, dc: usize) -> DMatrix<C64> {
    let n = da * db * dc;
    let mut out = DMatrix::zeros(n, n);
    for a in 0..da {
        for c in 0..dc {
            for a2 in 0..da {
                for c2 in 0..dc {
                    let v = r[(a * dc + c, a2 * dc + c2)];
                    if v.norm() == 0.0 {
                        continue;
                    }
                    for b in 0..db {
                        out[((a * db + b) * dc + c, (a2 * db + b) * dc + c2)] = v;
                    }
                }
            }
        }
    }
    out
}

/// Relative residual of R12 R13 R23 - R23 R13 R12 on V_A (x) V_B (x) V_C, away from truncation edges.
pub fn yang_baxter_check(a: &RepTable, b: &RepTable, c: &RepTable, policy: &TruncationPolicy) -> Result<RelationReport> {
    let rab = solve_intertwiner(a, b, policy)?.r.mat;
    let rac = solve_intertwiner(a, c, policy)?.r.mat;
    let rbc = solve_intertwiner(b, c, policy)?.r.mat;
    let (da, db, dc) = (a.dim(), b.dim(), c.dim());
    let r12 = crate::qcore::kron(&rab, &DMatrix::identity(dc, dc));
    let r23 = crate::qcore::kron(&DMatrix::identity(da, da), &rbc);
    let r13 = embed_13(&rac, da, db, dc);
    let lhs = &r12 * &r13 * &r23;
    let rhs = &r23 * &r13 * &r12;
    let space = a.space.tensor(&b.space).tensor(&c.space);
    let idx = space.interior(2 * ACCEPT_BUFFER);
    let res = relative_residual(&[submatrix(&lhs, &idx, &idx), -submatrix(&rhs, &idx, &idx)]);
    Ok(RelationReport::new("yang_baxter", res, 0.0, policy.tol)
        .with_param("a", &a.name)
        .with_param("b", &b.name)
        .with_param("c", &c.name))
}

/// Matrix as an array of rows of [re, im] pairs.
pub fn matrix_json(m: &DMatrix<C64>) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|r| serde_json::Value::Array((0..m.ncols()).map(|c| serde_json::json!([m[(r, c)].re, m[(r, c)].im])).collect()))
            .collect(),
    )
}
