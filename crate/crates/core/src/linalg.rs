//! Matrices with Grassmann-valued or symbolic entries.
//!
//! Numeric inversion is Gauss-Jordan with left row operations, which is
//! valid over the noncommutative Grassmann algebra as long as every pivot
//! has a nonzero body. Pivots are chosen by largest body. Symbolic inversion
//! of an even supermatrix goes through the Schur complement of its odd-odd
//! block; only even (hence mutually commuting) blocks are ever inverted by
//! adjugate over determinant.

use crate::error::{Error, Result};
use crate::grassmann::GrassmannNumber;
use crate::superexpr::SuperExpr;

pub type Matrix = Vec<Vec<GrassmannNumber>>;
pub type ExprMatrix = Vec<Vec<SuperExpr>>;

/// Body magnitude below which a pivot counts as singular.
pub const SINGULAR_PIVOT: f64 = 1e-13;

pub fn identity(n: usize, generators: usize) -> Matrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| GrassmannNumber::scalar(generators, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let generators = a.first().and_then(|r| r.first()).map_or(0, |x| x.generators());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = GrassmannNumber::zero(generators);
                    for (k, b_row) in b.iter().enumerate() {
                        acc += &a[i][k] * &b_row[j];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Inverse of a square matrix with Grassmann entries.
pub fn invert(m: &Matrix) -> Result<Matrix> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("matrix is not square".into()));
    }
    let generators = m.first().and_then(|r| r.first()).map_or(0, |x| x.generators());
    let mut a = m.clone();
    let mut inv = identity(n, generators);
    for col in 0..n {
        let (pivot_row, pivot_body) = (col..n)
            .map(|r| (r, a[r][col].body()))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("non-empty pivot range");
        if !(pivot_body.abs() > SINGULAR_PIVOT) {
            return Err(Error::SingularBody {
                column: col,
                pivot: pivot_body,
            });
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let p = a[col][col].inverse()?;
        for j in 0..n {
            a[col][j] = &p * &a[col][j];
            inv[col][j] = &p * &inv[col][j];
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for j in 0..n {
                let da = &factor * &a[col][j];
                let di = &factor * &inv[col][j];
                a[r][j] -= da;
                inv[r][j] -= di;
            }
        }
    }
    Ok(inv)
}

/// Determinant of a matrix whose entries commute (even entries), by
/// cofactor expansion along the first row.
pub fn det_symbolic(m: &ExprMatrix) -> SuperExpr {
    let n = m.len();
    if n == 0 {
        return SuperExpr::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut terms = Vec::new();
    for (j, entry) in m[0].iter().enumerate() {
        if entry.is_zero() {
            continue;
        }
        let minor = det_symbolic(&minor(m, 0, j));
        let term = entry.mul(&minor);
        terms.push(if j % 2 == 0 { term } else { term.neg() });
    }
    SuperExpr::sum(terms)
}

fn minor(m: &ExprMatrix, row: usize, col: usize) -> ExprMatrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Inverse of a matrix with even entries as adjugate over determinant.
pub fn invert_commuting_symbolic(m: &ExprMatrix) -> ExprMatrix {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    let det = det_symbolic(m);
    if n == 1 {
        return vec![vec![SuperExpr::one().div(&det)]];
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    // (adj M)_{ij} = (-1)^{i+j} det(minor(M, j, i))
                    let c = det_symbolic(&minor(m, j, i));
                    let c = if (i + j) % 2 == 0 { c } else { c.neg() };
                    c.div(&det)
                })
                .collect()
        })
        .collect()
}

fn expr_mul(a: &ExprMatrix, b: &ExprMatrix) -> ExprMatrix {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| SuperExpr::sum(row.iter().zip(b).map(|(x, b_row)| x.mul(&b_row[j]))))
                .collect()
        })
        .collect()
}

fn expr_sub(a: &ExprMatrix, b: &ExprMatrix) -> ExprMatrix {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.sub(y)).collect())
        .collect()
}

fn expr_neg(a: &ExprMatrix) -> ExprMatrix {
    a.iter().map(|r| r.iter().map(SuperExpr::neg).collect()).collect()
}

fn block(m: &ExprMatrix, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> ExprMatrix {
    rows.map(|i| cols.clone().map(|j| m[i][j].clone()).collect()).collect()
}

/// Inverse of an even supermatrix `[[A, B], [C, D]]` whose first `p` rows
/// and columns are even (A, D even blocks; B, C odd blocks).
pub fn invert_supermatrix_symbolic(m: &ExprMatrix, p: usize) -> ExprMatrix {
    let n = m.len();
    if p == 0 || p == n {
        return invert_commuting_symbolic(m);
    }
    let a = block(m, 0..p, 0..p);
    let b = block(m, 0..p, p..n);
    let c = block(m, p..n, 0..p);
    let d = block(m, p..n, p..n);
    let d_inv = invert_commuting_symbolic(&d);
    let bd = expr_mul(&b, &d_inv);
    let schur = expr_sub(&a, &expr_mul(&bd, &c));
    let s_inv = invert_commuting_symbolic(&schur);
    let dc = expr_mul(&d_inv, &c);
    let top_right = expr_neg(&expr_mul(&s_inv, &bd));
    let bottom_left = expr_neg(&expr_mul(&dc, &s_inv));
    let corr = expr_mul(&expr_mul(&dc, &s_inv), &bd);
    let bottom_right: ExprMatrix = d_inv
        .iter()
        .zip(&corr)
        .map(|(r1, r2)| r1.iter().zip(r2).map(|(x, y)| x.add(y)).collect())
        .collect();
    let mut out = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            let e = match (i < p, j < p) {
                (true, true) => s_inv[i][j].clone(),
                (true, false) => top_right[i][j - p].clone(),
                (false, true) => bottom_left[i - p][j].clone(),
                (false, false) => bottom_right[i - p][j - p].clone(),
            };
            out[i].push(e);
        }
    }
    out
}
