//! Small dense linear-algebra helpers shared by the identification modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, Error, Result};

/// Assemble a block matrix from rows of blocks.
///
/// Every block in a block-row must share its row count, and every block-row
/// must add up to the same column count. Zero-sized blocks are allowed, which
/// keeps static (stateless) systems expressible.
pub fn blocks(rows: &[&[&DMatrix<f64>]]) -> Result<DMatrix<f64>> {
    let mut heights = Vec::with_capacity(rows.len());
    let mut width = None;
    for (i, row) in rows.iter().enumerate() {
        let h = row.first().map(|b| b.nrows()).unwrap_or(0);
        if row.iter().any(|b| b.nrows() != h) {
            return dim_err(format!("block row {i} has inconsistent heights"));
        }
        let w: usize = row.iter().map(|b| b.ncols()).sum();
        match width {
            None => width = Some(w),
            Some(w0) if w0 != w => {
                return dim_err(format!("block row {i} has width {w}, expected {w0}"))
            }
            _ => {}
        }
        heights.push(h);
    }
    let total_h: usize = heights.iter().sum();
    let mut out = DMatrix::zeros(total_h, width.unwrap_or(0));
    let mut r0 = 0;
    for (row, h) in rows.iter().zip(heights) {
        let mut c0 = 0;
        for b in row.iter() {
            out.view_mut((r0, c0), (h, b.ncols())).copy_from(*b);
            c0 += b.ncols();
        }
        r0 += h;
    }
    Ok(out)
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Reciprocal condition number of a symmetric matrix from its spectrum.
///
/// Returns 0 for indefinite or singular matrices and 1 for the empty matrix.
pub fn sym_rcond(h: &DMatrix<f64>) -> f64 {
    if h.nrows() == 0 {
        return 1.0;
    }
    let eig = h.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > 0.0) {
        0.0
    } else {
        min / max
    }
}

/// Reciprocal 2-norm condition number of a general square matrix.
pub fn rcond(q: &DMatrix<f64>) -> f64 {
    if q.nrows() == 0 {
        return 1.0;
    }
    let sv = q.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// `0.5 (m + mᵀ)`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solve `X · H = G` for symmetric positive-definite `H`.
///
/// `rcond_min` guards against numerically singular `H`; the reported error
/// carries the observed reciprocal condition number.
pub fn solve_spd_right(
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    rcond_min: f64,
    what: &'static str,
    hint: &str,
) -> Result<DMatrix<f64>> {
    if h.nrows() != h.ncols() || g.ncols() != h.nrows() {
        return dim_err(format!(
            "{what}: cannot solve X·H = G with H {}x{} and G {}x{}",
            h.nrows(),
            h.ncols(),
            g.nrows(),
            g.ncols()
        ));
    }
    let rc = sym_rcond(h);
    if !(rc >= rcond_min) {
        return Err(Error::Singular {
            what,
            rcond: rc,
            hint: hint.to_string(),
        });
    }
    let chol = h.clone().cholesky().ok_or_else(|| Error::Singular {
        what,
        rcond: rc,
        hint: hint.to_string(),
    })?;
    // X H = G  <=>  H Xᵀ = Gᵀ
    Ok(chol.solve(&g.transpose()).transpose())
}

pub fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Column-stack a sequence of equal-length vectors into a matrix.
pub fn columns(vs: &[DVector<f64>], nrows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(nrows, vs.len());
    for (j, v) in vs.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}

/// Row-major nested-array (de)serialization for `DMatrix<f64>`.
///
/// A matrix with zero rows serializes as `[]` and loses its column count;
/// containers that allow such matrices re-infer shapes after loading.
pub mod serde_matrix {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().cloned().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}
