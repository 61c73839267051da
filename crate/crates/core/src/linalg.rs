//! Small dense complex linear-algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
/// Round-trip text for a float: positional in the usual range, scientific
/// for very small or very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Lift a real row-major table into a complex matrix.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nrows, ncols, |i, j| c64(rows[i][j], 0.0))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// max(|U†U − I|, |UU† − I|), entrywise.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let id = CMatrix::identity(u.nrows(), u.ncols());
    let left = max_abs(&(u.adjoint() * u - &id));
    let right = max_abs(&(u * u.adjoint() - &id));
    left.max(right)
}

pub fn hermitian_residual(h: &CMatrix) -> f64 {
    if !h.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(h - h.adjoint()))
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: singular values above `rel_tol * sigma_max` count.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > rel_tol * smax).count(),
        _ => 0,
    }
}

/// σ_max / σ_min; infinite when the matrix is singular or not square.
pub fn condition_number(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = singular_values(m);
    let (smax, smin) = (sv[0], sv[sv.len() - 1]);
    if smin == 0.0 || !smin.is_finite() {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Orthonormal basis (as columns) of the kernel of `m`.
///
/// `abs_floor` guards the all-zero case: when σ_max itself is below it the
/// whole domain is returned.
pub fn null_space(m: &CMatrix, rel_tol: f64, abs_floor: f64) -> CMatrix {
    let n = m.ncols();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return CMatrix::identity(n, n);
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let padded = if m.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax <= abs_floor {
        return CMatrix::identity(n, n);
    }
    let cut = rel_tol * smax;
    let cols: Vec<CVector> = (0..sv.len())
        .filter(|&k| sv[k] <= cut)
        .map(|k| v_t.row(k).adjoint())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the orthogonal complement of span(columns of `q`).
pub fn orthogonal_complement(q: &CMatrix, n: usize) -> CMatrix {
    if q.ncols() == 0 {
        return CMatrix::identity(n, n);
    }
    null_space(&q.adjoint(), 1e-9, 0.0)
}

/// Multiply each column by a unit phase so its first significant entry is
/// real and positive.
pub fn fix_column_phases(u: &mut CMatrix) {
    for mut col in u.column_iter_mut() {
        let scale = col.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if scale == 0.0 {
            continue;
        }
        if let Some(z) = col.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
            let phase = z.conj() / z.norm();
            col *= phase;
        }
    }
}

/// Block-diagonal assembly of a list of (possibly rectangular) blocks.
pub fn block_diag<'a>(blocks: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    let blocks: Vec<&CMatrix> = blocks.into_iter().collect();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Submatrix picking the given rows and columns, in the given order.
pub fn select(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn expm(m: &CMatrix) -> CMatrix {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.exp()
}

/// Eigenvalues of a square complex matrix via the complex Schur form,
/// sorted by (real, imaginary) part.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    let mut ev: Vec<Complex64> = (0..t.nrows()).map(|k| t[(k, k)]).collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// JSON encoding of complex matrices as rows of `[re, im]` pairs.
pub mod serde_cmatrix {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>], ncols_hint: usize) -> Result<CMatrix, String> {
        let ncols = rows.first().map_or(ncols_hint, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err("non-finite matrix entry".into());
        }
        Ok(CMatrix::from_fn(rows.len(), ncols, |i, j| c64(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&to_rows(m), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        from_rows(&rows, 0).map_err(D::Error::custom)
    }
}

/// JSON encoding of complex vectors as a list of `[re, im]` pairs.
pub mod serde_cvec {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        serde::Serialize::serialize(&pairs, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}
