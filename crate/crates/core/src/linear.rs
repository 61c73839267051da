//! State-space form of passive linear models and the analyses run on it:
//! controllability/observability, stability, transfer function, and the
//! extraction of decoherence-free modes.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c64, condition_number, eigenvalues, fix_column_phases, max_abs, null_space,
    orthogonal_complement, select, serde_cmatrix, serde_cvec, unitarity_residual, CMatrix, I,
};
use crate::slh::SlhModel;

/// Singular values below `RANK_TOL * σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-9;
/// An eigenvalue is stable when its real part is below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    #[serde(rename = "A", with = "serde_cmatrix")]
    pub a: CMatrix,
    #[serde(rename = "B", with = "serde_cmatrix")]
    pub b: CMatrix,
    #[serde(rename = "C", with = "serde_cmatrix")]
    pub c: CMatrix,
    #[serde(rename = "D", with = "serde_cmatrix")]
    pub d: CMatrix,
}

impl StateSpace {
    /// `A = −(iΩ + K†K/2)`, `B = −K†S`, `C = K`, `D = S`.
    pub fn from_model(model: &SlhModel) -> Self {
        let k = model.k();
        let kk = k.adjoint() * k;
        StateSpace {
            a: -(model.omega() * I + kk * c64(0.5, 0.0)),
            b: -(k.adjoint() * model.s()),
            c: k.clone(),
            d: model.s().clone(),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let n = self.a.nrows();
        let ok = self.a.is_square()
            && self.b.nrows() == n
            && self.c.ncols() == n
            && self.d.nrows() == self.c.nrows()
            && self.d.ncols() == self.b.ncols();
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "A {:?}, B {:?}, C {:?}, D {:?}",
                self.a.shape(),
                self.b.shape(),
                self.c.shape(),
                self.d.shape()
            )))
        }
    }

    pub fn passivity_residuals(&self) -> PassivityResiduals {
        let drift = &self.a + self.a.adjoint() + self.c.adjoint() * &self.c;
        let input = &self.b + self.c.adjoint() * &self.d;
        PassivityResiduals { drift: max_abs(&drift), input: max_abs(&input) }
    }
}

pub fn to_state_space(model: &SlhModel) -> StateSpace {
    StateSpace::from_model(model)
}

/// Max-abs entries of `A + A† + C†C` and `B + C†D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityResiduals {
    pub drift: f64,
    pub input: f64,
}

impl PassivityResiduals {
    pub fn max(&self) -> f64 {
        self.drift.max(self.input)
    }
}

/// `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(ss: &StateSpace) -> CMatrix {
    let n = ss.n_modes();
    let m = ss.n_inputs();
    let mut out = CMatrix::zeros(n, n * m);
    let mut block = ss.b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = &ss.a * block;
    }
    out
}

/// `[C; CA; …; CA^{n−1}]`.
pub fn observability_matrix(ss: &StateSpace) -> CMatrix {
    let n = ss.n_modes();
    let p = ss.n_outputs();
    let mut out = CMatrix::zeros(n * p, n);
    let mut block = ss.c.clone();
    for k in 0..n {
        out.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block = block * &ss.a;
    }
    out
}

/// `(rank 𝒞, rank 𝒪)`.
pub fn ranks(ss: &StateSpace) -> (usize, usize) {
    (
        linalg::rank(&controllability_matrix(ss), RANK_TOL),
        linalg::rank(&observability_matrix(ss), RANK_TOL),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurwitzReport {
    pub hurwitz: bool,
    #[serde(with = "serde_cvec")]
    pub eigenvalues: Vec<Complex64>,
}

pub fn is_hurwitz(ss: &StateSpace) -> HurwitzReport {
    let eigenvalues = eigenvalues(&ss.a);
    let hurwitz = eigenvalues.iter().all(|z| z.re < -HURWITZ_MARGIN);
    HurwitzReport { hurwitz, eigenvalues }
}

/// `(U†AU, U†B, CU, D)`.
pub fn rotate(ss: &StateSpace, u: &CMatrix) -> Result<StateSpace> {
    if u.nrows() != ss.n_modes() || !u.is_square() {
        return Err(Error::Dimension(format!(
            "rotation is {}x{}, system has {} modes",
            u.nrows(),
            u.ncols(),
            ss.n_modes()
        )));
    }
    let residual = unitarity_residual(u);
    if ss.n_modes() > 0 && residual > 1e-10 {
        return Err(Error::NonUnitaryRotation { residual });
    }
    let ud = u.adjoint();
    Ok(StateSpace {
        a: &ud * &ss.a * u,
        b: &ud * &ss.b,
        c: &ss.c * u,
        d: ss.d.clone(),
    })
}

/// `G(s) = C(sI − A)⁻¹B + D`.
pub fn transfer_function(ss: &StateSpace, s: Complex64) -> Result<CMatrix> {
    let n = ss.n_modes();
    if n == 0 {
        return Ok(ss.d.clone());
    }
    let resolvent = CMatrix::identity(n, n) * s - &ss.a;
    if condition_number(&resolvent) > 1e12 {
        return Err(Error::SingularResolvent { re: s.re, im: s.im });
    }
    let x = resolvent
        .lu()
        .solve(&ss.b)
        .ok_or(Error::SingularResolvent { re: s.re, im: s.im })?;
    Ok(&ss.c * x + &ss.d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfsDecomposition {
    #[serde(rename = "U", with = "serde_cmatrix")]
    pub u: CMatrix,
    pub dfs_indices: Vec<usize>,
    pub rotated: StateSpace,
}

/// Find a unitary mode rotation that isolates the decoherence-free modes.
///
/// Modes are first split into groups that the drift couples together; each
/// group is handled on its own so that decoupled modules keep their own
/// rotation. Inside a group the decoherence-free subspace is the joint
/// kernel of `𝒪` and `𝒞†`; its orthogonal complement is placed first and,
/// when the restricted drift is normal, diagonalized with eigenvalues in
/// ascending real part.
pub fn dfs_decompose(ss: &StateSpace) -> Result<DfsDecomposition> {
    ss.check_dimensions()?;
    let n = ss.n_modes();
    let mut u = CMatrix::zeros(n, n);
    let mut dfs_indices = Vec::new();

    for group in coupled_groups(&ss.a) {
        let all_in: Vec<usize> = (0..ss.n_inputs()).collect();
        let all_out: Vec<usize> = (0..ss.n_outputs()).collect();
        let sub = StateSpace {
            a: select(&ss.a, &group, &group),
            b: select(&ss.b, &group, &all_in),
            c: select(&ss.c, &all_out, &group),
            d: ss.d.clone(),
        };
        let local = group_rotation(&sub);
        for (j, &col) in group.iter().enumerate() {
            for (i, &row) in group.iter().enumerate() {
                u[(row, col)] = local.u[(i, j)];
            }
        }
        dfs_indices.extend(local.dfs.iter().map(|&j| group[j]));
    }
    dfs_indices.sort_unstable();
    let rotated = rotate(ss, &u)?;
    Ok(DfsDecomposition { u, dfs_indices, rotated })
}

struct GroupRotation {
    u: CMatrix,
    dfs: Vec<usize>,
}

fn group_rotation(sub: &StateSpace) -> GroupRotation {
    let n = sub.n_modes();
    let obsv = observability_matrix(sub);
    let ctrb_h = controllability_matrix(sub).adjoint();
    let mut stacked = CMatrix::zeros(obsv.nrows() + ctrb_h.nrows(), n);
    stacked.rows_mut(0, obsv.nrows()).copy_from(&obsv);
    stacked.rows_mut(obsv.nrows(), ctrb_h.nrows()).copy_from(&ctrb_h);

    let kernel = null_space(&stacked, RANK_TOL, 1e-13);
    if kernel.ncols() == 0 {
        return GroupRotation { u: CMatrix::identity(n, n), dfs: Vec::new() };
    }
    let mut rest = orthogonal_complement(&kernel, n);
    if rest.ncols() > 0 {
        let a_rest = rest.adjoint() * &sub.a * &rest;
        if is_normal(&a_rest) {
            rest = &rest * hermitian_eigvecs(&((&a_rest + a_rest.adjoint()) * c64(0.5, 0.0)));
        }
    }
    // The drift restricted to the kernel is skew-Hermitian; diagonalize iA there.
    let a_dfs = kernel.adjoint() * &sub.a * &kernel;
    let h_dfs = (&a_dfs - a_dfs.adjoint()) * (I * 0.5);
    let kernel = &kernel * hermitian_eigvecs(&h_dfs);

    let r = rest.ncols();
    let mut u = CMatrix::zeros(n, n);
    u.columns_mut(0, r).copy_from(&rest);
    u.columns_mut(r, n - r).copy_from(&kernel);
    fix_column_phases(&mut u);
    GroupRotation { u, dfs: (r..n).collect() }
}

fn is_normal(m: &CMatrix) -> bool {
    let scale = max_abs(m).max(1.0);
    max_abs(&(m * m.adjoint() - m.adjoint() * m)) <= 1e-10 * scale * scale
}

/// Eigenvectors of a Hermitian matrix, columns ordered by ascending eigenvalue.
fn hermitian_eigvecs(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    if n <= 1 {
        return CMatrix::identity(n, n);
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])])
}

/// Connected components of the graph with an edge wherever `A_ij` or `A_ji`
/// is nonzero. Each component is sorted; components are ordered by their
/// smallest mode index.
fn coupled_groups(a: &CMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let tol = 1e-13 * max_abs(a).max(1.0);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a[(i, j)].norm() > tol || a[(j, i)].norm() > tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_slot[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_slot[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Machine-readable summary of a system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    #[serde(with = "serde_cvec")]
    pub eigenvalues: Vec<Complex64>,
    pub rank_ctrb: usize,
    pub rank_obsv: usize,
    pub hurwitz: bool,
    pub dfs_indices: Vec<usize>,
    pub passivity_residuals: PassivityResiduals,
}

pub fn analyze(ss: &StateSpace) -> Result<AnalysisReport> {
    let hurwitz = is_hurwitz(ss);
    let (rank_ctrb, rank_obsv) = ranks(ss);
    let dfs = dfs_decompose(ss)?;
    Ok(AnalysisReport {
        eigenvalues: hurwitz.eigenvalues,
        rank_ctrb,
        rank_obsv,
        hurwitz: hurwitz.hurwitz,
        dfs_indices: dfs.dfs_indices,
        passivity_residuals: ss.passivity_residuals(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, max_abs_diff};

    fn real_ss(a: &[&[f64]], b: &[&[f64]], c: &[&[f64]], d: &[&[f64]]) -> StateSpace {
        StateSpace {
            a: from_real_rows(a),
            b: from_real_rows(b),
            c: from_real_rows(c),
            d: from_real_rows(d),
        }
    }

    #[test]
    fn decoupled_modes_state_space() {
        let model = SlhModel::new(
            CMatrix::identity(2, 2),
            CMatrix::zeros(2, 3),
            CMatrix::zeros(3, 3),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let ss = to_state_space(&model);
        assert_eq!(max_abs(&ss.a), 0.0);
        assert_eq!(max_abs(&ss.b), 0.0);
        assert_eq!(max_abs(&ss.c), 0.0);
        assert_eq!(ss.d, CMatrix::identity(2, 2));
    }

    #[test]
    fn undriven_mode_rank() {
        let ss = real_ss(&[&[-1.0, 0.0], &[0.0, -2.0]], &[&[1.0], &[0.0]], &[&[1.0, 1.0]], &[&[1.0]]);
        assert_eq!(ranks(&ss).0, 1);
    }

    #[test]
    fn zero_drift_is_marginal() {
        let ss = real_ss(&[&[0.0]], &[&[0.0]], &[&[0.0]], &[&[1.0]]);
        assert!(!is_hurwitz(&ss).hurwitz);
    }

    #[test]
    fn rotate_identity_and_non_unitary() {
        let ss = real_ss(&[&[-1.0, -0.5], &[-1.5, -1.0]], &[&[1.0], &[1.0]], &[&[1.0, 1.0]], &[&[1.0]]);
        assert_eq!(rotate(&ss, &CMatrix::identity(2, 2)).unwrap(), ss);
        let bad = from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(rotate(&ss, &bad), Err(Error::NonUnitaryRotation { .. })));
    }

    #[test]
    fn transfer_function_feedthrough_limit() {
        let ss = real_ss(&[&[-1.0]], &[&[-1.0]], &[&[1.0]], &[&[1.0]]);
        let g = transfer_function(&ss, c64(1e9, 0.0)).unwrap();
        assert!((g[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-8);
        assert!(matches!(
            transfer_function(&ss, c64(-1.0, 0.0)),
            Err(Error::SingularResolvent { .. })
        ));
    }

    #[test]
    fn uncoupled_lossless_mode_is_dfs() {
        // One damped mode, one mode with only a frequency and no coupling.
        let model = SlhModel::new(
            CMatrix::identity(1, 1),
            from_real_rows(&[&[1.0, 0.0]]),
            CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.3, 0.0)]),
            vec!["x".into()],
        )
        .unwrap();
        let ss = to_state_space(&model);
        let dfs = dfs_decompose(&ss).unwrap();
        assert_eq!(dfs.dfs_indices, vec![1]);
        assert!(max_abs_diff(&dfs.u, &CMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn groups_split_block_diagonal() {
        let a = from_real_rows(&[
            &[-1.0, 0.5, 0.0],
            &[0.0, -1.0, 0.0],
            &[0.0, 0.0, -2.0],
        ]);
        assert_eq!(coupled_groups(&a), vec![vec![0, 1], vec![2]]);
    }
}
