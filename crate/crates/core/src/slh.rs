//! Passive SLH models and the network rules that compose them.
//!
//! A passive linear model is carried by three matrices: the scattering
//! matrix `S` (ports × ports), the coupling matrix `K` (ports × modes, so the
//! coupling operator of port `j` is `L_j = K_j a`) and the Hamiltonian
//! coefficient `Ω` (modes × modes, `H = a† Ω a`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, condition_number, hermitian_residual, select, serde_cmatrix, unitarity_residual,
    CMatrix, I,
};

/// Tolerance on `S†S = I` and `Ω = Ω†`, relative to the matrix scale.
pub const INVARIANT_TOL: f64 = 1e-12;

/// `(η − S_ii)` is rejected above this condition number.
pub const MAX_LOOP_CONDITION: f64 = 1e12;

/// Separator between the input and output halves of a port label once a
/// reduction has paired an input with a different output.
pub const LABEL_JOIN: &str = "->";

#[derive(Debug, Clone, PartialEq)]
pub struct SlhModel {
    s: CMatrix,
    k: CMatrix,
    omega: CMatrix,
    port_labels: Vec<String>,
}

impl SlhModel {
    pub fn new(s: CMatrix, k: CMatrix, omega: CMatrix, port_labels: Vec<String>) -> Result<Self> {
        let n_ports = s.nrows();
        let n_modes = omega.nrows();
        if !s.is_square() {
            return Err(Error::Dimension(format!("S is {}x{}", s.nrows(), s.ncols())));
        }
        if !omega.is_square() {
            return Err(Error::Dimension(format!(
                "Omega is {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        if k.nrows() != n_ports || k.ncols() != n_modes {
            return Err(Error::Dimension(format!(
                "K is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                n_ports,
                n_modes
            )));
        }
        if port_labels.len() != n_ports {
            return Err(Error::Dimension(format!(
                "{} port labels for {} ports",
                port_labels.len(),
                n_ports
            )));
        }
        let u_res = unitarity_residual(&s);
        if n_ports > 0 && u_res > INVARIANT_TOL * 10.0 {
            return Err(Error::NotUnitary { residual: u_res });
        }
        let scale = omega.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        let h_res = hermitian_residual(&omega);
        if n_modes > 0 && h_res > INVARIANT_TOL * scale {
            return Err(Error::NotHermitian { residual: h_res });
        }
        Ok(SlhModel { s, k, omega, port_labels })
    }

    /// Model with no internal modes and `n` pass-through ports.
    pub fn passthrough(n: usize) -> Self {
        SlhModel {
            s: CMatrix::identity(n, n),
            k: CMatrix::zeros(n, 0),
            omega: CMatrix::zeros(0, 0),
            port_labels: (1..=n).map(|j| j.to_string()).collect(),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.omega.nrows()
    }

    pub fn n_ports(&self) -> usize {
        self.s.nrows()
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn k(&self) -> &CMatrix {
        &self.k
    }

    pub fn omega(&self) -> &CMatrix {
        &self.omega
    }

    pub fn port_labels(&self) -> &[String] {
        &self.port_labels
    }

    /// Label of the field entering port `j`.
    pub fn input_label(&self, j: usize) -> &str {
        let l = &self.port_labels[j];
        l.split_once(LABEL_JOIN).map_or(l.as_str(), |(i, _)| i)
    }

    /// Label of the field leaving port `j`.
    pub fn output_label(&self, j: usize) -> &str {
        let l = &self.port_labels[j];
        l.split_once(LABEL_JOIN).map_or(l.as_str(), |(_, o)| o)
    }

    pub fn input_index(&self, label: &str) -> Option<usize> {
        (0..self.n_ports()).find(|&j| self.input_label(j) == label)
    }

    pub fn output_index(&self, label: &str) -> Option<usize> {
        (0..self.n_ports()).find(|&j| self.output_label(j) == label)
    }

    /// Prefix every port label with `prefix.`.
    pub fn with_prefix(mut self, prefix: &str) -> Self {
        for l in &mut self.port_labels {
            *l = match l.split_once(LABEL_JOIN) {
                Some((i, o)) => format!("{prefix}.{i}{LABEL_JOIN}{prefix}.{o}"),
                None => format!("{prefix}.{l}"),
            };
        }
        self
    }

    pub fn with_port_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_ports() {
            return Err(Error::Dimension(format!(
                "{} port labels for {} ports",
                labels.len(),
                self.n_ports()
            )));
        }
        self.port_labels = labels;
        Ok(self)
    }

    /// Reorder the external ports: new port `k` is old port `order[k]`.
    pub fn permute_ports(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_ports();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::Dimension("port order is not a permutation".into()));
        }
        let all: Vec<usize> = (0..self.n_modes()).collect();
        Ok(SlhModel {
            s: select(&self.s, order, order),
            k: select(&self.k, order, &all),
            omega: self.omega.clone(),
            port_labels: order.iter().map(|&p| self.port_labels[p].clone()).collect(),
        })
    }

    /// max(|S†S − I|, |Ω − Ω†|).
    pub fn invariant_residual(&self) -> f64 {
        let u = if self.n_ports() > 0 { unitarity_residual(&self.s) } else { 0.0 };
        let h = if self.n_modes() > 0 { hermitian_residual(&self.omega) } else { 0.0 };
        u.max(h)
    }
}

#[derive(Serialize, Deserialize)]
struct SlhModelJson {
    n_modes: usize,
    n_ports: usize,
    #[serde(rename = "S")]
    s: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "K")]
    k: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "Omega")]
    omega: Vec<Vec<[f64; 2]>>,
    port_labels: Vec<String>,
}

impl Serialize for SlhModel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SlhModelJson {
            n_modes: self.n_modes(),
            n_ports: self.n_ports(),
            s: serde_cmatrix::to_rows(&self.s),
            k: serde_cmatrix::to_rows(&self.k),
            omega: serde_cmatrix::to_rows(&self.omega),
            port_labels: self.port_labels.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SlhModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = SlhModelJson::deserialize(de)?;
        let s = serde_cmatrix::from_rows(&raw.s, raw.n_ports).map_err(D::Error::custom)?;
        // A zero-port K still carries its mode count through n_modes.
        let k = serde_cmatrix::from_rows(&raw.k, raw.n_modes).map_err(D::Error::custom)?;
        let omega = serde_cmatrix::from_rows(&raw.omega, raw.n_modes).map_err(D::Error::custom)?;
        if s.nrows() != raw.n_ports || omega.nrows() != raw.n_modes {
            return Err(D::Error::custom("n_modes/n_ports disagree with matrix sizes"));
        }
        SlhModel::new(s, k, omega, raw.port_labels).map_err(D::Error::custom)
    }
}

/// Internal field connections: output port `source` feeds input port `target`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyMap {
    pub connections: Vec<(usize, usize)>,
}

impl AdjacencyMap {
    pub fn new(connections: Vec<(usize, usize)>) -> Self {
        AdjacencyMap { connections }
    }

    /// Build connections from `(output label, input label)` pairs.
    pub fn from_labels(model: &SlhModel, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut connections = Vec::with_capacity(pairs.len());
        for &(out, inp) in pairs {
            let s = model
                .output_index(out)
                .ok_or_else(|| Error::Adjacency(format!("no output port labelled '{out}'")))?;
            let r = model
                .input_index(inp)
                .ok_or_else(|| Error::Adjacency(format!("no input port labelled '{inp}'")))?;
            connections.push((s, r));
        }
        Ok(AdjacencyMap { connections })
    }

    pub fn is_empty(&self) -> bool {
        self.connections.is_empty()
    }

    /// Check that the connections form a partial permutation on `n_ports`.
    pub fn validate(&self, n_ports: usize) -> Result<()> {
        let mut src = vec![false; n_ports];
        let mut dst = vec![false; n_ports];
        for &(s, r) in &self.connections {
            if s >= n_ports || r >= n_ports {
                return Err(Error::Adjacency(format!(
                    "dangling connection ({s} -> {r}) on a {n_ports}-port model"
                )));
            }
            if std::mem::replace(&mut src[s], true) {
                return Err(Error::Adjacency(format!("output port {s} used twice")));
            }
            if std::mem::replace(&mut dst[r], true) {
                return Err(Error::Adjacency(format!("input port {r} used twice")));
            }
        }
        Ok(())
    }

    fn partition(&self, n_ports: usize) -> Partition {
        let mut out_i: Vec<usize> = self.connections.iter().map(|c| c.0).collect();
        let mut in_i: Vec<usize> = self.connections.iter().map(|c| c.1).collect();
        out_i.sort_unstable();
        in_i.sort_unstable();
        let out_e = (0..n_ports).filter(|p| out_i.binary_search(p).is_err()).collect();
        let in_e = (0..n_ports).filter(|p| in_i.binary_search(p).is_err()).collect();
        let mut eta = CMatrix::zeros(out_i.len(), in_i.len());
        for &(s, r) in &self.connections {
            let row = out_i.binary_search(&s).unwrap();
            let col = in_i.binary_search(&r).unwrap();
            eta[(row, col)] = crate::linalg::ONE;
        }
        Partition { out_i, in_i, out_e, in_e, eta }
    }
}

struct Partition {
    out_i: Vec<usize>,
    in_i: Vec<usize>,
    out_e: Vec<usize>,
    in_e: Vec<usize>,
    /// Rows: internal outputs, columns: internal inputs.
    eta: CMatrix,
}

/// Concatenate models with independent inputs into one block-diagonal model.
pub fn parallel_sum(models: &[SlhModel]) -> Result<SlhModel> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    if models.len() == 1 {
        return Ok(models[0].clone());
    }
    Ok(SlhModel {
        s: block_diag(models.iter().map(|m| &m.s)),
        k: block_diag(models.iter().map(|m| &m.k)),
        omega: block_diag(models.iter().map(|m| &m.omega)),
        port_labels: models.iter().flat_map(|m| m.port_labels.iter().cloned()).collect(),
    })
}

/// Condition number of `(η − S_ii)` for the given connections.
pub fn loop_condition(model: &SlhModel, adj: &AdjacencyMap) -> Result<f64> {
    adj.validate(model.n_ports())?;
    let p = adj.partition(model.n_ports());
    Ok(condition_number(&(&p.eta - select(&model.s, &p.out_i, &p.in_i))))
}

/// Eliminate the internal channels named by `adj`.
///
/// External port `k` of the result pairs the `k`-th unconnected input with
/// the `k`-th unconnected output, both in original index order.
pub fn feedback_reduce(model: &SlhModel, adj: &AdjacencyMap) -> Result<SlhModel> {
    adj.validate(model.n_ports())?;
    if adj.is_empty() {
        return Ok(model.clone());
    }
    let p = adj.partition(model.n_ports());
    let modes: Vec<usize> = (0..model.n_modes()).collect();
    let all_out: Vec<usize> = (0..model.n_ports()).collect();

    let loop_matrix = &p.eta - select(&model.s, &p.out_i, &p.in_i);
    let condition = condition_number(&loop_matrix);
    if !(condition <= MAX_LOOP_CONDITION) {
        return Err(Error::AlgebraicLoop { condition });
    }
    let resolvent = loop_matrix
        .try_inverse()
        .ok_or(Error::AlgebraicLoop { condition: f64::INFINITY })?;

    let s_ei = select(&model.s, &p.out_e, &p.in_i);
    let s_ie = select(&model.s, &p.out_i, &p.in_e);
    let s_ee = select(&model.s, &p.out_e, &p.in_e);
    let k_i = select(&model.k, &p.out_i, &modes);
    let k_e = select(&model.k, &p.out_e, &modes);

    let s_red = s_ee + &s_ei * &resolvent * s_ie;
    let k_red = k_e + &s_ei * &resolvent * &k_i;

    // Σ_j K_j† S_{j,i} (η − S_ii)⁻¹ K_i over every output j.
    let s_all_i = select(&model.s, &all_out, &p.in_i);
    let x = model.k.adjoint() * s_all_i * &resolvent * &k_i;
    let im_part = (&x - x.adjoint()) / (I * 2.0);
    let omega = &model.omega + im_part;
    let omega = (&omega + omega.adjoint()) * crate::linalg::c64(0.5, 0.0);

    let port_labels = p
        .in_e
        .iter()
        .zip(&p.out_e)
        .map(|(&i, &o)| {
            let (il, ol) = (model.input_label(i), model.output_label(o));
            if il == ol {
                il.to_string()
            } else {
                format!("{il}{LABEL_JOIN}{ol}")
            }
        })
        .collect();

    Ok(SlhModel { s: s_red, k: k_red, omega, port_labels })
}

/// Cascade: every output of `upstream` feeds the same-numbered input of
/// `downstream`.
pub fn series(upstream: &SlhModel, downstream: &SlhModel) -> Result<SlhModel> {
    let (nu, nd) = (upstream.n_ports(), downstream.n_ports());
    if nu != nd {
        return Err(Error::PortCountMismatch { upstream: nu, downstream: nd });
    }
    let open = parallel_sum(&[upstream.clone(), downstream.clone()])?;
    let adj = AdjacencyMap::new((0..nu).map(|k| (k, nu + k)).collect());
    feedback_reduce(&open, &adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, from_real_rows, max_abs, max_abs_diff, CMatrix};

    fn cavity(rates: &[f64], name: &str) -> SlhModel {
        let k = CMatrix::from_fn(rates.len(), 1, |i, _| c64(rates[i].sqrt(), 0.0));
        let labels = (1..=rates.len()).map(|j| format!("{name}.{j}")).collect();
        SlhModel::new(
            CMatrix::identity(rates.len(), rates.len()),
            k,
            CMatrix::zeros(1, 1),
            labels,
        )
        .unwrap()
    }

    fn open_loop(gamma: f64) -> SlhModel {
        let h = gamma / 2.0;
        parallel_sum(&[cavity(&[h, h], "p"), cavity(&[h, h], "c")]).unwrap()
    }

    #[test]
    fn parallel_sum_two_cavities() {
        let m = open_loop(1.0);
        let r = 0.5f64.sqrt();
        let expected_k =
            from_real_rows(&[&[r, 0.0], &[r, 0.0], &[0.0, r], &[0.0, r]]);
        assert_eq!(m.n_ports(), 4);
        assert!(max_abs_diff(m.s(), &CMatrix::identity(4, 4)) == 0.0);
        assert!(max_abs_diff(m.k(), &expected_k) < 1e-15);
        assert!(max_abs(m.omega()) == 0.0);
        assert_eq!(m.port_labels(), ["p.1", "p.2", "c.1", "c.2"]);
    }

    #[test]
    fn parallel_sum_single_is_identity() {
        let c = cavity(&[0.3, 0.7], "x");
        assert_eq!(parallel_sum(std::slice::from_ref(&c)).unwrap(), c);
    }

    #[test]
    fn parallel_sum_three_one_port() {
        let rates = [0.2, 0.5, 1.3];
        let parts: Vec<SlhModel> =
            rates.iter().enumerate().map(|(i, &r)| cavity(&[r], &format!("c{i}"))).collect();
        let m = parallel_sum(&parts).unwrap();
        // Hand-built block structure.
        for i in 0..3 {
            for j in 0..3 {
                let expect_s = if i == j { 1.0 } else { 0.0 };
                let expect_k = if i == j { rates[i].sqrt() } else { 0.0 };
                assert_eq!(m.s()[(i, j)], c64(expect_s, 0.0));
                assert_eq!(m.k()[(i, j)], c64(expect_k, 0.0));
                assert_eq!(m.omega()[(i, j)], c64(0.0, 0.0));
            }
        }
    }

    #[test]
    fn parallel_sum_empty_errors() {
        assert!(matches!(parallel_sum(&[]), Err(Error::NoModels)));
    }

    #[test]
    fn config_one_reduction() {
        let m = open_loop(1.0);
        let adj = AdjacencyMap::new(vec![(0, 3), (3, 1), (1, 2)]);
        let red = feedback_reduce(&m, &adj).unwrap();
        assert_eq!(red.n_ports(), 1);
        assert!((red.s()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
        let r = 2f64.sqrt();
        assert!(max_abs_diff(red.k(), &from_real_rows(&[&[r, r]])) < 1e-12);
        assert_eq!(red.port_labels(), ["p.1->c.1"]);
    }

    #[test]
    fn config_two_reduction() {
        let m = open_loop(1.0);
        let adj = AdjacencyMap::new(vec![(0, 3), (2, 1)]);
        let red = feedback_reduce(&m, &adj).unwrap();
        assert!(max_abs_diff(red.s(), &from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])) < 1e-12);
        let r = 0.5f64.sqrt();
        assert!(max_abs_diff(red.k(), &from_real_rows(&[&[r, r], &[r, r]])) < 1e-12);
        assert!(max_abs(red.omega()) < 1e-12);
    }

    #[test]
    fn empty_adjacency_is_identity() {
        let m = open_loop(2.0);
        assert_eq!(feedback_reduce(&m, &AdjacencyMap::default()).unwrap(), m);
    }

    #[test]
    fn dangling_and_duplicate_connections() {
        let m = open_loop(1.0);
        assert!(matches!(
            feedback_reduce(&m, &AdjacencyMap::new(vec![(0, 7)])),
            Err(Error::Adjacency(_))
        ));
        assert!(matches!(
            feedback_reduce(&m, &AdjacencyMap::new(vec![(0, 1), (0, 2)])),
            Err(Error::Adjacency(_))
        ));
        assert!(matches!(
            feedback_reduce(&m, &AdjacencyMap::new(vec![(0, 1), (2, 1)])),
            Err(Error::Adjacency(_))
        ));
    }

    #[test]
    fn self_loop_on_identity_scattering_is_singular() {
        // Output 0 into input 0 with S_00 = 1 gives η − S_ii = 0.
        let m = open_loop(1.0);
        let err = feedback_reduce(&m, &AdjacencyMap::new(vec![(0, 0)])).unwrap_err();
        assert!(matches!(err, Error::AlgebraicLoop { .. }));
        assert!(err.to_string().contains("algebraic loop not well-posed"));
    }

    #[test]
    fn series_scalar_couplings() {
        let kappa = 0.7;
        let a = cavity(&[kappa], "a");
        let b = cavity(&[kappa], "b");
        let m = series(&a, &b).unwrap();
        // Drift A = −(iΩ + K†K/2); lower coupling entry must be −κ.
        let drift = -(m.omega() * I + m.k().adjoint() * m.k() * c64(0.5, 0.0));
        assert!((drift[(1, 0)] - c64(-kappa, 0.0)).norm() < 1e-12);
        assert!(drift[(0, 1)].norm() < 1e-12);
        assert!((drift[(0, 0)] - c64(-kappa / 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn series_with_passthrough() {
        let c = cavity(&[0.4], "c");
        let m = series(&c, &SlhModel::passthrough(1)).unwrap();
        assert!(max_abs_diff(m.s(), c.s()) < 1e-15);
        assert!(max_abs_diff(m.k(), c.k()) < 1e-15);
        assert!(max_abs_diff(m.omega(), c.omega()) < 1e-15);
    }

    #[test]
    fn series_port_mismatch() {
        let err = series(&cavity(&[1.0], "a"), &cavity(&[1.0, 1.0], "b")).unwrap_err();
        assert!(matches!(err, Error::PortCountMismatch { upstream: 1, downstream: 2 }));
    }

    #[test]
    fn adjacency_from_labels() {
        let m = open_loop(1.0);
        let adj =
            AdjacencyMap::from_labels(&m, &[("p.1", "c.2"), ("c.1", "p.2")]).unwrap();
        assert_eq!(adj.connections, vec![(0, 3), (2, 1)]);
        assert!(AdjacencyMap::from_labels(&m, &[("q.1", "c.2")]).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = open_loop(1.0);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with("{\"n_modes\":2,\"n_ports\":4,\"S\":"));
        let back: SlhModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);

        let bad = r#"{"n_modes":0,"n_ports":2,"S":[[[1,0],[1,0]],[[0,0],[1,0]]],
                      "K":[[],[]],"Omega":[],"port_labels":["a","b"]}"#;
        assert!(serde_json::from_str::<SlhModel>(bad).is_err());
    }

    #[test]
    fn non_hermitian_omega_rejected() {
        let omega = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        let err = SlhModel::new(CMatrix::identity(1, 1), CMatrix::zeros(1, 2), omega, vec!["x".into()])
            .unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }
}
