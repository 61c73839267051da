//! Preset networks: two-mirror cavities, the two routings of a qubit memory
//! module, their qudit extensions, and the single-excitation storage state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};
use crate::slh::{feedback_reduce, parallel_sum, series, AdjacencyMap, SlhModel};

/// Per-mirror decay rates. Unset entries default to `gamma / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MirrorRates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

/// Names one of the four mirrors of a module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mirror {
    P1,
    P2,
    C1,
    C2,
}

impl std::str::FromStr for Mirror {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(Mirror::P1),
            "p2" => Ok(Mirror::P2),
            "c1" => Ok(Mirror::C1),
            "c2" => Ok(Mirror::C2),
            _ => Err(Error::InvalidParameter(format!("unknown mirror '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySpec {
    pub n_qubits: usize,
    pub gamma: f64,
    #[serde(default)]
    pub kappa_overrides: MirrorRates,
}

impl MemorySpec {
    pub fn new(n_qubits: usize, gamma: f64) -> Self {
        MemorySpec { n_qubits, gamma, kappa_overrides: MirrorRates::default() }
    }

    pub fn with_mirror(mut self, mirror: Mirror, rate: f64) -> Self {
        let o = &mut self.kappa_overrides;
        match mirror {
            Mirror::P1 => o.p1 = Some(rate),
            Mirror::P2 => o.p2 = Some(rate),
            Mirror::C1 => o.c1 = Some(rate),
            Mirror::C2 => o.c2 = Some(rate),
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidParameter("n_qubits must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        for r in self.rates() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("mirror rate must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// `[κ_p1, κ_p2, κ_c1, κ_c2]`.
    pub fn rates(&self) -> [f64; 4] {
        let half = self.gamma / 2.0;
        let o = &self.kappa_overrides;
        [
            o.p1.unwrap_or(half),
            o.p2.unwrap_or(half),
            o.c1.unwrap_or(half),
            o.c2.unwrap_or(half),
        ]
    }
}

/// Field routing of a memory module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Routing {
    /// Double pass through both cavities; used while writing and reading.
    WriteRead,
    /// Cross-coupled loop that carries a decoherence-free mode.
    Storage,
}

impl Routing {
    pub fn from_index(which: u8) -> Result<Self> {
        match which {
            1 => Ok(Routing::WriteRead),
            2 => Ok(Routing::Storage),
            _ => Err(Error::InvalidParameter(format!("configuration must be 1 or 2, got {which}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Routing::WriteRead => 1,
            Routing::Storage => 2,
        }
    }

    /// `(output label, input label)` pairs on the open-loop plant/controller.
    fn connections(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Routing::WriteRead => &[("p.1", "c.2"), ("c.2", "p.2"), ("p.2", "c.1")],
            Routing::Storage => &[("p.1", "c.2"), ("c.1", "p.2")],
        }
    }
}

/// Single-mode cavity with one port per mirror: `S = I`, `K = [√κ_j]`, `Ω = 0`.
pub fn make_cavity_ports(rates: &[f64]) -> Result<SlhModel> {
    if rates.is_empty() {
        return Err(Error::InvalidParameter("cavity needs at least one mirror".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter(format!("mirror rate must be positive, got {r}")));
    }
    let n = rates.len();
    SlhModel::new(
        CMatrix::identity(n, n),
        CMatrix::from_fn(n, 1, |i, _| c64(rates[i].sqrt(), 0.0)),
        CMatrix::zeros(1, 1),
        (1..=n).map(|j| j.to_string()).collect(),
    )
}

pub fn make_cavity(kappa1: f64, kappa2: f64) -> Result<SlhModel> {
    make_cavity_ports(&[kappa1, kappa2])
}

/// Plant `p` and controller `c` side by side, before any routing.
pub fn open_loop(spec: &MemorySpec) -> Result<SlhModel> {
    spec.validate()?;
    let [p1, p2, c1, c2] = spec.rates();
    parallel_sum(&[
        make_cavity(p1, p2)?.with_prefix("p"),
        make_cavity(c1, c2)?.with_prefix("c"),
    ])
}

/// A single qubit module in the given routing.
pub fn qubit_config(spec: &MemorySpec, routing: Routing) -> Result<SlhModel> {
    let open = open_loop(spec)?;
    let adj = AdjacencyMap::from_labels(&open, routing.connections())?;
    feedback_reduce(&open, &adj)
}

/// `n_qubits` modules: cascaded for [`Routing::WriteRead`], isolated for
/// [`Routing::Storage`]. Modes are ordered module by module, plant first.
pub fn qudit_config(spec: &MemorySpec, routing: Routing) -> Result<SlhModel> {
    spec.validate()?;
    if spec.n_qubits == 1 {
        return qubit_config(spec, routing);
    }
    let modules = (1..=spec.n_qubits)
        .map(|j| Ok(qubit_config(spec, routing)?.with_prefix(&format!("m{j}"))))
        .collect::<Result<Vec<_>>>()?;
    match routing {
        Routing::WriteRead => {
            let mut chain = modules[0].clone();
            for m in &modules[1..] {
                chain = series(&chain, m)?;
            }
            Ok(chain)
        }
        Routing::Storage => parallel_sum(&modules),
    }
}

/// A state in the span of the vacuum and the single-photon states of each
/// cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageState {
    pub labels: Vec<String>,
    pub coefficients: Vec<Complex64>,
}

impl StorageState {
    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn get(&self, label: &str) -> Option<Complex64> {
        self.labels.iter().position(|l| l == label).map(|i| self.coefficients[i])
    }

    /// State built directly from the one-photon amplitudes of the cavity
    /// modes (module by module, plant first), renormalized together with
    /// the vacuum amplitude.
    pub fn from_mode_amplitudes(alpha0: Complex64, modes: &[Complex64]) -> Result<Self> {
        if modes.len() % 2 != 0 {
            return Err(Error::Dimension(format!("{} cavity amplitudes is not a whole number of modules", modes.len())));
        }
        let mut coefficients = Vec::with_capacity(modes.len() + 1);
        coefficients.push(alpha0);
        coefficients.extend_from_slice(modes);
        let norm = coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NotNormalized { norm_sqr: 0.0 });
        }
        for z in &mut coefficients {
            *z /= norm;
        }
        Ok(StorageState { labels: basis_labels(modes.len() / 2), coefficients })
    }
}

fn basis_labels(n_modules: usize) -> Vec<String> {
    let mut labels = vec!["vacuum".to_string()];
    for j in 1..=n_modules {
        labels.push(format!("m{j}.p"));
        labels.push(format!("m{j}.c"));
    }
    labels
}

/// Map a vacuum amplitude and per-module stored amplitudes onto the cavity
/// Fock basis: module `j` contributes `β_j/√2 |1_p⟩ − β_j/√2 |1_c⟩`.
pub fn storage_state(alpha0: Complex64, dfs_amplitudes: &[Complex64]) -> Result<StorageState> {
    let norm_sqr = alpha0.norm_sqr() + dfs_amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if (norm_sqr - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { norm_sqr });
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut coefficients = vec![alpha0];
    for &b in dfs_amplitudes {
        coefficients.push(b * h);
        coefficients.push(-b * h);
    }
    Ok(StorageState { labels: basis_labels(dfs_amplitudes.len()), coefficients })
}

#[derive(Serialize)]
struct LabeledCoefficient<'a> {
    label: &'a str,
    re: f64,
    im: f64,
}

impl Serialize for StorageState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let items: Vec<LabeledCoefficient> = self
            .labels
            .iter()
            .zip(&self.coefficients)
            .map(|(l, z)| LabeledCoefficient { label: l, re: z.re, im: z.im })
            .collect();
        items.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, max_abs_diff};
    use crate::linear::to_state_space;

    #[test]
    fn cavity_symmetric() {
        let m = make_cavity(0.5, 0.5).unwrap();
        let r = 0.5f64.sqrt();
        assert!(max_abs_diff(m.k(), &from_real_rows(&[&[r], &[r]])) < 1e-15);
        let ss = to_state_space(&m);
        assert!((ss.a[(0, 0)] - c64(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cavity_asymmetric() {
        let m = make_cavity(0.3, 0.7).unwrap();
        assert!(max_abs_diff(m.k(), &from_real_rows(&[&[0.3f64.sqrt()], &[0.7f64.sqrt()]])) < 1e-15);
        let ss = to_state_space(&m);
        assert!((ss.a[(0, 0)] - c64(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cavity_degenerate_rate_rejected() {
        assert!(matches!(make_cavity(1.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(make_cavity(-1.0, 1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(MemorySpec::new(0, 1.0).validate().is_err());
        assert!(MemorySpec::new(1, 0.0).validate().is_err());
        assert!(MemorySpec::new(1, 1.0).with_mirror(Mirror::C1, -0.1).validate().is_err());
        let spec = MemorySpec::new(2, 1.0);
        let r = spec.rates();
        assert!((r[0] + r[1] - spec.gamma).abs() < 1e-15);
        assert!((r[2] + r[3] - spec.gamma).abs() < 1e-15);
    }

    #[test]
    fn spec_json() {
        let spec: MemorySpec =
            serde_json::from_str(r#"{"n_qubits":2,"gamma":1.5,"kappa_overrides":{"c1":0.8}}"#).unwrap();
        assert_eq!(spec.rates(), [0.75, 0.75, 0.8, 0.75]);
        let bare: MemorySpec = serde_json::from_str(r#"{"n_qubits":1,"gamma":1}"#).unwrap();
        assert_eq!(bare.kappa_overrides, MirrorRates::default());
    }

    #[test]
    fn storage_state_single_module() {
        let st = storage_state(c64(0.6, 0.0), &[c64(0.8, 0.0)]).unwrap();
        let h = 0.8 / 2f64.sqrt();
        assert_eq!(st.labels, ["vacuum", "m1.p", "m1.c"]);
        assert!((st.coefficients[0] - c64(0.6, 0.0)).norm() < 1e-15);
        assert!((st.coefficients[1] - c64(h, 0.0)).norm() < 1e-15);
        assert!((st.coefficients[2] - c64(-h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn storage_state_vacuum() {
        let st = storage_state(c64(1.0, 0.0), &[c64(0.0, 0.0)]).unwrap();
        assert_eq!(st.coefficients[0], c64(1.0, 0.0));
        assert!(st.coefficients[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn storage_state_two_modules() {
        let b = std::f64::consts::FRAC_1_SQRT_2;
        let st = storage_state(c64(0.0, 0.0), &[c64(b, 0.0), c64(b, 0.0)]).unwrap();
        let nonzero: Vec<f64> =
            st.coefficients.iter().filter(|z| z.norm() > 0.0).map(|z| z.norm()).collect();
        assert_eq!(nonzero.len(), 4);
        assert!(nonzero.iter().all(|m| (m - 0.5).abs() < 1e-15));
    }

    #[test]
    fn storage_state_rejects_unnormalized() {
        assert!(matches!(
            storage_state(c64(0.6, 0.0), &[c64(0.6, 0.0)]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn storage_state_json_labels() {
        let st = storage_state(c64(1.0, 0.0), &[c64(0.0, 0.0)]).unwrap();
        let text = serde_json::to_string(&st).unwrap();
        assert!(text.starts_with(r#"[{"label":"vacuum","re":1.0,"im":0.0}"#));
    }
}
