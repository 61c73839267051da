//! Single-excitation (and mean-field) transport through linear systems, and
//! the write → store → read memory protocol.
//!
//! In the one-photon sector a passive linear network obeys the classical
//! filter `ċ = Ac + Bξ`, `η = Cc + Dξ`, where `c` holds the one-photon
//! amplitudes of the internal modes and `ξ`, `η` the input and output
//! wavepackets. Coherent-state mean fields obey the same equations.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, eigenvalues, expm, fmt_f64, serde_cvec, CMatrix, CVector};
use crate::linear::{dfs_decompose, rotate, to_state_space, StateSpace};
use crate::memory::{qudit_config, storage_state, MemorySpec, Mirror, Routing, StorageState};
use crate::pulse::{emission_pulses, overlap, read_pulses, simpson, write_pulses, Grid, Pulse};

/// Writing windows shorter than this many `1/γ` trigger a warning.
pub const MIN_WRITE_WINDOW: f64 = 20.0;

/// Exact one-step propagator for `ċ = Ac + Bu` with `u` interpolated by a
/// polynomial through up to four neighbouring samples.
struct Stepper {
    n: usize,
    m: usize,
    transition: CMatrix,
    /// `Ψ_j = ∫₀^dt e^{A(dt−s)} (s/dt)^j ds · B`, `j = 0..=3`.
    moments: Vec<CMatrix>,
    cache: Vec<(Vec<i64>, Vec<CMatrix>)>,
}

impl Stepper {
    fn new(ss: &StateSpace, dt: f64) -> Self {
        let n = ss.n_modes();
        let m = ss.n_inputs();
        // exp of [[A dt, I, 0, 0, 0], [0, 0, I, 0, 0], …] in unit time:
        // top block row k holds ∫₀¹ e^{A dt (1−σ)} σ^{k−1}/(k−1)! dσ.
        let blocks = 5;
        let mut z = CMatrix::zeros(blocks * n, blocks * n);
        z.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * c64(dt, 0.0)));
        for k in 0..blocks - 1 {
            z.view_mut((k * n, (k + 1) * n), (n, n)).fill_with_identity();
        }
        let ez = expm(&z);
        let transition = ez.view((0, 0), (n, n)).into_owned();
        let mut factorial = 1.0;
        let moments = (0..4)
            .map(|j| {
                if j > 0 {
                    factorial *= j as f64;
                }
                let g = ez.view((0, (j + 1) * n), (n, n)).into_owned();
                g * &ss.b * c64(dt * factorial, 0.0)
            })
            .collect();
        Stepper { n, m, transition, moments, cache: Vec::new() }
    }

    /// Per-sample weights for a stencil given as sample offsets relative to
    /// the step's left endpoint (in units of dt).
    fn weights(&mut self, offsets: &[i64]) -> &[CMatrix] {
        if let Some(pos) = self.cache.iter().position(|(o, _)| o == offsets) {
            return &self.cache[pos].1;
        }
        let coeffs = lagrange_coefficients(offsets);
        let weights = coeffs
            .iter()
            .map(|poly| {
                let mut w = CMatrix::zeros(self.n, self.m);
                for (j, &a) in poly.iter().enumerate() {
                    w += &self.moments[j] * c64(a, 0.0);
                }
                w
            })
            .collect();
        self.cache.push((offsets.to_vec(), weights));
        &self.cache.last().unwrap().1
    }
}

/// Monomial coefficients of the Lagrange basis polynomials on integer nodes.
fn lagrange_coefficients(nodes: &[i64]) -> Vec<Vec<f64>> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for (j, &xj) in nodes.iter().enumerate() {
                if i == j {
                    continue;
                }
                // poly *= (x − xj)
                let mut next = vec![0.0; poly.len() + 1];
                for (k, &p) in poly.iter().enumerate() {
                    next[k + 1] += p;
                    next[k] -= p * xj as f64;
                }
                poly = next;
                denom *= (xi - xj) as f64;
            }
            poly.iter().map(|p| p / denom).collect()
        })
        .collect()
}

/// Sample offsets used for the step `[t_k, t_{k+1}]` on a grid of `steps`.
fn stencil(k: usize, steps: usize) -> Vec<i64> {
    if steps < 3 {
        return (0..=steps as i64).map(|j| j - k as i64).collect();
    }
    let start = (k as i64 - 1).clamp(0, steps as i64 - 3);
    (start..start + 4).map(|j| j - k as i64).collect()
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    /// Mode amplitudes at each grid point.
    pub modes: Vec<CVector>,
    /// Output envelopes at each grid point, one entry per port.
    pub outputs: Vec<CVector>,
    pub inputs: Vec<CVector>,
    /// `‖c(T)‖² + ∫|η|² − ‖c(0)‖² − ∫|ξ|²`, fluxes by Simpson's rule.
    pub energy_residual: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &CVector {
        self.modes.last().expect("trajectory is never empty")
    }

    pub fn output_pulse(&self, port: usize, label: &str) -> Pulse {
        let samples = self.outputs.iter().map(|v| v[port]).collect();
        Pulse::from_samples(label, self.grid, samples).expect("length matches grid")
    }

    pub fn to_csv(&self) -> String {
        let n = self.modes.first().map_or(0, |v| v.len());
        let m = self.outputs.first().map_or(0, |v| v.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",re(c_{i}),im(c_{i})"));
        }
        for j in 1..=m {
            out.push_str(&format!(",re(eta_{j}),im(eta_{j})"));
        }
        out.push('\n');
        for (k, t) in self.grid.times().enumerate() {
            out.push_str(&fmt_f64(t));
            for z in self.modes[k].iter().chain(self.outputs[k].iter()) {
                out.push_str(&format!(",{},{}", fmt_f64(z.re), fmt_f64(z.im)));
            }
            out.push('\n');
        }
        out
    }
}

/// Integrate the single-excitation dynamics over `[t_start, t_end]`.
///
/// `inputs` holds one pulse per input port, or is empty for vacuum on every
/// port. Each step is propagated exactly for the interpolated input.
pub fn propagate(
    ss: &StateSpace,
    inputs: &[Pulse],
    c0: &CVector,
    t_start: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    ss.check_dimensions()?;
    let (n, m) = (ss.n_modes(), ss.n_inputs());
    if c0.len() != n {
        return Err(Error::Dimension(format!("initial state has {} entries for {n} modes", c0.len())));
    }
    if !inputs.is_empty() && inputs.len() != m {
        return Err(Error::Dimension(format!("{} input pulses for {m} ports", inputs.len())));
    }
    let grid = Grid::spanning(t_start, t_end, dt)?;
    let columns = inputs.iter().map(|p| p.on_grid(&grid)).collect::<Result<Vec<_>>>()?;
    let u: Vec<CVector> = (0..grid.len())
        .map(|k| CVector::from_fn(m, |j, _| columns.get(j).map_or(c64(0.0, 0.0), |col| col[k])))
        .collect();

    let mut stepper = Stepper::new(ss, grid.dt);
    let mut modes = Vec::with_capacity(grid.len());
    let mut c = c0.clone();
    for k in 0..grid.steps {
        let offsets = stencil(k, grid.steps);
        let mut next = &stepper.transition * &c;
        let weights = stepper.weights(&offsets);
        for (w, off) in weights.iter().zip(&offsets) {
            next += w * &u[(k as i64 + off) as usize];
        }
        modes.push(std::mem::replace(&mut c, next));
    }
    modes.push(c);

    let outputs: Vec<CVector> =
        modes.iter().zip(&u).map(|(c, u)| &ss.c * c + &ss.d * u).collect();
    let flux = |series: &[CVector]| {
        simpson(grid.dt, &series.iter().map(|v| v.norm_squared()).collect::<Vec<_>>())
    };
    let energy_residual = modes.last().unwrap().norm_squared() + flux(&outputs)
        - c0.norm_squared()
        - flux(&u);
    Ok(Trajectory { grid, modes, outputs, inputs: u, energy_residual })
}

/// Stage boundaries and step of a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolTimes {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub dt: f64,
}

impl ProtocolTimes {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.t0, self.t1, self.t2, self.t3, self.dt].iter().all(|x| x.is_finite())
            && self.t0 < self.t1
            && self.t1 < self.t2
            && self.t2 < self.t3;
        if !ok {
            return Err(Error::InvalidTimes(format!(
                "need t0 < t1 < t2 < t3, got {} {} {} {}",
                self.t0, self.t1, self.t2, self.t3
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidTimes(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationKind {
    SinglePhoton,
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageResiduals {
    pub write: f64,
    pub storage: f64,
    pub readout: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolResult {
    pub mode: ExcitationKind,
    pub n_qubits: usize,
    pub gamma: f64,
    pub stage_boundaries: ProtocolTimes,
    /// Fraction of the target excitation found in the decoherence-free modes
    /// at the end of writing.
    pub write_efficiency: f64,
    pub module_populations: Vec<f64>,
    #[serde(with = "serde_cvec")]
    pub stored_amplitudes: Vec<Complex64>,
    /// Largest change of any stored amplitude's modulus during storage.
    pub storage_drift: f64,
    /// `|⟨expected emission, output⟩|² / ‖target‖²`.
    pub readout_overlap: f64,
    /// Same overlap measured against the superposition of read pulses.
    pub read_pulse_overlap: f64,
    #[serde(with = "serde_cvec")]
    pub retrieved_amplitudes: Vec<Complex64>,
    /// Phase of `⟨target, retrieved⟩`.
    pub retrieval_phase: f64,
    pub roundtrip_fidelity: f64,
    pub energy_residuals: StageResiduals,
    pub write_pulse_norm_constants: Vec<f64>,
    /// Largest `|⟨ξ_j, ξ_k⟩|`, `j ≠ k`, over the normalized write pulses.
    pub write_pulse_max_overlap: f64,
    pub storage_state: Option<StorageState>,
    pub warnings: Vec<String>,
}

/// Everything a protocol run needs about the two routings.
pub struct MemorySystems {
    /// Write/read routing in rotated coordinates.
    pub transfer: StateSpace,
    /// Storage routing in rotated coordinates.
    pub storage: StateSpace,
    pub rotation: CMatrix,
    pub dfs_indices: Vec<usize>,
}

/// Build both routings of `spec` and rotate them into the coordinates in
/// which the storage routing's decoherence-free modes are isolated.
pub fn memory_systems(spec: &MemorySpec) -> Result<MemorySystems> {
    let storage = to_state_space(&qudit_config(spec, Routing::Storage)?);
    let dfs = dfs_decompose(&storage)?;
    if dfs.dfs_indices.len() != spec.n_qubits {
        return Err(Error::Numerical(format!(
            "storage routing has {} decoherence-free modes, expected {}",
            dfs.dfs_indices.len(),
            spec.n_qubits
        )));
    }
    let transfer = rotate(&to_state_space(&qudit_config(spec, Routing::WriteRead)?), &dfs.u)?;
    Ok(MemorySystems {
        transfer,
        storage: dfs.rotated,
        rotation: dfs.u,
        dfs_indices: dfs.dfs_indices,
    })
}

/// Full write/store/read cycle for the single-photon state
/// `alpha0 |vac⟩ + Σ beta_k |1_{ξ_k}⟩`.
pub fn run_protocol(
    spec: &MemorySpec,
    beta: &[Complex64],
    alpha0: Complex64,
    times: ProtocolTimes,
) -> Result<ProtocolResult> {
    let norm_sqr = alpha0.norm_sqr() + beta.iter().map(|b| b.norm_sqr()).sum::<f64>();
    if (norm_sqr - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { norm_sqr });
    }
    run_stages(spec, beta, Some(alpha0), times)
}

/// Same cycle for a coherent input `f = Σ α_k ξ_k`; amplitudes are mean
/// fields and need not be normalized.
pub fn coherent_run(
    spec: &MemorySpec,
    amplitudes: &[Complex64],
    times: ProtocolTimes,
) -> Result<ProtocolResult> {
    run_stages(spec, amplitudes, None, times)
}

fn run_stages(
    spec: &MemorySpec,
    target: &[Complex64],
    alpha0: Option<Complex64>,
    times: ProtocolTimes,
) -> Result<ProtocolResult> {
    spec.validate()?;
    times.validate()?;
    if target.len() != spec.n_qubits {
        return Err(Error::Dimension(format!(
            "{} amplitudes for {} modules",
            target.len(),
            spec.n_qubits
        )));
    }
    let mut warnings = Vec::new();
    if (times.t1 - times.t0) * spec.gamma < MIN_WRITE_WINDOW {
        warnings.push(format!(
            "writing window {}/gamma is short; truncation error dominates",
            (times.t1 - times.t0) * spec.gamma
        ));
    }

    let sys = memory_systems(spec)?;
    let dfs = &sys.dfs_indices;
    let n = sys.transfer.n_modes();

    let writes = write_pulses(&sys.transfer, dfs, times.t0, times.t1, times.dt)?;
    let mut write_pulse_max_overlap: f64 = 0.0;
    for j in 0..writes.len() {
        for k in (j + 1)..writes.len() {
            write_pulse_max_overlap = write_pulse_max_overlap.max(overlap(&writes[j], &writes[k])?.norm());
        }
    }
    let drive = Pulse::combine("input", target, &writes)?;

    let zero = CVector::zeros(n);
    let write = propagate(&sys.transfer, &[drive], &zero, times.t0, times.t1, times.dt)?;
    let after_write = write.final_state().clone();
    let stored: Vec<Complex64> = dfs.iter().map(|&d| after_write[d]).collect();

    let store = propagate(&sys.storage, &[], &after_write, times.t1, times.t2, times.dt)?;
    let storage_drift = store
        .modes
        .iter()
        .flat_map(|c| dfs.iter().zip(&stored).map(move |(&d, s)| (c[d].norm() - s.norm()).abs()))
        .fold(0.0, f64::max);

    let read = propagate(&sys.transfer, &[], store.final_state(), times.t2, times.t3, times.dt)?;
    let emitted = read.output_pulse(0, "output");

    let emissions = emission_pulses(&sys.transfer, dfs, times.t2, times.t3, times.dt)?;
    let retrieved = emissions.iter().map(|e| overlap(e, &emitted)).collect::<Result<Vec<_>>>()?;
    let reads = read_pulses(&sys.transfer, dfs, times.t2, times.t3, times.dt)?;

    let target_sqr: f64 = target.iter().map(|z| z.norm_sqr()).sum();
    let stored_sqr: f64 = stored.iter().map(|z| z.norm_sqr()).sum();
    let projected_overlap = |basis: &[Pulse]| -> Result<f64> {
        if target_sqr == 0.0 {
            return Ok(if emitted.norm() == 0.0 { 1.0 } else { 0.0 });
        }
        let expected = Pulse::combine("expected", target, basis)?;
        let en = expected.norm();
        if en == 0.0 {
            return Ok(0.0);
        }
        Ok(overlap(&expected, &emitted)?.norm_sqr() / (en * en) / target_sqr)
    };
    let readout_overlap = projected_overlap(&emissions)?;
    let read_pulse_overlap = projected_overlap(&reads)?;

    let inner: Complex64 = target.iter().zip(&retrieved).map(|(t, r)| t.conj() * r).sum();
    let (write_efficiency, roundtrip_fidelity) = if target_sqr == 0.0 {
        let quiet = stored_sqr == 0.0 && retrieved.iter().all(|r| r.norm() == 0.0);
        let v = if quiet { 1.0 } else { 0.0 };
        (v, v)
    } else {
        (stored_sqr / target_sqr, inner.norm_sqr() / (target_sqr * target_sqr))
    };

    let storage_state = match alpha0 {
        Some(a0) => {
            let scale = (a0.norm_sqr() + stored_sqr).sqrt();
            if scale > 0.0 {
                let amps: Vec<Complex64> = stored.iter().map(|z| z / scale).collect();
                Some(storage_state(a0 / scale, &amps)?)
            } else {
                None
            }
        }
        None => None,
    };

    Ok(ProtocolResult {
        mode: if alpha0.is_some() { ExcitationKind::SinglePhoton } else { ExcitationKind::Coherent },
        n_qubits: spec.n_qubits,
        gamma: spec.gamma,
        stage_boundaries: times,
        write_efficiency,
        module_populations: stored.iter().map(|z| z.norm_sqr()).collect(),
        stored_amplitudes: stored,
        storage_drift,
        readout_overlap,
        read_pulse_overlap,
        retrieved_amplitudes: retrieved,
        retrieval_phase: inner.arg(),
        roundtrip_fidelity,
        energy_residuals: StageResiduals {
            write: write.energy_residual,
            storage: store.energy_residual,
            readout: read.energy_residual,
        },
        write_pulse_norm_constants: writes.iter().map(|p| p.norm_constant).collect(),
        write_pulse_max_overlap,
        storage_state,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageRow {
    pub epsilon: f64,
    /// Perturbed mirror rate.
    pub rate: f64,
    /// `−ln(|⟨v, c(T)⟩|²)/T` for the ideal stored mode `v`.
    pub leakage_rate: f64,
    /// `−2 · max Re λ(A)` of the perturbed storage drift.
    pub spectral_rate: f64,
    pub max_real_eigenvalue: f64,
}

/// Leakage of the ideal decoherence-free mode when one mirror rate is
/// scaled by `1 + ε`. Points are evaluated in parallel on the current
/// rayon pool; row order follows `deviations`.
pub fn mismatch_sweep(
    spec: &MemorySpec,
    deviations: &[f64],
    storage_duration: f64,
    mirror: Mirror,
) -> Result<Vec<LeakageRow>> {
    spec.validate()?;
    if !(storage_duration > 0.0 && storage_duration.is_finite()) {
        return Err(Error::InvalidTimes(format!("storage duration must be positive, got {storage_duration}")));
    }
    let ideal = dfs_decompose(&to_state_space(&qudit_config(spec, Routing::Storage)?))?;
    let &first = ideal
        .dfs_indices
        .first()
        .ok_or_else(|| Error::Numerical("baseline has no decoherence-free mode".into()))?;
    let stored_mode: CVector = ideal.u.column(first).into_owned();
    let idx = match mirror {
        Mirror::P1 => 0,
        Mirror::P2 => 1,
        Mirror::C1 => 2,
        Mirror::C2 => 3,
    };
    let base = spec.rates()[idx];

    deviations
        .par_iter()
        .map(|&epsilon| {
            if !(epsilon > -1.0 && epsilon.is_finite()) {
                return Err(Error::InvalidParameter(format!("deviation must exceed -1, got {epsilon}")));
            }
            let rate = base * (1.0 + epsilon);
            let perturbed = spec.clone().with_mirror(mirror, rate);
            let ss = to_state_space(&qudit_config(&perturbed, Routing::Storage)?);
            let evolved = expm(&(&ss.a * c64(storage_duration, 0.0))) * &stored_mode;
            let survival = stored_mode.dotc(&evolved).norm_sqr();
            let max_real = eigenvalues(&ss.a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            Ok(LeakageRow {
                epsilon,
                rate,
                leakage_rate: -survival.ln() / storage_duration,
                spectral_rate: -2.0 * max_real,
                max_real_eigenvalue: max_real,
            })
        })
        .collect()
}
