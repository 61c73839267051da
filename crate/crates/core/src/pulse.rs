//! Temporal wavepackets on uniform grids, and the write/read envelopes that
//! address decoherence-free modes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, fmt_f64, CMatrix, CVector};
use crate::linear::{is_hurwitz, StateSpace};

/// Default step, in units of `1/γ`.
pub const DEFAULT_DT: f64 = 1e-3;

/// Uniform time grid `t0, t0 + dt, …, t0 + steps·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Grid {
    /// Grid spanning `[t_start, t_end]` with the step adjusted so that the
    /// span is a whole number of steps.
    pub fn spanning(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(Error::InvalidTimes(format!("need t_start < t_end, got [{t_start}, {t_end}]")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidTimes(format!("dt must be positive, got {dt}")));
        }
        let span = t_end - t_start;
        let steps = (span / dt).round().max(1.0);
        if steps > 1e8 {
            return Err(Error::InvalidTimes(format!("{steps} steps is too many")));
        }
        Ok(Grid { t0: t_start, dt: span / steps, steps: steps as usize })
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    fn same_as(&self, other: &Grid) -> bool {
        let scale = self.t0.abs().max(other.t0.abs()).max(1.0);
        self.steps == other.steps
            && (self.t0 - other.t0).abs() <= 1e-9 * scale
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt.max(other.dt)
    }
}

/// Trapezoid rule on a uniform step.
pub fn trapezoid(dt: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (k, v) in values.enumerate() {
        sum += if k == 0 || k == n - 1 { 0.5 * v } else { v };
    }
    sum * dt
}

/// Composite Simpson rule on a uniform step; an odd number of intervals
/// closes with the three-eighths rule. Falls back to the trapezoid rule
/// below three intervals.
pub fn simpson(dt: f64, values: &[f64]) -> f64 {
    let intervals = values.len().saturating_sub(1);
    if intervals < 3 {
        return trapezoid(dt, values.iter().copied());
    }
    let (even, tail) = if intervals % 2 == 0 { (intervals, 0) } else { (intervals - 3, 3) };
    let mut sum = 0.0;
    if even > 0 {
        sum += values[0] + values[even];
        for k in 1..even {
            sum += if k % 2 == 1 { 4.0 * values[k] } else { 2.0 * values[k] };
        }
        sum *= dt / 3.0;
    }
    if tail > 0 {
        let f = &values[even..];
        sum += 3.0 * dt / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3]);
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub label: String,
    pub grid: Grid,
    pub samples: Vec<Complex64>,
    /// L² norm before normalization (1 for pulses built directly).
    pub norm_constant: f64,
    pub normalized: bool,
    /// Switch time for write pulses, release time for read pulses.
    pub anchor: f64,
}

/// Sidecar metadata written next to a pulse CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseMeta {
    pub label: String,
    pub norm_constant: f64,
    pub t_switch: f64,
    pub dt: f64,
}

impl Pulse {
    pub fn from_samples(label: impl Into<String>, grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-point grid",
                samples.len(),
                grid.len()
            )));
        }
        Ok(Pulse {
            label: label.into(),
            grid,
            samples,
            norm_constant: 1.0,
            normalized: false,
            anchor: grid.t_end(),
        })
    }

    pub fn from_fn(
        label: impl Into<String>,
        grid: Grid,
        f: impl Fn(f64) -> Complex64,
    ) -> Self {
        let samples = grid.times().map(f).collect();
        Pulse::from_samples(label, grid, samples).expect("length matches grid")
    }

    pub fn zero(label: impl Into<String>, grid: Grid) -> Self {
        Pulse::from_samples(label, grid, vec![Complex64::new(0.0, 0.0); grid.len()])
            .expect("length matches grid")
    }

    pub fn t0(&self) -> f64 {
        self.grid.t0
    }

    pub fn t1(&self) -> f64 {
        self.grid.t_end()
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    /// Divide by the L² norm, recording it in `norm_constant`.
    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical(format!("pulse '{}' has zero norm", self.label)));
        }
        for z in &mut self.samples {
            *z /= n;
        }
        self.norm_constant = n;
        self.normalized = true;
        Ok(self)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut p = self.clone();
        for z in &mut p.samples {
            *z *= factor;
        }
        p.normalized = false;
        p
    }

    /// `Σ_k coeffs[k] · pulses[k]`; all pulses must share a grid.
    pub fn combine(label: impl Into<String>, coeffs: &[Complex64], pulses: &[Pulse]) -> Result<Self> {
        let first = pulses.first().ok_or_else(|| Error::GridMismatch("no pulses to combine".into()))?;
        if coeffs.len() != pulses.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} pulses",
                coeffs.len(),
                pulses.len()
            )));
        }
        let mut samples = vec![Complex64::new(0.0, 0.0); first.samples.len()];
        for (c, p) in coeffs.iter().zip(pulses) {
            check_grids(first, p)?;
            for (acc, z) in samples.iter_mut().zip(&p.samples) {
                *acc += c * z;
            }
        }
        let mut out = Pulse::from_samples(label, first.grid, samples)?;
        out.anchor = first.anchor;
        Ok(out)
    }

    /// Samples of this pulse at the points of `grid`; zero outside its
    /// support. Every grid point inside the support must land on a sample.
    pub fn on_grid(&self, grid: &Grid) -> Result<Vec<Complex64>> {
        let tol = 1e-6;
        grid.times()
            .map(|t| {
                let f = (t - self.grid.t0) / self.grid.dt;
                let j = f.round();
                if j < -tol || j > self.grid.steps as f64 + tol {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                if (f - j).abs() > tol {
                    return Err(Error::GridMismatch(format!(
                        "time {t} falls between samples of pulse '{}'",
                        self.label
                    )));
                }
                Ok(self.samples[j.clamp(0.0, self.grid.steps as f64) as usize])
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re,im\n");
        for (t, z) in self.grid.times().zip(&self.samples) {
            out.push_str(&format!("{},{},{}\n", fmt_f64(t), fmt_f64(z.re), fmt_f64(z.im)));
        }
        out
    }

    pub fn metadata(&self) -> PulseMeta {
        PulseMeta {
            label: self.label.clone(),
            norm_constant: self.norm_constant,
            t_switch: self.anchor,
            dt: self.grid.dt,
        }
    }
}

fn check_grids(p: &Pulse, q: &Pulse) -> Result<()> {
    if p.grid.same_as(&q.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "'{}' on [{}, {}] step {} vs '{}' on [{}, {}] step {}",
            p.label,
            p.t0(),
            p.t1(),
            p.dt(),
            q.label,
            q.t0(),
            q.t1(),
            q.dt()
        )))
    }
}

/// `∫ p(t)* q(t) dt` by the trapezoid rule.
pub fn overlap(p: &Pulse, q: &Pulse) -> Result<Complex64> {
    check_grids(p, q)?;
    let n = p.samples.len();
    if n < 2 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, (a, b)) in p.samples.iter().zip(&q.samples).enumerate() {
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        sum += a.conj() * b * w;
    }
    Ok(sum * p.grid.dt)
}

pub fn norm(p: &Pulse) -> f64 {
    trapezoid(p.grid.dt, p.samples.iter().map(|z| z.norm_sqr())).sqrt()
}

fn conj_entries(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

/// +1 when `m` is stable, −1 when `−m` is.
fn stable_sign(m: &CMatrix) -> Result<f64> {
    let probe = |a: CMatrix| {
        let n = a.nrows();
        is_hurwitz(&StateSpace {
            a,
            b: CMatrix::zeros(n, 0),
            c: CMatrix::zeros(0, n),
            d: CMatrix::zeros(0, 0),
        })
        .hurwitz
    };
    if probe(m.clone()) {
        Ok(1.0)
    } else if probe(-m) {
        Ok(-1.0)
    } else {
        Err(Error::NoRisingExponential)
    }
}

fn check_indices(rotated: &StateSpace, dfs_indices: &[usize]) -> Result<()> {
    rotated.check_dimensions()?;
    if rotated.n_outputs() == 0 {
        return Err(Error::Dimension("system has no output port".into()));
    }
    if let Some(&d) = dfs_indices.iter().find(|&&d| d >= rotated.n_modes()) {
        return Err(Error::Dimension(format!("mode index {d} out of range")));
    }
    Ok(())
}

/// Samples `exp(sign·M·τ_k) v0` for `τ_k = k·dt`, `k = 0..=steps`.
fn exp_orbit(m: &CMatrix, sign: f64, v0: CVector, dt: f64, steps: usize) -> Vec<CVector> {
    let step = expm(&(m * Complex64::new(sign * dt, 0.0)));
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = v0;
    for _ in 0..steps {
        let next = &step * &v;
        out.push(v);
        v = next;
    }
    out.push(v);
    out
}

/// Write envelopes `ν(t) = −exp(Ã^♯ (t_switch − t)) C̃ᵀ` restricted to the
/// given modes, one normalized pulse per mode, on `[t_start, t_switch]`.
///
/// The exponent sign is taken from whichever of `±Ã^♯` is stable, so the
/// envelope rises out of the past. The first output port is used.
pub fn write_pulses(
    rotated: &StateSpace,
    dfs_indices: &[usize],
    t_start: f64,
    t_switch: f64,
    dt: f64,
) -> Result<Vec<Pulse>> {
    check_indices(rotated, dfs_indices)?;
    let grid = Grid::spanning(t_start, t_switch, dt)?;
    let m = conj_entries(&rotated.a);
    let sign = stable_sign(&m)?;
    let c_t = rotated.c.row(0).transpose();
    // orbit[j] is ν at τ = j·dt, i.e. at grid point steps − j.
    let orbit = exp_orbit(&m, sign, c_t, grid.dt, grid.steps);
    dfs_indices
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let samples = (0..grid.len()).map(|i| -orbit[grid.steps - i][d]).collect();
            let mut p = Pulse::from_samples(format!("write_{}", k + 1), grid, samples)?;
            p.anchor = t_switch;
            p.normalize()
        })
        .collect()
}

/// Read envelopes `ν′(t) = exp(Ã^♯ (t − t_release)) C̃ᵀ` restricted to the
/// given modes, on `[t_release, t_end]`.
pub fn read_pulses(
    rotated: &StateSpace,
    dfs_indices: &[usize],
    t_release: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<Pulse>> {
    check_indices(rotated, dfs_indices)?;
    let grid = Grid::spanning(t_release, t_end, dt)?;
    let m = conj_entries(&rotated.a);
    let sign = stable_sign(&m)?;
    let c_t = rotated.c.row(0).transpose();
    let orbit = exp_orbit(&m, sign, c_t, grid.dt, grid.steps);
    dfs_indices
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let samples = orbit.iter().map(|v| v[d]).collect();
            let mut p = Pulse::from_samples(format!("read_{}", k + 1), grid, samples)?;
            p.anchor = t_release;
            p.normalize()
        })
        .collect()
}

/// Output envelope `C̃ exp(Ã (t − t_release)) e_d` emitted on the first
/// port when mode `d` alone holds the excitation at `t_release`.
pub fn emission_pulses(
    rotated: &StateSpace,
    mode_indices: &[usize],
    t_release: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<Pulse>> {
    check_indices(rotated, mode_indices)?;
    let grid = Grid::spanning(t_release, t_end, dt)?;
    let sign = stable_sign(&rotated.a)?;
    if sign < 0.0 {
        return Err(Error::NoRisingExponential);
    }
    // Row orbit of C̃ exp(Ãτ), computed as the column orbit of exp(Ãᵀτ) C̃ᵀ.
    let a_t = rotated.a.transpose();
    let c_t = rotated.c.row(0).transpose();
    let orbit = exp_orbit(&a_t, 1.0, c_t, grid.dt, grid.steps);
    mode_indices
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let samples = orbit.iter().map(|v| v[d]).collect();
            let mut p = Pulse::from_samples(format!("emission_{}", k + 1), grid, samples)?;
            p.anchor = t_release;
            p.normalize()
        })
        .collect()
}
