use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use qmem_core::linalg::{fmt_f64, serde_cmatrix, serde_cvec, CVector};
use qmem_core::linear::{AnalysisReport, StateSpace};
use qmem_core::pulse::{emission_pulses, overlap, read_pulses, write_pulses, Pulse, PulseMeta};
use qmem_core::sim::{memory_systems, propagate, LeakageRow, ProtocolTimes};
use qmem_core::{
    analyze, coherent_run, mismatch_sweep, netdsl, qudit_config, run_protocol, to_state_space,
    MemorySpec, Mirror, Routing, SlhModel,
};

mod preset;

use preset::Preset;

#[derive(Parser)]
#[command(name = "qmem", version, about = "Passive linear quantum memory toolkit")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write results here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a network to its SLH model and state-space form.
    Reduce(SystemArgs),
    /// Spectrum, ranks, stability, decoherence-free modes and passivity.
    Analyze(SystemArgs),
    /// Write, read or emission envelopes of a memory.
    Pulse(PulseArgs),
    /// One propagation run of a single system.
    Simulate(SimulateArgs),
    /// Full write, store and read cycle.
    Protocol(ProtocolArgs),
    /// Leakage of the stored mode under a detuned mirror.
    Sweep(SweepArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SystemArgs {
    /// qubit1, qubit2, quditN-1, quditN-2 (N from --n) or e.g. qudit3-2.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    preset: Option<String>,
    /// A .qnet network or a JSON model.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    n: usize,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct MemoryArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

impl MemoryArgs {
    fn spec(&self) -> MemorySpec {
        MemorySpec::new(self.n, self.gamma)
    }
}

#[derive(Args, Clone, Copy)]
#[command(allow_negative_numbers = true)]
struct TimeArgs {
    #[arg(long, default_value_t = -60.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.0)]
    t1: f64,
    #[arg(long, default_value_t = 100.0)]
    t2: f64,
    #[arg(long, default_value_t = 160.0)]
    t3: f64,
    #[arg(long, default_value_t = qmem_core::pulse::DEFAULT_DT)]
    dt: f64,
}

impl TimeArgs {
    fn protocol(&self) -> ProtocolTimes {
        ProtocolTimes { t0: self.t0, t1: self.t1, t2: self.t2, t3: self.t3, dt: self.dt }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PulseKind {
    Write,
    Read,
    Emission,
}

#[derive(Args)]
struct PulseArgs {
    #[command(flatten)]
    memory: MemoryArgs,
    #[arg(long, value_enum, default_value = "write")]
    kind: PulseKind,
    /// Pulse to print as CSV, counting from 1.
    #[arg(long, default_value_t = 1)]
    index: usize,
    #[command(flatten)]
    times: TimeArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Frame {
    Rotated,
    Original,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Presets only: basis that isolates the decoherence-free modes.
    #[arg(long, value_enum, default_value = "rotated")]
    frame: Frame,
    /// Initial mode amplitudes, comma separated (default all zero).
    #[arg(long, allow_hyphen_values = true)]
    c0: Option<String>,
    /// Drive input 1 with this superposition of write pulses (presets only).
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, default_value_t = -60.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.0)]
    t1: f64,
    #[arg(long, default_value_t = qmem_core::pulse::DEFAULT_DT)]
    dt: f64,
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    memory: MemoryArgs,
    /// Per-module amplitudes, comma separated; complex as a+bi.
    #[arg(long, allow_hyphen_values = true, default_value = "1")]
    beta: String,
    /// Vacuum amplitude; defaults to the real value that normalizes the state.
    #[arg(long, allow_hyphen_values = true)]
    alpha0: Option<String>,
    /// Treat --beta as coherent mean-field amplitudes.
    #[arg(long)]
    coherent: bool,
    #[command(flatten)]
    times: TimeArgs,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[command(flatten)]
    memory: MemoryArgs,
    /// Relative rate deviations, comma separated.
    #[arg(long, allow_hyphen_values = true, default_value = "0,0.001,0.01,0.05")]
    eps: String,
    /// Storage time over which leakage is measured.
    #[arg(long, default_value_t = 100.0)]
    duration: f64,
    /// Mirror whose rate is perturbed: p1, p2, c1 or c2.
    #[arg(long, default_value = "c1")]
    mirror: String,
}

/// Failures of the caller's input, as opposed to the numerics.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<qmem_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads().and_then(|_| run(&cli)) {
        eprintln!("error: {e:#}");
        return ExitCode::from(exit_code(&e));
    }
    ExitCode::SUCCESS
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("QMEM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("QMEM_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let text = match &cli.command {
        Command::Reduce(a) => {
            only_json(cli.format, "reduce")?;
            reduce(a)?
        }
        Command::Analyze(a) => {
            only_json(cli.format, "analyze")?;
            analyze_cmd(a)?
        }
        Command::Pulse(a) => pulse(a, cli.format.unwrap_or(Format::Csv))?,
        Command::Simulate(a) => simulate(a, cli.format.unwrap_or(Format::Csv))?,
        Command::Protocol(a) => {
            only_json(cli.format, "protocol")?;
            protocol(a)?
        }
        Command::Sweep(a) => sweep(a, cli.format.unwrap_or(Format::Json))?,
    };
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            other => Ok(other?),
        },
    }
}

fn only_json(format: Option<Format>, cmd: &str) -> anyhow::Result<()> {
    match format {
        Some(Format::Csv) => Err(usage(format!("{cmd} writes JSON only"))),
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

fn parse_complex_list(raw: &str, what: &str) -> anyhow::Result<Vec<Complex64>> {
    raw.split(',')
        .map(|item| parse_complex(item.trim(), what))
        .collect()
}

fn parse_complex(item: &str, what: &str) -> anyhow::Result<Complex64> {
    let z = Complex64::from_str(item)
        .map_err(|_| usage(format!("{what}: '{item}' is not a number (use a, bi or a+bi)")))?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(usage(format!("{what}: '{item}' is not finite")));
    }
    Ok(z)
}

fn parse_f64_list(raw: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    raw.split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{what}: '{}' is not a number", item.trim())))
        })
        .collect()
}

/// Wrap input-side failures of the core library so they exit with status 1.
fn core<T>(r: qmem_core::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| if e.is_numerical() { anyhow::Error::new(e) } else { usage(e.to_string()) })
}

struct LoadedSystem {
    source: String,
    model: SlhModel,
    preset: Option<Preset>,
}

fn load_system(a: &SystemArgs) -> anyhow::Result<LoadedSystem> {
    if let Some(name) = &a.preset {
        let preset = Preset::parse(name, a.n, a.gamma).map_err(usage)?;
        let model = core(qudit_config(&preset.spec, preset.routing))?;
        return Ok(LoadedSystem { source: preset.name(), model, preset: Some(preset) });
    }
    let path = a.input.as_ref().ok_or_else(|| usage("one of --preset or --input is required"))?;
    let model = load_model_file(path)?;
    Ok(LoadedSystem { source: path.display().to_string(), model, preset: None })
}

fn load_model_file(path: &Path) -> anyhow::Result<SlhModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    } else {
        let desc =
            netdsl::parse(&text).map_err(|d| usage(format!("{}:{d}", path.display())))?;
        netdsl::compile(&desc).map_err(|e| {
            if e.is_numerical() {
                anyhow::Error::new(e).context(path.display().to_string())
            } else {
                usage(format!("{}:{e}", path.display()))
            }
        })
    }
}

#[derive(Serialize)]
struct ReduceOutput<'a> {
    source: &'a str,
    model: &'a SlhModel,
    state_space: &'a StateSpace,
}

fn reduce(a: &SystemArgs) -> anyhow::Result<String> {
    let sys = load_system(a)?;
    let ss = to_state_space(&sys.model);
    to_json(&ReduceOutput { source: &sys.source, model: &sys.model, state_space: &ss })
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    source: &'a str,
    n_modes: usize,
    n_ports: usize,
    #[serde(flatten)]
    report: AnalysisReport,
    #[serde(rename = "U", with = "serde_cmatrix")]
    rotation: qmem_core::linalg::CMatrix,
    rotated: StateSpace,
}

fn analyze_cmd(a: &SystemArgs) -> anyhow::Result<String> {
    let sys = load_system(a)?;
    let ss = to_state_space(&sys.model);
    let report = core(analyze(&ss))?;
    let dfs = core(qmem_core::dfs_decompose(&ss))?;
    to_json(&AnalyzeOutput {
        source: &sys.source,
        n_modes: sys.model.n_modes(),
        n_ports: sys.model.n_ports(),
        report,
        rotation: dfs.u,
        rotated: dfs.rotated,
    })
}

#[derive(Serialize)]
struct PulseOutput {
    n_qubits: usize,
    gamma: f64,
    kind: &'static str,
    t_start: f64,
    t_end: f64,
    pulses: Vec<PulseMeta>,
    /// `|⟨p_j, p_k⟩|` for every pair.
    overlaps: Vec<Vec<f64>>,
}

fn pulse(a: &PulseArgs, format: Format) -> anyhow::Result<String> {
    let spec = a.memory.spec();
    core(spec.validate())?;
    let sys = core(memory_systems(&spec))?;
    let t = a.times;
    let (kind, t_start, t_end) = match a.kind {
        PulseKind::Write => ("write", t.t0, t.t1),
        PulseKind::Read => ("read", t.t2, t.t3),
        PulseKind::Emission => ("emission", t.t2, t.t3),
    };
    let make = match a.kind {
        PulseKind::Write => write_pulses,
        PulseKind::Read => read_pulses,
        PulseKind::Emission => emission_pulses,
    };
    let pulses: Vec<Pulse> = core(make(&sys.transfer, &sys.dfs_indices, t_start, t_end, t.dt))?;
    match format {
        Format::Csv => {
            let p = a
                .index
                .checked_sub(1)
                .and_then(|i| pulses.get(i))
                .ok_or_else(|| usage(format!("--index must lie in 1..={}", pulses.len())))?;
            Ok(p.to_csv())
        }
        Format::Json => {
            let overlaps = pulses
                .iter()
                .map(|p| pulses.iter().map(|q| Ok(overlap(p, q)?.norm())).collect())
                .collect::<qmem_core::Result<Vec<Vec<f64>>>>();
            to_json(&PulseOutput {
                n_qubits: spec.n_qubits,
                gamma: spec.gamma,
                kind,
                t_start,
                t_end,
                pulses: pulses.iter().map(Pulse::metadata).collect(),
                overlaps: core(overlaps)?,
            })
        }
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    source: &'a str,
    frame: &'static str,
    t_start: f64,
    t_end: f64,
    dt: f64,
    steps: usize,
    energy_residual: f64,
    #[serde(with = "serde_cvec")]
    initial_state: Vec<Complex64>,
    #[serde(with = "serde_cvec")]
    final_state: Vec<Complex64>,
    /// `∫|η_j|²` per output port, trapezoid rule.
    output_energy: Vec<f64>,
}

fn simulate(a: &SimulateArgs, format: Format) -> anyhow::Result<String> {
    let sys = load_system(&a.system)?;
    let (ss, frame, drive) = match (&sys.preset, a.frame) {
        (Some(p), Frame::Rotated) => {
            let mem = core(memory_systems(&p.spec))?;
            let ss = match p.routing {
                Routing::WriteRead => mem.transfer.clone(),
                Routing::Storage => mem.storage.clone(),
            };
            let drive = match &a.beta {
                Some(raw) => {
                    let beta = parse_complex_list(raw, "--beta")?;
                    let writes =
                        core(write_pulses(&mem.transfer, &mem.dfs_indices, a.t0, a.t1, a.dt))?;
                    let xi = core(Pulse::combine("input", &beta, &writes))?;
                    let mut inputs = vec![Pulse::zero("vacuum", xi.grid); ss.n_inputs()];
                    inputs[0] = xi;
                    inputs
                }
                None => Vec::new(),
            };
            (ss, "rotated", drive)
        }
        _ => {
            if a.beta.is_some() {
                return Err(usage("--beta needs a preset in the rotated frame"));
            }
            (to_state_space(&sys.model), "original", Vec::new())
        }
    };
    let c0 = match &a.c0 {
        Some(raw) => {
            let v = parse_complex_list(raw, "--c0")?;
            if v.len() != ss.n_modes() {
                return Err(usage(format!("--c0 has {} entries, the system has {} modes", v.len(), ss.n_modes())));
            }
            CVector::from_vec(v)
        }
        None => CVector::zeros(ss.n_modes()),
    };
    let traj = core(propagate(&ss, &drive, &c0, a.t0, a.t1, a.dt))?;
    match format {
        Format::Csv => Ok(traj.to_csv()),
        Format::Json => {
            let output_energy = (0..ss.n_outputs())
                .map(|j| traj.output_pulse(j, "out").norm().powi(2))
                .collect();
            to_json(&SimulateOutput {
                source: &sys.source,
                frame,
                t_start: traj.grid.t0,
                t_end: traj.grid.t_end(),
                dt: traj.grid.dt,
                steps: traj.grid.steps,
                energy_residual: traj.energy_residual,
                initial_state: c0.iter().copied().collect(),
                final_state: traj.final_state().iter().copied().collect(),
                output_energy,
            })
        }
    }
}

fn protocol(a: &ProtocolArgs) -> anyhow::Result<String> {
    let spec = a.memory.spec();
    let beta = parse_complex_list(&a.beta, "--beta")?;
    let times = a.times.protocol();
    let result = if a.coherent {
        if a.alpha0.is_some() {
            return Err(usage("--alpha0 applies to single-photon runs only"));
        }
        core(coherent_run(&spec, &beta, times))?
    } else {
        let alpha0 = match &a.alpha0 {
            Some(raw) => parse_complex(raw.trim(), "--alpha0")?,
            None => {
                let rest = 1.0 - beta.iter().map(|b| b.norm_sqr()).sum::<f64>();
                if rest < -1e-9 {
                    return Err(usage("--beta has norm above 1; pass --coherent for mean-field amplitudes"));
                }
                Complex64::new(rest.max(0.0).sqrt(), 0.0)
            }
        };
        core(run_protocol(&spec, &beta, alpha0, times))?
    };
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    to_json(&result)
}

#[derive(Serialize)]
struct SweepOutput {
    n_qubits: usize,
    gamma: f64,
    mirror: String,
    duration: f64,
    rows: Vec<LeakageRow>,
}

fn sweep(a: &SweepArgs, format: Format) -> anyhow::Result<String> {
    let spec = a.memory.spec();
    let eps = parse_f64_list(&a.eps, "--eps")?;
    let mirror = Mirror::from_str(&a.mirror).map_err(|e| usage(e.to_string()))?;
    let rows = core(mismatch_sweep(&spec, &eps, a.duration, mirror))?;
    match format {
        Format::Json => to_json(&SweepOutput {
            n_qubits: spec.n_qubits,
            gamma: spec.gamma,
            mirror: a.mirror.to_ascii_lowercase(),
            duration: a.duration,
            rows,
        }),
        Format::Csv => {
            let mut out = String::from("epsilon,rate,leakage_rate,spectral_rate,max_real_eigenvalue\n");
            for r in rows {
                let cells = [r.epsilon, r.rate, r.leakage_rate, r.spectral_rate, r.max_real_eigenvalue];
                let cells: Vec<String> = cells.into_iter().map(fmt_f64).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            Ok(out)
        }
    }
}
