use std::path::PathBuf;

use proptest::prelude::*;
use qmem_core::linalg::max_abs_diff;
use qmem_core::{netdsl, qubit_config, to_state_space, MemorySpec, Routing};

fn networks() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("networks")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(networks().join(rel)).unwrap()
}

#[test]
fn bundled_networks_reproduce_presets() {
    let spec = MemorySpec::new(1, 1.0);
    for (file, routing) in [("qubit_config1.qnet", Routing::WriteRead), ("qubit_config2.qnet", Routing::Storage)] {
        let dsl = netdsl::compile(&netdsl::parse(&read(file)).unwrap()).unwrap();
        let preset = qubit_config(&spec, routing).unwrap();
        assert_eq!(dsl.s().shape(), preset.s().shape(), "{file}");
        assert!(max_abs_diff(dsl.s(), preset.s()) <= 1e-12, "{file}");
        assert!(max_abs_diff(dsl.k(), preset.k()) <= 1e-12, "{file}");
        assert!(max_abs_diff(dsl.omega(), preset.omega()) <= 1e-12, "{file}");
    }
}

#[test]
fn scaled_parameter_scales_the_drift() {
    let src = read("qubit_config1.qnet").replace("param g = 1", "param g = 2.5");
    let dsl = netdsl::compile(&netdsl::parse(&src).unwrap()).unwrap();
    let preset = qubit_config(&MemorySpec::new(1, 2.5), Routing::WriteRead).unwrap();
    assert!(max_abs_diff(&to_state_space(&dsl).a, &to_state_space(&preset).a) <= 1e-12);
}

#[test]
fn invalid_fixtures_point_at_the_offending_line() {
    let listing = read("invalid/expected_lines.txt");
    let mut seen = 0;
    for entry in listing.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let (file, line) = entry.split_once(' ').unwrap();
        let line: usize = line.trim().parse().unwrap();
        let text = read(&format!("invalid/{file}"));
        let message = match netdsl::parse(&text) {
            Err(d) => {
                assert_eq!(d.line, line, "{file}: {d}");
                assert!(d.col >= 1, "{file}: {d}");
                d.to_string()
            }
            Ok(desc) => netdsl::compile(&desc).expect_err(file).to_string(),
        };
        assert!(message.starts_with(&format!("{line}:")), "{file}: {message}");
        seen += 1;
    }
    let fixtures = std::fs::read_dir(networks().join("invalid"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "qnet"))
        .count();
    assert_eq!(seen, fixtures);
}

#[test]
fn printing_is_canonical() {
    let desc = netdsl::parse(&read("qubit_config2.qnet")).unwrap();
    let printed = desc.to_string();
    let again = netdsl::parse(&printed).unwrap();
    assert_eq!(desc, again);
    assert_eq!(printed, again.to_string());
}

/// A cascade of cavities joined from each first output to the next first
/// input; every remaining port is external.
fn cascade_source(rates: &[(f64, f64)], scale: f64) -> String {
    let mut src = format!("param s = {scale}\nparam h = sqrt(s) * 2 - (s - 1) / 4\n");
    for (i, (a, b)) in rates.iter().enumerate() {
        src.push_str(&format!("cavity m{i} couplings [{a} * s, h + {b}]\n"));
    }
    for i in 1..rates.len() {
        src.push_str(&format!("connect m{}.out1 -> m{i}.in1\n", i - 1));
    }
    src.push_str("input m0.in1\n");
    for i in 0..rates.len() {
        src.push_str(&format!("input m{i}.in2\n"));
    }
    src.push_str(&format!("output m{}.out1\n", rates.len() - 1));
    for i in 0..rates.len() {
        src.push_str(&format!("output m{i}.out2\n"));
    }
    src
}

proptest! {
    #[test]
    fn parser_never_panics(src in "[a-z0-9 .,\\[\\]()+*/=>#\n-]{0,200}") {
        if let Ok(desc) = netdsl::parse(&src) {
            let _ = netdsl::compile(&desc);
        }
    }

    #[test]
    fn keyword_soup_never_panics(words in prop::collection::vec(
        prop::sample::select(vec![
            "param", "cavity", "couplings", "connect", "input", "output", "sqrt", "a", "p",
            "p.in1", "p.out2", "->", "=", "[", "]", "(", ")", ",", "1", "-2.5", "1e400", "*", "/", "\n",
        ]),
        0..60,
    )) {
        let src = words.join(" ");
        if let Ok(desc) = netdsl::parse(&src) {
            let _ = netdsl::compile(&desc);
        }
    }

    #[test]
    fn cascades_compile_to_passive_models(
        rates in prop::collection::vec((0.05f64..5.0, 0.05f64..5.0), 1..5),
        scale in 0.1f64..3.0,
    ) {
        let src = cascade_source(&rates, scale);
        let desc = netdsl::parse(&src).unwrap();
        let reparsed = netdsl::parse(&desc.to_string()).unwrap();
        prop_assert_eq!(&desc, &reparsed);
        let model = netdsl::compile(&desc).unwrap();
        prop_assert_eq!(model.n_ports(), rates.len() + 1);
        prop_assert_eq!(model.n_modes(), rates.len());
        prop_assert!(model.invariant_residual() <= 1e-10);
        prop_assert!(to_state_space(&model).passivity_residuals().max() <= 1e-10);
        let again = netdsl::compile(&reparsed).unwrap();
        prop_assert_eq!(model, again);
    }
}
