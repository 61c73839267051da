//! Replays the fuzz corpora with the same checks as the fuzz targets, plus
//! byte-level mutations of the text seeds.

use std::path::PathBuf;

use proptest::prelude::*;
use qmem_core::{
    analyze, feedback_reduce, memory, netdsl, qudit_config, to_state_space, AdjacencyMap,
    MemorySpec, Routing, SlhModel,
};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seeds: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty(), "no seeds for {target}");
    seeds
}

fn parse_round_trip(data: &[u8]) {
    let Ok(source) = std::str::from_utf8(data) else { return };
    if let Ok(desc) = netdsl::parse(source) {
        let again = netdsl::parse(&desc.to_string()).expect("printed description must parse");
        assert_eq!(again, desc);
    }
}

fn compile_finite(data: &[u8]) {
    let Ok(source) = std::str::from_utf8(data) else { return };
    let Ok(desc) = netdsl::parse(source) else { return };
    if let Ok(model) = netdsl::compile(&desc) {
        assert!(model.invariant_residual().is_finite());
        assert!(to_state_space(&model).passivity_residuals().max().is_finite());
    }
}

#[test]
fn parse_qnet_seeds() {
    for (_, data) in corpus("parse_qnet") {
        parse_round_trip(&data);
    }
}

#[test]
fn compile_qnet_seeds() {
    let mut compiled = 0;
    for (_, data) in corpus("compile_qnet") {
        compile_finite(&data);
        let desc = netdsl::parse(std::str::from_utf8(&data).unwrap()).unwrap();
        compiled += usize::from(netdsl::compile(&desc).is_ok());
    }
    assert!(compiled >= 1);
}

#[test]
fn model_json_seeds() {
    for (name, data) in corpus("model_json") {
        let model: SlhModel = serde_json::from_slice(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        let back: SlhModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(back, model, "{name}");
        analyze(&to_state_space(&model)).unwrap();
    }
}

#[test]
fn adjacency_json_seeds() {
    let open = memory::open_loop(&MemorySpec::new(1, 1.0)).unwrap();
    for (name, data) in corpus("adjacency_json") {
        let adj: AdjacencyMap = serde_json::from_slice(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        if let Ok(reduced) = feedback_reduce(&open, &adj) {
            assert!(reduced.invariant_residual() <= 1e-9, "{name}");
        }
    }
}

#[test]
fn memory_spec_json_seeds() {
    for (name, data) in corpus("memory_spec_json") {
        let spec: MemorySpec = serde_json::from_slice(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        if spec.validate().is_ok() {
            for routing in [Routing::WriteRead, Routing::Storage] {
                qudit_config(&spec, routing).unwrap();
            }
        }
    }
}

fn text_seeds() -> Vec<Vec<u8>> {
    let mut all: Vec<Vec<u8>> = corpus("parse_qnet").into_iter().map(|s| s.1).collect();
    all.extend(corpus("compile_qnet").into_iter().map(|s| s.1));
    all
}

proptest! {
    #[test]
    fn mutated_qnet_seeds(
        seed in prop::sample::select(text_seeds()),
        edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6),
    ) {
        let mut data = seed;
        for (at, byte) in edits {
            if data.is_empty() {
                break;
            }
            let i = at.index(data.len());
            data[i] = byte;
        }
        parse_round_trip(&data);
        compile_finite(&data);
    }
}
