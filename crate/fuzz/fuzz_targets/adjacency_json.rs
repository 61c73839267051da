#![no_main]

use libfuzzer_sys::fuzz_target;
use qmem_core::{feedback_reduce, memory, AdjacencyMap, MemorySpec};

fuzz_target!(|data: &[u8]| {
    let Ok(adj) = serde_json::from_slice::<AdjacencyMap>(data) else { return };
    let open = memory::open_loop(&MemorySpec::new(1, 1.0)).unwrap();
    if let Ok(reduced) = feedback_reduce(&open, &adj) {
        assert!(reduced.invariant_residual() <= 1e-9, "{adj:?}");
    }
});
