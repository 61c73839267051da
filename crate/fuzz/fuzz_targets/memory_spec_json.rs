#![no_main]

use libfuzzer_sys::fuzz_target;
use qmem_core::{qudit_config, MemorySpec, Routing};

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<MemorySpec>(data) else { return };
    if spec.validate().is_err() || spec.n_qubits > 4 {
        return;
    }
    for routing in [Routing::WriteRead, Routing::Storage] {
        let _ = qudit_config(&spec, routing);
    }
});
