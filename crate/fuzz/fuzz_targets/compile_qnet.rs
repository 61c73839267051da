#![no_main]

use libfuzzer_sys::fuzz_target;
use qmem_core::{netdsl, to_state_space};

fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else { return };
    let Ok(desc) = netdsl::parse(source) else { return };
    if let Ok(model) = netdsl::compile(&desc) {
        // Near-singular loops pass the condition check with large residuals,
        // so only finiteness is required here.
        assert!(model.invariant_residual().is_finite());
        assert!(to_state_space(&model).passivity_residuals().max().is_finite());
    }
});
