#![no_main]

use libfuzzer_sys::fuzz_target;
use qmem_core::{analyze, to_state_space, SlhModel};

fuzz_target!(|data: &[u8]| {
    let Ok(model) = serde_json::from_slice::<SlhModel>(data) else { return };
    let text = serde_json::to_string(&model).unwrap();
    let back: SlhModel = serde_json::from_str(&text).expect("serialized model must decode");
    assert_eq!(back, model);
    if model.n_modes() <= 8 && model.n_ports() <= 8 {
        let _ = analyze(&to_state_space(&model));
    }
});
