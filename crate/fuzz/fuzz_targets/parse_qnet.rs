#![no_main]

use libfuzzer_sys::fuzz_target;
use qmem_core::netdsl;

fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else { return };
    if let Ok(desc) = netdsl::parse(source) {
        let printed = desc.to_string();
        let again = netdsl::parse(&printed).expect("printed description must parse");
        assert_eq!(again, desc);
    }
});
