#![no_main]

use libfuzzer_sys::fuzz_target;
use nomadic_core::scenario::{parse_str, to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_str(text) {
        let again = parse_str(&to_json(&s)).expect("canonical form reparses");
        assert_eq!(again, s);
    }
});
