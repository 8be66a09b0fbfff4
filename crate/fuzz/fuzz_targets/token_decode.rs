#![no_main]

use libfuzzer_sys::fuzz_target;
use nomadic_core::spectrum::EntitlementToken;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = EntitlementToken::decode(data) {
        assert_eq!(t.encode(), data);
    }
});
