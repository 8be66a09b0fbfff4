#![no_main]

use libfuzzer_sys::fuzz_target;
use nomadic_core::peer::Beacon;

fuzz_target!(|data: &[u8]| {
    if let Ok(b) = Beacon::decode(data) {
        assert_eq!(b.encode(), data);
        assert_eq!(b.encoded_len(), data.len());
    }
});
