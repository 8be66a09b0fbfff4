#![no_main]

use libfuzzer_sys::fuzz_target;
use nomadic_core::peer::PeerNotification;

fuzz_target!(|data: &[u8]| {
    if let Ok(n) = PeerNotification::decode(data) {
        assert_eq!(n.encode(), data);
    }
});
