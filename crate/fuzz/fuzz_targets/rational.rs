#![no_main]

use libfuzzer_sys::fuzz_target;
use timeleak::rational::{exact, parse, to_decimal};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if src.len() > 256 {
        return;
    }
    if let Ok(r) = parse(src) {
        assert_eq!(parse(&exact(&r)).expect("exact form parses"), r);
        let _ = to_decimal(&r, 6);
    }
});
