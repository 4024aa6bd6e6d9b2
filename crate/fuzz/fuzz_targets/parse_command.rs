#![no_main]

use libfuzzer_sys::fuzz_target;
use timeleak::lang::{parse_command, render_command};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_command(src) {
        let again = parse_command(&render_command(&c)).expect("rendered command parses");
        assert_eq!(again, c);
    }
});
