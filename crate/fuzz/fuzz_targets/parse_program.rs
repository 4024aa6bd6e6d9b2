#![no_main]

use libfuzzer_sys::fuzz_target;
use timeleak::lang::{parse_program, render_program};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(prog) = parse_program(src) {
        let text = render_program(&prog);
        let again = parse_program(&text).expect("rendered program parses");
        assert_eq!(again, prog);
    }
});
