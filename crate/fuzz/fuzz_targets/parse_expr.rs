#![no_main]

use libfuzzer_sys::fuzz_target;
use timeleak::lang::{parse_expr, render_expr};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(e) = parse_expr(src) {
        let again = parse_expr(&render_expr(&e)).expect("rendered expression parses");
        assert_eq!(again, e);
    }
});
