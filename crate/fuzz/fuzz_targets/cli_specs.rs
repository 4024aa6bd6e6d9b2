#![no_main]

use libfuzzer_sys::fuzz_target;
use timeleak::costlab::{case_study, parse_env, parse_grid, parse_high_env, parse_high_spec};
use timeleak::lang::parse_program;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = std::str::from_utf8(data) else { return };
    if spec.len() > 512 {
        return;
    }
    let prog = parse_program(case_study::PAGAT).unwrap();
    if let Ok(grid) = parse_grid(spec) {
        assert!(!grid.is_empty());
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }
    let _ = parse_high_spec(&prog, spec);
    let _ = parse_env(&prog, spec);
    let _ = parse_high_env(&prog, spec);
});
