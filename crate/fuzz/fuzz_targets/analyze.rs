#![no_main]

use libfuzzer_sys::fuzz_target;
use timeleak::lang::parse_program;
use timeleak::rational::ratio;
use timeleak::semantics::{build_tree_limited, collapse, run_stats, Config, CostModel, Env};

// Parse, bind parameters, unfold with small limits and collapse.
fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(mut prog) = parse_program(src) else { return };
    for p in prog.params() {
        prog = prog.bind(&p, &ratio(1, 2));
    }
    let cfg = Config::new(Env::zeroed(&prog), prog.body.clone());
    let Ok(raw) = build_tree_limited(&cfg, &CostModel::default(), 64, 4096) else { return };
    raw.check_generative().expect("raw tree is generative");
    let t = collapse(&raw, &prog.low_vars());
    t.check_generative().expect("collapsed tree is generative");
    let low = prog.low_vars();
    assert_eq!(run_stats(&raw).joint(&low), run_stats(&t).joint(&low));
});
