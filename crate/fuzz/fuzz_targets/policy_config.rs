#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = sbm_opa::io::parse_policy_config(data, "fuzz") {
        let _ = cfg.scenarios();
    }
});
