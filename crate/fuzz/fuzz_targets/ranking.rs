#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(instance) = sbm_opa::io::parse_ranking_instance(data, "fuzz") {
        if instance.items.len() <= 8 && instance.experts.len() <= 4 {
            let _ = sbm_opa::opa::solve_opa(&instance);
        }
    }
});
