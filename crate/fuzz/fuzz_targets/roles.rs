#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = sbm_opa::io::parse_roles(data, "fuzz");
});
