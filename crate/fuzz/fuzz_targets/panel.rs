#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    // Roles and panel separated by the first NUL byte.
    let (roles, panel) = data.split_once('\0').unwrap_or((data, ""));
    if let Ok(roles) = sbm_opa::io::parse_roles(roles, "roles") {
        let _ = sbm_opa::io::parse_panel(panel, "panel", &roles);
    }
});
