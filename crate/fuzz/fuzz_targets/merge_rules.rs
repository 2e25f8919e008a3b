#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_core::bundles::{parse_merge_rules, validate_rules};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rules) = parse_merge_rules(text) {
        validate_rules(&rules).expect("parsed rules are valid");
    }
});
