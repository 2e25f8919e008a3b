#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_core::io::Labels;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(labels) = Labels::parse(text) {
        assert_eq!(Labels::parse(&labels.to_json()).unwrap(), labels);
    }
});
