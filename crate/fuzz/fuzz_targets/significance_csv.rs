#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_core::stats::read_significance;

fuzz_target!(|data: &[u8]| {
    let _ = read_significance(data);
});
