#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_core::stats::MetricTable;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = MetricTable::read_csv(data) else { return };
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    let back = MetricTable::read_csv(out.as_slice()).unwrap();
    assert_eq!(back.len(), table.len());
    for ((s, b, v), (s2, b2, v2)) in table.rows().zip(back.rows()) {
        assert_eq!((s, b), (s2, b2));
        let bits = |v: &[Option<f64>]| v.iter().map(|x| x.map(f64::to_bits)).collect::<Vec<_>>();
        assert_eq!(bits(v), bits(v2));
    }
});
