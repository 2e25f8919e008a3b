#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_train::TrainRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(rec) = TrainRecord::read_csv(data) else { return };
    assert!(rec.best_epoch >= 1 && rec.best_epoch <= rec.stopped_epoch);
    let mut out = Vec::new();
    rec.write_csv(&mut out).unwrap();
    assert_eq!(TrainRecord::read_csv(out.as_slice()).unwrap(), rec);
});
