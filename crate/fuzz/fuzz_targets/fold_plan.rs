#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_train::{assert_no_leakage, FoldPlan};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(plan) = FoldPlan::from_json(text) else { return };
    for k in 0..plan.k {
        assert_no_leakage(k, &plan.training_members(k), &plan.fold_members(k)).unwrap();
    }
    assert_eq!(FoldPlan::from_json(&plan.to_json()).unwrap(), plan);
});
