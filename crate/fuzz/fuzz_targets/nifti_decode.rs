#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_core::nifti;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = nifti::decode(data) {
        assert_eq!(img.data.len(), img.n_voxels());
    }
});
