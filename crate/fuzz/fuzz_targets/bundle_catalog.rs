#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_core::bundles::BundleCatalog;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(catalog) = BundleCatalog::from_json(text) {
        let _ = catalog.merged_catalog_60();
        let _ = catalog.comparable_bundles();
        assert_eq!(BundleCatalog::from_json(&catalog.to_json()).unwrap(), catalog);
    }
});
