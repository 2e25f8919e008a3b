#![no_main]

use libfuzzer_sys::fuzz_target;
use wmseg_core::tractometry::{read_streamlines, streamline_curl, streamline_length, write_streamlines};

fuzz_target!(|data: &[u8]| {
    let Ok(lines) = read_streamlines(data) else { return };
    for s in &lines {
        let _ = streamline_length(s);
        let _ = streamline_curl(s);
    }
    let mut text = Vec::new();
    write_streamlines(&lines, &mut text).unwrap();
    let back = read_streamlines(text.as_slice()).unwrap();
    assert_eq!(back.len(), lines.len());
    for (a, b) in back.iter().zip(&lines) {
        assert_eq!(a.points(), b.points());
    }
});
