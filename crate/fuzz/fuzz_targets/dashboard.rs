#![no_main]

use dashsnap_core::spec_io::{parse_dashboard, serialize_dashboard};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(d) = parse_dashboard(text) else { return };
    let yaml = serialize_dashboard(&d);
    assert_eq!(parse_dashboard(&yaml).as_ref(), Ok(&d), "{yaml}");
});
