#![no_main]

use dashsnap_core::spec_io::{parse_snapshot, serialize_snapshot, snapshot_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(s) = parse_snapshot(text) else { return };
    let yaml = serialize_snapshot(&s);
    assert_eq!(parse_snapshot(&yaml).as_ref(), Ok(&s), "{yaml}");
    assert_eq!(serialize_snapshot(&parse_snapshot(&yaml).unwrap()), yaml);
    let json = snapshot_to_json(&s).to_string();
    assert_eq!(parse_snapshot(&json).as_ref(), Ok(&s), "{json}");
});
