#![no_main]

use dashsnap_core::spec_io::{
    parse_component_request, parse_filter_request, parse_manual_edits, parse_snapshot_draft, parse_document,
};
use libfuzzer_sys::fuzz_target;

// The first byte picks the document kind.
fuzz_target!(|data: &[u8]| {
    let Some((&kind, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    match kind % 5 {
        0 => drop(parse_component_request(text)),
        1 => drop(parse_snapshot_draft(text)),
        2 => drop(parse_manual_edits(text)),
        3 => drop(parse_filter_request(text)),
        _ => drop(parse_document(text)),
    }
});
