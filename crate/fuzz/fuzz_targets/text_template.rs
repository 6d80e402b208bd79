#![no_main]

use dashsnap_core::template::{check_text_expression, format_value, parse_formatted, parse_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() >= 8 {
        let n = f64::from_le_bytes(data[..8].try_into().unwrap());
        if n.is_finite() && n.abs() < 1e15 {
            let back = parse_formatted(&format_value(n)).expect("formatted numbers parse");
            assert!((back - n).abs() <= 0.005 + n.abs() * 1e-15, "{n} -> {back}");
        }
    }
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_text(text);
    let _ = check_text_expression(text);
    let _ = parse_formatted(text);
});
