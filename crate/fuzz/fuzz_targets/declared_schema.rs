#![no_main]

use dashsnap_core::data::{load_table, parse_declared_schema};
use libfuzzer_sys::fuzz_target;

const CSV: &[u8] = b"Order Date,Category,Sales\n2022-03-02,Furniture,10\n2022-03-05,Technology,\n";

fuzz_target!(|text: &str| {
    let Ok(schema) = parse_declared_schema(text) else { return };
    let _ = load_table(CSV, Some(&schema));
});
