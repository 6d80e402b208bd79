#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = dashsnap_core::template::Catalog::from_yaml(text);
});
