#![no_main]

use dashsnap_core::store::Store;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(store) = Store::from_json(text) else { return };
    let json = store.to_json();
    assert_eq!(Store::from_json(&json).unwrap(), store);
});
