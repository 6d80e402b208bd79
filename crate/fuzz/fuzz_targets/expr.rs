#![no_main]

use dashsnap_core::model::Expr;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(e) = text.parse::<Expr>() else { return };
    let printed = e.to_string();
    assert_eq!(printed.parse::<Expr>().as_ref(), Ok(&e), "{printed}");
});
