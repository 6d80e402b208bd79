#![no_main]

use dashsnap_core::data::{evaluate, load_table};
use dashsnap_core::model::{Aggregate, Measure};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = load_table(data, None) else { return };
    let Some(first) = table.columns().first() else { return };
    let count = Measure::aggregated("n", &first.name, Aggregate::Count);
    let result = evaluate(&table, &[count], &[]).expect("count over a known column");
    let counted: f64 = result.rows.iter().filter_map(|r| r.values[0]).sum();
    assert_eq!(counted, table.len() as f64);
});
