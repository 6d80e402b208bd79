use serde::{Deserialize, Serialize};

use super::{DataError, Table, Value};
use crate::model::{Duration, DurationUnit, TimeFrame};

/// Which calendar buckets of a time frame contain no rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CompletenessReport {
    pub expected_buckets: usize,
    pub observed_buckets: usize,
    /// Start date (ISO) of every empty bucket.
    pub missing: Vec<String>,
    pub complete: bool,
}

/// Tiles `[start, end)` with buckets of one `granularity` unit, anchored at the frame
/// start (the last bucket is clipped at `end`), and reports the empty ones.
pub fn detect_completeness(
    t: &Table,
    tf: &TimeFrame,
    granularity: DurationUnit,
) -> Result<CompletenessReport, DataError> {
    let step = Duration::new(1, granularity);
    let end = tf.end();
    if step.add_to(tf.start).is_none_or(|first_end| first_end > end) {
        return Err(DataError::GranularityTooCoarse {
            granularity: granularity.to_string(),
            frame: tf.duration.to_string(),
        });
    }
    let idx = t.column_index(&tf.field)?;

    let mut bounds = Vec::new();
    let mut i = 0u32;
    while let Some(b_start) = step.add_times(tf.start, i) {
        if b_start >= end {
            break;
        }
        let b_end = step.add_times(tf.start, i + 1).map_or(end, |e| e.min(end));
        bounds.push((b_start, b_end));
        i += 1;
    }

    let mut populated = vec![false; bounds.len()];
    for row in t.rows() {
        let Some(Value::Date(d)) = &row[idx] else { continue };
        // Buckets are sorted and disjoint.
        let pos = bounds.partition_point(|(_, b_end)| b_end <= d);
        if let Some((b_start, b_end)) = bounds.get(pos) {
            if b_start <= d && d < b_end {
                populated[pos] = true;
            }
        }
    }
    let missing: Vec<String> = bounds
        .iter()
        .zip(&populated)
        .filter(|(_, p)| !**p)
        .map(|((s, _), _)| s.to_string())
        .collect();
    Ok(CompletenessReport {
        expected_buckets: bounds.len(),
        observed_buckets: bounds.len() - missing.len(),
        complete: missing.is_empty(),
        missing,
    })
}
