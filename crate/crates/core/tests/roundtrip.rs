mod common;

use proptest::prelude::*;

use dashsnap_core::model::validate_structure;
use dashsnap_core::spec_io::{parse_component, parse_snapshot, serialize_component, serialize_snapshot, snapshot_to_json};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_specs_are_structurally_valid(s in common::snapshot()) {
        let report = validate_structure(&s);
        prop_assert!(report.is_empty(), "{:?}", report.codes());
    }

    #[test]
    fn yaml_round_trip(s in common::snapshot()) {
        let text = serialize_snapshot(&s);
        let back = parse_snapshot(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(serialize_snapshot(&back), text);
    }

    #[test]
    fn json_view_parses_back(s in common::snapshot()) {
        let json = snapshot_to_json(&s).to_string();
        let back = parse_snapshot(&json).map_err(|e| TestCaseError::fail(format!("{e}\n{json}")))?;
        prop_assert_eq!(back, s);
    }

    #[test]
    fn component_round_trip(c in common::component("c".into())) {
        let text = serialize_component(&c);
        let back = parse_component(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, c);
    }
}
