mod common;

use aps_core::data::{parse_instance, validate_instance, write_instance};
use common::fixtures::fixture_variant;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn write_then_parse_is_identity(seed in 0u64..10_000, scale in 0.01f64..3.0) {
        let mut inst = fixture_variant(seed);
        for o in &mut inst.orders {
            o.quantity = (o.quantity * scale).max(0.5);
        }
        for m in &mut inst.materials {
            m.initial_inventory *= scale;
        }
        prop_assert!(validate_instance(&inst).is_empty());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(&inst.id);
        write_instance(&inst, &path).unwrap();
        let back = parse_instance(&path).unwrap();
        prop_assert_eq!(back, inst);
    }
}
