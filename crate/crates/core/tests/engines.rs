mod common;

use common::{expected_phases, oracle_cube, random_case, to_ref};
use cubemr::{
    batched_materialize, broadcast_materialize, layered_materialize, Grouping, SimConfig,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engines_match_oracle(seed in any::<u64>(), machines in 1usize..24, hash_seed in any::<u64>()) {
        let case = random_case(seed, 400);
        let sim = SimConfig::new(machines, hash_seed).unwrap();
        let oracle = oracle_cube(&case.schema, &case.rows);

        let (b, _) = broadcast_materialize(&case.schema, case.rows.clone()).unwrap();
        prop_assert_eq!(&to_ref(&b), &oracle);
        let (l, _) = layered_materialize(&case.schema, case.rows.clone(), &sim).unwrap();
        prop_assert_eq!(&to_ref(&l), &oracle);
        let (m, _) = batched_materialize(&case.schema, &case.grouping, case.rows.clone(), &sim).unwrap();
        prop_assert_eq!(&to_ref(&m), &oracle);
    }

    #[test]
    fn batched_accounting(seed in any::<u64>(), machines in 1usize..24) {
        let case = random_case(seed, 400);
        let sim = SimConfig::new(machines, 7).unwrap();
        let (_, stats) = batched_materialize(&case.schema, &case.grouping, case.rows.clone(), &sim).unwrap();
        let expected = expected_phases(&case.schema, &case.grouping, &case.rows);
        prop_assert_eq!(stats.phases.len(), expected.len());
        for (p, e) in stats.phases.iter().zip(&expected) {
            prop_assert_eq!(p.remote_msgs, p.input_rows);
            prop_assert_eq!(p.input_rows, e.input_rows);
            prop_assert_eq!(p.output_rows, e.output_rows);
            prop_assert_eq!(p.local_msgs, e.local_msgs);
            // local/remote >= blow-up - 1
            prop_assert!(p.local_msgs + p.input_rows >= p.output_rows);
            prop_assert_eq!(p.machine_rows.iter().sum::<u64>(), p.output_rows);
            prop_assert_eq!(p.machine_local_msgs.iter().sum::<u64>(), p.local_msgs);
            prop_assert!(p.max_local_msgs_per_key <= p.local_msgs);
        }
        for w in stats.phases.windows(2) {
            prop_assert_eq!(w[0].output_rows, w[1].input_rows);
            prop_assert!(w[1].output_rows >= w[1].input_rows);
        }
    }

    #[test]
    fn layered_accounting(seed in any::<u64>()) {
        let case = random_case(seed, 200);
        let sim = SimConfig::new(5, 1).unwrap();
        let (cube, stats) = layered_materialize(&case.schema, case.rows.clone(), &sim).unwrap();
        let total_out: u64 = stats.phases.iter().map(|p| p.output_rows).sum();
        prop_assert_eq!(total_out, cube.len() as u64);
        for p in &stats.phases {
            prop_assert_eq!(p.local_msgs, 0);
        }
        let cols = case.schema.num_columns() as u64;
        if let Some(round0) = stats.phases.first() {
            prop_assert_eq!(round0.input_rows, case.rows.len() as u64);
            let sends: u64 = stats.phases[1..].iter().map(|p| p.remote_msgs).sum();
            prop_assert!(sends <= cols * cube.len() as u64);
        }
    }

    #[test]
    fn results_independent_of_workers_and_spill(seed in any::<u64>(), workers in 2usize..5) {
        let case = random_case(seed, 300);
        let base = SimConfig::new(8, 3).unwrap();
        let tuned = base.clone().with_workers(workers).with_spill_threshold(1);
        let grouping = Grouping::per_dimension(&case.schema);
        let a = batched_materialize(&case.schema, &grouping, case.rows.clone(), &base).unwrap();
        let b = batched_materialize(&case.schema, &grouping, case.rows.clone(), &tuned).unwrap();
        prop_assert_eq!(&a.0, &b.0);
        prop_assert_eq!(&a.1, &b.1);
        let a = layered_materialize(&case.schema, case.rows.clone(), &base).unwrap();
        let b = layered_materialize(&case.schema, case.rows.clone(), &tuned).unwrap();
        prop_assert_eq!(&a.0, &b.0);
        prop_assert_eq!(&a.1, &b.1);
    }
}

#[test]
fn every_grouping_of_a_case_agrees() {
    let case = random_case(11, 300);
    let oracle = oracle_cube(&case.schema, &case.rows);
    let sim = SimConfig::default();
    for g in [
        Grouping::single(&case.schema),
        Grouping::per_dimension(&case.schema),
    ] {
        let (cube, _) = batched_materialize(&case.schema, &g, case.rows.clone(), &sim).unwrap();
        assert_eq!(to_ref(&cube), oracle);
    }
}

#[test]
fn cross_product_closed_form() {
    for n in 1..=4 {
        for c in 1..=4u32 {
            let (schema, rows) = common::cross_product(n, c);
            let (cube, stats) = broadcast_materialize(&schema, rows.clone()).unwrap();
            assert_eq!(cube.len(), (c as usize + 1).pow(n as u32));
            let p = &stats.phases[0];
            assert_eq!(p.remote_msgs, p.input_rows * ((1 << n) - 1));
            let (b, _) = batched_materialize(
                &schema,
                &Grouping::per_dimension(&schema),
                rows,
                &SimConfig::default(),
            )
            .unwrap();
            assert_eq!(b, cube);
        }
    }
}

#[test]
fn empty_input() {
    let case = random_case(3, 0);
    let sim = SimConfig::default();
    assert!(
        batched_materialize(&case.schema, &case.grouping, Vec::new(), &sim)
            .unwrap()
            .0
            .is_empty()
    );
    assert!(layered_materialize(&case.schema, Vec::new(), &sim)
        .unwrap()
        .0
        .is_empty());
    assert!(broadcast_materialize(&case.schema, Vec::new())
        .unwrap()
        .0
        .is_empty());
}
