use std::collections::BTreeMap;

use domnet::dataset::{
    generate_dataset, load_jsonl, parse_jsonl, save_jsonl, split, to_jsonl, verify, GenerateOptions, LabeledInstance,
    SplitConfig, VerifyMode,
};
use domnet::graph::generate;
use domnet::solver::domination_number_bruteforce;
use domnet::{Family, GenParams};
use proptest::prelude::*;

fn instance_strategy() -> impl Strategy<Value = LabeledInstance> {
    let er = (1usize..20, 0.0f64..=1.0, any::<u64>()).prop_map(|(n, p, seed)| GenParams::ErdosRenyi { n, p, seed });
    let ba = (3usize..20, 1usize..3, any::<u64>()).prop_map(|(n, m, seed)| GenParams::BarabasiAlbert { n, m, seed });
    (prop_oneof![er, ba], "[a-z0-9_\\-\"\\\\ ]{0,12}", 0usize..20).prop_map(|(gen, id, g)| {
        let graph = generate(&gen).unwrap();
        let gamma = 1 + g % graph.n();
        LabeledInstance { id, graph, gamma, gen }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jsonl_round_trip(ds in prop::collection::vec(instance_strategy(), 0..100)) {
        let text = to_jsonl(&ds);
        let back = parse_jsonl(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(to_jsonl(&back), text);
    }

    #[test]
    fn split_is_a_partition(
        sizes in prop::collection::vec(5usize..12, 1..300),
        seed in any::<u64>(),
        test_frac in 0.05f64..0.5,
        val_frac in 0.05f64..0.4,
    ) {
        let ds: Vec<LabeledInstance> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let gen = GenParams::ErdosRenyi { n, p: 0.3, seed: i as u64 };
                LabeledInstance { id: i.to_string(), graph: generate(&gen).unwrap(), gamma: 1, gen }
            })
            .collect();
        let s = split(&ds, &SplitConfig { test_frac, val_frac, seed }).unwrap();
        let mut ids: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .map(|x| x.id.parse().unwrap())
            .collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..ds.len()).collect::<Vec<_>>());

        // Per-size test share is the rounded fraction of the bucket.
        let mut per_n: BTreeMap<usize, usize> = BTreeMap::new();
        for inst in &ds {
            *per_n.entry(inst.n()).or_default() += 1;
        }
        for (&n, &count) in &per_n {
            let held = s.test.iter().filter(|x| x.n() == n).count();
            prop_assert!((held as f64 - count as f64 * test_frac).abs() <= 0.5 + 1e-9);
        }
    }
}

#[test]
fn generated_dataset_round_trips_through_a_file() {
    let opts = GenerateOptions {
        n_range: 5..=30,
        ..GenerateOptions::default()
    };
    let ds = generate_dataset(Family::BarabasiAlbert, 100, 17, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ba.jsonl");
    save_jsonl(&path, &ds).unwrap();
    assert_eq!(load_jsonl(&path).unwrap(), ds);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let opts = GenerateOptions {
        n_range: 5..=24,
        ..GenerateOptions::default()
    };
    let a = to_jsonl(&generate_dataset(Family::ErdosRenyi, 50, 9, &opts).unwrap());
    let b = to_jsonl(&generate_dataset(Family::ErdosRenyi, 50, 9, &opts).unwrap());
    assert_eq!(a, b);
    let c = to_jsonl(&generate_dataset(Family::ErdosRenyi, 50, 10, &opts).unwrap());
    assert_ne!(a, c);
}

#[test]
fn full_size_er_dataset_labels_agree_with_brute_force() {
    let ds = generate_dataset(Family::ErdosRenyi, 2000, 1, &GenerateOptions::default()).unwrap();
    assert_eq!(ds.len(), 2000);
    let mut small = 0;
    for inst in &ds {
        assert!((5..=64).contains(&inst.n()));
        assert!(inst.gamma >= 1 && inst.gamma <= inst.n());
        if inst.n() <= 14 {
            assert_eq!(domination_number_bruteforce(&inst.graph, 14).unwrap().gamma, inst.gamma);
            small += 1;
        }
    }
    // 10 of the 60 sizes are at most 14
    assert!(small > 250 && small < 420, "{small}");
    let summary = verify(&ds, VerifyMode::BruteForce { max_n: 14 }).unwrap();
    assert_eq!(summary.checked + summary.skipped, 2000);
}

#[test]
fn golden_files_are_reproducible() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    for (family, file) in [
        (Family::ErdosRenyi, "golden_er.jsonl"),
        (Family::BarabasiAlbert, "golden_ba.jsonl"),
    ] {
        let text = std::fs::read_to_string(root.join(file)).unwrap();
        let opts = GenerateOptions {
            n_range: 5..=12,
            ..GenerateOptions::default()
        };
        let ds = generate_dataset(family, 8, 2024, &opts).unwrap();
        assert_eq!(to_jsonl(&ds), text, "{file}");
        verify(&parse_jsonl(&text).unwrap(), VerifyMode::BruteForce { max_n: 14 }).unwrap();
    }
}
