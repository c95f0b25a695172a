mod common;

use std::collections::{BTreeMap, BTreeSet};

use dkcolor::stages::matching::{hall_matching, neighborhood};
use proptest::prelude::*;

fn sys(pairs: &[(usize, &[usize])]) -> BTreeMap<usize, Vec<usize>> {
    pairs.iter().map(|&(v, t)| (v, t.to_vec())).collect()
}

fn assert_valid(cands: &BTreeMap<usize, Vec<usize>>, m: &[(usize, usize)]) {
    let lefts: BTreeSet<usize> = m.iter().map(|p| p.0).collect();
    let rights: BTreeSet<usize> = m.iter().map(|p| p.1).collect();
    assert_eq!(lefts.len(), m.len(), "left vertex matched twice");
    assert_eq!(rights.len(), m.len(), "candidate used twice");
    for &(v, u) in m {
        assert!(cands[&v].contains(&u), "({v}, {u}) is not a candidate pair");
    }
}

#[test]
fn saturates_a_simple_system() {
    let c = sys(&[(1, &[10, 11]), (2, &[10]), (3, &[11, 12])]);
    let m = hall_matching(&c).unwrap();
    assert_valid(&c, &m);
    assert_eq!(m, vec![(1, 11), (2, 10), (3, 12)]);
}

#[test]
fn empty_system() {
    assert_eq!(hall_matching(&BTreeMap::new()).unwrap(), vec![]);
}

#[test]
fn violator_is_a_real_hall_violation() {
    let c = sys(&[(1, &[10]), (2, &[10]), (3, &[11, 12])]);
    let x = hall_matching(&c).unwrap_err();
    assert!(neighborhood(&c, &x).len() < x.len());
    assert_eq!(x, vec![1, 2]);
}

#[test]
fn empty_candidate_set_is_its_own_violator() {
    let c = sys(&[(1, &[10]), (4, &[])]);
    let x = hall_matching(&c).unwrap_err();
    assert_eq!(x, vec![4]);
}

#[test]
fn duplicate_candidates_are_ignored() {
    let c = sys(&[(1, &[10, 10]), (2, &[11, 10])]);
    let m = hall_matching(&c).unwrap();
    assert_valid(&c, &m);
    assert_eq!(m.len(), 2);
}

proptest! {
    #[test]
    fn agrees_with_max_matching_oracle(
        raw in prop::collection::btree_map(0usize..12, prop::collection::vec(100usize..112, 0..4), 0..12)
    ) {
        let best = common::max_matching_size(&raw);
        match hall_matching(&raw) {
            Ok(m) => {
                assert_valid(&raw, &m);
                prop_assert_eq!(m.len(), raw.len());
                prop_assert_eq!(best, raw.len());
            }
            Err(x) => {
                prop_assert!(best < raw.len());
                prop_assert!(neighborhood(&raw, &x).len() < x.len());
            }
        }
    }

    #[test]
    fn floor_twice_ceiling_always_saturates(left in 1usize..40, ceiling in 1usize..5, extra in 0usize..3, seed: u64) {
        let floor = 2 * ceiling + extra;
        let c = common::random_system(left, floor, ceiling, seed);
        let m = hall_matching(&c).unwrap();
        assert_valid(&c, &m);
        prop_assert_eq!(m.len(), left);
        prop_assert_eq!(common::max_matching_size(&c), left);
    }
}

#[test]
fn random_system_respects_its_parameters() {
    let c = common::random_system(30, 6, 3, 7);
    let mut load: BTreeMap<usize, usize> = BTreeMap::new();
    for t in c.values() {
        assert_eq!(t.len(), 6);
        for &u in t {
            *load.entry(u).or_default() += 1;
        }
    }
    assert!(load.values().all(|&l| l <= 3));
}
