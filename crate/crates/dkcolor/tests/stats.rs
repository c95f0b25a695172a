use dkcolor::stats::{lemma32_statistic, random_family, rct_drop_experiment, repeated_colors_experiment, MarkingSpec};
use dkcolor::{DomainError, Graph, PartialColoring};

/// P[Bin(n, p) ≥ k] by direct summation.
fn binomial_tail(n: usize, p: f64, k: usize) -> f64 {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut tail = 0.0;
    for i in 0..=n {
        if i >= k {
            tail += pmf;
        }
        pmf *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
    }
    tail
}

fn star(leaves: usize) -> Graph {
    let e: Vec<(usize, usize)> = (1..=leaves).map(|i| (0, i)).collect();
    Graph::from_edges(leaves + 1, leaves as u64, &e).unwrap()
}

#[test]
fn at_bound_values() {
    let s = MarkingSpec::at_bound(64);
    assert_eq!(s.q, 8);
    assert!((s.p - 1.0 / (8.0 * 64f64.powf(0.2))).abs() < 1e-12);
    assert!((s.threshold - 64f64.powf(37.0 / 40.0)).abs() < 1e-9);
}

#[test]
fn random_family_respects_size_and_cap() {
    let s = MarkingSpec::at_bound(64);
    let fam = random_family(&s, 64 * s.q, 3).unwrap();
    assert_eq!(fam.len(), 64);
    assert!(fam.iter().all(|f| f.len() == s.q));
    let mut load = vec![0usize; 64 * s.q];
    for &v in fam.iter().flatten() {
        load[v] += 1;
    }
    assert!(load.iter().all(|&l| l as f64 <= s.membership_cap));
}

#[test]
fn random_family_rejects_tiny_pool() {
    let s = MarkingSpec::at_bound(64);
    assert!(matches!(random_family(&s, 4, 0), Err(DomainError::Infeasible(_))));
}

#[test]
fn lemma32_rejects_bad_families() {
    let s = MarkingSpec::at_bound(16);
    let big = vec![vec![0, 1, 2, 3, 4]];
    assert!(lemma32_statistic(&big, &s, 10, 0).is_err());
    let many: Vec<Vec<usize>> = (0..17).map(|i| vec![i]).collect();
    assert!(lemma32_statistic(&many, &s, 10, 0).is_err());
    let mut tight = s.clone();
    tight.membership_cap = 2.0;
    let crowded: Vec<Vec<usize>> = (0..3).map(|_| vec![0]).collect();
    assert!(lemma32_statistic(&crowded, &tight, 10, 0).is_err());
    let mut bad_p = s.clone();
    bad_p.p = 1.5;
    assert!(lemma32_statistic(&[vec![0]], &bad_p, 10, 0).is_err());
}

#[test]
fn lemma32_matches_binomial_on_disjoint_sets() {
    // disjoint sets are hit independently, so the count is binomial
    let spec = MarkingSpec { delta: 40.0, q: 3, membership_cap: 1.0, p: 0.1, threshold: 12.0 };
    let sets: Vec<Vec<usize>> = (0..40).map(|i| vec![3 * i, 3 * i + 1, 3 * i + 2]).collect();
    let hit = 1.0 - 0.9f64.powi(3);
    let want = binomial_tail(40, hit, 12);
    let got = lemma32_statistic(&sets, &spec, 20_000, 5).unwrap();
    // 4.5 standard errors
    let se = (want * (1.0 - want) / 20_000.0).sqrt();
    assert!((got - want).abs() < 4.5 * se, "got {got}, want {want}");
}

#[test]
fn lemma32_zero_trials() {
    let s = MarkingSpec::at_bound(64);
    assert_eq!(lemma32_statistic(&[vec![0]], &s, 0, 0).unwrap(), 0.0);
}

#[test]
fn repeated_colors_on_a_star_with_one_color() {
    // leaves are pairwise non-adjacent and all keep color 1
    let g = star(6);
    let leaves: Vec<usize> = (1..=6).collect();
    let r = repeated_colors_experiment(&g, &leaves, &[0], 1, 1.0, 15.0, 20, 1);
    assert_eq!(r.checked, 20);
    assert_eq!(r.met, 20);
    // 16 anti-edges are never available among 6 leaves
    let r = repeated_colors_experiment(&g, &leaves, &[0], 1, 1.0, 16.0, 20, 1);
    assert_eq!(r.checked, 0);
    assert_eq!(r.fraction, 0.0);
}

#[test]
fn rct_drop_counts_nothing_on_colored_h() {
    let g = star(4);
    let mut col = PartialColoring::new(5, 6);
    col.commit(&[(0, 1), (1, 2), (2, 2), (3, 2), (4, 2)]);
    let s = rct_drop_experiment(&g, &col, &[0, 1, 2, 3, 4], 1.0, 0.9, 0.0, 10, 0).unwrap();
    assert_eq!((s.checked, s.failed), (0, 0));
}

#[test]
fn rct_drop_on_k33() {
    // a vertex that loses its trial still sees its neighbors keep theirs
    let mut e = Vec::new();
    for u in 0..3 {
        for v in 3..6 {
            e.push((u, v));
        }
    }
    let g = Graph::from_edges(6, 3, &e).unwrap();
    let col = PartialColoring::new(6, 40);
    let s = rct_drop_experiment(&g, &col, &[0, 1, 2, 3, 4, 5], 1.0, 0.99, 2.0, 500, 9).unwrap();
    assert!(s.checked > 0);
    assert!(s.fraction < 0.5, "{s:?}");
    let none = rct_drop_experiment(&g, &col, &[0, 1, 2, 3, 4, 5], 1.0, 0.99, 4.0, 50, 9).unwrap();
    assert_eq!(none.checked, 0);
}
