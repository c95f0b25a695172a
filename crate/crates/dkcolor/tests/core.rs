use dkcolor::coloring::{count_repeated_colors, properness_scan};
use dkcolor::constants::{iteration_cap, ConstantsError, DESK_OVERRIDES};
use dkcolor::graph::{mask, min_colors, GraphError};
use dkcolor::stats::wilson;
use dkcolor::{k_delta, palette, slack, AnalysisConstants, DomainError, Graph, NodeRng, PartialColoring, Thresholds};
use proptest::prelude::*;
use rand::Rng;

fn brute_k(delta: u64) -> u64 {
    let mut k = 0;
    while (k + 2) * (k + 3) <= delta {
        k += 1;
    }
    k
}

fn path(n: usize) -> Graph {
    let e: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::from_edges(n, 2, &e).unwrap()
}

#[test]
fn k_delta_spot_values() {
    assert_eq!(k_delta(12).unwrap(), 2);
    assert_eq!(k_delta(6).unwrap(), 1);
    assert_eq!(k_delta(5).unwrap(), 0);
    assert_eq!(k_delta(2).unwrap(), 0);
    assert_eq!(k_delta(32).unwrap(), 4);
    assert_eq!(k_delta(64).unwrap(), 6);
    assert_eq!(k_delta(100).unwrap(), 8);
    assert_eq!(min_colors(64).unwrap(), 59);
    assert_eq!(min_colors(36).unwrap(), 33);
}

#[test]
fn k_delta_rejects_tiny_delta() {
    assert_eq!(k_delta(0), Err(DomainError::DeltaTooSmall(0)));
    assert_eq!(k_delta(1), Err(DomainError::DeltaTooSmall(1)));
}

#[test]
fn k_delta_matches_incremental_scan() {
    // walk k upward alongside Δ instead of re-solving each time
    let mut k = 0u64;
    for delta in 2..=1_000_000u64 {
        while (k + 2) * (k + 3) <= delta {
            k += 1;
        }
        assert_eq!(k_delta(delta).unwrap(), k, "Δ = {delta}");
    }
}

#[test]
fn k_delta_matches_closed_form() {
    for delta in 2..=200_000u64 {
        let f = ((delta as f64 + 0.25).sqrt() - 1.5).floor() as u64;
        assert_eq!(k_delta(delta).unwrap(), f);
    }
}

proptest! {
    #[test]
    fn k_delta_is_maximal(delta in 2u64..4_000_000_000) {
        let k = k_delta(delta).unwrap();
        prop_assert!((k + 1) * (k + 2) <= delta);
        prop_assert!((k + 2) * (k + 3) > delta);
    }

    #[test]
    fn k_delta_small_range_brute(delta in 2u64..5000) {
        prop_assert_eq!(k_delta(delta).unwrap(), brute_k(delta));
    }
}

#[test]
fn graph_rejects_bad_edges() {
    assert!(matches!(Graph::from_edges(3, 2, &[(0, 3)]), Err(GraphError::OutOfRange { v: 3, n: 3 })));
    assert!(matches!(Graph::from_edges(3, 2, &[(1, 1)]), Err(GraphError::SelfLoop(1))));
}

#[test]
fn graph_merges_duplicates() {
    let g = Graph::from_edges(3, 2, &[(0, 1), (1, 0), (0, 1), (1, 2)]).unwrap();
    assert_eq!(g.edge_count(), 2);
    assert!(g.is_symmetric());
    assert_eq!(g.neighbors(1), &[0, 2]);
}

#[test]
fn text_format_round_trip_and_errors() {
    let g = path(6);
    let t = g.to_text(3);
    let (h, c) = Graph::from_text(&t).unwrap();
    assert_eq!(h, g);
    assert_eq!(c, 3);
    assert!(matches!(Graph::from_text(""), Err(GraphError::Parse { .. })));
    assert!(matches!(Graph::from_text("3 2 2\n0 1\n"), Err(GraphError::Parse { .. })));
    assert!(matches!(Graph::from_text("3 2 2 3\n0 1\n"), Err(GraphError::Parse { .. })));
    assert!(matches!(Graph::from_text("3 1 2 3\n0 x\n"), Err(GraphError::Parse { line: 2, .. })));
}

#[test]
fn ball_on_a_path() {
    let g = path(10);
    assert_eq!(g.ball(&[4], 0), vec![4]);
    assert_eq!(g.ball(&[4], 2), vec![2, 3, 4, 5, 6]);
    assert_eq!(g.ball(&[0, 9], 1), vec![0, 1, 8, 9]);
    assert_eq!(g.ball_within(&[4], 3, |v| v != 5), vec![1, 2, 3, 4]);
}

fn bfs_oracle(adj: &[Vec<usize>], src: &[usize], r: usize) -> Vec<usize> {
    let n = adj.len();
    let mut out = Vec::new();
    for v in 0..n {
        // distance by repeated relaxation
        let mut d = vec![usize::MAX; n];
        for &s in src {
            d[s] = 0;
        }
        for _ in 0..n {
            for u in 0..n {
                if d[u] != usize::MAX {
                    for &w in &adj[u] {
                        d[w] = d[w].min(d[u] + 1);
                    }
                }
            }
        }
        if d[v] <= r {
            out.push(v);
        }
    }
    out
}

proptest! {
    #[test]
    fn ball_matches_relaxation_oracle(
        edges in prop::collection::vec((0usize..25, 0usize..25), 0..60),
        src in prop::collection::vec(0usize..25, 1..4),
        r in 0usize..5,
    ) {
        let edges: Vec<_> = edges.into_iter().filter(|(u, v)| u != v).collect();
        let g = Graph::from_edges(25, 25, &edges).unwrap();
        let adj: Vec<Vec<usize>> = (0..25).map(|v| g.neighbors(v).to_vec()).collect();
        prop_assert_eq!(g.ball(&src, r), bfs_oracle(&adj, &src, r));
    }
}

#[test]
fn palette_and_slack() {
    // star: center 0 with leaves 1..=4
    let g = Graph::from_edges(5, 4, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
    let mut col = PartialColoring::new(5, 4);
    col.set(1, 2);
    col.set(2, 2);
    col.set(3, 4);
    assert_eq!(palette(0, &col, &g), vec![1, 3]);
    assert_eq!(col.palette_size(0, &g), 2);
    let all = vec![true; 5];
    assert_eq!(slack(0, &all, &col, &g), 1);
    let none = vec![false; 5];
    assert_eq!(slack(0, &none, &col, &g), 2);
    assert_eq!(count_repeated_colors(0, &all, &col, &g), 1);
    assert_eq!(properness_scan(&g, &col), None);
    col.set(0, 4);
    assert_eq!(properness_scan(&g, &col), Some((0, 3)));
}

#[test]
fn commit_stamps_steps() {
    let mut col = PartialColoring::new(4, 3);
    assert_eq!(col.commit(&[(0, 1), (2, 1)]), 1);
    assert_eq!(col.commit(&[(1, 2)]), 2);
    assert_eq!(col.colored_at(0), Some(1));
    assert_eq!(col.colored_at(1), Some(2));
    assert_eq!(col.colored_at(3), None);
    assert_eq!(col.uncolored(&[0, 1, 2, 3]), vec![3]);
    assert_eq!(col.to_vec(), vec![1, 2, 1, 0]);
    col.uncolor(0);
    assert!(!col.is_colored(0) && col.colored_at(0).is_none());
}

#[test]
#[should_panic(expected = "outside")]
fn color_out_of_range_panics() {
    PartialColoring::new(2, 3).set(0, 4);
}

#[test]
fn node_rng_is_keyed() {
    let r = NodeRng::new(7);
    let a: u64 = r.stream(3, 1, 2).gen();
    let b: u64 = r.stream(3, 1, 2).gen();
    let c: u64 = r.stream(4, 1, 2).gen();
    let d: u64 = r.stream(3, 2, 2).gen();
    let e: u64 = NodeRng::new(8).stream(3, 1, 2).gen();
    assert_eq!(a, b);
    assert!(a != c && a != d && a != e);
}

#[test]
fn iteration_cap_is_frozen() {
    assert_eq!(iteration_cap(1e9, 64), 4404);
    assert_eq!(iteration_cap(1.0, 64), 674);
    let th = Thresholds::new(&AnalysisConstants::desk().effective().unwrap(), 64, 59);
    assert_eq!(th.iteration_cap, 674);
}

#[test]
fn desk_thresholds_at_64() {
    let k = AnalysisConstants::desk().effective().unwrap();
    let th = Thresholds::new(&k, 64, 59);
    assert!((th.cc_budget - 64f64.powf(37.0 / 40.0)).abs() < 1e-9);
    assert!((th.cumulative_cc - 51.2).abs() < 1e-9);
    assert!((th.listsize - 16.0).abs() < 1e-9);
    assert!((th.unhappy_audit - 16.0).abs() < 1e-9);
    assert_eq!(th.palette_split, 32);
    // Hall needs candidate floor ≥ 2·load ceiling
    assert!(th.cand_floor >= 2.0 * th.cand_load);
}

#[test]
fn overrides_apply_and_are_checked() {
    let k = AnalysisConstants::desk().effective().unwrap();
    for (name, v) in DESK_OVERRIDES {
        let got = serde_json::to_value(&k).unwrap()[*name].as_f64().unwrap();
        assert_eq!(got, *v, "{name}");
    }
    assert!(k.scale_overrides.is_empty());

    let mut p = AnalysisConstants::paper();
    p.push_override("alpha=1.5").unwrap();
    assert_eq!(p.effective().unwrap().alpha, 1.5);
    p.push_override("resample_budget=77").unwrap();
    assert_eq!(p.effective().unwrap().resample_budget, 77);
    p.push_override("delta0=50").unwrap();
    assert_eq!(p.effective().unwrap().delta0, Some(50));

    assert!(matches!(AnalysisConstants::paper().push_override("alpha"), Err(ConstantsError::Malformed(_))));
    assert!(matches!(AnalysisConstants::paper().push_override("alpha=x"), Err(ConstantsError::Malformed(_))));
    let bad = AnalysisConstants::paper().with_override("nonsense", 1.0);
    assert_eq!(bad.effective(), Err(ConstantsError::Unknown("nonsense".into())));
    let bad = AnalysisConstants::paper().with_override("rct_activation", 1.5);
    assert!(matches!(bad.effective(), Err(ConstantsError::Invalid { .. })));
    let bad = AnalysisConstants::paper().with_override("cc_budget_exponent", 1.0);
    assert!(matches!(bad.effective(), Err(ConstantsError::Invalid { .. })));
    let bad = AnalysisConstants::paper().with_override("alpha", -1.0);
    assert!(matches!(bad.effective(), Err(ConstantsError::Invalid { .. })));
}

#[test]
fn constants_json_round_trip() {
    let k = AnalysisConstants::desk();
    let s = serde_json::to_string(&k).unwrap();
    let back: AnalysisConstants = serde_json::from_str(&s).unwrap();
    assert_eq!(back, k);
    assert!(serde_json::from_str::<AnalysisConstants>(r#"{"bogus": 1}"#).is_err());
    let partial: AnalysisConstants = serde_json::from_str(r#"{"alpha": 2.0}"#).unwrap();
    assert_eq!(partial.alpha, 2.0);
    assert_eq!(partial.cc_budget_exponent, AnalysisConstants::paper().cc_budget_exponent);
}

fn wilson_oracle(k: usize, n: usize, z: f64) -> (f64, f64) {
    // solve |p̂ − p| = z·sqrt(p(1−p)/n) for p as a quadratic
    let (k, n) = (k as f64, n as f64);
    let ph = k / n;
    let a = 1.0 + z * z / n;
    let b = -(2.0 * ph + z * z / n);
    let c = ph * ph;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a))
}

#[test]
fn wilson_interval() {
    for (k, n) in [(0, 10), (10, 10), (95, 100), (50, 100), (3, 7)] {
        let (lo, hi) = wilson(k, n, 1.96);
        let (olo, ohi) = wilson_oracle(k, n, 1.96);
        assert!((lo - olo.max(0.0)).abs() < 1e-9 && (hi - ohi.min(1.0)).abs() < 1e-9, "{k}/{n}");
    }
    assert_eq!(wilson(0, 0, 1.96), (0.0, 1.0));
    let (lo, hi) = wilson(100, 100, 1.96);
    assert!((lo - 0.963).abs() < 1e-3 && (hi - 1.0).abs() < 1e-12);
}

#[test]
fn mask_marks_members() {
    assert_eq!(mask(4, &[1, 3]), vec![false, true, false, true]);
}
