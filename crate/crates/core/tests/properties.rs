use proptest::prelude::*;

use filament::counter::{count_scale, significant_strips, PointCloud};
use filament::graph::{is_edge, successors};
use filament::io::{parse_points_csv, points_to_csv};
use filament::runs::{detect_with, is_valid_run, longest_significant_path, ScanMode, SignificanceGraph};
use filament::scalar::Point2;
use filament::strip::{contains, enumerate_strips, max_scale, scale_params, strips_containing, StripId};
use filament::thresholds::{ThresholdSet, DEFAULT_P0};

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..=1.0
}

fn cloud(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((unit(), unit()), 0..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inverse_index_matches_filtering(
        log_n in 4u32..=8,
        j_frac in 0.0f64..1.0,
        x in unit(),
        y in unit(),
    ) {
        let n = 1usize << log_n;
        let j = ((max_scale(n) + 1) as f64 * j_frac) as u32;
        let p = scale_params::<f64>(n, j.min(max_scale(n)), 2.0).unwrap();
        let pt = Point2::new(x, y);
        let fast = strips_containing(pt, &p);
        let slow: Vec<StripId> = enumerate_strips(&p).filter(|id| contains(&p, id, pt)).collect();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn corner_form_agrees_with_midline_form(
        log_n in 6u32..=14,
        pick in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        rel_x in 0.0f64..1.0,
        rel_y in -1.0f64..1.0,
    ) {
        // offsets within 1e-6 of the band edge are left to the unit tests
        prop_assume!((rel_y.abs() - 0.5).abs() > 1e-6);
        let n = 1usize << log_n;
        let j = (pick.0 * (max_scale(n) + 1) as f64) as u32;
        let p = scale_params::<f64>(n, j.min(max_scale(n)), 2.0).unwrap();
        let id = StripId::new(
            p.j,
            ((pick.1 * p.cells as f64) as u32).min(p.cells - 1),
            ((pick.2 * p.l1_count as f64) as u32).min(p.l1_count - 1),
            ((pick.3 * (2 * p.l2_max + 1) as f64) as i32).min(2 * p.l2_max) - p.l2_max,
        );
        let g = p.geometry(&id);
        let x = g.x_range.0 + rel_x * p.w;
        prop_assume!(x < g.x_range.1);
        let pt = Point2::new(x, g.midline(x) + rel_y * p.t);
        let [c0, c1, c2, c3] = g.corners();
        let f = (x - c0.x) / (c1.x - c0.x);
        let inside = pt.y >= c0.y + f * (c1.y - c0.y) && pt.y <= c3.y + f * (c2.y - c3.y) && x < c1.x;
        prop_assert_eq!(g.contains(pt), inside);
        prop_assert_eq!(inside, rel_y.abs() < 0.5);
    }

    #[test]
    fn adding_points_never_lowers_counts_or_runs(
        base in cloud(160),
        extra in cloud(60),
        nstar in 1u32..5,
    ) {
        let n = 128;
        let mut all = base.clone();
        all.extend(extra);
        let small = PointCloud::from_pairs(&base).unwrap();
        let big = PointCloud::from_pairs(&all).unwrap();
        for j in 0..=max_scale(n) {
            let p = scale_params::<f64>(n, j, 2.0).unwrap();
            let (a, b) = (count_scale(&small, &p), count_scale(&big, &p));
            for (id, c) in a.iter_nonzero() {
                prop_assert!(b.get(&id) >= c);
            }
            let lmax = |c: &PointCloud<f64>| {
                let sig = SignificanceGraph::new(j, significant_strips(c, &p, nstar));
                longest_significant_path(&sig, &p).0
            };
            prop_assert!(lmax(&big) >= lmax(&small));
        }
    }

    #[test]
    fn detection_is_consistent_across_modes(pts in cloud(300), nstar in 2u32..6, lstar in 0.0f64..4.0) {
        prop_assume!(pts.len() >= 2);
        let c = PointCloud::from_pairs(&pts).unwrap();
        let ts = ThresholdSet::fixed(nstar, lstar, DEFAULT_P0);
        let full = detect_with(&c, 2.0, &ts, ScanMode::Exhaustive).unwrap();
        let exact = detect_with(&c, 2.0, &ts, ScanMode::ExactMax).unwrap();
        let decision = detect_with(&c, 2.0, &ts, ScanMode::Decision).unwrap();
        prop_assert_eq!(full.lmax, full.per_scale.iter().map(|r| r.lmax_j).max().unwrap());
        prop_assert_eq!(full.reject, full.lmax as f64 > lstar);
        prop_assert_eq!(exact.lmax, full.lmax);
        prop_assert_eq!(decision.reject, full.reject);
        for run in &full.per_scale {
            let p = scale_params::<f64>(c.len(), run.j, 2.0).unwrap();
            let table = count_scale(&c, &p);
            let sig = SignificanceGraph::new(run.j, table.iter_nonzero().filter(|(_, v)| *v > nstar).map(|(id, _)| id));
            prop_assert_eq!(run.witness.len(), run.lmax_j);
            prop_assert!(is_valid_run(&run.witness, &sig));
            prop_assert_eq!(sig.len(), run.significant);
        }
    }

    #[test]
    fn successors_are_exactly_the_edges(log_n in 4u32..=7, pick in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)) {
        let n = 1usize << log_n;
        let j = ((pick.0 * (max_scale(n) + 1) as f64) as u32).min(max_scale(n));
        let p = scale_params::<f64>(n, j, 2.0).unwrap();
        let id = StripId::new(
            j,
            ((pick.1 * p.cells as f64) as u32).min(p.cells - 1),
            ((pick.2 * p.l1_count as f64) as u32).min(p.l1_count - 1),
            ((pick.3 * (2 * p.l2_max + 1) as f64) as i32).min(2 * p.l2_max) - p.l2_max,
        );
        let succ = successors(&id, &p);
        let brute: Vec<StripId> = enumerate_strips(&p).filter(|b| is_edge(&id, b)).collect();
        prop_assert_eq!(succ, brute);
    }

    #[test]
    fn csv_round_trip(pts in cloud(200)) {
        let c = PointCloud::from_pairs(&pts).unwrap();
        prop_assert_eq!(parse_points_csv(points_to_csv(&c).as_bytes()).unwrap(), c);
    }
}
