//! Error rates and speaker mapping against grid and exhaustive oracles.

mod common;

use common::{brute_force_mapping, grid_overlap, grid_steer, grid_teer, perturbed_stream, random_stream, rel_close, rng, GridBreakdown};
use emoalign::ingest::{EmotionLabel, ReferenceUtterance};
use emoalign::metrics::{
    build_timeline, classification_report, compute_steer, compute_teer, match_labels, optimal_speaker_mapping,
    solve_max_assignment, LabeledInterval, TeerBreakdown,
};
use emoalign::Error;
use proptest::prelude::*;
use rand::Rng;

const REF: [&str; 4] = ["A", "B", "C", "D"];
const HYP: [&str; 4] = ["x", "y", "z", "w"];

fn session(seed: u64) -> (Vec<LabeledInterval>, Vec<LabeledInterval>) {
    let mut r = rng(seed);
    let n_ref = r.random_range(1..=4);
    let n_hyp = r.random_range(1..=4);
    let mut reference = random_stream(&mut r, &REF[..n_ref], 50);
    if reference.is_empty() {
        reference.push(LabeledInterval::new(0.0, 1.0, "A", EmotionLabel::Neutral).unwrap());
    }
    let hypothesis = if seed.is_multiple_of(3) {
        random_stream(&mut r, &HYP[..n_hyp], 50)
    } else {
        perturbed_stream(&mut r, &reference, &HYP[..n_hyp])
    };
    (reference, hypothesis)
}

fn assert_breakdown(got: &TeerBreakdown, want: &GridBreakdown, tol: f64, what: &str) {
    for (name, g, w) in [("ms", got.ms, want.ms), ("fa", got.fa, want.fa), ("conf", got.conf, want.conf), ("total", got.total, want.total)] {
        assert!(rel_close(g, w, tol), "{what} {name}: {g} vs grid {w}");
    }
    assert!(rel_close(got.rate, want.rate(), tol), "{what} rate: {} vs {}", got.rate, want.rate());
}

#[test]
fn teer_and_steer_match_the_grid_oracle() {
    for seed in 0..150 {
        let (reference, hypothesis) = session(seed);
        let teer = compute_teer(&reference, &hypothesis).unwrap();
        let steer = compute_steer(&reference, &hypothesis).unwrap();
        assert_breakdown(&teer, &grid_teer(&reference, &hypothesis), 1e-6, &format!("seed {seed} TEER"));
        assert_breakdown(&steer, &grid_steer(&reference, &hypothesis), 1e-6, &format!("seed {seed} sTEER"));
        assert!(steer.rate >= teer.rate - 1e-12, "seed {seed}");
        assert_eq!(steer.ms, teer.ms);
        assert_eq!(steer.fa, teer.fa);
    }
}

#[test]
fn identical_streams_score_zero() {
    for seed in 0..50 {
        let (reference, _) = session(seed);
        assert_eq!(compute_teer(&reference, &reference).unwrap().rate, 0.0);
        assert_eq!(compute_steer(&reference, &reference).unwrap().rate, 0.0);
    }
}

fn transform(stream: &[LabeledInterval], scale: f64, shift: f64) -> Vec<LabeledInterval> {
    stream
        .iter()
        .map(|x| LabeledInterval::new(x.start * scale + shift, x.end * scale + shift, x.speaker.clone(), x.emotion).unwrap())
        .collect()
}

#[test]
fn shift_invariance_and_scale_covariance() {
    for seed in 0..100 {
        let (reference, hypothesis) = session(seed);
        let base = compute_teer(&reference, &hypothesis).unwrap();
        let base_s = compute_steer(&reference, &hypothesis).unwrap();
        let shift = 37.25 + seed as f64;
        let moved = compute_teer(&transform(&reference, 1.0, shift), &transform(&hypothesis, 1.0, shift)).unwrap();
        let moved_s = compute_steer(&transform(&reference, 1.0, shift), &transform(&hypothesis, 1.0, shift)).unwrap();
        assert!(rel_close(base.rate, moved.rate, 1e-9) && rel_close(base_s.rate, moved_s.rate, 1e-9), "seed {seed}");
        let scale = 2.5;
        let scaled = compute_teer(&transform(&reference, scale, 0.0), &transform(&hypothesis, scale, 0.0)).unwrap();
        assert!(rel_close(base.rate, scaled.rate, 1e-9));
        for (a, b) in [(base.ms, scaled.ms), (base.fa, scaled.fa), (base.conf, scaled.conf), (base.total, scaled.total)] {
            assert!(rel_close(a * scale, b, 1e-9), "seed {seed}: {a} * {scale} vs {b}");
        }
    }
}

#[test]
fn swapping_streams_swaps_misses_and_false_alarms() {
    for seed in 0..50 {
        let (reference, hypothesis) = session(seed);
        if hypothesis.is_empty() {
            continue;
        }
        let fwd = compute_teer(&reference, &hypothesis).unwrap();
        let rev = compute_teer(&hypothesis, &reference).unwrap();
        assert!(rel_close(fwd.ms, rev.fa, 1e-12) && rel_close(fwd.fa, rev.ms, 1e-12));
        assert!(rel_close(fwd.conf, rev.conf, 1e-12));
    }
}

#[test]
fn mapping_matches_exhaustive_search() {
    for seed in 0..200 {
        let (reference, hypothesis) = session(seed);
        let got = optimal_speaker_mapping(&reference, &hypothesis).unwrap();
        let (_, best) = brute_force_mapping(&reference, &hypothesis);
        assert!(rel_close(got.objective, best, 1e-6), "seed {seed}: {} vs {best}", got.objective);
        let overlap = grid_overlap(&reference, &hypothesis);
        let achieved: f64 = got.pairs.iter().map(|(h, r)| overlap.get(&(h.clone(), r.clone())).copied().unwrap_or(0.0)).sum();
        assert!(rel_close(achieved, best, 1e-6), "seed {seed}: pairs achieve {achieved}, optimum {best}");
        let mut targets: Vec<&String> = got.pairs.values().collect();
        targets.sort();
        targets.dedup();
        assert_eq!(targets.len(), got.pairs.len(), "mapping must be injective");
    }
}

#[test]
fn assignment_solver_handles_rectangles() {
    let mut r = rng(9);
    for _ in 0..300 {
        let rows = r.random_range(1..=5);
        let cols = r.random_range(1..=5);
        let w: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| r.random_range(0.0..10.0)).collect()).collect();
        let got = solve_max_assignment(&w);
        let value: f64 = got.iter().enumerate().filter_map(|(i, c)| c.map(|c| w[i][c])).sum();
        // Exhaustive over injective partial maps.
        fn best(i: usize, w: &[Vec<f64>], used: &mut Vec<bool>) -> f64 {
            if i == w.len() {
                return 0.0;
            }
            let mut b = best(i + 1, w, used);
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    b = b.max(w[i][c] + best(i + 1, w, used));
                    used[c] = false;
                }
            }
            b
        }
        let opt = best(0, &w, &mut vec![false; cols]);
        assert!((value - opt).abs() <= 1e-9, "{value} vs {opt}");
    }
}

#[test]
fn timeline_partitions_the_covered_span() {
    for seed in 0..50 {
        let (reference, hypothesis) = session(seed);
        let tl = build_timeline(&reference, &hypothesis).unwrap();
        for pair in tl.intervals.windows(2) {
            assert!(pair[0].end <= pair[1].start);
        }
        for iv in &tl.intervals {
            assert!(iv.start < iv.end);
            assert!(!iv.reference.is_empty() || !iv.hypothesis.is_empty());
            let mid = 0.5 * (iv.start + iv.end);
            let want: Vec<usize> = (0..reference.len()).filter(|&i| reference[i].start <= mid && mid < reference[i].end).collect();
            assert_eq!(iv.reference, want);
        }
    }
}

#[test]
fn self_overlapping_speaker_is_rejected() {
    let bad = vec![
        LabeledInterval::new(0.0, 2.0, "A", EmotionLabel::Happy).unwrap(),
        LabeledInterval::new(1.0, 3.0, "A", EmotionLabel::Sad).unwrap(),
    ];
    let good = vec![LabeledInterval::new(0.0, 1.0, "B", EmotionLabel::Sad).unwrap()];
    assert!(matches!(compute_teer(&bad, &good), Err(Error::Validation(_))));
    assert!(matches!(compute_teer(&good, &bad), Err(Error::Validation(_))));
}

#[test]
fn empty_reference_is_degenerate() {
    let hyp = vec![LabeledInterval::new(0.0, 1.0, "x", EmotionLabel::Sad).unwrap()];
    assert!(matches!(compute_teer(&[], &hyp), Err(Error::DegenerateInput(_))));
    assert!(matches!(compute_steer(&[], &hyp), Err(Error::DegenerateInput(_))));
}

#[test]
fn report_accuracy_counts_exact_agreement() {
    let mut r = rng(10);
    for _ in 0..50 {
        let (reference, hypothesis) = session(r.random());
        let utterances: Vec<ReferenceUtterance> = reference
            .iter()
            .map(|x| ReferenceUtterance { start: x.start, end: x.end, speaker: x.speaker.clone(), emotion: x.emotion })
            .collect();
        let pairs = match_labels(&utterances, &hypothesis);
        assert_eq!(pairs.len(), utterances.len());
        let report = classification_report(&pairs).unwrap();
        let hits = pairs.iter().filter(|p| p.predicted == Some(p.reference)).count();
        assert!((report.accuracy - hits as f64 / pairs.len() as f64).abs() < 1e-12);
        let row_sums: usize = report.confusion.iter().flatten().sum();
        assert_eq!(row_sums, pairs.len());
        for c in &report.per_class {
            assert!((0.0..=1.0).contains(&c.f1));
        }
    }
}

fn rename(stream: &[LabeledInterval], f: &dyn Fn(&str) -> String) -> Vec<LabeledInterval> {
    stream
        .iter()
        .map(|x| LabeledInterval { speaker: f(&x.speaker), ..x.clone() })
        .collect()
}

#[test]
fn speaker_relabeling_symmetries() {
    for seed in 0..60 {
        let (reference, hypothesis) = session(seed);
        let swap = |s: &str| match s {
            "A" => "B".to_string(),
            "B" => "A".to_string(),
            other => other.to_string(),
        };
        let teer = compute_teer(&reference, &hypothesis).unwrap();
        let swapped = compute_teer(&rename(&reference, &swap), &rename(&hypothesis, &swap)).unwrap();
        assert_eq!(teer, swapped);
        let steer = compute_steer(&reference, &hypothesis).unwrap();
        let relabeled = compute_steer(&reference, &rename(&hypothesis, &|s| format!("spk-{}", s.len() * 7 + s.as_bytes()[0] as usize))).unwrap();
        assert!(rel_close(steer.rate, relabeled.rate, 1e-12), "seed {seed}");
    }
}

#[test]
fn macro_f1_is_the_mean_over_observed_classes() {
    use emoalign::metrics::LabelPair;
    let mut r = rng(11);
    for _ in 0..200 {
        let n = r.random_range(1..30);
        let pairs: Vec<LabelPair> = (0..n)
            .map(|_| LabelPair {
                reference: EmotionLabel::ALL[r.random_range(0..4)],
                predicted: EmotionLabel::from_index(r.random_range(0..5)),
            })
            .collect();
        let report = classification_report(&pairs).unwrap();
        let observed: Vec<f64> = report.per_class.iter().filter(|c| c.support + c.predicted > 0).map(|c| c.f1).collect();
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        assert!((report.macro_f1 - mean).abs() < 1e-12);
        let total: usize = report.per_class.iter().map(|c| c.support).sum();
        let weighted: f64 = report.per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / total as f64;
        assert!((report.weighted_f1 - weighted).abs() < 1e-12);
        for c in &report.per_class {
            let tp = pairs.iter().filter(|p| p.reference == c.label && p.predicted == Some(c.label)).count() as f64;
            let p = if c.predicted > 0 { tp / c.predicted as f64 } else { 0.0 };
            let rc = if c.support > 0 { tp / c.support as f64 } else { 0.0 };
            let f1 = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
            assert!((c.f1 - f1).abs() < 1e-12 && (c.precision - p).abs() < 1e-12 && (c.recall - rc).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_oracle_agreement_on_arbitrary_seeds(seed in any::<u64>()) {
        let (reference, hypothesis) = session(seed);
        let teer = compute_teer(&reference, &hypothesis).unwrap();
        let steer = compute_steer(&reference, &hypothesis).unwrap();
        prop_assert!(rel_close(teer.rate, grid_teer(&reference, &hypothesis).rate(), 1e-6));
        prop_assert!(rel_close(steer.rate, grid_steer(&reference, &hypothesis).rate(), 1e-6));
        prop_assert!(steer.rate >= teer.rate - 1e-12);
    }
}
