//! Independent oracles and random instance generators shared by the
//! integration suites. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

pub mod cli;

use std::collections::{BTreeMap, BTreeSet};

use emoalign::align::AttributedWord;
use emoalign::fusion::{batch_loss, FusionConfig, FusionParams, Sample};
use emoalign::ingest::{EmotionLabel, SpeakerSegment, Word};
use emoalign::metrics::LabeledInterval;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-9;
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- alignment

/// O(n·m) maximal-overlap attribution with the documented tie rules and the
/// nearest-boundary rescue.
pub fn brute_force_attribution(words: &[Word], segments: &[SpeakerSegment], rescue_window: f64) -> Vec<(Option<String>, f64, bool)> {
    words
        .iter()
        .map(|w| {
            let mut best: Option<(f64, usize)> = None;
            for (i, s) in segments.iter().enumerate() {
                let ov = (w.end.min(s.end) - w.start.max(s.start)).max(0.0);
                if ov <= EPS {
                    continue;
                }
                let take = match best {
                    None => true,
                    Some((bo, bi)) => {
                        let b = &segments[bi];
                        ov > bo
                            || (ov == bo
                                && (s.start < b.start || (s.start == b.start && s.speaker < b.speaker)))
                    }
                };
                if take {
                    best = Some((ov, i));
                }
            }
            if let Some((ov, i)) = best {
                return (Some(segments[i].speaker.clone()), ov, false);
            }
            let mut near: Option<(f64, usize)> = None;
            for (i, s) in segments.iter().enumerate() {
                let gap = if s.end <= w.start {
                    w.start - s.end
                } else if s.start >= w.end {
                    s.start - w.end
                } else {
                    0.0
                };
                let take = match near {
                    None => true,
                    Some((bg, bi)) => {
                        let b = &segments[bi];
                        gap < bg
                            || (gap == bg
                                && (s.start < b.start || (s.start == b.start && s.speaker < b.speaker)))
                    }
                };
                if take {
                    near = Some((gap, i));
                }
            }
            match near {
                Some((gap, i)) if gap <= rescue_window + EPS => (Some(segments[i].speaker.clone()), 0.0, true),
                _ => (None, 0.0, false),
            }
        })
        .collect()
}

/// Random recording: up to `max_words` words on a shared timeline and
/// possibly overlapping segments of up to `max_speakers` speakers.
pub fn random_session(r: &mut ChaCha8Rng, max_words: usize, max_speakers: usize) -> (Vec<Word>, Vec<SpeakerSegment>) {
    let n_words = r.random_range(0..=max_words);
    let n_speakers = r.random_range(1..=max_speakers);
    let snap = |v: f64| (v * 100.0).round() / 100.0;
    let mut t = 0.0;
    let mut words = Vec::with_capacity(n_words);
    for i in 0..n_words {
        t += snap(r.random_range(-0.2..2.5f64)).max(0.0);
        let dur = snap(r.random_range(0.0..0.8));
        words.push(Word::new(format!("w{i}"), snap(t), snap(t + dur)).unwrap());
        t += dur;
    }
    // Shuffle file order a little: transcripts are not guaranteed sorted.
    for i in (1..words.len()).rev() {
        if r.random_bool(0.1) {
            let j = r.random_range(0..=i);
            words.swap(i, j);
        }
    }
    let horizon = t + 2.0;
    let n_segments = r.random_range(0..=(n_words / 2 + 3));
    let mut segments = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        let start = snap(r.random_range(0.0..horizon));
        let dur = snap(r.random_range(0.05..6.0f64)).max(0.01);
        let spk = format!("S{}", r.random_range(0..n_speakers));
        segments.push(SpeakerSegment::new(start, start + dur, spk).unwrap());
    }
    (words, segments)
}

pub fn flat_words(turns: &[emoalign::align::Turn]) -> Vec<AttributedWord> {
    turns.iter().flat_map(|t| t.words.iter().cloned()).collect()
}

// ------------------------------------------------------------------ metrics

/// Streams on an integer millisecond grid, with no same-speaker overlap.
pub fn random_stream(r: &mut ChaCha8Rng, speakers: &[&str], max_intervals: usize) -> Vec<LabeledInterval> {
    let mut out = Vec::new();
    let total = r.random_range(0..=max_intervals);
    let per = speakers.len().max(1);
    for (k, spk) in speakers.iter().enumerate() {
        let count = total / per + usize::from(k < total % per);
        let mut t: i64 = r.random_range(0..2000);
        for _ in 0..count {
            let dur = r.random_range(1..3000);
            let emo = EmotionLabel::ALL[r.random_range(0..4)];
            out.push(LabeledInterval::new(t as f64 / 1000.0, (t + dur) as f64 / 1000.0, *spk, emo).unwrap());
            t += dur + r.random_range(0..1500);
        }
    }
    out
}

/// Hypothesis derived from a reference by jittering boundaries, flipping
/// emotions, relabeling speakers, dropping and inserting intervals.
pub fn perturbed_stream(r: &mut ChaCha8Rng, reference: &[LabeledInterval], hyp_names: &[&str]) -> Vec<LabeledInterval> {
    let ref_names: Vec<String> = reference
        .iter()
        .map(|x| x.speaker.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rename: BTreeMap<String, &str> = ref_names
        .iter()
        .map(|n| (n.clone(), hyp_names[r.random_range(0..hyp_names.len())]))
        .collect();
    let mut by_speaker: BTreeMap<&str, Vec<(i64, i64, EmotionLabel)>> = BTreeMap::new();
    for iv in reference {
        if r.random_bool(0.1) {
            continue;
        }
        let ms = |v: f64| (v * 1000.0).round() as i64;
        let s = (ms(iv.start) + r.random_range(-300..300)).max(0);
        let e = (ms(iv.end) + r.random_range(-300..300)).max(s + 1);
        let emo = if r.random_bool(0.3) {
            EmotionLabel::ALL[r.random_range(0..4)]
        } else {
            iv.emotion
        };
        by_speaker.entry(rename[&iv.speaker]).or_default().push((s, e, emo));
    }
    let mut out = Vec::new();
    for (spk, mut ivs) in by_speaker {
        ivs.sort();
        let mut last_end = 0;
        for (s, e, emo) in ivs {
            let s = s.max(last_end);
            if e <= s {
                continue;
            }
            out.push(LabeledInterval::new(s as f64 / 1000.0, e as f64 / 1000.0, spk, emo).unwrap());
            last_end = e;
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct GridBreakdown {
    pub ms: f64,
    pub fa: f64,
    pub conf: f64,
    pub total: f64,
}

impl GridBreakdown {
    pub fn rate(&self) -> f64 {
        (self.ms + self.fa + self.conf) / self.total
    }
}

fn to_ms(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

fn active(stream: &[LabeledInterval], t: f64) -> Vec<usize> {
    (0..stream.len())
        .filter(|&i| stream[i].start <= t && t < stream[i].end)
        .collect()
}

fn grid_span(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> (i64, i64) {
    let all = reference.iter().chain(hypothesis);
    let lo = all.clone().map(|x| to_ms(x.start)).min().unwrap_or(0);
    let hi = all.map(|x| to_ms(x.end)).max().unwrap_or(0);
    (lo, hi)
}

/// Largest number of (h, r) pairs with `ok(h, r)`, each used once.
fn max_matching(h: &[usize], r: &[usize], ok: &dyn Fn(usize, usize) -> bool) -> usize {
    fn go(h: &[usize], r: &[usize], used: &mut Vec<bool>, ok: &dyn Fn(usize, usize) -> bool) -> usize {
        let Some((&first, rest)) = h.split_first() else {
            return 0;
        };
        let mut best = go(rest, r, used, ok);
        for k in 0..r.len() {
            if !used[k] && ok(first, r[k]) {
                used[k] = true;
                best = best.max(1 + go(rest, r, used, ok));
                used[k] = false;
            }
        }
        best
    }
    go(h, r, &mut vec![false; r.len()], ok)
}

fn grid_score(
    reference: &[LabeledInterval],
    hypothesis: &[LabeledInterval],
    agree: &dyn Fn(usize, usize) -> bool,
) -> GridBreakdown {
    let (lo, hi) = grid_span(reference, hypothesis);
    let mut b = GridBreakdown {
        ms: 0.0,
        fa: 0.0,
        conf: 0.0,
        total: 0.0,
    };
    for k in lo..hi {
        let t = (k as f64 + 0.5) / 1000.0;
        let rs = active(reference, t);
        let hs = active(hypothesis, t);
        let (nr, nh) = (rs.len(), hs.len());
        b.ms += 0.001 * nr.saturating_sub(nh) as f64;
        b.fa += 0.001 * nh.saturating_sub(nr) as f64;
        b.total += 0.001 * nr as f64;
        let good = max_matching(&hs, &rs, agree);
        b.conf += 0.001 * (nr.min(nh) - good) as f64;
    }
    b
}

pub fn grid_teer(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> GridBreakdown {
    grid_score(reference, hypothesis, &|h, r| hypothesis[h].emotion == reference[r].emotion)
}

pub fn grid_steer(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> GridBreakdown {
    let (mapping, _) = brute_force_mapping(reference, hypothesis);
    grid_score(reference, hypothesis, &|h, r| {
        mapping.get(&hypothesis[h].speaker) == Some(&reference[r].speaker)
            && hypothesis[h].emotion == reference[r].emotion
    })
}

/// Speaker overlap in seconds, by containment tests on the millisecond grid.
pub fn grid_overlap(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> BTreeMap<(String, String), f64> {
    let (lo, hi) = grid_span(reference, hypothesis);
    let mut m = BTreeMap::new();
    for k in lo..hi {
        let t = (k as f64 + 0.5) / 1000.0;
        for h in active(hypothesis, t) {
            for r in active(reference, t) {
                *m.entry((hypothesis[h].speaker.clone(), reference[r].speaker.clone())).or_insert(0.0) += 0.001;
            }
        }
    }
    m
}

/// Exhaustive search over every injective partial hyp→ref map.
pub fn brute_force_mapping(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> (BTreeMap<String, String>, f64) {
    let overlap = grid_overlap(reference, hypothesis);
    let hyp: Vec<String> = hypothesis.iter().map(|x| x.speaker.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let refs: Vec<String> = reference.iter().map(|x| x.speaker.clone()).collect::<BTreeSet<_>>().into_iter().collect();

    fn go(
        i: usize,
        hyp: &[String],
        refs: &[String],
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        overlap: &BTreeMap<(String, String), f64>,
        best: &mut (f64, Vec<Option<usize>>),
    ) {
        if i == hyp.len() {
            let score: f64 = current
                .iter()
                .enumerate()
                .filter_map(|(h, r)| r.map(|r| overlap.get(&(hyp[h].clone(), refs[r].clone())).copied().unwrap_or(0.0)))
                .sum();
            if score > best.0 + 1e-12 {
                *best = (score, current.clone());
            }
            return;
        }
        current.push(None);
        go(i + 1, hyp, refs, used, current, overlap, best);
        current.pop();
        for r in 0..refs.len() {
            if !used[r] {
                used[r] = true;
                current.push(Some(r));
                go(i + 1, hyp, refs, used, current, overlap, best);
                current.pop();
                used[r] = false;
            }
        }
    }

    let mut best = (0.0, vec![None; hyp.len()]);
    go(0, &hyp, &refs, &mut vec![false; refs.len()], &mut Vec::new(), &overlap, &mut best);
    let map = best
        .1
        .iter()
        .enumerate()
        .filter_map(|(h, r)| r.map(|r| (hyp[h].clone(), refs[r].clone())))
        .filter(|(h, r)| overlap.get(&(h.clone(), r.clone())).copied().unwrap_or(0.0) > 0.0)
        .collect();
    (map, best.0)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ------------------------------------------------------------------- fusion

/// Random unit-scale parameters, including non-zero biases and gains, so
/// that every gradient path is exercised.
pub fn random_params(config: &FusionConfig, seed: u64) -> FusionParams {
    let mut p = FusionParams::init(config).unwrap();
    let mut r = rng(seed);
    for (name, mut t) in p.tensors_mut() {
        let gain = name.ends_with("gain");
        for v in t.iter_mut() {
            *v = if gain {
                r.random_range(0.5..1.5)
            } else {
                r.random_range(-0.6..0.6)
            };
        }
    }
    p
}

pub fn random_batch(dim: usize, n: usize, seed: u64) -> Vec<Sample> {
    use emoalign::ingest::EmbeddingMatrix;
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let mat = |r: &mut ChaCha8Rng| {
                let t = r.random_range(1..=4);
                let rows: Vec<Vec<f64>> = (0..t).map(|_| (0..dim).map(|_| r.random_range(-1.5..1.5)).collect()).collect();
                EmbeddingMatrix::from_rows(&rows).unwrap()
            };
            Sample {
                text: mat(&mut r),
                audio: mat(&mut r),
                label: EmotionLabel::ALL[i % 4],
            }
        })
        .collect()
}

/// Central finite differences of the summed batch loss for every element of
/// tensor `index`.
pub fn finite_difference(batch: &[Sample], params: &FusionParams, config: &FusionConfig, index: usize, step: f64) -> Vec<f64> {
    let len = params.tensors()[index].1.len();
    (0..len)
        .map(|k| {
            let eval = |delta: f64| {
                let mut p = params.clone();
                {
                    let mut tensors = p.tensors_mut();
                    let t = &mut tensors[index].1;
                    let slot = t.iter_mut().nth(k).unwrap();
                    *slot += delta;
                }
                batch_loss(batch, &p, config).unwrap()
            };
            (eval(step) - eval(-step)) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`. The floor keeps tensors whose gradient
/// is identically zero (key biases under softmax shift invariance) from
/// turning rounding noise into a relative error of one.
pub fn tensor_rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(GRAD_FLOOR)
}

/// Partition, tightness, gap-bound and minimality for turns built from
/// `stream`. Returns a description of the first violation.
pub fn check_turn_invariants(
    stream: &[AttributedWord],
    turns: &[emoalign::align::Turn],
    pause: f64,
) -> Result<(), String> {
    let concatenated = flat_words(turns);
    if concatenated != stream {
        return Err(format!(
            "partition: {} words in turns, {} in stream",
            concatenated.len(),
            stream.len()
        ));
    }
    let gap = |a: &AttributedWord, b: &AttributedWord| (b.word.start - a.word.end).max(0.0);
    for (k, t) in turns.iter().enumerate() {
        let (first, last) = (t.words.first().ok_or("empty turn")?, t.words.last().unwrap());
        if t.start != first.word.start || t.end != last.word.end {
            return Err(format!("turn {k}: boundaries [{}, {}] not tight", t.start, t.end));
        }
        for pair in t.words.windows(2) {
            if pair[0].speaker != pair[1].speaker {
                return Err(format!("turn {k}: mixed speakers"));
            }
            if gap(&pair[0], &pair[1]) > pause + EPS {
                return Err(format!("turn {k}: inner gap {} exceeds {pause}", gap(&pair[0], &pair[1])));
            }
        }
        let text: Vec<&str> = t.words.iter().map(|w| w.word.text.as_str()).collect();
        if t.text != text.join(" ") {
            return Err(format!("turn {k}: text {:?}", t.text));
        }
    }
    for (k, pair) in turns.windows(2).enumerate() {
        let (a, b) = (pair[0].words.last().unwrap(), &pair[1].words[0]);
        if a.speaker == b.speaker && gap(a, b) <= pause + EPS {
            return Err(format!("turns {k} and {} could merge", k + 1));
        }
    }
    Ok(())
}
