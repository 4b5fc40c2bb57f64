//! Session-level hypothesis→reference speaker mapping.

use std::collections::{BTreeMap, BTreeSet};

use super::{build_timeline, LabeledInterval};
use crate::error::Result;

/// Injective map from hypothesis speaker ids to reference speaker ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeakerMapping {
    pub pairs: BTreeMap<String, String>,
    /// Total overlap, in seconds, between mapped speaker pairs.
    pub objective: f64,
}

impl SpeakerMapping {
    pub fn get(&self, hyp_speaker: &str) -> Option<&str> {
        self.pairs.get(hyp_speaker).map(String::as_str)
    }
}

/// Maximum-weight assignment of rows to columns (Hungarian method, O(n³)).
///
/// Works on rectangular input by padding with zero weights. Returns the
/// chosen column for each row; rows left unassigned, or assigned to a padding
/// column, get `None`.
#[allow(clippy::needless_range_loop)]
pub fn solve_max_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return vec![None; rows];
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row (1-based) matched to column j; way[j]: previous column on the
    // augmenting path.
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
        }
    }
    assignment
}

/// Overlap-maximizing injective speaker map for a whole session.
///
/// Pairs whose overlap is zero are left unmapped.
pub fn optimal_speaker_mapping(reference: &[LabeledInterval], hypothesis: &[LabeledInterval]) -> Result<SpeakerMapping> {
    let timeline = build_timeline(reference, hypothesis)?;
    let ref_speakers: Vec<&str> = reference
        .iter()
        .map(|r| r.speaker.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let hyp_speakers: Vec<&str> = hypothesis
        .iter()
        .map(|h| h.speaker.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ref_pos = |s: &str| ref_speakers.binary_search(&s).expect("speaker collected above");
    let hyp_pos = |s: &str| hyp_speakers.binary_search(&s).expect("speaker collected above");

    let mut weights = vec![vec![0.0; ref_speakers.len()]; hyp_speakers.len()];
    for slice in &timeline.intervals {
        let delta = slice.duration();
        for &h in &slice.hypothesis {
            for &r in &slice.reference {
                weights[hyp_pos(&hypothesis[h].speaker)][ref_pos(&reference[r].speaker)] += delta;
            }
        }
    }

    let mut mapping = SpeakerMapping::default();
    for (h, col) in solve_max_assignment(&weights).into_iter().enumerate() {
        if let Some(r) = col {
            if weights[h][r] > 0.0 {
                mapping.objective += weights[h][r];
                mapping
                    .pairs
                    .insert(hyp_speakers[h].to_string(), ref_speakers[r].to_string());
            }
        }
    }
    Ok(mapping)
}
