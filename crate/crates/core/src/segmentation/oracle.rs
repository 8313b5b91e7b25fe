//! Exhaustive enumeration over all segmentations and model assignments.
//!
//! Exponential in the number of frames; intended for short demonstrations
//! only. Evidence is recomputed frame by frame without prefix sums.

use crate::error::{Error, Result};
use crate::segmentation::{candidate_abstractions, DistanceMode, SegPrior};
use crate::state::{Abstraction, Demonstration};

/// Largest demonstration the enumeration accepts.
pub const MAX_FRAMES: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub segments: Vec<(usize, usize, Abstraction)>,
    pub log_score: f64,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn naive_evidence(demo: &Demonstration, j: usize, t: usize, q: &Abstraction, prior: &SegPrior) -> f64 {
    let n = (t - j - 1) as f64;
    let hand = |k: usize| demo.frames[k].hand.location;
    let loc = |id: &str, k: usize| demo.frames[k].location(id).unwrap();
    let mut v = -n * dist(hand(t), loc(&q.reference, t));
    for id in q.objects() {
        let mut total = 0.0;
        let mut count = 0.0;
        for k in j + 1..=t {
            total += match prior.distance_mode {
                DistanceMode::Displacement => {
                    let dh = [0, 1, 2].map(|c| hand(k)[c] - hand(k - 1)[c]);
                    let d_o = [0, 1, 2].map(|c| loc(id, k)[c] - loc(id, k - 1)[c]);
                    dist(dh, d_o)
                }
                DistanceMode::Literal => dist(hand(k), loc(id, k)),
            };
            count += 1.0;
        }
        let d_bar = total / count;
        let sig = 1.0 / (1.0 + (-100.0 * d_bar).exp());
        v += if d_bar <= prior.d_thresh { n * (1.0 - sig) } else { -n * sig };
    }
    v
}

/// Best segmentation by explicit enumeration; ties keep the first one found.
pub fn brute_force(demo: &Demonstration, prior: &SegPrior) -> Result<BruteForceResult> {
    prior.validate()?;
    if demo.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: demo.len() });
    }
    if demo.len() > MAX_FRAMES {
        return Err(Error::InvalidConfig(format!(
            "exhaustive enumeration is limited to {MAX_FRAMES} frames, demo has {}",
            demo.len()
        )));
    }
    let cands = candidate_abstractions(demo.hand_id(), &demo.object_ids())?;
    let last = demo.len() - 1;
    let p = 1.0 / prior.expected_len_k;
    let log_q = (1.0 / cands.len() as f64).ln();
    // evidence[j][t][q]
    let mut evidence = vec![vec![Vec::new(); demo.len()]; demo.len()];
    for j in 0..demo.len() {
        for t in j + 2..demo.len() {
            evidence[j][t] = cands.iter().map(|q| naive_evidence(demo, j, t, q, prior)).collect();
        }
    }

    let mut search = Search {
        evidence,
        log_q,
        p,
        last,
        path: Vec::new(),
        best: BruteForceResult { segments: Vec::new(), log_score: f64::NEG_INFINITY },
        cands: &cands,
    };
    search.extend(0, 0.0);
    Ok(search.best)
}

struct Search<'a> {
    /// evidence[j][t][q]
    evidence: Vec<Vec<Vec<f64>>>,
    log_q: f64,
    p: f64,
    last: usize,
    path: Vec<(usize, usize, usize)>,
    best: BruteForceResult,
    cands: &'a [Abstraction],
}

impl Search<'_> {
    fn extend(&mut self, start: usize, score: f64) {
        for end in start + 2..=self.last {
            if end != self.last && end + 2 > self.last {
                continue;
            }
            let len = (end - start) as i32;
            let length_term = if end == self.last {
                (1.0 - self.p).powi(len - 1).ln()
            } else {
                ((1.0 - self.p).powi(len - 1) * self.p).ln()
            };
            for q in 0..self.cands.len() {
                let s = score + self.evidence[start][end][q] + self.log_q + length_term;
                self.path.push((start, end, q));
                if end == self.last {
                    if s > self.best.log_score {
                        self.best.log_score = s;
                        self.best.segments =
                            self.path.iter().map(|&(j, t, q)| (j, t, self.cands[q].clone())).collect();
                    }
                } else {
                    self.extend(end, s);
                }
                self.path.pop();
            }
        }
    }
}
