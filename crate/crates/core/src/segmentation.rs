//! Simultaneous segmentation and abstraction selection.
//!
//! Exact MAP changepoint inference in the log domain: the hidden state of each
//! segment is a candidate abstraction, segment lengths follow a geometric prior
//! and a segment's evidence scores how well the abstraction explains the hand
//! ending near the reference while relevant objects move with the hand.

pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{norm3, sub3};
use crate::state::{Abstraction, Demonstration};

/// How the co-movement statistic d̄ is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DistanceMode {
    /// Mean norm of per-frame displacement differences between hand and object.
    #[default]
    Displacement,
    /// Mean hand-object distance.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegPrior {
    /// Expected skill length in frames; the geometric parameter is 1/k.
    pub expected_len_k: f64,
    /// Co-movement threshold in metres (per frame in displacement mode).
    pub d_thresh: f64,
    /// Ratio threshold used by [`rank_candidates`].
    pub alpha_model: f64,
    pub distance_mode: DistanceMode,
}

impl Default for SegPrior {
    fn default() -> Self {
        Self { expected_len_k: 100.0, d_thresh: 2e-6, alpha_model: 0.2, distance_mode: DistanceMode::Displacement }
    }
}

impl SegPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.expected_len_k >= 2.0) {
            return Err(Error::InvalidConfig(format!("expected_len_k must be >= 2, got {}", self.expected_len_k)));
        }
        if !(self.d_thresh > 0.0) {
            return Err(Error::InvalidConfig(format!("d_thresh must be > 0, got {}", self.d_thresh)));
        }
        if !(0.0..=1.0).contains(&self.alpha_model) {
            return Err(Error::InvalidConfig(format!("alpha_model must lie in [0, 1], got {}", self.alpha_model)));
        }
        Ok(())
    }

    fn log_p(&self) -> f64 {
        (1.0 / self.expected_len_k).ln()
    }

    fn log_1mp(&self) -> f64 {
        (-1.0 / self.expected_len_k).ln_1p()
    }

    /// log g(l) for a segment of `l` frame steps.
    pub fn log_length_pmf(&self, l: usize) -> f64 {
        (l as f64 - 1.0) * self.log_1mp() + self.log_p()
    }

    /// log (1 − G(l)).
    pub fn log_survival(&self, l: usize) -> f64 {
        l as f64 * self.log_1mp()
    }
}

/// Every ⟨O_rel, o_ref⟩ with objects as references; references ascending, subsets in binary-count order.
pub fn candidate_abstractions(hand_id: &str, object_ids: &[String]) -> Result<Vec<Abstraction>> {
    let mut objects = object_ids.to_vec();
    objects.sort();
    objects.dedup();
    objects.retain(|o| o != hand_id);
    if objects.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut out = Vec::with_capacity(objects.len() << (objects.len() - 1));
    for reference in &objects {
        let others: Vec<&String> = objects.iter().filter(|o| *o != reference).collect();
        for mask in 0u64..(1u64 << others.len()) {
            let subset = others.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, o)| (*o).clone());
            out.push(Abstraction::new(hand_id, subset, reference.clone())?);
        }
    }
    Ok(out)
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn check_bounds(demo: &Demonstration, j: usize, t: usize) -> Result<()> {
    if t >= demo.len() || j + 2 > t {
        return Err(Error::InvalidDemonstration(format!(
            "segment ({j}, {t}] needs j + 2 <= t < {}",
            demo.len()
        )));
    }
    Ok(())
}

/// log p_ref: −n·‖h_t − ref_t‖ with n = t − j − 1.
pub fn p_ref(demo: &Demonstration, t: usize, j: usize, reference: &str) -> Result<f64> {
    check_bounds(demo, j, t)?;
    let f = &demo.frames[t];
    let n = (t - j - 1) as f64;
    Ok(-n * norm3(sub3(f.hand.location, f.location(reference)?)))
}

fn rel_log(d_bar: f64, n: f64, d_thresh: f64) -> f64 {
    let s = sigmoid(100.0 * d_bar);
    if d_bar <= d_thresh {
        n * (1.0 - s)
    } else {
        -n * s
    }
}

/// log p_rel of entity `id` on segment (j, t].
pub fn p_rel(demo: &Demonstration, j: usize, t: usize, id: &str, prior: &SegPrior) -> Result<f64> {
    check_bounds(demo, j, t)?;
    if id == demo.hand_id() {
        return Ok(0.0);
    }
    let h = demo.track(demo.hand_id())?;
    let o = demo.track(id)?;
    let mut sum = 0.0;
    for k in j + 1..=t {
        sum += match prior.distance_mode {
            DistanceMode::Displacement => norm3(sub3(sub3(h[k], h[k - 1]), sub3(o[k], o[k - 1]))),
            DistanceMode::Literal => norm3(sub3(h[k], o[k])),
        };
    }
    let d_bar = sum / (t - j) as f64;
    Ok(rel_log(d_bar, (t - j - 1) as f64, prior.d_thresh))
}

/// log P(j, t, q) = log p_ref + Σ log p_rel.
pub fn model_evidence(demo: &Demonstration, j: usize, t: usize, q: &Abstraction, prior: &SegPrior) -> Result<f64> {
    let mut v = p_ref(demo, t, j, &q.reference)?;
    for id in &q.relevant {
        v += p_rel(demo, j, t, id, prior)?;
    }
    Ok(v)
}

/// Precomputed tracks and prefix sums for O(1) evidence queries.
#[derive(Debug, Clone)]
pub struct Evidence {
    prior: SegPrior,
    candidates: Vec<Abstraction>,
    /// Entity index per candidate: (reference, relevant objects).
    cand_idx: Vec<(usize, Vec<usize>)>,
    hand: Vec<[f64; 3]>,
    objects: Vec<Vec<[f64; 3]>>,
    /// prefix[o][k] = Σ_{m=1..k} per-frame co-movement distance for object o.
    prefix: Vec<Vec<f64>>,
}

impl Evidence {
    pub fn new(demo: &Demonstration, prior: &SegPrior) -> Result<Self> {
        prior.validate()?;
        demo.validate()?;
        let ids = demo.object_ids();
        let candidates = candidate_abstractions(demo.hand_id(), &ids)?;
        let hand = demo.track(demo.hand_id())?;
        let objects: Vec<Vec<[f64; 3]>> = ids.iter().map(|id| demo.track(id)).collect::<Result<_>>()?;
        let prefix = objects
            .iter()
            .map(|o| {
                let mut p = vec![0.0; hand.len()];
                for k in 1..hand.len() {
                    let d = match prior.distance_mode {
                        DistanceMode::Displacement => norm3(sub3(sub3(hand[k], hand[k - 1]), sub3(o[k], o[k - 1]))),
                        DistanceMode::Literal => norm3(sub3(hand[k], o[k])),
                    };
                    p[k] = p[k - 1] + d;
                }
                p
            })
            .collect();
        let index = |id: &String| ids.iter().position(|x| x == id).expect("candidate ids come from the demo");
        let cand_idx = candidates.iter().map(|c| (index(&c.reference), c.objects().iter().map(index).collect())).collect();
        Ok(Self { prior: prior.clone(), candidates, cand_idx, hand, objects, prefix })
    }

    pub fn candidates(&self) -> &[Abstraction] {
        &self.candidates
    }

    pub fn frames(&self) -> usize {
        self.hand.len()
    }

    pub fn prior(&self) -> &SegPrior {
        &self.prior
    }

    /// log P(j, t, q) for candidate index `q`; caller guarantees j + 2 <= t < T.
    pub fn log_evidence(&self, j: usize, t: usize, q: usize) -> f64 {
        let (r, ref rel) = self.cand_idx[q];
        let n = (t - j - 1) as f64;
        let mut v = -n * norm3(sub3(self.hand[t], self.objects[r][t]));
        for &o in rel {
            let d_bar = (self.prefix[o][t] - self.prefix[o][j]) / (t - j) as f64;
            v += rel_log(d_bar, n, self.prior.d_thresh);
        }
        v
    }

    pub fn log_model_prior(&self) -> f64 {
        -(self.candidates.len() as f64).ln()
    }
}

/// Dynamic-programming table of MAP changepoint scores.
#[derive(Debug, Clone)]
pub struct ViterbiTable {
    /// log P_j^MAP for every frame j (−∞ where no valid chain ends).
    pub log_map: Vec<f64>,
    /// Backpointer (previous changepoint, candidate index) for every reachable j > 0.
    pub back: Vec<Option<(usize, usize)>>,
}

impl ViterbiTable {
    pub fn build(ev: &Evidence) -> Self {
        let t_len = ev.frames();
        let lq = ev.log_model_prior();
        let mut log_map = vec![f64::NEG_INFINITY; t_len];
        let mut back = vec![None; t_len];
        log_map[0] = 0.0;
        for j in 2..t_len {
            let mut best = f64::NEG_INFINITY;
            let mut arg = None;
            for i in (0..=j - 2).rev() {
                if log_map[i] == f64::NEG_INFINITY {
                    continue;
                }
                let base = log_map[i] + lq + ev.prior.log_length_pmf(j - i);
                for q in 0..ev.candidates.len() {
                    let v = base + ev.log_evidence(i, j, q);
                    if v > best {
                        best = v;
                        arg = Some((i, q));
                    }
                }
            }
            log_map[j] = best;
            back[j] = arg;
        }
        Self { log_map, back }
    }

    /// log P_t(j, q) = log(1 − G(t − j − 1)) + log P(j, t, q) + log p(q) + log P_j^MAP.
    pub fn log_pt(&self, ev: &Evidence, t: usize, j: usize, q: usize) -> f64 {
        ev.prior.log_survival(t - j - 1) + ev.log_evidence(j, t, q) + ev.log_model_prior() + self.log_map[j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    #[serde(flatten)]
    pub abstraction: Abstraction,
    /// Cumulative MAP log-score of the chain ending with this segment.
    pub log_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub segments: Vec<Segment>,
    pub total_log_map: f64,
}

impl SegmentationResult {
    pub fn changepoints(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }

    /// JSON array of segments.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.segments)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let segments: Vec<Segment> = serde_json::from_str(text)?;
        let total_log_map = segments.last().map_or(0.0, |s| s.log_map);
        Ok(Self { segments, total_log_map })
    }
}

/// Exact MAP segmentation over all changepoints and candidate abstractions.
pub fn map_segment(demo: &Demonstration, prior: &SegPrior) -> Result<SegmentationResult> {
    if demo.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: demo.len() });
    }
    let ev = Evidence::new(demo, prior)?;
    let table = ViterbiTable::build(&ev);
    Ok(trace(&ev, &table))
}

fn trace(ev: &Evidence, table: &ViterbiTable) -> SegmentationResult {
    let last = ev.frames() - 1;
    let mut best = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for j in (0..=last - 2).rev() {
        if table.log_map[j] == f64::NEG_INFINITY {
            continue;
        }
        for q in 0..ev.candidates.len() {
            let v = table.log_pt(ev, last, j, q);
            if v > best {
                best = v;
                arg = (j, q);
            }
        }
    }
    let mut segments = vec![Segment {
        start: arg.0,
        end: last,
        abstraction: ev.candidates[arg.1].clone(),
        log_map: best,
    }];
    let mut j = arg.0;
    while j > 0 {
        let (i, q) = table.back[j].expect("reachable changepoints carry backpointers");
        segments.push(Segment { start: i, end: j, abstraction: ev.candidates[q].clone(), log_map: table.log_map[j] });
        j = i;
    }
    segments.reverse();
    SegmentationResult { segments, total_log_map: best }
}

/// Candidates for segment (j, t] whose P_t(j, q) ratio to the best exceeds `alpha_model`, best first.
///
/// The best candidate is always returned, so `alpha_model = 1` yields exactly one entry.
pub fn rank_candidates(demo: &Demonstration, j: usize, t: usize, prior: &SegPrior) -> Result<Vec<(Abstraction, f64)>> {
    check_bounds(demo, j, t)?;
    let ev = Evidence::new(demo, prior)?;
    let table = ViterbiTable::build(&ev);
    if table.log_map[j] == f64::NEG_INFINITY {
        return Err(Error::InvalidDemonstration(format!("no segmentation chain ends at frame {j}")));
    }
    let mut scored: Vec<(usize, f64)> = (0..ev.candidates.len()).map(|q| (q, table.log_pt(&ev, t, j, q))).collect();
    // stable sort keeps candidate order among ties
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let max = scored[0].1;
    let log_alpha = prior.alpha_model.ln();
    Ok(scored
        .into_iter()
        .enumerate()
        .filter(|(rank, (_, v))| *rank == 0 || v - max > log_alpha)
        .map(|(_, (q, v))| (ev.candidates[q].clone(), v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Pose, Quat};
    use crate::state::PublicState;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    pub(crate) fn demo_from(tracks: &[(&str, Vec<[f64; 3]>)]) -> Demonstration {
        let frames = (0..tracks[0].1.len())
            .map(|k| {
                let objects: BTreeMap<String, Pose> =
                    tracks[1..].iter().map(|(id, tr)| (id.to_string(), Pose::from_translation(tr[k]))).collect();
                PublicState::new(tracks[0].0, Pose::from_translation(tracks[0].1[k]), objects).unwrap()
            })
            .collect();
        Demonstration::new(1.0 / 30.0, frames).unwrap()
    }

    #[test]
    fn single_object_has_one_candidate() {
        let c = candidate_abstractions("h", &ids(&["b0"])).unwrap();
        assert_eq!(c, vec![Abstraction::new("h", Vec::<String>::new(), "b0").unwrap()]);
    }

    #[test]
    fn two_objects_enumerate_in_order() {
        let c = candidate_abstractions("h", &ids(&["b1", "b0"])).unwrap();
        let none = Vec::<String>::new();
        assert_eq!(
            c,
            vec![
                Abstraction::new("h", none.clone(), "b0").unwrap(),
                Abstraction::new("h", ["b1"], "b0").unwrap(),
                Abstraction::new("h", none, "b1").unwrap(),
                Abstraction::new("h", ["b0"], "b1").unwrap(),
            ]
        );
    }

    #[test]
    fn candidate_count_formula() {
        for n in 1..=5usize {
            let objs: Vec<String> = (0..n).map(|i| format!("o{i}")).collect();
            assert_eq!(candidate_abstractions("h", &objs).unwrap().len(), n << (n - 1));
        }
        assert!(matches!(candidate_abstractions("h", &[]), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn p_ref_examples() {
        let hand: Vec<[f64; 3]> = (0..12).map(|_| [0.1, 0.0, 0.0]).collect();
        let b0: Vec<[f64; 3]> = (0..12).map(|_| [0.0; 3]).collect();
        let demo = demo_from(&[("h", hand.clone()), ("b0", b0)]);
        assert_abs_diff_eq!(p_ref(&demo, 11, 0, "b0").unwrap(), -1.0, epsilon = 1e-12);
        let demo2 = demo_from(&[("h", hand.clone()), ("b0", hand)]);
        assert_eq!(p_ref(&demo2, 11, 0, "b0").unwrap(), 0.0);
        let short = p_ref(&demo, 6, 0, "b0").unwrap();
        assert_abs_diff_eq!(p_ref(&demo, 11, 0, "b0").unwrap(), 2.0 * short, epsilon = 1e-12);
    }

    #[test]
    fn p_rel_examples() {
        let prior = SegPrior { d_thresh: 0.02, ..SegPrior::default() };
        let hand: Vec<[f64; 3]> = (0..12).map(|k| [0.05 * k as f64, 0.0, 0.0]).collect();
        let co: Vec<[f64; 3]> = hand.iter().map(|p| [p[0], 0.1, 0.0]).collect();
        let still: Vec<[f64; 3]> = (0..12).map(|_| [0.0, 0.3, 0.0]).collect();
        let demo = demo_from(&[("h", hand), ("co", co), ("still", still)]);
        assert_eq!(p_rel(&demo, 0, 11, "h", &prior).unwrap(), 0.0);
        assert_abs_diff_eq!(p_rel(&demo, 0, 11, "co", &prior).unwrap(), 5.0, epsilon = 1e-12);
        let expected = -10.0 / (1.0 + (-5.0f64).exp());
        assert_abs_diff_eq!(p_rel(&demo, 0, 11, "still", &prior).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, -9.933, epsilon = 1e-3);
    }

    #[test]
    fn evidence_examples() {
        let prior = SegPrior::default();
        let hand: Vec<[f64; 3]> = (0..12).map(|k| [0.05 * k as f64, 0.0, 0.0]).collect();
        let co: Vec<[f64; 3]> = hand.iter().map(|p| [p[0], 0.1, 0.0]).collect();
        let target: Vec<[f64; 3]> = (0..12).map(|_| [0.5, 0.0, 0.0]).collect();
        let demo = demo_from(&[("h", hand), ("co", co), ("tgt", target)]);
        let hand_only = Abstraction::new("h", Vec::<String>::new(), "tgt").unwrap();
        assert_eq!(
            model_evidence(&demo, 0, 11, &hand_only, &prior).unwrap(),
            p_ref(&demo, 11, 0, "tgt").unwrap()
        );
        let with_co = Abstraction::new("h", ["co"], "tgt").unwrap();
        let v = model_evidence(&demo, 0, 11, &with_co, &prior).unwrap();
        assert_abs_diff_eq!(v, p_ref(&demo, 11, 0, "tgt").unwrap() + 5.0, epsilon = 1e-12);
    }

    #[test]
    fn single_reach_is_one_segment() {
        let target = [0.4, 0.1, 0.0];
        let hand: Vec<[f64; 3]> = (0..10)
            .map(|k| {
                let u = k as f64 / 9.0;
                let s = 10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5);
                [target[0] * s, target[1] * s, 0.2 * (1.0 - s)]
            })
            .collect();
        let b0 = vec![target; 10];
        let b1 = vec![[-0.3, 0.2, 0.0]; 10];
        let demo = demo_from(&[("h", hand), ("b0", b0), ("b1", b1)]);
        let prior = SegPrior::default();
        let res = map_segment(&demo, &prior).unwrap();
        assert_eq!(res.segments.len(), 1);
        assert_eq!(res.segments[0].abstraction, Abstraction::new("h", Vec::<String>::new(), "b0").unwrap());
        let brute = oracle::brute_force(&demo, &prior).unwrap();
        assert_eq!(brute.segments, res.segments.iter().map(|s| (s.start, s.end, s.abstraction.clone())).collect::<Vec<_>>());
    }

    #[test]
    fn too_short_demo() {
        let demo = demo_from(&[("h", vec![[0.0; 3]; 3]), ("b0", vec![[0.0; 3]; 3])]);
        assert!(matches!(map_segment(&demo, &SegPrior::default()), Err(Error::InsufficientData { .. })));
    }

    fn walk_demo(seed: u64, t: usize, n_obj: usize) -> Demonstration {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut tracks: Vec<(String, Vec<[f64; 3]>)> = Vec::new();
        for e in 0..=n_obj {
            let mut p = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0];
            let mut tr = Vec::new();
            for _ in 0..t {
                tr.push(p);
                for c in p.iter_mut().take(2) {
                    *c += rng.random_range(-0.03..0.03);
                }
            }
            tracks.push((if e == 0 { "h".into() } else { format!("o{e}") }, tr));
        }
        let named: Vec<(&str, Vec<[f64; 3]>)> = tracks.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        demo_from(&named)
    }

    #[test]
    fn rank_candidates_threshold_edges() {
        let demo = walk_demo(3, 10, 2);
        let one = SegPrior { alpha_model: 1.0, ..SegPrior::default() };
        assert_eq!(rank_candidates(&demo, 0, 9, &one).unwrap().len(), 1);
        let all = SegPrior { alpha_model: 0.0, ..SegPrior::default() };
        let r = rank_candidates(&demo, 0, 9, &all).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn prior_pressure_is_monotone() {
        for seed in 0..20 {
            let demo = walk_demo(100 + seed, 40, 2);
            let mut last = usize::MAX;
            for k in [2.0, 5.0, 20.0, 100.0, 1000.0] {
                let prior = SegPrior { expected_len_k: k, ..SegPrior::default() };
                let n = map_segment(&demo, &prior).unwrap().segments.len();
                assert!(n <= last, "seed {seed}: k={k} gave {n} segments after {last}");
                last = n;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn incremental_evidence_matches_scratch(seed in 0u64..1000, literal in any::<bool>()) {
            let demo = walk_demo(seed, 15, 2);
            let prior = SegPrior {
                distance_mode: if literal { DistanceMode::Literal } else { DistanceMode::Displacement },
                d_thresh: 0.02,
                ..SegPrior::default()
            };
            let ev = Evidence::new(&demo, &prior).unwrap();
            let table = ViterbiTable::build(&ev);
            for t in 2..15 {
                for j in 0..=t - 2 {
                    for (q, cand) in ev.candidates().iter().enumerate() {
                        let fast = ev.log_evidence(j, t, q);
                        let slow = model_evidence(&demo, j, t, cand, &prior).unwrap();
                        prop_assert!((fast - slow).abs() < 1e-9);
                        if table.log_map[j].is_finite() {
                            let pt = table.log_pt(&ev, t, j, q);
                            let scratch = prior.log_survival(t - j - 1) + slow - (4.0f64).ln() + table.log_map[j];
                            prop_assert!((pt - scratch).abs() < 1e-9);
                        }
                    }
                }
            }
        }

        #[test]
        fn isometry_invariance(seed in 0u64..1000, yaw in -3.0f64..3.0, shift in prop::array::uniform3(-1.0f64..1.0)) {
            let demo = walk_demo(seed, 14, 2);
            let iso = Pose { location: shift, orientation: Quat::from_yaw(yaw) };
            let mut moved = demo.clone();
            for f in &mut moved.frames {
                f.hand = iso.compose(&f.hand);
                for p in f.objects.values_mut() {
                    *p = iso.compose(p);
                }
            }
            let prior = SegPrior { d_thresh: 0.02, ..SegPrior::default() };
            let a = map_segment(&demo, &prior).unwrap();
            let b = map_segment(&moved, &prior).unwrap();
            prop_assert_eq!(a.changepoints(), b.changepoints());
            for (x, y) in a.segments.iter().zip(&b.segments) {
                prop_assert_eq!(&x.abstraction, &y.abstraction);
            }
            prop_assert!((a.total_log_map - b.total_log_map).abs() < 1e-9);
        }

        #[test]
        fn dp_matches_brute_force(seed in 0u64..10_000, t in 4usize..=10) {
            let demo = walk_demo(seed, t, 2);
            let prior = SegPrior { expected_len_k: 4.0, d_thresh: 0.02, ..SegPrior::default() };
            let dp = map_segment(&demo, &prior).unwrap();
            let bf = oracle::brute_force(&demo, &prior).unwrap();
            prop_assert!((dp.total_log_map - bf.log_score).abs() < 1e-9);
            let dp_segs: Vec<_> = dp.segments.iter().map(|s| (s.start, s.end, s.abstraction.clone())).collect();
            prop_assert_eq!(dp_segs, bf.segments);
        }
    }
}
