//! Per-segment MDP formulation, options, success estimation and the
//! reformulation search that drives the whole imitation pipeline.

use serde::{Deserialize, Serialize};

use crate::dmp::{fit_from_demo, DmpConfig, DmpWeights};
use crate::error::{Error, Result};
use crate::pose::{PoseVec7, Quat};
use crate::rl::{learn, terminal_cost, trial_rng, CostWeights, CurvePoint, Evaluation, LearnConfig};
use crate::segmentation::{map_segment, rank_candidates, SegPrior, Segment, SegmentationResult};
use crate::sim::{jitter_blocks, run_policy, Aabb, PolicyRollout, WorldConfig, WorldState};
use crate::state::{abstract_state, Abstraction, Demonstration};

/// Seven pose DMPs (x, y, z, qx, qy, qz, qw) in the reference frame, plus an optional
/// gripper-force DMP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpPolicy {
    pub reference: String,
    pub pose: Vec<DmpWeights>,
    pub gripper: Option<DmpWeights>,
}

impl DmpPolicy {
    pub fn n_basis(&self) -> usize {
        self.pose.first().map_or(0, |w| w.w.len())
    }

    pub fn n_params(&self) -> usize {
        self.pose.iter().chain(&self.gripper).map(|w| w.w.len()).sum()
    }

    /// Pose weights DOF by DOF, then gripper weights.
    pub fn params(&self) -> Vec<f64> {
        self.pose.iter().chain(&self.gripper).flat_map(|w| w.w.iter().copied()).collect()
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: params.len() });
        }
        let mut out = self.clone();
        let mut rest = params;
        for w in out.pose.iter_mut().chain(out.gripper.iter_mut()) {
            let (head, tail) = rest.split_at(w.w.len());
            w.w.copy_from_slice(head);
            rest = tail;
        }
        Ok(out)
    }

    pub fn goal(&self) -> PoseVec7 {
        PoseVec7(std::array::from_fn(|d| self.pose[d].g))
    }
}

/// Defaults for the cost and action space of every formulated MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationConfig {
    pub w_imm: f64,
    /// Terminal weight per metre of position error.
    pub w_position: f64,
    /// Terminal weight per unit of quaternion-component error.
    pub w_orientation: f64,
    pub gripper_action_cost: f64,
    pub clamp_penalty: f64,
    pub workspace: Aabb,
}

impl Default for FormulationConfig {
    fn default() -> Self {
        Self {
            w_imm: 0.01,
            w_position: 1000.0,
            w_orientation: 100.0,
            gripper_action_cost: 5.0,
            clamp_penalty: 1.0,
            workspace: Aabb { min: [-0.5, -0.8, 0.0], max: [1.2, 0.8, 1.0] },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub abstraction: Abstraction,
    pub include_gripper_action: bool,
    pub cost_weights: CostWeights,
    /// Abstracted state at the segment's last frame.
    pub s_t_obs: Vec<f64>,
    pub duration: f64,
    pub workspace: Aabb,
    pub start: usize,
    pub end: usize,
}

impl MdpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.s_t_obs.len() != self.abstraction.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.abstraction.state_dim(), got: self.s_t_obs.len() });
        }
        if self.cost_weights.w_ter.len() != self.s_t_obs.len() {
            return Err(Error::DimensionMismatch { expected: self.s_t_obs.len(), got: self.cost_weights.w_ter.len() });
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidConfig(format!("duration must be positive, got {}", self.duration)));
        }
        self.cost_weights.validate()
    }

    /// Observed terminal hand pose in the reference frame.
    pub fn hand_goal(&self) -> PoseVec7 {
        PoseVec7(std::array::from_fn(|d| self.s_t_obs[d]))
    }
}

/// MDP for `abstraction` over demo frames `start..=end`.
pub fn formulate(
    demo: &Demonstration,
    start: usize,
    end: usize,
    abstraction: &Abstraction,
    include_gripper_action: bool,
    cfg: &FormulationConfig,
) -> Result<MdpSpec> {
    if end <= start || end >= demo.len() {
        return Err(Error::InvalidDemonstration(format!("segment ({start}, {end}) out of range for {} frames", demo.len())));
    }
    let s_t_obs = abstract_state(&demo.frames[end], abstraction)?;
    let mut cost_weights = CostWeights::for_entities(abstraction.relevant.len(), cfg.w_imm, cfg.w_position, cfg.w_orientation);
    cost_weights.gripper_action_cost = cfg.gripper_action_cost;
    cost_weights.clamp_penalty = cfg.clamp_penalty;
    let spec = MdpSpec {
        abstraction: abstraction.clone(),
        include_gripper_action,
        cost_weights,
        s_t_obs,
        duration: (end - start) as f64 * demo.dt,
        workspace: cfg.workspace,
        start,
        end,
    };
    spec.validate()?;
    Ok(spec)
}

/// Pose-only MDP with the segment's selected abstraction.
pub fn formulate_initial(segment: &Segment, demo: &Demonstration, cfg: &FormulationConfig) -> Result<MdpSpec> {
    formulate(demo, segment.start, segment.end, &segment.abstraction, false, cfg)
}

/// Hand pose relative to the reference over the segment, with quaternion signs kept continuous.
fn continuous_track(demo: &Demonstration, spec: &MdpSpec) -> Result<Vec<PoseVec7>> {
    let mut track = demo.relative_track(demo.hand_id(), &spec.abstraction.reference, spec.start, spec.end)?;
    for k in 1..track.len() {
        let prev = track[k - 1].orientation();
        let q = track[k].orientation();
        if prev.dot(&q) < 0.0 {
            let f = Quat::new(-q.x, -q.y, -q.z, -q.w);
            track[k].0[3..].copy_from_slice(&[f.x, f.y, f.z, f.w]);
        }
    }
    Ok(track)
}

/// Fit the pose DMPs to the observed hand track; the gripper DMP, when present, starts at zero.
pub fn init_policy(spec: &MdpSpec, demo: &Demonstration, dmp: &DmpConfig) -> Result<DmpPolicy> {
    let track = continuous_track(demo, spec)?;
    if track.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: track.len() });
    }
    let cfg = dmp.clone().with_tau(spec.duration);
    let pose = (0..7)
        .map(|d| {
            let dof: Vec<f64> = track.iter().map(|p| p.0[d]).collect();
            fit_from_demo(&dof, demo.dt, &cfg).map(|r| r.weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DmpPolicy {
        reference: spec.abstraction.reference.clone(),
        pose,
        gripper: spec.include_gripper_action.then(|| DmpWeights::zeros(cfg.n_basis, 0.0, 0.0)),
    })
}

/// Policy for a reformulated spec: pose weights carry over when the reference frame is unchanged.
pub fn reformulated_policy(spec: &MdpSpec, previous: &DmpPolicy, demo: &Demonstration, dmp: &DmpConfig) -> Result<DmpPolicy> {
    let mut policy = if previous.reference == spec.abstraction.reference {
        DmpPolicy { gripper: None, ..previous.clone() }
    } else {
        init_policy(&MdpSpec { include_gripper_action: false, ..spec.clone() }, demo, dmp)?
    };
    policy.gripper = spec.include_gripper_action.then(|| DmpWeights::zeros(dmp.n_basis, 0.0, 0.0));
    Ok(policy)
}

/// 1 iff c_ter(s_T) < C.
pub fn beta(s_t: &[f64], spec: &MdpSpec, c: f64) -> Result<bool> {
    Ok(terminal_cost(s_t, &spec.s_t_obs, &spec.cost_weights.w_ter)? < c)
}

/// Per-tick immediate costs and the terminal cost of one executed rollout.
pub fn evaluate_rollout(spec: &MdpSpec, rollout: &PolicyRollout, hand_id: &str) -> Result<Evaluation> {
    let ticks = rollout.accel.len().max(1) as f64;
    let w = &spec.cost_weights;
    let step_costs = (0..rollout.accel.len())
        .map(|k| {
            let acc: f64 = rollout.accel[k].iter().zip(&w.w_imm).map(|(a, w)| w * a.abs()).sum();
            let mut c = acc / ticks;
            if rollout.clamped[k] {
                c += w.clamp_penalty;
            }
            if spec.include_gripper_action && rollout.gripper_switches[k] {
                c += w.gripper_action_cost;
            }
            c
        })
        .collect();
    let end = rollout.final_state().public_state(hand_id);
    let s_t = abstract_state(&end, &spec.abstraction)?;
    Ok(Evaluation { step_costs, terminal_cost: terminal_cost(&s_t, &spec.s_t_obs, &w.w_ter)? })
}

/// World plus DMP settings that policies execute in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Env {
    pub world: WorldConfig,
    pub dmp: DmpConfig,
}

impl Env {
    /// World state matching the demonstration's first frame.
    pub fn start_from_demo(&self, demo: &Demonstration) -> Result<WorldState> {
        if demo.hand_id() != self.world.hand_id {
            return Err(Error::UnknownEntity(demo.hand_id().into()));
        }
        let first = &demo.frames[0];
        let mut state = self.world.initial_state();
        for (id, pose) in &first.objects {
            self.world.block(id)?;
            state.blocks.insert(id.clone(), *pose);
        }
        if state.blocks.len() != first.objects.len() {
            return Err(Error::InvalidDemonstration("world has blocks the demonstration does not track".into()));
        }
        state.hand = first.hand;
        Ok(state)
    }

    pub fn rollout(&self, start: &WorldState, policy: &DmpPolicy, spec: &MdpSpec) -> Result<(PolicyRollout, Evaluation)> {
        let world = WorldConfig { workspace: spec.workspace, ..self.world.clone() };
        let r = run_policy(&world, &self.dmp, start, policy, spec.duration)?;
        let ev = evaluate_rollout(spec, &r, &self.world.hand_id)?;
        Ok((r, ev))
    }

    /// Final state after executing `chain` in order.
    pub fn run_chain(&self, start: &WorldState, chain: &[(&MdpSpec, &DmpPolicy)]) -> Result<WorldState> {
        let mut state = start.clone();
        for (spec, policy) in chain {
            state = self.rollout(&state, policy, spec)?.0.final_state().clone();
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub n_eval: usize,
    /// Uniform ± metres in x and y on every block.
    pub jitter_position: f64,
    /// Uniform ± radians of yaw on every block.
    pub jitter_yaw: f64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self { n_eval: 10, jitter_position: 0.01, jitter_yaw: 5f64.to_radians() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub success_prob: f64,
    /// Abstracted start states of the successful evaluation rollouts.
    pub initiation_states: Vec<Vec<f64>>,
}

/// Fraction of noise-free rollouts ending with β = 1. Each evaluation jitters the blocks of
/// `start`, replays `prefix` from there and then runs `policy`; any error counts as a failure.
pub fn estimate_success(
    env: &Env,
    start: &WorldState,
    prefix: &[(&MdpSpec, &DmpPolicy)],
    spec: &MdpSpec,
    policy: &DmpPolicy,
    c: f64,
    protocol: &EvalProtocol,
    seed: u64,
) -> Result<SuccessEstimate> {
    if protocol.n_eval == 0 {
        return Err(Error::InvalidConfig("n_eval must be >= 1".into()));
    }
    let mut initiation_states = Vec::new();
    for i in 0..protocol.n_eval {
        let mut rng = trial_rng(seed, i as u64);
        let jittered = jitter_blocks(start, &mut rng, protocol.jitter_position, protocol.jitter_yaw);
        let attempt = || -> Result<Option<Vec<f64>>> {
            let s0 = env.run_chain(&jittered, prefix)?;
            let (_, ev) = env.rollout(&s0, policy, spec)?;
            if ev.terminal_cost < c {
                Ok(Some(abstract_state(&s0.public_state(&env.world.hand_id), &spec.abstraction)?))
            } else {
                Ok(None)
            }
        };
        if let Ok(Some(s)) = attempt() {
            initiation_states.push(s);
        }
    }
    Ok(SuccessEstimate { success_prob: initiation_states.len() as f64 / protocol.n_eval as f64, initiation_states })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionRecord {
    pub spec: MdpSpec,
    pub policy: DmpPolicy,
    pub initiation_states: Vec<Vec<f64>>,
    pub termination_threshold: f64,
    pub success_prob: f64,
}

/// One formulation in the reformulation queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formulation {
    pub abstraction: Abstraction,
    pub include_gripper_action: bool,
}

/// Search state of one segment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReformState {
    pub reform_curr: bool,
    pub reform_prev: bool,
    /// Ranked candidates with their log P_t(j, q).
    pub candidates: Vec<(Abstraction, f64)>,
    pub queue: Vec<Formulation>,
    /// Formulations already learned during the current descent.
    pub tried: Vec<Formulation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reformulation {
    /// Learn `formulation` for `segment` (which precedes the failing one after a backtrack).
    Next { segment: usize, formulation: Formulation },
    /// The queue of `segment` is exhausted; the next call reformulates the segment before it.
    Backtrack { segment: usize },
}

/// Reformulation state for every segment of one segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Reformulator {
    pub states: Vec<ReformState>,
}

impl Reformulator {
    pub fn new(n_segments: usize) -> Self {
        Self { states: vec![ReformState::default(); n_segments] }
    }

    pub fn mark_tried(&mut self, i: usize, f: &Formulation) {
        if !self.states[i].tried.contains(f) {
            self.states[i].tried.push(f.clone());
        }
    }

    /// Forget segment `i`'s search, as when it is re-entered after an earlier segment changed.
    pub fn reset(&mut self, i: usize) {
        self.states[i] = ReformState::default();
    }

    /// Next formulation for segment `i` after it failed.
    pub fn reformulate(&mut self, i: usize, segmentation: &SegmentationResult, demo: &Demonstration, prior: &SegPrior) -> Result<Reformulation> {
        if i >= self.states.len() {
            return Err(Error::InvalidConfig(format!("segment {i} does not exist")));
        }
        if self.states[i].reform_prev {
            if i == 0 {
                return Err(Error::PipelineFailure("every formulation of the first segment failed".into()));
            }
            self.states[i].reform_prev = false;
            return self.reformulate(i - 1, segmentation, demo, prior);
        }
        let st = &mut self.states[i];
        if !st.reform_curr {
            let seg = &segmentation.segments[i];
            st.candidates = rank_candidates(demo, seg.start, seg.end, prior)?;
            st.queue = st
                .candidates
                .iter()
                .flat_map(|(q, _)| {
                    [false, true].map(|g| Formulation { abstraction: q.clone(), include_gripper_action: g })
                })
                .filter(|f| !st.tried.contains(f))
                .collect();
            st.reform_curr = true;
        }
        if st.queue.is_empty() {
            st.reform_curr = false;
            st.reform_prev = true;
            st.tried.clear();
            Ok(Reformulation::Backtrack { segment: i })
        } else {
            Ok(Reformulation::Next { segment: i, formulation: st.queue.remove(0) })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seg_prior: SegPrior,
    pub formulation: FormulationConfig,
    pub dmp: DmpConfig,
    /// Schedule and temperature; the seed and exploration std are set per attempt.
    pub learn: LearnConfig,
    /// Exploration std for pose weights.
    pub pose_std: f64,
    /// Exploration std for gripper weights.
    pub gripper_std: f64,
    /// Success probability an option needs.
    pub alpha: f64,
    pub termination_threshold: f64,
    pub eval: EvalProtocol,
    pub seed: u64,
    /// Upper bound on learned formulations over the whole run.
    pub max_attempts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seg_prior: SegPrior::default(),
            formulation: FormulationConfig::default(),
            dmp: DmpConfig::default(),
            learn: LearnConfig::default(),
            pose_std: 0.002,
            gripper_std: 30.0,
            alpha: 0.8,
            termination_threshold: 20.0,
            eval: EvalProtocol::default(),
            seed: 0,
            max_attempts: 50,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.seg_prior.validate()?;
        self.dmp.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.termination_threshold > 0.0) {
            return Err(Error::InvalidConfig("termination_threshold must be positive".into()));
        }
        if !(self.pose_std >= 0.0 && self.gripper_std >= 0.0) {
            return Err(Error::InvalidConfig("exploration std must be >= 0".into()));
        }
        if self.eval.n_eval == 0 || self.max_attempts == 0 {
            return Err(Error::InvalidConfig("n_eval and max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

/// One learned formulation of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub segment: usize,
    pub formulation: Formulation,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    /// Noise-free cost of every policy version, initial one first.
    pub version_costs: Vec<f64>,
    /// Noise-free cost of the returned policy.
    pub final_cost: f64,
    pub success_prob: f64,
    /// Set when learning aborted.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub segmentation: SegmentationResult,
    /// Every learned formulation in order.
    pub attempts: Vec<Attempt>,
    pub options: Vec<OptionRecord>,
    pub start: WorldState,
    /// Per segment: β of the final nominal sequential replay.
    pub replay_success: Vec<bool>,
}

fn attempt_seed(master: u64, n: usize) -> u64 {
    // splitmix64 step keeps attempt streams decorrelated
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(n as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Learned {
    policy: DmpPolicy,
    attempt: Attempt,
    initiation_states: Vec<Vec<f64>>,
}

fn learn_and_estimate(
    env: &Env,
    cfg: &PipelineConfig,
    start: &WorldState,
    accepted: &[OptionRecord],
    spec: &MdpSpec,
    init: DmpPolicy,
    segment: usize,
    seed: u64,
) -> Result<Learned> {
    let nominal = env.run_chain(start, &accepted.iter().map(|o| (&o.spec, &o.policy)).collect::<Vec<_>>())?;
    let nb = cfg.dmp.n_basis;
    let mut lc = cfg.learn.clone();
    lc.rng_seed = seed;
    lc.exploration_std = (0..init.n_params()).map(|k| if k < 7 * nb { cfg.pose_std } else { cfg.gripper_std }).collect();
    let phase = crate::dmp::Phase::new(&cfg.dmp.clone().with_tau(spec.duration), spec.duration);
    let env_fn = |p: &[f64]| -> Result<Evaluation> { Ok(env.rollout(&nominal, &init.with_params(p)?, spec)?.1) };
    let formulation = Formulation { abstraction: spec.abstraction.clone(), include_gripper_action: spec.include_gripper_action };
    let (theta, curve, version_costs, error) = match learn(env_fn, &init.params(), &phase.psi, nb, &lc) {
        Ok(out) => (out.theta, out.curve, out.version_costs, None),
        Err(f) => (init.params(), f.partial_curve, Vec::new(), Some(f.source.to_string())),
    };
    let policy = init.with_params(&theta)?;
    let final_cost = env.rollout(&nominal, &policy, spec).map(|r| r.1.total()).unwrap_or(f64::INFINITY);
    let prefix: Vec<_> = accepted.iter().map(|o| (&o.spec, &o.policy)).collect();
    let est = estimate_success(env, start, &prefix, spec, &policy, cfg.termination_threshold, &cfg.eval, seed ^ 0x5EED)?;
    Ok(Learned {
        policy,
        initiation_states: est.initiation_states,
        attempt: Attempt { segment, formulation, seed, curve, version_costs, final_cost, success_prob: est.success_prob, error },
    })
}

/// Segment the demonstration, then learn one option per segment in order, reformulating
/// failed segments until each reaches success probability `alpha`.
pub fn run_pipeline(demo: &Demonstration, env: &Env, cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    env.world.validate()?;
    let segmentation = map_segment(demo, &cfg.seg_prior)?;
    let start = env.start_from_demo(demo)?;
    let n = segmentation.segments.len();
    let mut reform = Reformulator::new(n);
    let mut options: Vec<OptionRecord> = Vec::new();
    let mut attempts: Vec<Attempt> = Vec::new();
    // policy last learned for each segment, used to carry pose weights over
    let mut last_policy: Vec<Option<DmpPolicy>> = vec![None; n];
    let mut i = 0usize;
    let mut pending: Option<Formulation> = None;
    while i < n {
        if attempts.len() >= cfg.max_attempts {
            return Err(Error::PipelineFailure(format!("no successful formulation within {} attempts", cfg.max_attempts)));
        }
        let seg = &segmentation.segments[i];
        let (spec, init) = match pending.take() {
            None => {
                reform.reset(i);
                let spec = formulate_initial(seg, demo, &cfg.formulation)?;
                let init = init_policy(&spec, demo, &cfg.dmp)?;
                (spec, init)
            }
            Some(f) => {
                let spec = formulate(demo, seg.start, seg.end, &f.abstraction, f.include_gripper_action, &cfg.formulation)?;
                let init = match &last_policy[i] {
                    Some(prev) => reformulated_policy(&spec, prev, demo, &cfg.dmp)?,
                    None => init_policy(&spec, demo, &cfg.dmp)?,
                };
                (spec, init)
            }
        };
        let formulation = Formulation { abstraction: spec.abstraction.clone(), include_gripper_action: spec.include_gripper_action };
        reform.mark_tried(i, &formulation);
        let seed = attempt_seed(cfg.seed, attempts.len());
        let learned = learn_and_estimate(env, cfg, &start, &options, &spec, init, i, seed)?;
        let success = learned.attempt.success_prob;
        attempts.push(learned.attempt);
        last_policy[i] = Some(learned.policy.clone());
        if success >= cfg.alpha {
            options.push(OptionRecord {
                spec,
                policy: learned.policy,
                initiation_states: learned.initiation_states,
                termination_threshold: cfg.termination_threshold,
                success_prob: success,
            });
            i += 1;
            continue;
        }
        let mut next = reform.reformulate(i, &segmentation, demo, &cfg.seg_prior)?;
        if let Reformulation::Backtrack { .. } = next {
            next = reform.reformulate(i, &segmentation, demo, &cfg.seg_prior)?;
        }
        match next {
            Reformulation::Next { segment, formulation } => {
                // later segments are relearned once an earlier one changes
                options.truncate(segment);
                i = segment;
                pending = Some(formulation);
            }
            Reformulation::Backtrack { segment } => {
                return Err(Error::PipelineFailure(format!("reformulation of segment {segment} backtracked twice")));
            }
        }
    }
    let replay_success = replay(env, &start, &options)?;
    Ok(PipelineReport { segmentation, attempts, options, start, replay_success })
}

/// Execute the options in order from `start` and report β for each.
pub fn replay(env: &Env, start: &WorldState, options: &[OptionRecord]) -> Result<Vec<bool>> {
    let mut state = start.clone();
    let mut out = Vec::with_capacity(options.len());
    for o in options {
        let (r, ev) = env.rollout(&state, &o.policy, &o.spec)?;
        out.push(ev.terminal_cost < o.termination_threshold);
        state = r.final_state().clone();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_demo, DemoScript};

    fn stack() -> (Env, Demonstration, SegmentationResult) {
        let env = Env { world: WorldConfig::default(), dmp: DmpConfig::default() };
        let demo = generate_demo(&env.world, &DemoScript::default()).unwrap().demo;
        let seg = map_segment(&demo, &SegPrior::default()).unwrap();
        (env, demo, seg)
    }

    #[test]
    fn params_round_trip() {
        let p = DmpPolicy {
            reference: "b".into(),
            pose: (0..7).map(|d| DmpWeights { w: vec![d as f64; 3], y0: 0.0, g: 1.0 }).collect(),
            gripper: Some(DmpWeights::zeros(3, 0.0, 0.0)),
        };
        assert_eq!(p.n_params(), 24);
        let v: Vec<f64> = (0..24).map(|k| k as f64).collect();
        let q = p.with_params(&v).unwrap();
        assert_eq!(q.params(), v);
        assert_eq!(q.pose[1].w, vec![3.0, 4.0, 5.0]);
        assert!(p.with_params(&v[1..]).is_err());
    }

    #[test]
    fn initial_formulations_of_stack_demo() {
        let (_, demo, seg) = stack();
        assert_eq!(seg.segments.len(), 3);
        let cfg = FormulationConfig::default();
        let s1 = formulate_initial(&seg.segments[0], &demo, &cfg).unwrap();
        assert_eq!(s1.abstraction, Abstraction::new("hand", Vec::<String>::new(), "b_blue").unwrap());
        assert_eq!(s1.s_t_obs.len(), 7);
        let s2 = formulate_initial(&seg.segments[1], &demo, &cfg).unwrap();
        assert_eq!(s2.abstraction, Abstraction::new("hand", ["b_blue"], "b_green").unwrap());
        assert_eq!(s2.s_t_obs.len(), 14);
        assert!(seg.segments.iter().all(|s| !formulate_initial(s, &demo, &cfg).unwrap().include_gripper_action));
    }

    #[test]
    fn fitted_policy_reproduces_hand_track() {
        let (env, demo, seg) = stack();
        let spec = formulate_initial(&seg.segments[0], &demo, &FormulationConfig::default()).unwrap();
        let policy = init_policy(&spec, &demo, &env.dmp).unwrap();
        assert!(policy.gripper.is_none());
        let start = env.start_from_demo(&demo).unwrap();
        let (r, ev) = env.rollout(&start, &policy, &spec).unwrap();
        // compare at demo frames; commanded[k] is the pose after tick k + 1
        let track = demo.relative_track("hand", "b_blue", spec.start, spec.end).unwrap();
        for d in 0..3 {
            let (mut sq, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for (k, p) in track.iter().enumerate().skip(1) {
                let tick = (k as f64 * demo.dt / env.world.control_dt).round() as usize;
                sq += (r.commanded[tick - 1].0[d] - p.0[d]).powi(2);
                lo = lo.min(p.0[d]);
                hi = hi.max(p.0[d]);
            }
            let rmse = (sq / (track.len() - 1) as f64).sqrt();
            assert!(rmse < 0.02 * (hi - lo).max(1e-3), "dof {d}: rmse {rmse}, range {}", hi - lo);
        }
        assert!(ev.terminal_cost < 20.0, "terminal {}", ev.terminal_cost);
    }

    #[test]
    fn beta_is_strict() {
        let (_, demo, seg) = stack();
        let spec = formulate_initial(&seg.segments[0], &demo, &FormulationConfig::default()).unwrap();
        assert!(beta(&spec.s_t_obs, &spec, 20.0).unwrap());
        let mut s = spec.s_t_obs.clone();
        s[0] += 0.02; // 0.02 m × 1000 = exactly 20
        let c = terminal_cost(&s, &spec.s_t_obs, &spec.cost_weights.w_ter).unwrap();
        assert!(!beta(&s, &spec, c).unwrap());
        let mut far = spec.s_t_obs.clone();
        far[0] += 1.0;
        assert!(!beta(&far, &spec, 20.0).unwrap());
    }

    #[test]
    fn pose_only_transport_never_succeeds() {
        let (env, demo, seg) = stack();
        let cfg = FormulationConfig::default();
        let start = env.start_from_demo(&demo).unwrap();
        let s1 = formulate_initial(&seg.segments[0], &demo, &cfg).unwrap();
        let p1 = init_policy(&s1, &demo, &env.dmp).unwrap();
        let s2 = formulate_initial(&seg.segments[1], &demo, &cfg).unwrap();
        let p2 = init_policy(&s2, &demo, &env.dmp).unwrap();
        let est = estimate_success(&env, &start, &[(&s1, &p1)], &s2, &p2, 20.0, &EvalProtocol::default(), 1).unwrap();
        assert_eq!(est.success_prob, 0.0);
        let est1 = estimate_success(&env, &start, &[], &s1, &p1, 20.0, &EvalProtocol { n_eval: 3, ..Default::default() }, 1).unwrap();
        assert_eq!(est1.success_prob, 1.0);
        assert_eq!(est1.initiation_states.len(), 3);
    }

    #[test]
    fn reformulated_policy_keeps_pose_weights() {
        let (env, demo, seg) = stack();
        let cfg = FormulationConfig::default();
        let s2 = formulate_initial(&seg.segments[1], &demo, &cfg).unwrap();
        let mut prev = init_policy(&s2, &demo, &env.dmp).unwrap();
        prev.pose[0].w[0] += 1.0;
        let g = formulate(&demo, s2.start, s2.end, &s2.abstraction, true, &cfg).unwrap();
        let p = reformulated_policy(&g, &prev, &demo, &env.dmp).unwrap();
        assert_eq!(p.pose, prev.pose);
        assert!(p.gripper.as_ref().unwrap().w.iter().all(|w| *w == 0.0));
        assert_eq!((p.gripper.as_ref().unwrap().y0, p.gripper.as_ref().unwrap().g), (0.0, 0.0));
    }

    #[test]
    fn reformulation_queue_order_and_backtrack() {
        let (_, demo, seg) = stack();
        let prior = SegPrior { alpha_model: 1.0, ..SegPrior::default() };
        let mut r = Reformulator::new(seg.segments.len());
        let initial = Formulation { abstraction: seg.segments[1].abstraction.clone(), include_gripper_action: false };
        r.mark_tried(1, &initial);
        let next = r.reformulate(1, &seg, &demo, &prior).unwrap();
        assert_eq!(
            next,
            Reformulation::Next { segment: 1, formulation: Formulation { include_gripper_action: true, ..initial.clone() } }
        );
        assert!(r.states[1].queue.is_empty());
        assert_eq!(r.reformulate(1, &seg, &demo, &prior).unwrap(), Reformulation::Backtrack { segment: 1 });
        assert!(r.states[1].reform_prev && !r.states[1].reform_curr);
        r.mark_tried(0, &Formulation { abstraction: seg.segments[0].abstraction.clone(), include_gripper_action: false });
        match r.reformulate(1, &seg, &demo, &prior).unwrap() {
            Reformulation::Next { segment, formulation } => {
                assert_eq!(segment, 0);
                assert!(formulation.include_gripper_action);
            }
            other => panic!("{other:?}"),
        }
        assert!(!r.states[1].reform_prev);
    }

    #[test]
    fn backtrack_below_first_segment_fails() {
        let (_, demo, seg) = stack();
        let prior = SegPrior { alpha_model: 1.0, ..SegPrior::default() };
        let mut r = Reformulator::new(seg.segments.len());
        r.mark_tried(0, &Formulation { abstraction: seg.segments[0].abstraction.clone(), include_gripper_action: false });
        assert!(matches!(r.reformulate(0, &seg, &demo, &prior).unwrap(), Reformulation::Next { .. }));
        assert!(matches!(r.reformulate(0, &seg, &demo, &prior).unwrap(), Reformulation::Backtrack { .. }));
        assert!(matches!(r.reformulate(0, &seg, &demo, &prior), Err(Error::PipelineFailure(_))));
    }

    #[test]
    fn wider_queue_interleaves_gripper_variants() {
        let (_, demo, seg) = stack();
        let prior = SegPrior { alpha_model: 1e-300, ..SegPrior::default() };
        let mut r = Reformulator::new(seg.segments.len());
        let _ = r.reformulate(1, &seg, &demo, &prior).unwrap();
        let st = &r.states[1];
        // first pop was candidate 1 without gripper; the rest alternates
        assert!(st.candidates.len() >= 2);
        assert_eq!(st.queue[0].abstraction, st.candidates[0].0);
        assert!(st.queue[0].include_gripper_action);
        assert_eq!(st.queue[1].abstraction, st.candidates[1].0);
        assert!(!st.queue[1].include_gripper_action);
    }
}
