//! Kinematic tabletop world: a free-floating hand with a force-controlled
//! gripper, rigid blocks, grasp/attach/release rules and a scripted demonstrator.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dmp::{assemble_pose, integrate_with_phase, DmpConfig, DmpWeights, Phase};
use crate::error::{Error, Result};
use crate::mdp::DmpPolicy;
use crate::pose::{relative_pose, Pose, PoseVec7, Quat};
use crate::state::{Demonstration, PublicState, DEFAULT_HAND_ID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    /// Clamped point and whether any coordinate changed.
    pub fn clamp(&self, p: [f64; 3]) -> ([f64; 3], bool) {
        let c = std::array::from_fn(|i| p[i].clamp(self.min[i], self.max[i]));
        (c, c != p)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub id: String,
    /// Edge lengths (l, w, h) along the block's local axes.
    pub dims: [f64; 3],
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub hand_id: String,
    pub hand_start: Pose,
    pub table_height: f64,
    pub blocks: Vec<BlockSpec>,
    pub grasp_tolerance: f64,
    pub grasp_angle_tol: f64,
    pub force_threshold: f64,
    pub control_dt: f64,
    pub workspace: Aabb,
}

impl Default for WorldConfig {
    /// Two 5 cm cubes on the table and the hand above and to the side of them.
    fn default() -> Self {
        let cube = |id: &str, x: f64, y: f64| BlockSpec {
            id: id.into(),
            dims: [0.05; 3],
            pose: Pose::from_translation([x, y, 0.025]),
        };
        Self {
            hand_id: DEFAULT_HAND_ID.into(),
            hand_start: Pose { location: [0.30, 0.25, 0.22], orientation: Quat::from_yaw(20f64.to_radians()) },
            table_height: 0.0,
            blocks: vec![cube("b_blue", 0.5, 0.1), cube("b_green", 0.5, -0.15)],
            grasp_tolerance: 0.015,
            grasp_angle_tol: 0.3,
            force_threshold: 1.0,
            control_dt: 0.01,
            workspace: Aabb { min: [-0.5, -0.8, 0.0], max: [1.2, 0.8, 1.0] },
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grasp_tolerance > 0.0) || !(self.control_dt > 0.0) || !(self.force_threshold > 0.0) {
            return Err(Error::InvalidConfig("grasp_tolerance, control_dt and force_threshold must be positive".into()));
        }
        if !(self.grasp_angle_tol >= 0.0) {
            return Err(Error::InvalidConfig("grasp_angle_tol must be >= 0".into()));
        }
        if (0..3).any(|i| self.workspace.min[i] > self.workspace.max[i]) {
            return Err(Error::InvalidConfig("workspace min exceeds max".into()));
        }
        self.hand_start.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.blocks {
            b.pose.validate()?;
            if b.id == self.hand_id || !seen.insert(b.id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate entity id `{}`", b.id)));
            }
            if b.dims.iter().any(|d| !(*d > 0.0)) {
                return Err(Error::InvalidConfig(format!("block `{}` has non-positive dimensions", b.id)));
            }
            if b.pose.location[2] - 0.5 * b.dims[2] < self.table_height - 1e-9 {
                return Err(Error::InvalidConfig(format!("block `{}` starts below the table", b.id)));
            }
        }
        Ok(())
    }

    pub fn block(&self, id: &str) -> Result<&BlockSpec> {
        self.blocks.iter().find(|b| b.id == id).ok_or_else(|| Error::UnknownEntity(id.into()))
    }

    pub fn initial_state(&self) -> WorldState {
        WorldState {
            hand: self.hand_start,
            gripper_force: 0.0,
            blocks: self.blocks.iter().map(|b| (b.id.clone(), b.pose)).collect(),
            attached: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub block: String,
    /// Block pose in the hand frame at grasp time.
    pub offset: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub hand: Pose,
    pub gripper_force: f64,
    pub blocks: BTreeMap<String, Pose>,
    pub attached: Option<Attachment>,
}

impl WorldState {
    pub fn public_state(&self, hand_id: &str) -> PublicState {
        PublicState { hand_id: hand_id.to_string(), hand: self.hand, objects: self.blocks.clone() }
    }

    pub fn pose(&self, hand_id: &str, id: &str) -> Result<Pose> {
        if id == hand_id {
            Ok(self.hand)
        } else {
            self.blocks.get(id).copied().ok_or_else(|| Error::UnknownEntity(id.into()))
        }
    }
}

fn angle_between_z(a: &Quat, b: &Quat) -> f64 {
    let (za, zb) = (a.z_axis(), b.z_axis());
    let d = (za[0] * zb[0] + za[1] * zb[1] + za[2] * zb[2]).abs().min(1.0);
    d.acos()
}

/// Height the released block's center settles at: highest support top under its center plus half its height.
fn settle_height(cfg: &WorldConfig, blocks: &BTreeMap<String, Pose>, id: &str, pose: &Pose) -> f64 {
    let dims = |bid: &str| cfg.block(bid).map(|b| b.dims).unwrap_or([0.0; 3]);
    let own_h = dims(id)[2];
    let c = pose.location;
    let mut support = cfg.table_height;
    for (other, p) in blocks {
        if other == id {
            continue;
        }
        let d = dims(other);
        let local = p.orientation.conjugate().rotate([c[0] - p.location[0], c[1] - p.location[1], 0.0]);
        let top = p.location[2] + 0.5 * d[2];
        if local[0].abs() <= 0.5 * d[0] && local[1].abs() <= 0.5 * d[1] && top <= c[2] + 1e-12 {
            support = support.max(top);
        }
    }
    support + 0.5 * own_h
}

/// One control tick: move the hand, set the gripper force, then apply grasp or release.
pub fn step(cfg: &WorldConfig, state: &WorldState, hand: Pose, force: f64) -> WorldState {
    let hand = Pose { location: hand.location, orientation: hand.orientation.normalized() };
    let mut next = state.clone();
    next.hand = hand;
    next.gripper_force = force.max(0.0);
    let closed = next.gripper_force >= cfg.force_threshold;
    let was_closed = state.gripper_force >= cfg.force_threshold;

    if let Some(att) = next.attached.clone() {
        if closed {
            next.blocks.insert(att.block.clone(), hand.compose(&att.offset));
        } else {
            let mut p = hand.compose(&att.offset);
            p.location[2] = settle_height(cfg, &next.blocks, &att.block, &p);
            next.blocks.insert(att.block, p);
            next.attached = None;
        }
    } else if closed && !was_closed {
        let mut best: Option<(f64, &String)> = None;
        for (id, p) in &state.blocks {
            let d = hand.distance(p);
            if d <= cfg.grasp_tolerance
                && angle_between_z(&hand.orientation, &p.orientation) <= cfg.grasp_angle_tol
                && best.is_none_or(|(bd, _)| d < bd)
            {
                best = Some((d, id));
            }
        }
        if let Some((_, id)) = best {
            let mut offset = hand.inverse().compose(&state.blocks[id]);
            offset.orientation = offset.orientation.normalized();
            next.attached = Some(Attachment { block: id.clone(), offset });
        }
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    Reach,
    GraspDwell,
    Transport,
    ReleaseDwell,
    Retreat,
}

/// Pick-and-place script: reach the grasp block, close, lift to a via point above the
/// target, descend onto it, open, retreat upwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoScript {
    pub fps: f64,
    pub grasp_block: String,
    pub target_block: String,
    pub reach: f64,
    pub grasp_dwell: f64,
    /// Lift and move to the via point.
    pub lift: f64,
    /// Vertical descent from the via point onto the target.
    pub descend: f64,
    /// Height of the via point above the placement pose.
    pub via_clearance: f64,
    pub release_dwell: f64,
    pub retreat: f64,
    /// Height of the retreat point above the placement pose.
    pub retreat_rise: f64,
    pub grasp_force: f64,
}

impl Default for DemoScript {
    fn default() -> Self {
        Self {
            fps: 30.0,
            grasp_block: "b_blue".into(),
            target_block: "b_green".into(),
            reach: 3.0,
            grasp_dwell: 0.3,
            lift: 2.3,
            descend: 1.2,
            via_clearance: 0.045,
            release_dwell: 0.3,
            retreat: 2.0,
            retreat_rise: 0.175,
            grasp_force: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDemo {
    pub demo: Demonstration,
    /// Last frame of each phase.
    pub phase_ends: Vec<(PhaseKind, usize)>,
    /// Gripper force per frame; never part of the public demonstration.
    pub forces: Vec<f64>,
}

impl GeneratedDemo {
    pub fn phase_end(&self, kind: PhaseKind) -> Option<usize> {
        self.phase_ends.iter().rev().find(|(k, _)| *k == kind).map(|(_, f)| *f)
    }
}

pub fn min_jerk(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5)
}

pub fn generate_demo(cfg: &WorldConfig, script: &DemoScript) -> Result<GeneratedDemo> {
    cfg.validate()?;
    if !(script.fps > 0.0) {
        return Err(Error::Generation("fps must be positive".into()));
    }
    let frames_of = |d: f64| (d * script.fps).round() as usize;
    for (name, d) in [("reach", script.reach), ("transport", script.lift + script.descend), ("retreat", script.retreat)] {
        if !(d > 0.0) || frames_of(d) == 0 {
            return Err(Error::Generation(format!("{name} phase has zero length")));
        }
    }
    if script.lift < 0.0 || script.descend < 0.0 || script.grasp_dwell < 0.0 || script.release_dwell < 0.0 {
        return Err(Error::Generation("phase durations must be non-negative".into()));
    }
    if script.grasp_force < cfg.force_threshold {
        return Err(Error::Generation("grasp force is below the grasp threshold".into()));
    }
    let grasp = cfg.block(&script.grasp_block)?;
    let target = cfg.block(&script.target_block)?;
    let place = {
        let t = target.pose.location;
        Pose { location: [t[0], t[1], t[2] + 0.5 * (target.dims[2] + grasp.dims[2])], orientation: grasp.pose.orientation }
    };
    let lift_to = |dz: f64| Pose { location: [place.location[0], place.location[1], place.location[2] + dz], orientation: place.orientation };
    let via = lift_to(script.via_clearance);
    let retreat = lift_to(script.retreat_rise);

    let mut state = cfg.initial_state();
    let mut frames = vec![state.public_state(&cfg.hand_id)];
    let mut forces = vec![0.0];
    let mut phase_ends = Vec::new();
    let mut run = |state: &mut WorldState, kind: PhaseKind, to: Pose, dur: f64, force: f64| {
        let n = frames_of(dur);
        let from = state.hand;
        for i in 1..=n {
            let s = min_jerk(i as f64 / n as f64);
            let loc = std::array::from_fn(|c| from.location[c] + (to.location[c] - from.location[c]) * s);
            let pose = Pose { location: loc, orientation: from.orientation.slerp(&to.orientation, s) };
            *state = step(cfg, state, pose, force);
            frames.push(state.public_state(&cfg.hand_id));
            forces.push(state.gripper_force);
        }
        phase_ends.push((kind, frames.len() - 1));
    };

    run(&mut state, PhaseKind::Reach, grasp.pose, script.reach, 0.0);
    run(&mut state, PhaseKind::GraspDwell, grasp.pose, script.grasp_dwell, script.grasp_force);
    if state.attached.as_ref().map(|a| a.block.as_str()) != Some(script.grasp_block.as_str()) {
        if script.grasp_dwell == 0.0 {
            return Err(Error::Generation("grasp dwell has no frames, so the block is never grasped".into()));
        }
        return Err(Error::Generation(format!("the hand could not grasp `{}`", script.grasp_block)));
    }
    if script.lift > 0.0 {
        run(&mut state, PhaseKind::Transport, via, script.lift, script.grasp_force);
    }
    if script.descend > 0.0 {
        run(&mut state, PhaseKind::Transport, place, script.descend, script.grasp_force);
    }
    run(&mut state, PhaseKind::ReleaseDwell, place, script.release_dwell, 0.0);
    if state.attached.is_some() {
        return Err(Error::Generation("release dwell has no frames, so the block is never released".into()));
    }
    let placed = state.blocks[&script.grasp_block];
    if placed.distance(&place) > 1e-9 {
        return Err(Error::Generation(format!("`{}` did not come to rest on `{}`", script.grasp_block, script.target_block)));
    }
    run(&mut state, PhaseKind::Retreat, retreat, script.retreat, 0.0);

    Ok(GeneratedDemo { demo: Demonstration::new(1.0 / script.fps, frames)?, phase_ends, forces })
}

/// Uniform ±`pos` metres in x and y and ±`yaw` radians about z for every unattached block.
pub fn jitter_blocks<R: Rng>(state: &WorldState, rng: &mut R, pos: f64, yaw: f64) -> WorldState {
    let mut out = state.clone();
    let held = state.attached.as_ref().map(|a| a.block.clone());
    for (id, p) in out.blocks.iter_mut() {
        if Some(id) == held.as_ref() {
            continue;
        }
        let dx = if pos > 0.0 { rng.random_range(-pos..=pos) } else { 0.0 };
        let dy = if pos > 0.0 { rng.random_range(-pos..=pos) } else { 0.0 };
        let dyaw = if yaw > 0.0 { rng.random_range(-yaw..=yaw) } else { 0.0 };
        p.location[0] += dx;
        p.location[1] += dy;
        p.orientation = Quat::from_yaw(dyaw).mul(&p.orientation).normalized();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRollout {
    /// World state before the first tick and after every tick.
    pub states: Vec<WorldState>,
    /// Commanded hand pose in the reference frame, per tick.
    pub commanded: Vec<PoseVec7>,
    /// Commanded pose-DOF accelerations, per tick.
    pub accel: Vec<[f64; 7]>,
    /// Whether the commanded location had to be clamped into the workspace, per tick.
    pub clamped: Vec<bool>,
    /// Whether the gripper force crossed the grasp threshold on this tick, per tick.
    pub gripper_switches: Vec<bool>,
}

impl PolicyRollout {
    pub fn final_state(&self) -> &WorldState {
        self.states.last().expect("rollouts hold the start state")
    }
}

/// Execute a policy from `start`: pose DMPs run in the reference frame frozen at the start,
/// from the current relative hand pose towards the stored goal.
pub fn run_policy(cfg: &WorldConfig, dmp: &DmpConfig, start: &WorldState, policy: &DmpPolicy, duration: f64) -> Result<PolicyRollout> {
    if policy.pose.len() != 7 {
        return Err(Error::DimensionMismatch { expected: 7, got: policy.pose.len() });
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidConfig(format!("duration must be positive, got {duration}")));
    }
    let dmp = dmp.clone().with_tau(duration);
    dmp.validate()?;
    let reference = start.pose(&cfg.hand_id, &policy.reference)?;
    let y0 = relative_pose(&start.hand, &reference)?;
    let phase = Phase::new(&dmp, duration);
    let dofs = policy
        .pose
        .iter()
        .enumerate()
        .map(|(d, w)| integrate_with_phase(&dmp, &DmpWeights { y0: y0.0[d], ..w.clone() }, &phase))
        .collect::<Result<Vec<_>>>()?;
    let pose_traj = assemble_pose(&dofs);
    let grip = policy.gripper.as_ref().map(|w| integrate_with_phase(&dmp, w, &phase)).transpose()?;

    let ticks = ((duration / cfg.control_dt).round() as usize).max(1);
    let mut out = PolicyRollout {
        states: Vec::with_capacity(ticks + 1),
        commanded: Vec::with_capacity(ticks),
        accel: Vec::with_capacity(ticks),
        clamped: Vec::with_capacity(ticks),
        gripper_switches: Vec::with_capacity(ticks),
    };
    let mut state = start.clone();
    out.states.push(state.clone());
    let last = phase.len() - 1;
    for k in 1..=ticks {
        let idx = ((k as f64 * cfg.control_dt / dmp.dt).round() as usize).min(last);
        let rel = pose_traj.poses[idx];
        let mut world = Pose::from_relative(&reference, &rel);
        let (loc, clamped) = cfg.workspace.clamp(world.location);
        world.location = loc;
        let force = grip.as_ref().map_or(0.0, |g| g.y[idx]).max(0.0);
        let before = state.gripper_force >= cfg.force_threshold;
        state = step(cfg, &state, world, force);
        out.gripper_switches.push(before != (state.gripper_force >= cfg.force_threshold));
        out.commanded.push(rel);
        out.accel.push(pose_traj.accel[idx]);
        out.clamped.push(clamped);
        out.states.push(state.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmp::DmpWeights;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world() -> WorldConfig {
        WorldConfig::default()
    }

    #[test]
    fn idle_world_is_static() {
        let cfg = world();
        let s0 = cfg.initial_state();
        let far = Pose::from_translation([0.0, 0.5, 0.5]);
        let s1 = step(&cfg, &s0, far, 0.0);
        assert_eq!(s1.blocks, s0.blocks);
        assert!(s1.attached.is_none());
    }

    #[test]
    fn grasp_then_carry() {
        let cfg = world();
        let blue = cfg.block("b_blue").unwrap().pose;
        let mut s = step(&cfg, &cfg.initial_state(), blue, 0.0);
        s = step(&cfg, &s, blue, 2.0);
        assert_eq!(s.attached.as_ref().unwrap().block, "b_blue");
        let moved = Pose::from_translation([0.4, 0.0, 0.2]);
        s = step(&cfg, &s, moved, 2.0);
        assert!(s.blocks["b_blue"].distance(&moved) < 1e-12);
        assert_eq!(s.blocks["b_green"], cfg.block("b_green").unwrap().pose);
    }

    #[test]
    fn no_grasp_without_rising_edge_or_alignment() {
        let cfg = world();
        let blue = cfg.block("b_blue").unwrap().pose;
        // already closed when arriving
        let mut s = step(&cfg, &cfg.initial_state(), Pose::from_translation([0.0, 0.0, 0.5]), 2.0);
        s = step(&cfg, &s, blue, 2.0);
        assert!(s.attached.is_none());
        // tilted approach
        let tilted = Pose { location: blue.location, orientation: Quat::from_axis_angle([1.0, 0.0, 0.0], 0.5) };
        let s = step(&cfg, &step(&cfg, &cfg.initial_state(), tilted, 0.0), tilted, 2.0);
        assert!(s.attached.is_none());
        // too far
        let off = Pose::from_translation([blue.location[0] + 0.02, blue.location[1], blue.location[2]]);
        let s = step(&cfg, &step(&cfg, &cfg.initial_state(), off, 0.0), off, 2.0);
        assert!(s.attached.is_none());
    }

    #[test]
    fn release_stacks_on_support() {
        let cfg = world();
        let blue = cfg.block("b_blue").unwrap().pose;
        let mut s = step(&cfg, &step(&cfg, &cfg.initial_state(), blue, 0.0), blue, 2.0);
        let above = Pose::from_translation([0.5, -0.15, 0.075 + 0.001]);
        s = step(&cfg, &s, above, 2.0);
        s = step(&cfg, &s, above, 0.0);
        assert!(s.attached.is_none());
        let p = s.blocks["b_blue"].location;
        assert!((p[2] - 0.075).abs() < 1e-12);
        // released off the stack: falls to the table
        let mut s = step(&cfg, &s, s.blocks["b_blue"], 2.0);
        s = step(&cfg, &s, Pose::from_translation([0.8, 0.3, 0.3]), 2.0);
        s = step(&cfg, &s, Pose::from_translation([0.8, 0.3, 0.3]), 0.0);
        assert!((s.blocks["b_blue"].location[2] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn stack_demo_content() {
        let cfg = world();
        let g = generate_demo(&cfg, &DemoScript::default()).unwrap();
        let d = &g.demo;
        assert!((d.len() as f64 * d.dt - 9.1).abs() < 0.5);
        let green = cfg.block("b_green").unwrap().pose;
        assert!(d.frames.iter().all(|f| f.objects["b_green"] == green));
        let reach_end = g.phase_end(PhaseKind::Reach).unwrap();
        assert!(d.frames[reach_end].hand.distance(&d.frames[reach_end].objects["b_blue"]) < 1e-12);
        let last = d.frames.last().unwrap();
        assert!((last.objects["b_blue"].location[2] - 0.075).abs() < 1e-12);
        assert!(g.forces.iter().any(|f| *f > 0.0));
        let back = Demonstration::from_csv(&d.to_csv()).unwrap();
        assert_eq!(&back, d);
    }

    #[test]
    fn degenerate_scripts_are_rejected() {
        let cfg = world();
        let zero = DemoScript { lift: 0.0, descend: 0.0, ..DemoScript::default() };
        assert!(matches!(generate_demo(&cfg, &zero), Err(Error::Generation(_))));
        let weak = DemoScript { grasp_force: 0.5, ..DemoScript::default() };
        assert!(generate_demo(&cfg, &weak).is_err());
        let bad_block = DemoScript { grasp_block: "nope".into(), ..DemoScript::default() };
        assert!(generate_demo(&cfg, &bad_block).is_err());
    }

    fn hold_policy(reference: &str, goal: PoseVec7, gripper: bool) -> DmpPolicy {
        DmpPolicy {
            reference: reference.into(),
            pose: (0..7).map(|d| DmpWeights::zeros(10, goal.0[d], goal.0[d])).collect(),
            gripper: gripper.then(|| DmpWeights::zeros(10, 0.0, 0.0)),
        }
    }

    #[test]
    fn zero_policy_at_goal_leaves_world_unchanged() {
        let cfg = world();
        let s0 = cfg.initial_state();
        let rel = relative_pose(&s0.hand, &s0.blocks["b_green"]).unwrap();
        let r = run_policy(&cfg, &DmpConfig::default(), &s0, &hold_policy("b_green", rel, false), 1.0).unwrap();
        let end = r.final_state();
        assert_eq!(end.blocks, s0.blocks);
        assert!(end.hand.distance(&s0.hand) < 1e-12);
        assert!(r.states.iter().all(|s| s.gripper_force == 0.0));
        assert_eq!(r.states.len(), 101);
    }

    #[test]
    fn clamping_is_reported() {
        let cfg = world();
        let s0 = cfg.initial_state();
        let goal = PoseVec7([0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        let r = run_policy(&cfg, &DmpConfig::default(), &s0, &hold_policy("b_green", goal, false), 1.0).unwrap();
        assert!(r.clamped.iter().any(|c| *c));
        assert!(r.states.iter().all(|s| cfg.workspace.contains(s.hand.location)));
    }

    #[test]
    fn jitter_stays_in_bounds() {
        let cfg = world();
        let s0 = cfg.initial_state();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let j = jitter_blocks(&s0, &mut rng, 0.01, 5f64.to_radians());
        for (id, p) in &j.blocks {
            let o = s0.blocks[id];
            assert!((p.location[0] - o.location[0]).abs() <= 0.01);
            assert!((p.location[1] - o.location[1]).abs() <= 0.01);
            assert_eq!(p.location[2], o.location[2]);
            assert!(angle_between_z(&p.orientation, &o.orientation) < 1e-9);
        }
    }
}
