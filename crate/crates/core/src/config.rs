//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Keys are applied in file order, so
//! `dmp.alpha_z` (which also resets `beta_z` and `alpha_x`) should precede explicit
//! `dmp.beta_z` / `dmp.alpha_x` overrides. Vectors are whitespace-separated numbers.
//! The first `world.block.<id>` line replaces the default blocks.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::ReachingBench;
use crate::dmp::Variant;
use crate::error::{Error, Result};
use crate::mdp::{Env, PipelineConfig};
use crate::pose::{Pose, Quat};
use crate::rl::Credit;
use crate::segmentation::DistanceMode;
use crate::sim::{BlockSpec, DemoScript, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub demo: DemoScript,
    pub pipeline: PipelineConfig,
    pub bench: ReachingBench,
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
}

fn nums<const N: usize>(v: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != N {
        return Err(format!("expected {N} numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(p)?;
    }
    Ok(out)
}

fn pose(v: [f64; 7]) -> std::result::Result<Pose, String> {
    Pose::new([v[0], v[1], v[2]], Quat::new(v[3], v[4], v[5], v[6])).map_err(|e| e.to_string())
}

fn pose_text(p: &Pose) -> String {
    let o = p.orientation;
    [p.location[0], p.location[1], p.location[2], o.x, o.y, o.z, o.w].map(|v| v.to_string()).join(" ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut custom_blocks = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse { line: idx + 1, message: format!("expected `key = value`, got `{line}`") })?;
            if let Some(id) = key.strip_prefix("world.block.") {
                if !custom_blocks {
                    cfg.world.blocks.clear();
                    custom_blocks = true;
                }
                let v = nums::<10>(value).map_err(|message| Error::Parse { line: idx + 1, message })?;
                let spec = BlockSpec {
                    id: id.to_string(),
                    dims: [v[0], v[1], v[2]],
                    pose: pose([v[3], v[4], v[5], v[6], v[7], v[8], v[9]]).map_err(|message| Error::Parse { line: idx + 1, message })?,
                };
                cfg.world.blocks.retain(|b| b.id != id);
                cfg.world.blocks.push(spec);
                continue;
            }
            cfg.set(key, value).map_err(|e| match e {
                SetError::Unknown => Error::UnknownConfigKey(key.to_string()),
                SetError::Value(message) => Error::Parse { line: idx + 1, message: format!("{key}: {message}") },
            })?;
        }
        cfg.pipeline.formulation.workspace = cfg.world.workspace;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.pipeline.validate()?;
        self.pipeline.learn.validate(1)?;
        self.bench.dmp.validate()
    }

    pub fn env(&self) -> Env {
        Env { world: self.world.clone(), dmp: self.pipeline.dmp.clone() }
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), SetError> {
        let w = &mut self.world;
        let d = &mut self.demo;
        let p = &mut self.pipeline;
        let b = &mut self.bench;
        match key {
            "seed" => p.seed = num(v)?,
            "world.hand_id" => w.hand_id = v.to_string(),
            "world.hand_start" => w.hand_start = pose(nums(v)?)?,
            "world.table_height" => w.table_height = num(v)?,
            "world.grasp_tolerance" => w.grasp_tolerance = num(v)?,
            "world.grasp_angle_tol" => w.grasp_angle_tol = num(v)?,
            "world.force_threshold" => w.force_threshold = num(v)?,
            "world.control_dt" => w.control_dt = num(v)?,
            "world.workspace_min" => w.workspace.min = nums(v)?,
            "world.workspace_max" => w.workspace.max = nums(v)?,
            "demo.fps" => d.fps = num(v)?,
            "demo.grasp_block" => d.grasp_block = v.to_string(),
            "demo.target_block" => d.target_block = v.to_string(),
            "demo.reach" => d.reach = num(v)?,
            "demo.grasp_dwell" => d.grasp_dwell = num(v)?,
            "demo.lift" => d.lift = num(v)?,
            "demo.descend" => d.descend = num(v)?,
            "demo.via_clearance" => d.via_clearance = num(v)?,
            "demo.release_dwell" => d.release_dwell = num(v)?,
            "demo.retreat" => d.retreat = num(v)?,
            "demo.retreat_rise" => d.retreat_rise = num(v)?,
            "demo.grasp_force" => d.grasp_force = num(v)?,
            "seg.expected_len_k" => p.seg_prior.expected_len_k = num(v)?,
            "seg.d_thresh" => p.seg_prior.d_thresh = num(v)?,
            "seg.alpha_model" => p.seg_prior.alpha_model = num(v)?,
            "seg.distance_mode" => {
                p.seg_prior.distance_mode = match v {
                    "displacement" => DistanceMode::Displacement,
                    "literal" => DistanceMode::Literal,
                    _ => return Err(SetError::Value(format!("unknown distance mode `{v}`"))),
                }
            }
            "dmp.alpha_z" => p.dmp = p.dmp.clone().with_alpha_z(num(v)?),
            "dmp.beta_z" => p.dmp.beta_z = num(v)?,
            "dmp.alpha_x" => p.dmp.alpha_x = num(v)?,
            "dmp.n_basis" => p.dmp.n_basis = num(v)?,
            "dmp.dt" => p.dmp.dt = num(v)?,
            "dmp.variant" => {
                p.dmp.variant = match v {
                    "bio" => Variant::Bio,
                    "original" => Variant::Original,
                    _ => return Err(SetError::Value(format!("unknown variant `{v}`"))),
                }
            }
            "learn.first_update_after" => p.learn.first_update_after = num(v)?,
            "learn.trials_per_update" => p.learn.trials_per_update = num(v)?,
            "learn.max_updates" => p.learn.max_updates = num(v)?,
            "learn.convergence_delta" => p.learn.convergence_delta = num(v)?,
            "learn.pi2_h" => p.learn.pi2_h = num(v)?,
            "learn.credit" => {
                p.learn.credit = match v {
                    "episode" => Credit::Episode,
                    "cost_to_go" => Credit::CostToGo,
                    _ => return Err(SetError::Value(format!("unknown credit `{v}`"))),
                }
            }
            "learn.pose_std" => p.pose_std = num(v)?,
            "learn.gripper_std" => p.gripper_std = num(v)?,
            "cost.w_imm" => p.formulation.w_imm = num(v)?,
            "cost.w_position" => p.formulation.w_position = num(v)?,
            "cost.w_orientation" => p.formulation.w_orientation = num(v)?,
            "cost.gripper_action_cost" => p.formulation.gripper_action_cost = num(v)?,
            "cost.clamp_penalty" => p.formulation.clamp_penalty = num(v)?,
            "pipeline.alpha" => p.alpha = num(v)?,
            "pipeline.termination_threshold" => p.termination_threshold = num(v)?,
            "pipeline.n_eval" => p.eval.n_eval = num(v)?,
            "pipeline.jitter_position" => p.eval.jitter_position = num(v)?,
            "pipeline.jitter_yaw_deg" => p.eval.jitter_yaw = num::<f64>(v)?.to_radians(),
            "pipeline.max_attempts" => p.max_attempts = num(v)?,
            "bench.rollouts_per_update" => b.rollouts_per_update = num(v)?,
            "bench.total_rollouts" => b.total_rollouts = num(v)?,
            "bench.exploration_std" => b.exploration_std = num(v)?,
            "bench.pi2_h" => b.pi2_h = num(v)?,
            "bench.power_elite" => b.power_elite = num(v)?,
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    /// Text that parses back to the world, demo and pipeline settings of `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (w, d, p, b) = (&self.world, &self.demo, &self.pipeline, &self.bench);
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", p.seed.to_string());
        kv("world.hand_id", w.hand_id.clone());
        kv("world.hand_start", pose_text(&w.hand_start));
        kv("world.table_height", w.table_height.to_string());
        kv("world.grasp_tolerance", w.grasp_tolerance.to_string());
        kv("world.grasp_angle_tol", w.grasp_angle_tol.to_string());
        kv("world.force_threshold", w.force_threshold.to_string());
        kv("world.control_dt", w.control_dt.to_string());
        kv("world.workspace_min", w.workspace.min.map(|v| v.to_string()).join(" "));
        kv("world.workspace_max", w.workspace.max.map(|v| v.to_string()).join(" "));
        for blk in &w.blocks {
            kv(&format!("world.block.{}", blk.id), format!("{} {}", blk.dims.map(|v| v.to_string()).join(" "), pose_text(&blk.pose)));
        }
        kv("demo.fps", d.fps.to_string());
        kv("demo.grasp_block", d.grasp_block.clone());
        kv("demo.target_block", d.target_block.clone());
        kv("demo.reach", d.reach.to_string());
        kv("demo.grasp_dwell", d.grasp_dwell.to_string());
        kv("demo.lift", d.lift.to_string());
        kv("demo.descend", d.descend.to_string());
        kv("demo.via_clearance", d.via_clearance.to_string());
        kv("demo.release_dwell", d.release_dwell.to_string());
        kv("demo.retreat", d.retreat.to_string());
        kv("demo.retreat_rise", d.retreat_rise.to_string());
        kv("demo.grasp_force", d.grasp_force.to_string());
        kv("seg.expected_len_k", p.seg_prior.expected_len_k.to_string());
        kv("seg.d_thresh", p.seg_prior.d_thresh.to_string());
        kv("seg.alpha_model", p.seg_prior.alpha_model.to_string());
        kv(
            "seg.distance_mode",
            match p.seg_prior.distance_mode {
                DistanceMode::Displacement => "displacement",
                DistanceMode::Literal => "literal",
            }
            .into(),
        );
        kv("dmp.alpha_z", p.dmp.alpha_z.to_string());
        kv("dmp.beta_z", p.dmp.beta_z.to_string());
        kv("dmp.alpha_x", p.dmp.alpha_x.to_string());
        kv("dmp.n_basis", p.dmp.n_basis.to_string());
        kv("dmp.dt", p.dmp.dt.to_string());
        kv(
            "dmp.variant",
            match p.dmp.variant {
                Variant::Bio => "bio",
                Variant::Original => "original",
            }
            .into(),
        );
        kv("learn.first_update_after", p.learn.first_update_after.to_string());
        kv("learn.trials_per_update", p.learn.trials_per_update.to_string());
        kv("learn.max_updates", p.learn.max_updates.to_string());
        kv("learn.convergence_delta", p.learn.convergence_delta.to_string());
        kv("learn.pi2_h", p.learn.pi2_h.to_string());
        kv(
            "learn.credit",
            match p.learn.credit {
                Credit::Episode => "episode",
                Credit::CostToGo => "cost_to_go",
            }
            .into(),
        );
        kv("learn.pose_std", p.pose_std.to_string());
        kv("learn.gripper_std", p.gripper_std.to_string());
        kv("cost.w_imm", p.formulation.w_imm.to_string());
        kv("cost.w_position", p.formulation.w_position.to_string());
        kv("cost.w_orientation", p.formulation.w_orientation.to_string());
        kv("cost.gripper_action_cost", p.formulation.gripper_action_cost.to_string());
        kv("cost.clamp_penalty", p.formulation.clamp_penalty.to_string());
        kv("pipeline.alpha", p.alpha.to_string());
        kv("pipeline.termination_threshold", p.termination_threshold.to_string());
        kv("pipeline.n_eval", p.eval.n_eval.to_string());
        kv("pipeline.jitter_position", p.eval.jitter_position.to_string());
        kv("pipeline.jitter_yaw_deg", p.eval.jitter_yaw.to_degrees().to_string());
        kv("pipeline.max_attempts", p.max_attempts.to_string());
        kv("bench.rollouts_per_update", b.rollouts_per_update.to_string());
        kv("bench.total_rollouts", b.total_rollouts.to_string());
        kv("bench.exploration_std", b.exploration_std.to_string());
        kv("bench.pi2_h", b.pi2_h.to_string());
        kv("bench.power_elite", b.power_elite.to_string());
        s
    }
}

enum SetError {
    Unknown,
    Value(String),
}

impl From<String> for SetError {
    fn from(s: String) -> Self {
        SetError::Value(s)
    }
}
