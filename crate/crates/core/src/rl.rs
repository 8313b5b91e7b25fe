//! Costs, policy-search updates (PI², PoWER) and the trial schedule.
//!
//! Policy parameters are the concatenated basis weights of several DMPs sharing
//! one phase, so parameter `k` belongs to basis `k % n_basis`. Exploration noise
//! is drawn once per rollout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Per action DOF, applied to |ä|.
    pub w_imm: Vec<f64>,
    /// Per state dimension, applied to |s_T − s_T^obs|.
    pub w_ter: Vec<f64>,
    /// Charged whenever the gripper force crosses the grasp threshold.
    pub gripper_action_cost: f64,
    /// Charged for every control step whose commanded pose left the workspace.
    pub clamp_penalty: f64,
}

impl CostWeights {
    /// Position weight for x, y, z and orientation weight for the quaternion, per entity.
    pub fn for_entities(n_entities: usize, w_imm: f64, w_position: f64, w_orientation: f64) -> Self {
        let w_ter = (0..n_entities)
            .flat_map(|_| [w_position, w_position, w_position, w_orientation, w_orientation, w_orientation, w_orientation])
            .collect();
        Self { w_imm: vec![w_imm; 7], w_ter, gripper_action_cost: 5.0, clamp_penalty: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.w_imm.iter().chain(&self.w_ter).chain([&self.gripper_action_cost, &self.clamp_penalty]);
        for v in all {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("cost weights must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn weighted_abs(a: &[f64], b: Option<&[f64]>, w: &[f64]) -> Result<f64> {
    if a.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), got: a.len() });
    }
    if let Some(b) = b {
        if b.len() != a.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
    }
    Ok(a.iter().enumerate().map(|(k, v)| w[k] * (v - b.map_or(0.0, |b| b[k])).abs()).sum())
}

/// w_immᵀ|ä|.
pub fn immediate_cost(accel: &[f64], w_imm: &[f64]) -> Result<f64> {
    weighted_abs(accel, None, w_imm)
}

/// w_terᵀ|s_T − s_T^obs|.
pub fn terminal_cost(s_t: &[f64], s_obs: &[f64], w_ter: &[f64]) -> Result<f64> {
    weighted_abs(s_t, Some(s_obs), w_ter)
}

/// Σ_t e^{−0.01|ÿ_t|}.
pub fn score(accel: &[f64]) -> f64 {
    accel.iter().map(|a| (-0.01 * a.abs()).exp()).sum()
}

pub fn score_per_sample(accel: &[f64]) -> f64 {
    score(accel) / accel.len() as f64
}

/// What an environment reports for one executed parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub step_costs: Vec<f64>,
    pub terminal_cost: f64,
}

impl Evaluation {
    pub fn immediate_sum(&self) -> f64 {
        self.step_costs.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.immediate_sum() + self.terminal_cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub eps: Vec<f64>,
    pub step_costs: Vec<f64>,
    pub terminal_cost: f64,
    pub total_cost: f64,
}

impl Rollout {
    pub fn new(eps: Vec<f64>, step_costs: Vec<f64>, terminal_cost: f64) -> Self {
        let total_cost = step_costs.iter().sum::<f64>() + terminal_cost;
        Self { eps, step_costs, terminal_cost, total_cost }
    }

    /// terminal + Σ_{k≥t} step cost, for every t.
    pub fn cost_to_go(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.step_costs.len()];
        let mut acc = self.terminal_cost;
        for t in (0..self.step_costs.len()).rev() {
            acc += self.step_costs[t];
            s[t] = acc;
        }
        s
    }
}

/// Which cost PI² attributes to the noise at time t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Credit {
    /// Total rollout cost at every t.
    #[default]
    Episode,
    /// Cost-to-go from t.
    CostToGo,
}

/// Softmax of −h·(S − min)/(max − min) over rollouts.
pub fn pi2_probabilities(costs: &[f64], h: f64) -> Vec<f64> {
    let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = costs.iter().map(|c| (-h * (c - min) / (max - min + 1e-12)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Activation-weighted time average of per-step parameter deltas.
fn time_average(per_step: &[Vec<f64>], activations: &[Vec<f64>], n_basis: usize) -> Vec<f64> {
    let dim = per_step[0].len();
    let mut num = vec![0.0; dim];
    let mut den = vec![0.0; n_basis];
    for (t, d) in per_step.iter().enumerate() {
        for (j, psi) in activations[t].iter().enumerate() {
            den[j] += psi;
        }
        for k in 0..dim {
            num[k] += activations[t][k % n_basis] * d[k];
        }
    }
    (0..dim).map(|k| if den[k % n_basis] > 0.0 { num[k] / den[k % n_basis] } else { 0.0 }).collect()
}

fn check_batch(n: usize, eps_len: impl Iterator<Item = usize>, theta: &[f64], activations: &[Vec<f64>], n_basis: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if n_basis == 0 || theta.len() % n_basis != 0 {
        return Err(Error::DimensionMismatch { expected: n_basis, got: theta.len() });
    }
    for l in eps_len {
        if l != theta.len() {
            return Err(Error::DimensionMismatch { expected: theta.len(), got: l });
        }
    }
    if activations.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if let Some(a) = activations.iter().find(|a| a.len() != n_basis) {
        return Err(Error::DimensionMismatch { expected: n_basis, got: a.len() });
    }
    Ok(())
}

/// One PI² step (no control-cost term): θ' = θ + time-averaged Σ_i P_i(t) ε_i.
///
/// `activations[t][j]` is ψ_j at the phase of step t; with [`Credit::CostToGo`] its length
/// must match the rollouts' step counts.
pub fn pi2_update(
    rollouts: &[Rollout],
    theta: &[f64],
    activations: &[Vec<f64>],
    n_basis: usize,
    h: f64,
    credit: Credit,
) -> Result<Vec<f64>> {
    check_batch(rollouts.len(), rollouts.iter().map(|r| r.eps.len()), theta, activations, n_basis)?;
    let steps = activations.len();
    let s: Vec<Vec<f64>> = match credit {
        Credit::Episode => rollouts.iter().map(|r| vec![r.total_cost; steps]).collect(),
        Credit::CostToGo => {
            if let Some(r) = rollouts.iter().find(|r| r.step_costs.len() != steps) {
                return Err(Error::DimensionMismatch { expected: steps, got: r.step_costs.len() });
            }
            rollouts.iter().map(Rollout::cost_to_go).collect()
        }
    };
    let mut per_step = Vec::with_capacity(steps);
    let mut cache: Option<(Vec<f64>, Vec<f64>)> = None;
    for t in 0..steps {
        let costs: Vec<f64> = s.iter().map(|row| row[t]).collect();
        if let Some((c, d)) = &cache {
            if *c == costs {
                per_step.push(d.clone());
                continue;
            }
        }
        let p = pi2_probabilities(&costs, h);
        let mut d = vec![0.0; theta.len()];
        for (pi, r) in p.iter().zip(rollouts) {
            for k in 0..d.len() {
                d[k] += pi * r.eps[k];
            }
        }
        per_step.push(d.clone());
        cache = Some((costs, d));
    }
    let delta = time_average(&per_step, activations, n_basis);
    Ok(theta.iter().zip(delta).map(|(a, b)| a + b).collect())
}

/// One executed parameter vector with per-step rewards, for PoWER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub params: Vec<f64>,
    pub step_rewards: Vec<f64>,
}

impl PowerSample {
    pub fn reward_to_go(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.step_rewards.len()];
        let mut acc = 0.0;
        for t in (0..self.step_rewards.len()).rev() {
            acc += self.step_rewards[t];
            q[t] = acc;
        }
        q
    }
}

/// PoWER importance-sampling step over the `elite` best samples by total return.
///
/// ε_i is measured from the current θ, so samples from earlier policies may be reused.
pub fn power_update(samples: &[PowerSample], theta: &[f64], activations: &[Vec<f64>], n_basis: usize, elite: usize) -> Result<Vec<f64>> {
    check_batch(samples.len(), samples.iter().map(|s| s.params.len()), theta, activations, n_basis)?;
    let steps = activations.len();
    if let Some(s) = samples.iter().find(|s| s.step_rewards.len() != steps) {
        return Err(Error::DimensionMismatch { expected: steps, got: s.step_rewards.len() });
    }
    let q: Vec<Vec<f64>> = samples.iter().map(PowerSample::reward_to_go).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| q[b][0].total_cmp(&q[a][0]));
    order.truncate(elite.max(1));
    let eps: Vec<Vec<f64>> = samples.iter().map(|s| s.params.iter().zip(theta).map(|(p, t)| p - t).collect()).collect();
    let per_step: Vec<Vec<f64>> = (0..steps)
        .map(|t| {
            let z: f64 = order.iter().map(|&i| q[i][t]).sum::<f64>() + 1e-12;
            (0..theta.len()).map(|k| order.iter().map(|&i| eps[i][k] * q[i][t]).sum::<f64>() / z).collect()
        })
        .collect();
    let delta = time_average(&per_step, activations, n_basis);
    Ok(theta.iter().zip(delta).map(|(a, b)| a + b).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub first_update_after: usize,
    pub trials_per_update: usize,
    pub max_updates: usize,
    /// Stop once consecutive batch-mean costs differ by less than this.
    pub convergence_delta: f64,
    /// Per-parameter noise std; a single entry is broadcast.
    pub exploration_std: Vec<f64>,
    pub pi2_h: f64,
    pub credit: Credit,
    pub eval_rollouts: usize,
    pub rng_seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            first_update_after: 10,
            trials_per_update: 5,
            max_updates: 5,
            convergence_delta: 3.0,
            exploration_std: vec![1.0],
            pi2_h: 10.0,
            credit: Credit::Episode,
            eval_rollouts: 10,
            rng_seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self, n_params: usize) -> Result<()> {
        if self.first_update_after < 2 || self.trials_per_update < 2 {
            return Err(Error::InvalidConfig("an update needs at least 2 trials".into()));
        }
        if self.eval_rollouts < 1 {
            return Err(Error::InvalidConfig("eval_rollouts must be >= 1".into()));
        }
        if self.exploration_std.len() != 1 && self.exploration_std.len() != n_params {
            return Err(Error::DimensionMismatch { expected: n_params, got: self.exploration_std.len() });
        }
        if self.exploration_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || self.exploration_std.iter().all(|s| *s == 0.0) {
            return Err(Error::InvalidConfig("exploration_std must be finite, >= 0 and not all zero".into()));
        }
        if !(self.pi2_h > 0.0) {
            return Err(Error::InvalidConfig("pi2_h must be positive".into()));
        }
        Ok(())
    }

    fn std(&self, k: usize) -> f64 {
        if self.exploration_std.len() == 1 {
            self.exploration_std[0]
        } else {
            self.exploration_std[k]
        }
    }
}

/// Deterministic noise stream for one trial of one run.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Zero-mean Gaussian exploration noise, one draw per parameter.
pub fn sample_noise(seed: u64, trial: u64, std: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
    let mut rng = trial_rng(seed, trial);
    (0..n)
        .map(|k| {
            let s = std(k);
            if s == 0.0 {
                0.0
            } else {
                Normal::new(0.0, s).expect("finite std").sample(&mut rng)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub trial: usize,
    pub total_cost: f64,
    pub c_imm_sum: f64,
    pub c_ter: f64,
    /// Number of updates applied before this trial.
    pub update: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    /// Lowest noise-free total cost among all policy versions.
    pub theta: Vec<f64>,
    pub best_version: usize,
    /// Noise-free evaluation of every policy version, initial one first.
    pub version_costs: Vec<f64>,
    pub curve: Vec<CurvePoint>,
    pub updates: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("learning aborted after {} trials: {source}", partial_curve.len())]
pub struct LearnFailure {
    #[source]
    pub source: Error,
    pub partial_curve: Vec<CurvePoint>,
}

/// Batched PI² with the convergence schedule.
///
/// Batch 0 has `first_update_after` trials, later batches `trials_per_update`. After
/// each batch the run stops if `max_updates` updates are done or the batch-mean cost
/// moved by less than `convergence_delta`; otherwise the batch drives one update.
pub fn learn<F>(mut env: F, theta0: &[f64], activations: &[Vec<f64>], n_basis: usize, cfg: &LearnConfig) -> Result<LearnOutcome, LearnFailure>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let fail = |source, curve: &[CurvePoint]| LearnFailure { source, partial_curve: curve.to_vec() };
    cfg.validate(theta0.len()).map_err(|e| fail(e, &[]))?;
    let mut theta = theta0.to_vec();
    let mut curve = Vec::new();
    let mut version_costs = vec![env(&theta).map_err(|e| fail(e, &curve))?.total()];
    let mut best = (version_costs[0], 0usize, theta.clone());
    let mut prev_mean: Option<f64> = None;
    let mut update = 0usize;
    loop {
        let batch = if update == 0 { cfg.first_update_after } else { cfg.trials_per_update };
        let mut rollouts = Vec::with_capacity(batch);
        for _ in 0..batch {
            let trial = curve.len();
            let eps = sample_noise(cfg.rng_seed, trial as u64, |k| cfg.std(k), theta.len());
            let params: Vec<f64> = theta.iter().zip(&eps).map(|(a, b)| a + b).collect();
            let ev = env(&params).map_err(|e| fail(e, &curve))?;
            curve.push(CurvePoint {
                trial,
                total_cost: ev.total(),
                c_imm_sum: ev.immediate_sum(),
                c_ter: ev.terminal_cost,
                update,
            });
            rollouts.push(Rollout::new(eps, ev.step_costs, ev.terminal_cost));
        }
        let mean = rollouts.iter().map(|r| r.total_cost).sum::<f64>() / batch as f64;
        let converged = prev_mean.is_some_and(|p| (mean - p).abs() < cfg.convergence_delta);
        if update == cfg.max_updates || converged {
            break;
        }
        prev_mean = Some(mean);
        theta = pi2_update(&rollouts, &theta, activations, n_basis, cfg.pi2_h, cfg.credit).map_err(|e| fail(e, &curve))?;
        update += 1;
        let cost = env(&theta).map_err(|e| fail(e, &curve))?.total();
        version_costs.push(cost);
        if cost < best.0 {
            best = (cost, update, theta.clone());
        }
    }
    Ok(LearnOutcome { theta: best.2, best_version: best.1, version_costs, curve, updates: update })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn flat_activations(steps: usize, n_basis: usize) -> Vec<Vec<f64>> {
        vec![vec![1.0; n_basis]; steps]
    }

    #[test]
    fn cost_examples() {
        assert_eq!(immediate_cost(&[0.0; 3], &[1.0; 3]).unwrap(), 0.0);
        assert_eq!(immediate_cost(&[1.0, -2.0, 3.0], &[1.0; 3]).unwrap(), 6.0);
        assert_eq!(terminal_cost(&[0.4, 0.5], &[0.4, 0.5], &[1.0; 2]).unwrap(), 0.0);
        assert_abs_diff_eq!(terminal_cost(&[0.1, -0.1], &[0.0, 0.0], &[1.0; 2]).unwrap(), 0.2, epsilon = 1e-15);
        assert!(matches!(immediate_cost(&[1.0], &[1.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&[0.0; 17]), 17.0);
        let a = [1.0, -30.0, 250.0];
        let naive: f64 = a.iter().map(|v: &f64| (-0.01 * v.abs()).exp()).sum();
        assert_eq!(score(&a), naive);
    }

    #[test]
    fn pi2_equal_rollouts_move_by_eps() {
        let eps = vec![0.3, -0.2, 0.1, 0.5];
        let r: Vec<Rollout> = (0..4).map(|_| Rollout::new(eps.clone(), vec![1.0; 6], 2.0)).collect();
        for credit in [Credit::Episode, Credit::CostToGo] {
            let th = pi2_update(&r, &[0.0; 4], &flat_activations(6, 2), 2, 10.0, credit).unwrap();
            for k in 0..4 {
                assert_abs_diff_eq!(th[k], eps[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pi2_sharp_temperature_selects_cheapest() {
        let r = vec![Rollout::new(vec![1.0, 2.0], vec![0.0; 3], 0.0), Rollout::new(vec![-5.0, 7.0], vec![100.0; 3], 50.0)];
        let th = pi2_update(&r, &[0.0, 0.0], &flat_activations(3, 2), 2, 1e4, Credit::CostToGo).unwrap();
        assert_abs_diff_eq!(th[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(th[1], 2.0, epsilon = 1e-12);
    }

    /// Literal transcription: weights per (t, i), then deltas, then averaging.
    fn naive_pi2(r: &[Rollout], theta: &[f64], act: &[Vec<f64>], nb: usize, h: f64) -> Vec<f64> {
        let steps = act.len();
        let mut delta_t = vec![vec![0.0; theta.len()]; steps];
        for t in 0..steps {
            let s: Vec<f64> = r.iter().map(|ro| ro.terminal_cost + ro.step_costs[t..].iter().sum::<f64>()).collect();
            let mn = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut p: Vec<f64> = s.iter().map(|v| (-h * (v - mn) / (mx - mn + 1e-12)).exp()).collect();
            let z: f64 = p.iter().sum();
            for v in &mut p {
                *v /= z;
            }
            for i in 0..r.len() {
                for k in 0..theta.len() {
                    delta_t[t][k] += p[i] * r[i].eps[k];
                }
            }
        }
        let mut out = theta.to_vec();
        for k in 0..theta.len() {
            let j = k % nb;
            let mut num = 0.0;
            let mut den = 0.0;
            for t in 0..steps {
                num += act[t][j] * delta_t[t][k];
                den += act[t][j];
            }
            out[k] += num / den;
        }
        out
    }

    #[test]
    fn pi2_matches_naive_loops() {
        let mut rng = trial_rng(4, 0);
        let nb = 3;
        let steps = 12;
        let r: Vec<Rollout> = (0..5)
            .map(|_| {
                Rollout::new(
                    (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    (0..steps).map(|_| rng.random_range(0.0..2.0)).collect(),
                    rng.random_range(0.0..10.0),
                )
            })
            .collect();
        let act: Vec<Vec<f64>> = (0..steps).map(|_| (0..nb).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = pi2_update(&r, &theta, &act, nb, 10.0, Credit::CostToGo).unwrap();
        let slow = naive_pi2(&r, &theta, &act, nb, 10.0);
        for k in 0..6 {
            assert_abs_diff_eq!(fast[k], slow[k], epsilon = 1e-9);
        }
        // episode credit is the same computation with every step cost folded into the terminal
        let folded: Vec<Rollout> = r
            .iter()
            .map(|ro| Rollout::new(ro.eps.clone(), vec![0.0; steps], ro.total_cost))
            .collect();
        let episode = pi2_update(&r, &theta, &act, nb, 10.0, Credit::Episode).unwrap();
        let slow_episode = naive_pi2(&folded, &theta, &act, nb, 10.0);
        for k in 0..6 {
            assert_abs_diff_eq!(episode[k], slow_episode[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn power_examples() {
        let act = flat_activations(4, 2);
        let theta = [0.5, -0.5];
        let dominant = vec![
            PowerSample { params: vec![1.5, 0.5], step_rewards: vec![1e6; 4] },
            PowerSample { params: vec![-3.0, 3.0], step_rewards: vec![1e-9; 4] },
        ];
        let th = power_update(&dominant, &theta, &act, 2, 10).unwrap();
        assert_abs_diff_eq!(th[0], 1.5, epsilon = 1e-6);
        assert_abs_diff_eq!(th[1], 0.5, epsilon = 1e-6);
        let equal = vec![
            PowerSample { params: vec![1.5, 0.5], step_rewards: vec![0.3; 4] },
            PowerSample { params: vec![-0.5, -1.5], step_rewards: vec![0.3; 4] },
        ];
        let th = power_update(&equal, &theta, &act, 2, 10).unwrap();
        assert_abs_diff_eq!(th[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(th[1], -0.5, epsilon = 1e-9);
    }

    fn naive_power(s: &[PowerSample], theta: &[f64], act: &[Vec<f64>], nb: usize, elite: usize) -> Vec<f64> {
        let mut ranked: Vec<(f64, usize)> = s.iter().enumerate().map(|(i, x)| (x.step_rewards.iter().sum(), i)).collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let best: Vec<usize> = ranked.iter().take(elite).map(|x| x.1).collect();
        let mut out = theta.to_vec();
        for k in 0..theta.len() {
            let mut num = 0.0;
            let mut den = 0.0;
            for t in 0..act.len() {
                let mut a = 0.0;
                let mut b = 0.0;
                for &i in &best {
                    let q: f64 = s[i].step_rewards[t..].iter().sum();
                    a += (s[i].params[k] - theta[k]) * q;
                    b += q;
                }
                num += act[t][k % nb] * a / (b + 1e-12);
                den += act[t][k % nb];
            }
            out[k] += num / den;
        }
        out
    }

    #[test]
    fn power_matches_naive_loops() {
        let mut rng = trial_rng(5, 0);
        let s: Vec<PowerSample> = (0..14)
            .map(|_| PowerSample {
                params: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                step_rewards: (0..9).map(|_| rng.random_range(0.0..1.0)).collect(),
            })
            .collect();
        let act: Vec<Vec<f64>> = (0..9).map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let theta = [0.1, 0.2, -0.3, 0.0];
        let fast = power_update(&s, &theta, &act, 2, 10).unwrap();
        let slow = naive_power(&s, &theta, &act, 2, 10);
        for k in 0..4 {
            assert_abs_diff_eq!(fast[k], slow[k], epsilon = 1e-9);
        }
    }

    fn quadratic_env(target: Vec<f64>) -> impl FnMut(&[f64]) -> Result<Evaluation> {
        move |p: &[f64]| {
            let d: f64 = p.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
            Ok(Evaluation { step_costs: vec![0.1; 5], terminal_cost: 100.0 * d })
        }
    }

    #[test]
    fn schedule_edges() {
        let act = flat_activations(5, 2);
        let cfg = LearnConfig { convergence_delta: f64::INFINITY, exploration_std: vec![0.3], ..LearnConfig::default() };
        let out = learn(quadratic_env(vec![1.0, -1.0]), &[0.0, 0.0], &act, 2, &cfg).unwrap();
        assert_eq!(out.updates, 1);
        assert_eq!(out.curve.len(), 15);
        let cfg = LearnConfig { convergence_delta: -1.0, exploration_std: vec![0.3], ..LearnConfig::default() };
        let out = learn(quadratic_env(vec![1.0, -1.0]), &[0.0, 0.0], &act, 2, &cfg).unwrap();
        assert_eq!(out.updates, 5);
        assert_eq!(out.curve.len(), 35);
        assert_eq!(out.version_costs.len(), 6);
        assert!(out.curve.iter().enumerate().all(|(i, c)| c.trial == i));
        assert!(out.version_costs[out.best_version] <= out.version_costs[0]);
    }

    #[test]
    fn learning_is_deterministic() {
        let act = flat_activations(5, 2);
        let cfg = LearnConfig { convergence_delta: -1.0, exploration_std: vec![0.3], rng_seed: 77, ..LearnConfig::default() };
        let a = learn(quadratic_env(vec![1.0, -1.0]), &[0.0, 0.0], &act, 2, &cfg).unwrap();
        let b = learn(quadratic_env(vec![1.0, -1.0]), &[0.0, 0.0], &act, 2, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.version_costs[a.best_version] < a.version_costs[0]);
    }

    #[test]
    fn env_failure_keeps_partial_curve() {
        let act = flat_activations(5, 2);
        let mut calls = 0;
        let env = |_: &[f64]| {
            calls += 1;
            if calls > 4 {
                Err(Error::Divergence { step: 3 })
            } else {
                Ok(Evaluation { step_costs: vec![1.0; 5], terminal_cost: 0.0 })
            }
        };
        let err = learn(env, &[0.0, 0.0], &act, 2, &LearnConfig::default()).unwrap_err();
        assert_eq!(err.partial_curve.len(), 3);
        assert!(matches!(err.source, Error::Divergence { step: 3 }));
    }

    proptest! {
        #[test]
        fn pi2_probabilities_form_a_distribution(costs in prop::collection::vec(-1e3f64..1e3, 2..20), h in 0.1f64..50.0) {
            let p = pi2_probabilities(&costs, h);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn pi2_invariant_to_affine_cost_shift(seed in 0u64..1000, shift in -100.0f64..100.0, scale in 0.1f64..10.0) {
            let mut rng = trial_rng(seed, 0);
            let r: Vec<Rollout> = (0..5).map(|_| Rollout::new(
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                vec![0.0; 3],
                rng.random_range(0.0..10.0),
            )).collect();
            let moved: Vec<Rollout> = r.iter().map(|x| Rollout::new(x.eps.clone(), vec![0.0; 3], scale * x.terminal_cost + shift)).collect();
            let act = flat_activations(3, 2);
            let a = pi2_update(&r, &[0.0; 4], &act, 2, 10.0, Credit::Episode).unwrap();
            let b = pi2_update(&moved, &[0.0; 4], &act, 2, 10.0, Credit::Episode).unwrap();
            for k in 0..4 {
                prop_assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn power_invariant_to_reward_scale(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let mut rng = trial_rng(seed, 1);
            let s: Vec<PowerSample> = (0..6).map(|_| PowerSample {
                params: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
                step_rewards: (0..4).map(|_| rng.random_range(0.1..1.0)).collect(),
            }).collect();
            let scaled: Vec<PowerSample> = s.iter().map(|x| PowerSample {
                params: x.params.clone(),
                step_rewards: x.step_rewards.iter().map(|r| r * scale).collect(),
            }).collect();
            let act = flat_activations(4, 2);
            let a = power_update(&s, &[0.0; 2], &act, 2, 10).unwrap();
            let b = power_update(&scaled, &[0.0; 2], &act, 2, 10).unwrap();
            for k in 0..2 {
                prop_assert!((a[k] - b[k]).abs() < 1e-6);
            }
        }

        #[test]
        fn curve_length_equals_trials(delta in prop_oneof![Just(-1.0), Just(3.0), Just(f64::INFINITY)], max_updates in 0usize..6) {
            let act = flat_activations(5, 2);
            let cfg = LearnConfig { convergence_delta: delta, max_updates, exploration_std: vec![0.3], ..LearnConfig::default() };
            let out = learn(quadratic_env(vec![1.0, 2.0]), &[0.0, 0.0], &act, 2, &cfg).unwrap();
            prop_assert_eq!(out.curve.len(), 10 + 5 * out.updates);
        }
    }
}
