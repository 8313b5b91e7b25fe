//! Reproducible benchmarks: PI² against PoWER on a 1-D reaching task, and the
//! two shortcomings of the original DMP formulation as measurable properties.

use serde::{Deserialize, Serialize};

use crate::dmp::{fit_from_demo, integrate_with_phase, DmpConfig, DmpWeights, Phase, Variant};
use crate::error::Result;
use crate::rl::{pi2_update, power_update, sample_noise, score_per_sample, Credit, PowerSample, Rollout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Pi2,
    Power,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Pi2 => "pi2",
            Method::Power => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachingBench {
    pub dmp: DmpConfig,
    pub y0: f64,
    pub g: f64,
    pub rollouts_per_update: usize,
    pub total_rollouts: usize,
    pub exploration_std: f64,
    pub pi2_h: f64,
    pub power_elite: usize,
}

impl Default for ReachingBench {
    fn default() -> Self {
        Self {
            dmp: DmpConfig::default().with_variant(Variant::Original),
            y0: 0.0,
            g: 1.0,
            rollouts_per_update: 5,
            total_rollouts: 505,
            exploration_std: 8.0,
            pi2_h: 10.0,
            power_elite: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub update: usize,
    pub score: f64,
    pub method: Method,
    pub seed: u64,
}

impl ReachingBench {
    fn accel(&self, phase: &Phase, w: &[f64]) -> Result<Vec<f64>> {
        let weights = DmpWeights { w: w.to_vec(), y0: self.y0, g: self.g };
        Ok(integrate_with_phase(&self.dmp, &weights, phase)?.ydd)
    }

    pub fn phase(&self) -> Phase {
        Phase::new(&self.dmp, self.dmp.tau)
    }

    /// Per-sample score of the zero-weight policy.
    pub fn initial_score(&self) -> Result<f64> {
        let phase = self.phase();
        Ok(score_per_sample(&self.accel(&phase, &vec![0.0; self.dmp.n_basis])?))
    }

    /// Per-sample score of the noise-free policy after every update, initial policy first.
    pub fn run(&self, method: Method, seed: u64) -> Result<Vec<ScoreRow>> {
        let phase = self.phase();
        let nb = self.dmp.n_basis;
        let n = phase.len() as f64;
        let mut theta = vec![0.0; nb];
        let mut rows = vec![ScoreRow { update: 0, score: score_per_sample(&self.accel(&phase, &theta)?), method, seed }];
        let mut history: Vec<PowerSample> = Vec::new();
        let mut used = 0usize;
        while used + self.rollouts_per_update <= self.total_rollouts {
            let mut batch = Vec::with_capacity(self.rollouts_per_update);
            for _ in 0..self.rollouts_per_update {
                let eps = sample_noise(seed, used as u64, |_| self.exploration_std, nb);
                used += 1;
                let params: Vec<f64> = theta.iter().zip(&eps).map(|(a, b)| a + b).collect();
                let acc = self.accel(&phase, &params)?;
                batch.push((eps, params, acc));
            }
            theta = match method {
                Method::Pi2 => {
                    let rollouts: Vec<Rollout> = batch
                        .into_iter()
                        .map(|(eps, _, acc)| {
                            let q = acc.iter().map(|a| (1.0 - (-0.01 * a.abs()).exp()) / n).collect();
                            Rollout::new(eps, q, 0.0)
                        })
                        .collect();
                    pi2_update(&rollouts, &theta, &phase.psi, nb, self.pi2_h, Credit::Episode)?
                }
                Method::Power => {
                    history.extend(batch.into_iter().map(|(_, params, acc)| PowerSample {
                        params,
                        step_rewards: acc.iter().map(|a| (-0.01 * a.abs()).exp() / n).collect(),
                    }));
                    let next = power_update(&history, &theta, &phase.psi, nb, self.power_elite)?;
                    // keep only the importance-sampling memory
                    history.sort_by(|a, b| b.reward_to_go()[0].total_cmp(&a.reward_to_go()[0]));
                    history.truncate(self.power_elite);
                    next
                }
            };
            rows.push(ScoreRow { update: rows.len(), score: score_per_sample(&self.accel(&phase, &theta)?), method, seed });
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRow {
    pub variant: Variant,
    pub property: String,
    pub value: f64,
    /// True when the variant is free of the shortcoming.
    pub pass: bool,
}

/// Demo used for the shortcoming checks: net displacement `g` with a large excursion on the way.
fn excursion_demo(g: f64, excursion: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let u = k as f64 / (n - 1) as f64;
            let s = 10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5);
            g * s + excursion * 64.0 * u.powi(3) * (1.0 - u).powi(3)
        })
        .collect()
}

fn peak_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// Peak-acceleration ratio after tripling the goal offset of a policy fitted at g − y0 = 0.01.
pub fn blowup_ratio(variant: Variant) -> Result<f64> {
    let cfg = DmpConfig::default().with_variant(variant);
    let demo = excursion_demo(0.01, 0.1, 1001);
    let fit = fit_from_demo(&demo, cfg.dt, &cfg)?.weights;
    let phase = Phase::new(&cfg, cfg.tau);
    let base = integrate_with_phase(&cfg, &fit, &phase)?;
    let moved = integrate_with_phase(&cfg, &DmpWeights { g: 0.03, ..fit.clone() }, &phase)?;
    Ok(peak_abs(&moved.ydd) / peak_abs(&base.ydd))
}

/// Largest |dev(g) + dev(g')| relative to max |dev(g)|, where dev is the deviation from the
/// zero-weight trajectory and g' mirrors g across the start.
pub fn inversion_residual(variant: Variant) -> Result<f64> {
    let cfg = DmpConfig::default().with_variant(variant);
    let demo = excursion_demo(0.2, 0.1, 1001);
    let fit = fit_from_demo(&demo, cfg.dt, &cfg)?.weights;
    let phase = Phase::new(&cfg, cfg.tau);
    let run = |w: &DmpWeights| integrate_with_phase(&cfg, w, &phase).map(|t| t.y);
    let flipped = DmpWeights { g: 2.0 * fit.y0 - fit.g, ..fit.clone() };
    let dev = |w: &DmpWeights| -> Result<Vec<f64>> {
        let with = run(w)?;
        let spring = run(&DmpWeights::zeros(cfg.n_basis, w.y0, w.g))?;
        Ok(with.iter().zip(&spring).map(|(a, b)| a - b).collect())
    };
    let a = dev(&fit)?;
    let b = dev(&flipped)?;
    let scale = peak_abs(&a);
    Ok(a.iter().zip(&b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max) / scale)
}

pub const BLOWUP_RATIO_TOL: f64 = 0.05;
pub const BIO_RATIO_CHANGE_MAX: f64 = 0.25;
pub const NEGATION_TOL: f64 = 1e-9;

/// One row per (variant, property); `pass` means the variant avoids the shortcoming.
pub fn dmp_properties() -> Result<Vec<PropertyRow>> {
    let mut rows = Vec::new();
    for variant in [Variant::Original, Variant::Bio] {
        let ratio = blowup_ratio(variant)?;
        rows.push(PropertyRow {
            variant,
            property: "accel_ratio_after_goal_x3".into(),
            value: ratio,
            pass: (ratio - 1.0).abs() < BIO_RATIO_CHANGE_MAX,
        });
        let residual = inversion_residual(variant)?;
        rows.push(PropertyRow {
            variant,
            property: "mirror_goal_negation_residual".into(),
            value: residual,
            pass: residual > NEGATION_TOL,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn original_variant_blows_up_by_goal_ratio() {
        let r = blowup_ratio(Variant::Original).unwrap();
        assert!((r - 3.0).abs() < 3.0 * BLOWUP_RATIO_TOL, "ratio {r}");
        let b = blowup_ratio(Variant::Bio).unwrap();
        assert!((b - 1.0).abs() < BIO_RATIO_CHANGE_MAX, "bio ratio {b}");
    }

    #[test]
    fn original_variant_mirrors_under_goal_reflection() {
        assert!(inversion_residual(Variant::Original).unwrap() < NEGATION_TOL);
        assert!(inversion_residual(Variant::Bio).unwrap() > 1e-3);
    }

    #[test]
    fn property_flags() {
        let rows = dmp_properties().unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!(r.pass, r.variant == Variant::Bio, "{r:?}");
        }
    }

    #[test]
    fn initial_reaching_score() {
        let s = ReachingBench::default().initial_score().unwrap();
        assert!((s - 0.9234).abs() < 0.02, "initial {s}");
    }

    #[test]
    fn short_run_is_deterministic_and_improves() {
        let bench = ReachingBench { total_rollouts: 50, ..ReachingBench::default() };
        for m in [Method::Pi2, Method::Power] {
            let a = bench.run(m, 3).unwrap();
            assert_eq!(a, bench.run(m, 3).unwrap());
            assert_eq!(a.len(), 11);
            assert!(a.last().unwrap().score > a[0].score);
        }
    }
}
