//! Discrete dynamic movement primitives.
//!
//! Two transformation systems share one canonical phase `τẋ = −α_x x`:
//!
//! * `Bio`: `τż = α_z(β_z(g − y) − z) − α_zβ_z(g − y0)x + α_zβ_z f(x)`
//! * `Original`: `τż = α_z(β_z(g − y) − z) + (g − y0) f(x)`
//!
//! with `τẏ = z` and `f(x) = x Σψ_i w_i / Σψ_i`. Everything is integrated with
//! explicit Euler at `dt`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{PoseVec7, Quat};

/// Floor added to Σψ before normalizing the forcing term.
pub const PSI_FLOOR: f64 = 1e-12;
/// Ridge term in the weight regression.
pub const FIT_RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Variant {
    Original,
    #[default]
    Bio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpConfig {
    pub alpha_z: f64,
    pub beta_z: f64,
    pub alpha_x: f64,
    pub tau: f64,
    pub n_basis: usize,
    pub variant: Variant,
    pub dt: f64,
}

impl Default for DmpConfig {
    fn default() -> Self {
        Self { alpha_z: 25.0, beta_z: 25.0 / 4.0, alpha_x: 25.0 / 3.0, tau: 1.0, n_basis: 10, variant: Variant::Bio, dt: 0.001 }
    }
}

impl DmpConfig {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Rates derived from `alpha_z` in the usual critically damped ratio.
    pub fn with_alpha_z(mut self, alpha_z: f64) -> Self {
        self.alpha_z = alpha_z;
        self.beta_z = alpha_z / 4.0;
        self.alpha_x = alpha_z / 3.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_z", self.alpha_z), ("beta_z", self.beta_z), ("alpha_x", self.alpha_x), ("tau", self.tau), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("dmp {name} must be positive, got {v}")));
            }
        }
        if self.n_basis < 2 {
            return Err(Error::InvalidConfig(format!("n_basis must be >= 2, got {}", self.n_basis)));
        }
        Ok(())
    }

    /// ⌈duration/dt⌉ + 1.
    pub fn n_samples(&self, duration: f64) -> usize {
        ((duration / self.dt) - 1e-9).ceil().max(0.0) as usize + 1
    }
}

/// Gaussian basis functions in phase coordinates, centers equally spaced in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl BasisSet {
    pub fn new(cfg: &DmpConfig) -> Self {
        let n = cfg.n_basis;
        let centers: Vec<f64> =
            (0..n).map(|i| (-cfg.alpha_x * (i as f64 / (n - 1) as f64)).exp()).collect();
        let mut widths = vec![0.0; n];
        for i in 1..n {
            widths[i] = 0.5 * (centers[i] - centers[i - 1]).abs();
        }
        widths[0] = widths[1];
        Self { centers, widths }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn activations(&self, x: f64) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(c, s)| (-(x - c).powi(2) / (2.0 * s * s)).exp())
            .collect()
    }

    /// x·Σψw / (Σψ + floor).
    pub fn forcing(&self, w: &[f64], x: f64) -> f64 {
        let psi = self.activations(x);
        let num: f64 = psi.iter().zip(w).map(|(p, w)| p * w).sum();
        let den: f64 = psi.iter().sum::<f64>() + PSI_FLOOR;
        x * num / den
    }
}

pub fn forcing(basis: &BasisSet, w: &[f64], x: f64) -> f64 {
    basis.forcing(w, x)
}

/// Phase values from x = 1, one per integration sample.
pub fn canonical_rollout(cfg: &DmpConfig, duration: f64) -> Vec<f64> {
    let n = cfg.n_samples(duration);
    let mut xs = Vec::with_capacity(n);
    let mut x = 1.0;
    for _ in 0..n {
        xs.push(x);
        x += cfg.dt * (-cfg.alpha_x * x / cfg.tau);
    }
    xs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpWeights {
    pub w: Vec<f64>,
    pub y0: f64,
    pub g: f64,
}

impl DmpWeights {
    pub fn zeros(n_basis: usize, y0: f64, g: f64) -> Self {
        Self { w: vec![0.0; n_basis], y0, g }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpTrajectory {
    pub dt: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub yd: Vec<f64>,
    pub ydd: Vec<f64>,
}

impl DmpTrajectory {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Precomputed phase and forcing profile shared by the DOFs of one movement.
#[derive(Debug, Clone)]
pub struct Phase {
    pub x: Vec<f64>,
    /// Normalized activations ψ_i/Σψ·x per sample.
    pub basis_x: Vec<Vec<f64>>,
    /// Raw activations ψ_i per sample.
    pub psi: Vec<Vec<f64>>,
}

impl Phase {
    pub fn new(cfg: &DmpConfig, duration: f64) -> Self {
        let basis = BasisSet::new(cfg);
        let x = canonical_rollout(cfg, duration);
        let psi: Vec<Vec<f64>> = x.iter().map(|&xv| basis.activations(xv)).collect();
        let basis_x = psi
            .iter()
            .zip(&x)
            .map(|(p, &xv)| {
                let den = p.iter().sum::<f64>() + PSI_FLOOR;
                p.iter().map(|v| v / den * xv).collect()
            })
            .collect();
        Self { x, basis_x, psi }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn forcing(&self, k: usize, w: &[f64]) -> f64 {
        self.basis_x[k].iter().zip(w).map(|(b, w)| b * w).sum()
    }
}

/// Integrate one DOF against a precomputed phase.
pub fn integrate_with_phase(cfg: &DmpConfig, weights: &DmpWeights, phase: &Phase) -> Result<DmpTrajectory> {
    if weights.w.len() != cfg.n_basis {
        return Err(Error::DimensionMismatch { expected: cfg.n_basis, got: weights.w.len() });
    }
    let n = phase.len();
    let (az, bz, tau, dt) = (cfg.alpha_z, cfg.beta_z, cfg.tau, cfg.dt);
    let (y0, g) = (weights.y0, weights.g);
    let mut out = DmpTrajectory {
        dt,
        x: phase.x.clone(),
        y: Vec::with_capacity(n),
        yd: Vec::with_capacity(n),
        ydd: Vec::with_capacity(n),
    };
    let mut y = y0;
    let mut z = 0.0;
    for k in 0..n {
        let x = phase.x[k];
        let f = phase.forcing(k, &weights.w);
        let zd = match cfg.variant {
            Variant::Bio => (az * (bz * (g - y) - z) - az * bz * (g - y0) * x + az * bz * f) / tau,
            Variant::Original => (az * (bz * (g - y) - z) + (g - y0) * f) / tau,
        };
        if !(y.is_finite() && z.is_finite() && zd.is_finite()) {
            return Err(Error::Divergence { step: k });
        }
        out.y.push(y);
        out.yd.push(z / tau);
        out.ydd.push(zd / tau);
        y += dt * z / tau;
        z += dt * zd;
    }
    Ok(out)
}

pub fn integrate(cfg: &DmpConfig, weights: &DmpWeights, duration: f64) -> Result<DmpTrajectory> {
    cfg.validate()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidConfig(format!("duration must be positive, got {duration}")));
    }
    integrate_with_phase(cfg, weights, &Phase::new(cfg, duration))
}

/// How forcing weights are regressed from a demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FitMethod {
    /// Joint least squares on the normalized features x·ψ_i/Σψ, i.e. the exact
    /// representation used by the forcing term.
    #[default]
    LeastSquares,
    /// Independent per-basis regression w_i = Σψ_i x f / Σψ_i x².
    Lwr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub weights: DmpWeights,
    /// Basis indices whose regression denominator was degenerate, or all of them when
    /// the original variant's goal offset vanishes; those weights are zero.
    pub degenerate: Vec<usize>,
}

/// Fit forcing weights to a trajectory sampled at `sample_dt`; start and goal are its endpoints.
pub fn fit_from_demo(traj: &[f64], sample_dt: f64, cfg: &DmpConfig) -> Result<FitResult> {
    fit_from_demo_with(traj, sample_dt, cfg, FitMethod::default())
}

pub fn fit_from_demo_with(traj: &[f64], sample_dt: f64, cfg: &DmpConfig, method: FitMethod) -> Result<FitResult> {
    cfg.validate()?;
    if traj.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: traj.len() });
    }
    if !(sample_dt > 0.0) {
        return Err(Error::InvalidConfig(format!("sample dt must be positive, got {sample_dt}")));
    }
    let n = traj.len();
    let (y0, g) = (traj[0], traj[n - 1]);
    let (az, bz, tau) = (cfg.alpha_z, cfg.beta_z, cfg.tau);

    let mut yd = vec![0.0; n];
    let mut ydd = vec![0.0; n];
    for k in 1..n - 1 {
        yd[k] = (traj[k + 1] - traj[k - 1]) / (2.0 * sample_dt);
        ydd[k] = (traj[k + 1] - 2.0 * traj[k] + traj[k - 1]) / (sample_dt * sample_dt);
    }
    yd[0] = (traj[1] - traj[0]) / sample_dt;
    yd[n - 1] = (traj[n - 1] - traj[n - 2]) / sample_dt;
    ydd[0] = ydd[1];
    ydd[n - 1] = ydd[n - 2];

    let duration = (n - 1) as f64 * sample_dt;
    let xs_fine = canonical_rollout(cfg, duration);
    let x_at = |k: usize| {
        let idx = ((k as f64 * sample_dt) / cfg.dt).round() as usize;
        xs_fine[idx.min(xs_fine.len() - 1)]
    };

    let basis = BasisSet::new(cfg);
    let mut degenerate = Vec::new();
    if cfg.variant == Variant::Original && (g - y0).abs() < 1e-12 {
        degenerate.extend(0..cfg.n_basis);
        return Ok(FitResult { weights: DmpWeights::zeros(cfg.n_basis, y0, g), degenerate });
    }
    let mut targets = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    for k in 0..n {
        let x = x_at(k);
        xs.push(x);
        targets.push(match cfg.variant {
            Variant::Bio => (tau * tau * ydd[k] + az * tau * yd[k]) / (az * bz) - (g - traj[k]) + (g - y0) * x,
            Variant::Original => (tau * tau * ydd[k] - az * bz * (g - traj[k]) + az * tau * yd[k]) / (g - y0),
        });
    }
    let w = match method {
        FitMethod::Lwr => {
            let mut num = vec![0.0; cfg.n_basis];
            let mut den = vec![0.0; cfg.n_basis];
            for (x, target) in xs.iter().zip(&targets) {
                for (i, psi) in basis.activations(*x).into_iter().enumerate() {
                    num[i] += psi * x * target;
                    den[i] += psi * x * x;
                }
            }
            num.iter()
                .zip(&den)
                .enumerate()
                .map(|(i, (a, b))| {
                    if *b < 1e-12 {
                        degenerate.push(i);
                        0.0
                    } else {
                        a / (b + FIT_RIDGE)
                    }
                })
                .collect()
        }
        FitMethod::LeastSquares => least_squares(&basis, &xs, &targets, &mut degenerate),
    };
    Ok(FitResult { weights: DmpWeights { w, y0, g }, degenerate })
}

fn least_squares(basis: &BasisSet, xs: &[f64], targets: &[f64], degenerate: &mut Vec<usize>) -> Vec<f64> {
    let nb = basis.len();
    let mut ata = DMatrix::<f64>::zeros(nb, nb);
    let mut atb = DVector::<f64>::zeros(nb);
    for (x, target) in xs.iter().zip(targets) {
        let psi = basis.activations(*x);
        let den = psi.iter().sum::<f64>() + PSI_FLOOR;
        let row: Vec<f64> = psi.iter().map(|p| p / den * x).collect();
        for i in 0..nb {
            atb[i] += row[i] * target;
            for j in 0..nb {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    let active: Vec<usize> = (0..nb).filter(|&i| ata[(i, i)] >= 1e-12).collect();
    degenerate.extend((0..nb).filter(|i| !active.contains(i)));
    let mut w = vec![0.0; nb];
    if active.is_empty() {
        return w;
    }
    let m = active.len();
    let sub = DMatrix::from_fn(m, m, |a, b| ata[(active[a], active[b])] + if a == b { FIT_RIDGE } else { 0.0 });
    let rhs = DVector::from_fn(m, |a, _| atb[active[a]]);
    let sol = sub.clone().cholesky().map(|c| c.solve(&rhs)).unwrap_or_else(|| {
        sub.svd(true, true).solve(&rhs, 1e-14).unwrap_or_else(|_| DVector::zeros(m))
    });
    for (a, &i) in active.iter().enumerate() {
        w[i] = sol[a];
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrajectory {
    /// Integrated DOF values before quaternion renormalization.
    pub raw: Vec<[f64; 7]>,
    /// Accelerations per DOF.
    pub accel: Vec<[f64; 7]>,
    /// Output poses with unit quaternions.
    pub poses: Vec<PoseVec7>,
}

/// Seven DOFs on one phase; starts and goals taken from `y0` and `g`.
pub fn pose_dmp_rollout(
    cfg: &DmpConfig,
    weights: &[Vec<f64>],
    y0: &PoseVec7,
    g: &PoseVec7,
    duration: f64,
) -> Result<PoseTrajectory> {
    cfg.validate()?;
    if weights.len() != 7 {
        return Err(Error::DimensionMismatch { expected: 7, got: weights.len() });
    }
    let phase = Phase::new(cfg, duration);
    let dofs = (0..7)
        .map(|d| integrate_with_phase(cfg, &DmpWeights { w: weights[d].clone(), y0: y0.0[d], g: g.0[d] }, &phase))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_pose(&dofs))
}

pub(crate) fn assemble_pose(dofs: &[DmpTrajectory]) -> PoseTrajectory {
    let n = dofs[0].len();
    let mut out = PoseTrajectory { raw: Vec::with_capacity(n), accel: Vec::with_capacity(n), poses: Vec::with_capacity(n) };
    for k in 0..n {
        let raw: [f64; 7] = std::array::from_fn(|d| dofs[d].y[k]);
        out.accel.push(std::array::from_fn(|d| dofs[d].ydd[k]));
        let q = Quat::new(raw[3], raw[4], raw[5], raw[6]);
        let n = q.norm();
        let q = if n > 1e-12 { q.normalized() } else { Quat::IDENTITY };
        out.poses.push(PoseVec7([raw[0], raw[1], raw[2], q.x, q.y, q.z, q.w]));
        out.raw.push(raw);
    }
    out
}
