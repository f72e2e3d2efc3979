//! Training losses over diagonal Gaussians, latent vectors and motion features.
//!
//! Distributions are parameterized by means and *standard deviations*. Every
//! loss has an analytic gradient so trainers and gradient checks can share one
//! reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::FeatureFrame;

pub const DEFAULT_LATENT_DIM: usize = 256;
/// Transition point of the smooth-L1 loss.
pub const SMOOTH_L1_BETA: f64 = 1.0;
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("sigma[{0}] must be positive and finite")]
    InvalidSigma(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

fn check_dim(expected: usize, found: usize) -> Result<(), LossError> {
    if expected == found {
        Ok(())
    } else {
        Err(LossError::DimMismatch { expected, found })
    }
}

/// Diagonal Gaussian `N(mu, diag(sigma^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl GaussianParams {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self, LossError> {
        check_dim(mu.len(), sigma.len())?;
        if let Some(i) = mu.iter().position(|v| !v.is_finite()) {
            return Err(LossError::NonFinite(i));
        }
        if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(LossError::InvalidSigma(i));
        }
        Ok(GaussianParams { mu, sigma })
    }

    /// Like [`GaussianParams::new`] but clamps sigma to at least [`SIGMA_FLOOR`].
    pub fn floored(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self, LossError> {
        let sigma = sigma
            .into_iter()
            .map(|s| if s.is_nan() { s } else { s.max(SIGMA_FLOOR) })
            .collect();
        Self::new(mu, sigma)
    }

    pub fn standard(dim: usize) -> Self {
        GaussianParams {
            mu: vec![0.0; dim],
            sigma: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

/// `KL(p || q)` summed over dimensions.
pub fn kl_diag(p: &GaussianParams, q: &GaussianParams) -> Result<f64, LossError> {
    check_dim(p.dim(), q.dim())?;
    let mut total = 0.0;
    for i in 0..p.dim() {
        let (sp, sq) = (p.sigma[i], q.sigma[i]);
        let d = p.mu[i] - q.mu[i];
        total += (sq / sp).ln() + (sp * sp + d * d) / (2.0 * sq * sq) - 0.5;
    }
    Ok(total)
}

pub fn kl_to_standard(p: &GaussianParams) -> f64 {
    kl_diag(p, &GaussianParams::standard(p.dim())).expect("same dimension")
}

/// Mean smooth-L1 (Huber, beta = 1) between two equally sized vectors.
pub fn smooth_l1(x: &[f64], y: &[f64]) -> Result<f64, LossError> {
    check_dim(x.len(), y.len())?;
    if x.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = x.iter().zip(y).map(|(a, b)| huber(a - b)).sum();
    Ok(sum / x.len() as f64)
}

fn huber(d: f64) -> f64 {
    let a = d.abs();
    if a < SMOOTH_L1_BETA {
        0.5 * d * d / SMOOTH_L1_BETA
    } else {
        a - 0.5 * SMOOTH_L1_BETA
    }
}

fn huber_grad(d: f64) -> f64 {
    if d.abs() < SMOOTH_L1_BETA {
        d / SMOOTH_L1_BETA
    } else {
        d.signum()
    }
}

/// `mu + sigma * noise`.
pub fn reparameterize(p: &GaussianParams, noise: &[f64]) -> Result<Vec<f64>, LossError> {
    check_dim(p.dim(), noise.len())?;
    Ok((0..p.dim()).map(|i| p.mu[i] + p.sigma[i] * noise[i]).collect())
}

pub fn flatten_frames(frames: &[FeatureFrame]) -> Vec<f64> {
    frames.iter().flat_map(|f| f.0).collect()
}

/// Arguments of [`total_loss`]. Feature sequences are flattened frame-major.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub text: &'a GaussianParams,
    pub motion: &'a GaussianParams,
    pub z_t: &'a [f64],
    pub z_m: &'a [f64],
    pub gt: &'a [f64],
    pub rec_t: &'a [f64],
    pub rec_m: &'a [f64],
}

impl LossInputs<'_> {
    fn check(&self) -> Result<(), LossError> {
        let d = self.text.dim();
        check_dim(d, self.motion.dim())?;
        check_dim(d, self.z_t.len())?;
        check_dim(d, self.z_m.len())?;
        check_dim(self.gt.len(), self.rec_t.len())?;
        check_dim(self.gt.len(), self.rec_m.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub kl_t: f64,
    pub kl_m: f64,
    pub kl_mt: f64,
    pub kl_tm: f64,
    pub recon: f64,
    pub latent: f64,
    pub total: f64,
}

/// Unweighted sum of the two prior KLs, the symmetric text/motion KL pair,
/// the reconstruction loss of both decodings and the latent agreement loss.
pub fn total_loss(inputs: &LossInputs<'_>) -> Result<LossBreakdown, LossError> {
    inputs.check()?;
    let kl_t = kl_to_standard(inputs.text);
    let kl_m = kl_to_standard(inputs.motion);
    let kl_mt = kl_diag(inputs.text, inputs.motion)?;
    let kl_tm = kl_diag(inputs.motion, inputs.text)?;
    let recon = smooth_l1(inputs.gt, inputs.rec_t)? + smooth_l1(inputs.gt, inputs.rec_m)?;
    let latent = smooth_l1(inputs.z_t, inputs.z_m)?;
    Ok(LossBreakdown {
        kl_t,
        kl_m,
        kl_mt,
        kl_tm,
        recon,
        latent,
        total: kl_t + kl_m + kl_mt + kl_tm + recon + latent,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrad {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianGrad {
    fn zeros(dim: usize) -> Self {
        GaussianGrad {
            mu: vec![0.0; dim],
            sigma: vec![0.0; dim],
        }
    }

    fn add(&mut self, other: &GaussianGrad) {
        add_into(&mut self.mu, &other.mu);
        add_into(&mut self.sigma, &other.sigma);
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Gradient of `kl_diag(p, q)` with respect to both arguments.
pub fn kl_diag_grad(
    p: &GaussianParams,
    q: &GaussianParams,
) -> Result<(GaussianGrad, GaussianGrad), LossError> {
    check_dim(p.dim(), q.dim())?;
    let n = p.dim();
    let (mut gp, mut gq) = (GaussianGrad::zeros(n), GaussianGrad::zeros(n));
    for i in 0..n {
        let (sp, sq) = (p.sigma[i], q.sigma[i]);
        let d = p.mu[i] - q.mu[i];
        let vq = sq * sq;
        gp.mu[i] = d / vq;
        gq.mu[i] = -d / vq;
        gp.sigma[i] = -1.0 / sp + sp / vq;
        gq.sigma[i] = 1.0 / sq - (sp * sp + d * d) / (vq * sq);
    }
    Ok((gp, gq))
}

/// Gradient of `smooth_l1(x, y)` with respect to `x` and `y`.
pub fn smooth_l1_grad(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LossError> {
    check_dim(x.len(), y.len())?;
    let n = x.len().max(1) as f64;
    let gx: Vec<f64> = x.iter().zip(y).map(|(a, b)| huber_grad(a - b) / n).collect();
    let gy = gx.iter().map(|g| -g).collect();
    Ok((gx, gy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLossGrad {
    pub text: GaussianGrad,
    pub motion: GaussianGrad,
    pub z_t: Vec<f64>,
    pub z_m: Vec<f64>,
    pub gt: Vec<f64>,
    pub rec_t: Vec<f64>,
    pub rec_m: Vec<f64>,
}

pub fn total_loss_grad(inputs: &LossInputs<'_>) -> Result<TotalLossGrad, LossError> {
    inputs.check()?;
    let d = inputs.text.dim();
    let standard = GaussianParams::standard(d);
    let mut text = GaussianGrad::zeros(d);
    let mut motion = GaussianGrad::zeros(d);

    text.add(&kl_diag_grad(inputs.text, &standard)?.0);
    motion.add(&kl_diag_grad(inputs.motion, &standard)?.0);
    let (g_t, g_m) = kl_diag_grad(inputs.text, inputs.motion)?;
    text.add(&g_t);
    motion.add(&g_m);
    let (g_m, g_t) = kl_diag_grad(inputs.motion, inputs.text)?;
    text.add(&g_t);
    motion.add(&g_m);

    let (mut gt, rec_t) = smooth_l1_grad(inputs.gt, inputs.rec_t)?;
    let (gt2, rec_m) = smooth_l1_grad(inputs.gt, inputs.rec_m)?;
    add_into(&mut gt, &gt2);
    let (z_t, z_m) = smooth_l1_grad(inputs.z_t, inputs.z_m)?;

    Ok(TotalLossGrad {
        text,
        motion,
        z_t,
        z_m,
        gt,
        rec_t,
        rec_m,
    })
}
