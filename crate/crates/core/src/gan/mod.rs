//! Sample-average GAN objective with a linear-logistic discriminator and a
//! two-layer ReLU generator:
//!
//! `f̂_N(x, y) = (1/N) Σⱼ [log D(y, ξ₁ʲ) + log(1 − D(y, G(x, ξ₂ʲ)))]`,
//! `D(y, ξ) = 1/(1 + exp(yᵀξ))`, `G(x, ξ) = W₂(W₁ξ + b₁)₊ + b₂`.

mod experiment;
mod io;
mod solver;
#[cfg(test)]
mod tests;

pub use experiment::{convergence_experiment, write_convergence_csv, ConvergenceConfig, ConvergenceRow};
pub use io::{read_instance, write_instance};
pub use solver::{first_order_residual, solve_gda, GdaConfig, GdaOutcome};

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::certify::{verify, CertifyConfig, StationarityReport, VerifyOptions};
use crate::error::{check_dim, Error, Result};
use crate::geometry::PolyhedralSet;
use crate::problem::{MinMaxProblem, Point, Smoothness};
use crate::seeds::derive_seed;
use crate::sum::pairwise_reduce;

/// Hidden-row norm below which a generator is considered degenerate.
pub const DEGENERATE_ROW_TOL: f64 = 1e-12;
const KINK_RETRIES: usize = 100;
const HESSIAN_STEP: f64 = 1e-4;

/// Network dimensions: hidden width `s`, data dimension `s1`, latent dimension `s2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanShape {
    pub s: usize,
    pub s1: usize,
    pub s2: usize,
}

/// Generator parameters; matrices are column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    /// `s × s2`.
    pub w1: Vec<f64>,
    /// `s1 × s`.
    pub w2: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
}

impl GanShape {
    pub fn new(s: usize, s1: usize, s2: usize) -> Result<Self> {
        if s == 0 || s1 == 0 || s2 == 0 {
            return Err(Error::InvalidParams("GAN dimensions must be at least 1".into()));
        }
        Ok(Self { s, s1, s2 })
    }

    /// Generator parameter count.
    pub fn n(&self) -> usize {
        self.s * self.s2 + self.s1 * self.s + self.s + self.s1
    }

    /// Discriminator parameter count.
    pub fn m(&self) -> usize {
        self.s1
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w2 = self.s * self.s2;
        let b1 = w2 + self.s1 * self.s;
        (w2, b1, b1 + self.s)
    }

    pub fn pack(&self, p: &GeneratorParams) -> Result<Vec<f64>> {
        check_dim(self.s * self.s2, p.w1.len())?;
        check_dim(self.s1 * self.s, p.w2.len())?;
        check_dim(self.s, p.b1.len())?;
        check_dim(self.s1, p.b2.len())?;
        Ok([p.w1.as_slice(), &p.w2, &p.b1, &p.b2].concat())
    }

    pub fn unpack(&self, x: &[f64]) -> Result<GeneratorParams> {
        check_dim(self.n(), x.len())?;
        let (w2, b1, b2) = self.offsets();
        Ok(GeneratorParams {
            w1: x[..w2].to_vec(),
            w2: x[w2..b1].to_vec(),
            b1: x[b1..b2].to_vec(),
            b2: x[b2..].to_vec(),
        })
    }

    /// True if some hidden unit has an all-zero weight row and bias.
    pub fn has_degenerate_row(&self, x: &[f64]) -> bool {
        let (_, b1, _) = self.offsets();
        (0..self.s).any(|i| {
            (0..self.s2).all(|k| x[k * self.s + i].abs() <= DEGENERATE_ROW_TOL) && x[b1 + i].abs() <= DEGENERATE_ROW_TOL
        })
    }

    /// `W₁ξ₂ + b₁` written into `out`.
    fn hidden_into(&self, x: &[f64], xi2: &[f64], out: &mut [f64]) {
        let (_, b1, _) = self.offsets();
        out.copy_from_slice(&x[b1..b1 + self.s]);
        for (k, xk) in xi2.iter().enumerate() {
            let col = &x[k * self.s..(k + 1) * self.s];
            out.iter_mut().zip(col).for_each(|(o, w)| *o += w * xk);
        }
    }

    /// `W₂ h + b₂` written into `out`.
    fn output_into(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        let (w2, _, b2) = self.offsets();
        out.copy_from_slice(&x[b2..b2 + self.s1]);
        for (i, hi) in h.iter().enumerate() {
            let col = &x[w2 + i * self.s1..w2 + (i + 1) * self.s1];
            out.iter_mut().zip(col).for_each(|(o, w)| *o += w * hi);
        }
    }
}

/// `G(x, ξ₂) = W₂(W₁ξ₂ + b₁)₊ + b₂`.
pub fn generator_forward(shape: &GanShape, x: &[f64], xi2: &[f64]) -> Result<Vec<f64>> {
    check_dim(shape.n(), x.len())?;
    check_dim(shape.s2, xi2.len())?;
    let mut a = vec![0.0; shape.s];
    shape.hidden_into(x, xi2, &mut a);
    a.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut g = vec![0.0; shape.s1];
    shape.output_into(x, &a, &mut g);
    Ok(g)
}

/// Logistic function `1/(1 + e^{−u})` without overflow.
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// `D(y, ξ₁) = 1/(1 + exp(yᵀξ₁))`.
pub fn discriminator_forward(y: &[f64], xi1: &[f64]) -> Result<f64> {
    check_dim(y.len(), xi1.len())?;
    let u: f64 = y.iter().zip(xi1).map(|(a, b)| a * b).sum();
    Ok(logistic(-u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleLaw {
    Uniform,
    /// Standard normal restricted to the box.
    TruncatedNormal,
}

/// Sampled data (`ξ₁`) and latent (`ξ₂`) sets, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub count: usize,
    pub seed: u64,
}

impl SampleSet {
    pub fn xi1(&self, j: usize, s1: usize) -> &[f64] {
        &self.xi1[j * s1..(j + 1) * s1]
    }

    pub fn xi2(&self, j: usize, s2: usize) -> &[f64] {
        &self.xi2[j * s2..(j + 1) * s2]
    }
}

fn default_n_samples() -> usize {
    256
}
fn default_x_box() -> [f64; 2] {
    [-3.0, 3.0]
}
fn default_y_box() -> [f64; 2] {
    [-5.0, 5.0]
}
fn default_unit_box() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_law() -> SampleLaw {
    SampleLaw::Uniform
}
fn default_kink_tol() -> f64 {
    1e-7
}

/// Construction parameters, also accepted as the `gan-saa` params object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanConfig {
    pub s: usize,
    pub s1: usize,
    pub s2: usize,
    pub seed: u64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Bounds applied to every generator parameter.
    #[serde(default = "default_x_box")]
    pub x_box: [f64; 2],
    /// Bounds applied to every discriminator parameter.
    #[serde(default = "default_y_box")]
    pub y_box: [f64; 2],
    #[serde(default = "default_unit_box")]
    pub xi1_box: [f64; 2],
    #[serde(default = "default_unit_box")]
    pub xi2_box: [f64; 2],
    #[serde(default = "default_law")]
    pub law: SampleLaw,
    #[serde(default = "default_kink_tol")]
    pub kink_tol: f64,
}

impl GanConfig {
    pub fn desk(seed: u64, n_samples: usize) -> Self {
        Self {
            s: 4,
            s1: 2,
            s2: 2,
            seed,
            n_samples,
            x_box: default_x_box(),
            y_box: default_y_box(),
            xi1_box: default_unit_box(),
            xi2_box: default_unit_box(),
            law: SampleLaw::Uniform,
            kink_tol: default_kink_tol(),
        }
    }

    pub fn shape(&self) -> Result<GanShape> {
        GanShape::new(self.s, self.s1, self.s2)
    }

    fn validate(&self) -> Result<()> {
        self.shape()?;
        if self.n_samples == 0 {
            return Err(Error::InvalidParams("n_samples must be at least 1".into()));
        }
        for (name, b) in [("x_box", self.x_box), ("y_box", self.y_box), ("xi1_box", self.xi1_box), ("xi2_box", self.xi2_box)] {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::InvalidParams(format!("{name} must be finite with lower < upper")));
            }
        }
        if self.law == SampleLaw::TruncatedNormal {
            for b in [self.xi1_box, self.xi2_box] {
                if b[1] < -8.0 || b[0] > 8.0 {
                    return Err(Error::InvalidParams("truncated-normal box has negligible mass".into()));
                }
            }
        }
        if !(self.kink_tol.is_finite() && self.kink_tol >= 0.0) {
            return Err(Error::InvalidParams("kink_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, law: SampleLaw, b: [f64; 2]) -> f64 {
    match law {
        SampleLaw::Uniform => rng.gen_range(b[0]..b[1]),
        SampleLaw::TruncatedNormal => loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= b[0] && z <= b[1] {
                return z;
            }
        },
    }
}

/// Seeded reference generator: weights uniform on `[−1,1]`, hidden biases
/// uniform on `[0.1, 0.5]`, output biases zero, clamped into the X box.
pub fn reference_parameters(shape: &GanShape, seed: u64, x_box: [f64; 2]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, b1, b2) = shape.offsets();
    let mut x: Vec<f64> = (0..b1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    x.extend((b1..b2).map(|_| rng.gen_range(0.1..0.5)));
    x.extend(std::iter::repeat_n(0.0, shape.s1));
    x.iter_mut().for_each(|v| *v = v.clamp(x_box[0], x_box[1]));
    x
}

/// The SAA problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GanSaaInstance {
    pub config: GanConfig,
    pub shape: GanShape,
    pub samples: SampleSet,
    /// Parameter point used for kink-free sampling and as the solver start.
    pub x_ref: Vec<f64>,
}

impl GanSaaInstance {
    pub fn from_params(params: &serde_json::Value) -> Result<Self> {
        let config: GanConfig =
            serde_json::from_value(params.clone()).map_err(|e| Error::InvalidParams(format!("gan-saa params: {e}")))?;
        Self::build(&config)
    }

    /// Builds from a config: the reference parameters and samples use seeds
    /// derived from `config.seed`.
    pub fn build(config: &GanConfig) -> Result<Self> {
        config.validate()?;
        let shape = config.shape()?;
        let x_ref = reference_parameters(&shape, derive_seed(&[config.seed, 0]), config.x_box);
        Self::with_reference(config, x_ref, derive_seed(&[config.seed, 1]))
    }

    /// Draws `n_samples` pairs with `sample_seed`, redrawing any `ξ₂` whose
    /// hidden pre-activation at `x_ref` lies within `kink_tol` of zero.
    pub fn with_reference(config: &GanConfig, x_ref: Vec<f64>, sample_seed: u64) -> Result<Self> {
        config.validate()?;
        let shape = config.shape()?;
        check_dim(shape.n(), x_ref.len())?;
        if shape.has_degenerate_row(&x_ref) {
            return Err(Error::InvalidParams("reference generator has an all-zero hidden row".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let n = config.n_samples;
        let mut xi1 = Vec::with_capacity(n * shape.s1);
        let mut xi2 = Vec::with_capacity(n * shape.s2);
        let mut a = vec![0.0; shape.s];
        for _ in 0..n {
            for _ in 0..shape.s1 {
                xi1.push(draw(&mut rng, config.law, config.xi1_box));
            }
            let mut accepted = false;
            for _ in 0..=KINK_RETRIES {
                let cand: Vec<f64> = (0..shape.s2).map(|_| draw(&mut rng, config.law, config.xi2_box)).collect();
                shape.hidden_into(&x_ref, &cand, &mut a);
                if a.iter().all(|v| v.abs() > config.kink_tol) {
                    xi2.extend(cand);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::Sampling(format!(
                    "no kink-free latent sample after {KINK_RETRIES} redraws; perturb the reference parameters"
                )));
            }
        }
        Ok(Self {
            config: config.clone(),
            shape,
            samples: SampleSet { xi1, xi2, count: n, seed: sample_seed },
            x_ref,
        })
    }

    pub fn n(&self) -> usize {
        self.shape.n()
    }

    pub fn m(&self) -> usize {
        self.shape.m()
    }

    pub fn x_set(&self) -> PolyhedralSet {
        let b = self.config.x_box;
        PolyhedralSet::cube(self.n(), b[0], b[1]).expect("validated box")
    }

    pub fn y_set(&self) -> PolyhedralSet {
        let b = self.config.y_box;
        PolyhedralSet::cube(self.m(), b[0], b[1]).expect("validated box")
    }

    /// `min_{i,j} |(W₁ξ₂ʲ + b₁)ᵢ|`.
    pub fn kink_certificate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n(), x.len())?;
        let mut a = vec![0.0; self.shape.s];
        let mut best = f64::INFINITY;
        for j in 0..self.samples.count {
            self.shape.hidden_into(x, self.samples.xi2(j, self.shape.s2), &mut a);
            best = a.iter().fold(best, |m, v| m.min(v.abs()));
        }
        Ok(best)
    }

    fn check_kinks(&self, x: &[f64]) -> Result<()> {
        let c = self.kink_certificate(x)?;
        if c <= self.config.kink_tol {
            return Err(Error::KinkProximity(format!(
                "hidden pre-activation {c:.3e} within kink_tol {:.1e}; resample or perturb x",
                self.config.kink_tol
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        check_dim(self.n(), x.len())?;
        check_dim(self.m(), y.len())
    }

    /// `f̂_N(x, y)` in softplus form.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x, y)?;
        Ok(self.objective_unchecked(x, y))
    }

    fn objective_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let sh = self.shape;
        let total = pairwise_reduce(self.samples.count, 1, &|r: std::ops::Range<usize>, acc: &mut [f64]| {
            let mut a = vec![0.0; sh.s];
            let mut g = vec![0.0; sh.s1];
            for j in r {
                let u1: f64 = y.iter().zip(self.samples.xi1(j, sh.s1)).map(|(p, q)| p * q).sum();
                sh.hidden_into(x, self.samples.xi2(j, sh.s2), &mut a);
                a.iter_mut().for_each(|v| *v = v.max(0.0));
                sh.output_into(x, &a, &mut g);
                let u2: f64 = y.iter().zip(&g).map(|(p, q)| p * q).sum();
                acc[0] += -softplus(u1) - softplus(-u2);
            }
        });
        total[0] / self.samples.count as f64
    }

    /// Reverse-mode gradients. With `mask = Some(x₀)` the ReLU activation
    /// pattern is frozen at `x₀`, giving the gradient of the smooth piece
    /// active there.
    fn gradients_impl(&self, x: &[f64], y: &[f64], mask: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let sh = self.shape;
        let (n, m) = (sh.n(), sh.m());
        let (ow2, ob1, ob2) = sh.offsets();
        let total = pairwise_reduce(self.samples.count, n + m, &|r: std::ops::Range<usize>, acc: &mut [f64]| {
            let mut a = vec![0.0; sh.s];
            let mut a0 = vec![0.0; sh.s];
            let mut h = vec![0.0; sh.s];
            let mut g = vec![0.0; sh.s1];
            let mut gg = vec![0.0; sh.s1];
            for j in r {
                let xi1 = self.samples.xi1(j, sh.s1);
                let xi2 = self.samples.xi2(j, sh.s2);
                sh.hidden_into(x, xi2, &mut a);
                let pattern: &[f64] = match mask {
                    Some(x0) => {
                        sh.hidden_into(x0, xi2, &mut a0);
                        &a0
                    }
                    None => &a,
                };
                for i in 0..sh.s {
                    h[i] = if pattern[i] > 0.0 { a[i] } else { 0.0 };
                }
                sh.output_into(x, &h, &mut g);
                let u1: f64 = y.iter().zip(xi1).map(|(p, q)| p * q).sum();
                let u2: f64 = y.iter().zip(&g).map(|(p, q)| p * q).sum();
                let c1 = logistic(u1);
                let c2 = logistic(-u2);
                for l in 0..m {
                    acc[n + l] += -c1 * xi1[l] + c2 * g[l];
                    gg[l] = c2 * y[l];
                }
                for i in 0..sh.s {
                    let col = ow2 + i * sh.s1;
                    let mut da = 0.0;
                    for l in 0..sh.s1 {
                        acc[col + l] += gg[l] * h[i];
                        da += x[col + l] * gg[l];
                    }
                    if pattern[i] > 0.0 {
                        for (k, xk) in xi2.iter().enumerate() {
                            acc[k * sh.s + i] += da * xk;
                        }
                        acc[ob1 + i] += da;
                    }
                }
                for l in 0..sh.s1 {
                    acc[ob2 + l] += gg[l];
                }
            }
        });
        let inv = 1.0 / self.samples.count as f64;
        let gx = total[..n].iter().map(|v| v * inv).collect();
        let gy = total[n..].iter().map(|v| v * inv).collect();
        (gx, gy)
    }

    /// `(∇_x f̂_N, ∇_y f̂_N)`; fails if `x` is within `kink_tol` of a ReLU kink.
    pub fn gradients(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(x, y)?;
        self.check_kinks(x)?;
        Ok(self.gradients_impl(x, y, None))
    }

    /// Gradients without the kink check (one-sided at kinks).
    pub fn gradients_unchecked(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.gradients_impl(x, y, None)
    }

    /// Symmetrized central differences (step `1e-4`) of the analytic gradients
    /// with the activation pattern frozen at `x`.
    pub fn hessian_blocks(&self, x: &[f64], y: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_point(x, y)?;
        self.check_kinks(x)?;
        Ok((self.hessian_xx_unchecked(x, y), self.hessian_yy_unchecked(x, y)))
    }

    fn hessian_xx_unchecked(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut h = DMatrix::zeros(n, n);
        let mut probe = x.to_vec();
        for k in 0..n {
            probe[k] = x[k] + HESSIAN_STEP;
            let (gp, _) = self.gradients_impl(&probe, y, Some(x));
            probe[k] = x[k] - HESSIAN_STEP;
            let (gm, _) = self.gradients_impl(&probe, y, Some(x));
            probe[k] = x[k];
            for i in 0..n {
                h[(i, k)] = (gp[i] - gm[i]) / (2.0 * HESSIAN_STEP);
            }
        }
        symmetrize(h)
    }

    fn hessian_yy_unchecked(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut h = DMatrix::zeros(m, m);
        let mut probe = y.to_vec();
        for k in 0..m {
            probe[k] = y[k] + HESSIAN_STEP;
            let (_, gp) = self.gradients_impl(x, &probe, Some(x));
            probe[k] = y[k] - HESSIAN_STEP;
            let (_, gm) = self.gradients_impl(x, &probe, Some(x));
            probe[k] = y[k];
            for i in 0..m {
                h[(i, k)] = (gp[i] - gm[i]) / (2.0 * HESSIAN_STEP);
            }
        }
        symmetrize(h)
    }

    /// Generator outputs `G(x, ξ₂ʲ)` for every sample.
    pub fn generator_outputs(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.samples.count)
            .map(|j| generator_forward(&self.shape, x, self.samples.xi2(j, self.shape.s2)))
            .collect()
    }

    /// Wraps the instance as a generic min-max problem. Gradient and Hessian
    /// oracles are attached; they are exact away from ReLU kinks.
    pub fn to_problem(self) -> MinMaxProblem {
        let inst = Arc::new(self);
        let (x_set, y_set) = (inst.x_set(), inst.y_set());
        let (e, gx, gy, hx, hy) = (inst.clone(), inst.clone(), inst.clone(), inst.clone(), inst);
        MinMaxProblem::new("gan-saa", x_set, y_set, Smoothness::LocallyLipschitz, move |x, y| {
            e.objective_unchecked(x, y)
        })
        .with_gradients(move |x, y| gx.gradients_unchecked(x, y).0, move |x, y| gy.gradients_unchecked(x, y).1)
        .with_hessians(move |x, y| hx.hessian_xx_unchecked(x, y), move |x, y| hy.hessian_yy_unchecked(x, y))
    }
}

fn symmetrize(h: DMatrix<f64>) -> DMatrix<f64> {
    let t = h.transpose();
    (h + t) * 0.5
}

/// First- and second-order certification of a GAN point. The kink certificate
/// is verified first; the smooth conditions are then checked on the active
/// smooth piece.
pub fn certify_gan_point(instance: &GanSaaInstance, point: &Point, config: &CertifyConfig) -> Result<StationarityReport> {
    instance.check_point(&point.x, &point.y)?;
    if instance.shape.has_degenerate_row(&point.x) {
        return Err(Error::InvalidParams("generator has an all-zero hidden row".into()));
    }
    let cert = instance.kink_certificate(&point.x)?;
    instance.check_kinks(&point.x)?;
    let problem = instance.clone().to_problem();
    let options = VerifyOptions { order: 2, nonsmooth: false, assume_smooth: true };
    let mut report = verify(&problem, point, &options, config)?;
    report.extras.insert("kink_certificate".into(), cert);
    report.extras.insert("kink_tol".into(), instance.config.kink_tol);
    Ok(report)
}
