//! Diffusion models, the weighted σ̃₀-geometry, and the dissipativity
//! constant K that drives every inequality in this crate.
//!
//! A model carries a reference diagonal operator σ̃₀ = diag(q᛫) with the
//! noise minorization σ(x)ᵀσ(x) ⪰ σ̃₀², and a constant `K` such that
//!
//! ```text
//! ‖σ̃₀⁻¹(σ(x)−σ(y))‖²_HS + 2⟨σ̃₀⁻¹(b(x)−b(y)), σ̃₀⁻¹(x−y)⟩ ≤ K ‖σ̃₀⁻¹(x−y)‖²
//! ```
//!
//! Models are built from a preset registry of named drift/diffusion families
//! with numeric parameters, so experiment configs stay declarative and
//! bit-exactly reproducible.

use crate::error::{LabError, Result};
use crate::rng::{Channel, GaussianStream};
use serde::{Deserialize, Serialize};

/// Norm guard for simulated paths; beyond this we declare an explosion.
pub const BLOWUP_GUARD: f64 = 1e8;

/// Switch point of the small-`|K t|` series branch of [`harnack_constant`].
const HARNACK_SERIES_SWITCH: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Weighted geometry
// ---------------------------------------------------------------------------

/// The diagonal of σ̃₀; defines the intrinsic cost ‖σ̃₀⁻¹·‖².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    weights: Vec<f64>,
}

impl WeightedNorm {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|q| !q.is_finite() || *q <= 0.0) {
            return Err(LabError::Usage(
                "weighted norm requires finite, strictly positive weights".into(),
            ));
        }
        Ok(WeightedNorm { weights })
    }

    /// All weights equal to `q` in dimension `dim`.
    pub fn uniform(dim: usize, q: f64) -> Result<Self> {
        WeightedNorm::new(vec![q; dim])
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `‖σ̃₀⁻¹ v‖² = Σᵢ qᵢ⁻² vᵢ²`.
    pub fn norm_sq(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.weights.len() {
            return Err(LabError::Usage(format!(
                "dimension mismatch: vector has {} entries, norm has {}",
                v.len(),
                self.weights.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(v)
            .map(|(q, x)| (x / q) * (x / q))
            .sum())
    }

    /// Weighted squared distance between two states.
    pub fn dist_sq(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(LabError::Usage("dimension mismatch between points".into()));
        }
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.norm_sq(&diff)
    }
}

/// Convenience free function mirroring the method.
pub fn weighted_norm_sq(v: &[f64], norm: &WeightedNorm) -> Result<f64> {
    norm.norm_sq(v)
}

// ---------------------------------------------------------------------------
// Harnack constant
// ---------------------------------------------------------------------------

/// The constant `c_t = K / (2 (1 − e^{−K t}))` of the log-Harnack inequality.
///
/// Positive for every real `K` and `t > 0`, continuous through `K = 0`.
/// For `|K t| < 1e-6` the expression is evaluated by its series
/// `(1 + Kt/2 + (Kt)²/12) / (2t)`; at the switch point the two branches
/// agree to better than 1e-12 relative.
pub fn harnack_constant(k: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() || !k.is_finite() {
        return Err(LabError::Usage(format!(
            "harnack_constant requires finite K and t > 0, got K = {k}, t = {t}"
        )));
    }
    let u = k * t;
    if u.abs() < HARNACK_SERIES_SWITCH {
        Ok((1.0 + u / 2.0 + u * u / 12.0) / (2.0 * t))
    } else {
        // 1 − e^{−u} via expm1 keeps the moderate-|u| regime accurate.
        Ok(k / (2.0 * (-(-u).exp_m1())))
    }
}

// ---------------------------------------------------------------------------
// Finite-dimensional diffusion models
// ---------------------------------------------------------------------------

/// Drift families of the preset registry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    /// `b(x) = -rate * x`
    Linear { rate: f64 },
}

impl Drift {
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Zero => out.fill(0.0),
            Drift::Linear { rate } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -rate * xi;
                }
            }
        }
    }
}

/// Diffusion families of the preset registry. All are scalar multiples of
/// the identity, which keeps σᵀσ − σ̃₀² checks a scalar comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusion {
    /// `σ(x) = level · I`
    Constant { level: f64 },
    /// `σ(x) = base (1 + amplitude · tanh x₁) · I` (one-dimensional models)
    TanhModulated { base: f64, amplitude: f64 },
}

impl Diffusion {
    /// Scalar diffusion coefficient at state `x`.
    pub fn scalar(&self, x: &[f64]) -> f64 {
        match self {
            Diffusion::Constant { level } => *level,
            Diffusion::TanhModulated { base, amplitude } => base * (1.0 + amplitude * x[0].tanh()),
        }
    }
}

/// A finite-dimensional diffusion `dX = b(X)dt + σ(X)dB` together with its
/// reference operator σ̃₀ and dissipativity constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub dim: usize,
    pub drift: Drift,
    pub diffusion: Diffusion,
    pub sigma0: WeightedNorm,
    pub k: f64,
}

impl DiffusionModel {
    pub fn new(
        dim: usize,
        drift: Drift,
        diffusion: Diffusion,
        sigma0: WeightedNorm,
        k: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Usage("model dimension must be positive".into()));
        }
        if sigma0.dim() != dim {
            return Err(LabError::Usage(
                "sigma0 dimension does not match model dimension".into(),
            ));
        }
        if matches!(diffusion, Diffusion::TanhModulated { .. }) && dim != 1 {
            return Err(LabError::Usage(
                "tanh-modulated diffusion is one-dimensional".into(),
            ));
        }
        if !k.is_finite() {
            return Err(LabError::Usage("dissipativity constant must be finite".into()));
        }
        Ok(DiffusionModel {
            dim,
            drift,
            diffusion,
            sigma0,
            k,
        })
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.drift.eval(x, out);
    }

    pub fn diffusion_scalar(&self, x: &[f64]) -> f64 {
        self.diffusion.scalar(x)
    }

    /// Numerical check of the noise minorization σ(x)ᵀσ(x) ⪰ σ̃₀² over
    /// sampled states of `[lo, hi]^dim`. For the scalar diffusion families
    /// the smallest eigenvalue of σᵀσ − σ̃₀² is σ(x)² − max qᵢ².
    pub fn check_noise_minorization(&self, lo: f64, hi: f64, samples: usize, tol: f64) -> Result<()> {
        let q_max = self
            .sigma0
            .weights()
            .iter()
            .fold(f64::MIN, |acc, q| acc.max(*q));
        let stream = GaussianStream::new(0x5167, 0);
        let mut x = vec![0.0; self.dim];
        for s in 0..samples.max(2) {
            for (lane, xi) in x.iter_mut().enumerate() {
                *xi = stream.uniform(s as u64, Channel::Aux, lane as u64, lo, hi);
            }
            let sig = self.diffusion_scalar(&x);
            let min_eig = sig * sig - q_max * q_max;
            if min_eig < -tol {
                return Err(LabError::Usage(format!(
                    "noise minorization fails: sigma(x)^2 - max q^2 = {min_eig:.3e} at x = {x:?}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Galerkin models
// ---------------------------------------------------------------------------

/// Spectral Galerkin truncation of the semi-linear equation
/// `dX = (A X + F(X))dt + (σ̃₀ + σ̃₁(X))dW` at truncation level `n`.
///
/// The shipped family uses the Dirichlet-Laplacian spectrum
/// `λᵢ = lambda_scale · i²`, weights `qᵢ = (1 + λᵢ)^(−q_decay)`,
/// a mode-wise Lipschitz drift `F(x)ᵢ = f_scale · logistic(xᵢ) · (1+i)⁻²`,
/// and the rank-one Hilbert-Schmidt perturbation
/// `σ̃₁(x) = sigma1_scale · (1 + tanh x₁) · e₁⊗e₁`.
///
/// The `(1 + tanh)` factor keeps σ̃₁ ≥ 0, hence σᵀσ ⪰ σ̃₀² pointwise, with
/// the same Lipschitz constant as a plain tanh modulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GalerkinModel {
    pub level: usize,
    pub lambda_scale: f64,
    pub q_decay: f64,
    pub f_scale: f64,
    pub sigma1_scale: f64,
    pub k: f64,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl GalerkinModel {
    pub fn new(
        level: usize,
        lambda_scale: f64,
        q_decay: f64,
        f_scale: f64,
        sigma1_scale: f64,
        k: f64,
    ) -> Result<Self> {
        if level == 0 {
            return Err(LabError::Usage("truncation level must be positive".into()));
        }
        if lambda_scale < 0.0 || q_decay <= 0.0 {
            return Err(LabError::Usage(
                "lambda_scale must be >= 0 and q_decay > 0".into(),
            ));
        }
        if sigma1_scale < 0.0 {
            return Err(LabError::Usage("sigma1_scale must be >= 0".into()));
        }
        Ok(GalerkinModel {
            level,
            lambda_scale,
            q_decay,
            f_scale,
            sigma1_scale,
            k,
        })
    }

    /// Same spectral family truncated at a different level.
    pub fn at_level(&self, level: usize) -> Result<Self> {
        GalerkinModel::new(
            level,
            self.lambda_scale,
            self.q_decay,
            self.f_scale,
            self.sigma1_scale,
            self.k,
        )
    }

    /// Eigenvalue of −A for mode `i` (1-based).
    pub fn lambda(&self, i: usize) -> f64 {
        self.lambda_scale * (i as f64) * (i as f64)
    }

    /// σ̃₀ weight of mode `i` (1-based).
    pub fn weight(&self, i: usize) -> f64 {
        (1.0 + self.lambda(i)).powf(-self.q_decay)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.level).map(|i| self.lambda(i)).collect()
    }

    pub fn sigma0(&self) -> WeightedNorm {
        WeightedNorm::new((1..=self.level).map(|i| self.weight(i)).collect())
            .expect("weights are positive by construction")
    }

    /// Lipschitz drift part.
    pub fn f_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, (o, xi)) in out.iter_mut().zip(x).enumerate() {
            let mode = (i + 1) as f64;
            *o = self.f_scale * logistic(*xi) / ((1.0 + mode) * (1.0 + mode));
        }
    }

    /// The (1,1) entry of σ̃₁(x); all other entries vanish.
    pub fn sigma1_entry(&self, x: &[f64]) -> f64 {
        self.sigma1_scale * (1.0 + x[0].tanh())
    }

    /// Partial sums of `Σ qᵢ²/(1+λᵢ)` for the full weight law. Returns the
    /// partial sum to `terms` plus an integral tail bound; finite iff the
    /// law is summable.
    pub fn h2_series_bound(&self, terms: usize) -> f64 {
        let partial: f64 = (1..=terms)
            .map(|i| {
                let q = self.weight(i);
                q * q / (1.0 + self.lambda(i))
            })
            .sum();
        // term(i) ≈ (λ_scale i²)^(−(1+2 q_decay)) decays polynomially; bound
        // the tail by the integral from `terms`.
        let p = 2.0 * (1.0 + 2.0 * self.q_decay);
        let tail = if p > 1.0 {
            let t0 = terms as f64;
            let c = self.lambda_scale.max(1e-300).powf(-(1.0 + 2.0 * self.q_decay));
            c * t0.powf(1.0 - p) / (p - 1.0)
        } else {
            f64::INFINITY
        };
        partial + tail
    }
}

// ---------------------------------------------------------------------------
// Unified model handle
// ---------------------------------------------------------------------------

/// Either kind of model; operations that work on both take this.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Model {
    Diffusion(DiffusionModel),
    Galerkin(GalerkinModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Diffusion(m) => m.dim,
            Model::Galerkin(g) => g.level,
        }
    }

    pub fn k(&self) -> f64 {
        match self {
            Model::Diffusion(m) => m.k,
            Model::Galerkin(g) => g.k,
        }
    }

    pub fn sigma0(&self) -> WeightedNorm {
        match self {
            Model::Diffusion(m) => m.sigma0.clone(),
            Model::Galerkin(g) => g.sigma0(),
        }
    }

    pub fn as_diffusion(&self) -> Option<&DiffusionModel> {
        match self {
            Model::Diffusion(m) => Some(m),
            Model::Galerkin(_) => None,
        }
    }

    pub fn as_galerkin(&self) -> Option<&GalerkinModel> {
        match self {
            Model::Galerkin(g) => Some(g),
            Model::Diffusion(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Dissipativity
// ---------------------------------------------------------------------------

/// The dissipativity quotient of a finite-dimensional model at a pair
/// `x ≠ y`:
///
/// ```text
/// [‖σ̃₀⁻¹(σ(x)−σ(y))‖²_HS + 2⟨σ̃₀⁻¹(b(x)−b(y)), σ̃₀⁻¹(x−y)⟩] / ‖σ̃₀⁻¹(x−y)‖²
/// ```
pub fn dissipativity_quotient(m: &DiffusionModel, x: &[f64], y: &[f64]) -> Result<f64> {
    let d2 = m.sigma0.dist_sq(x, y)?;
    if d2 == 0.0 {
        return Err(LabError::Usage(
            "dissipativity quotient is undefined at x = y".into(),
        ));
    }
    // σ is scalar·I: ‖σ̃₀⁻¹(σ(x)−σ(y))‖²_HS = (σ(x)−σ(y))² Σ qᵢ⁻².
    let dsig = m.diffusion_scalar(x) - m.diffusion_scalar(y);
    let hs: f64 = m
        .sigma0
        .weights()
        .iter()
        .map(|q| (dsig / q) * (dsig / q))
        .sum();
    let mut bx = vec![0.0; m.dim];
    let mut by = vec![0.0; m.dim];
    m.drift_into(x, &mut bx);
    m.drift_into(y, &mut by);
    let inner: f64 = m
        .sigma0
        .weights()
        .iter()
        .enumerate()
        .map(|(i, q)| (bx[i] - by[i]) * (x[i] - y[i]) / (q * q))
        .sum();
    Ok((hs + 2.0 * inner) / d2)
}

/// The drift/noise part of the Galerkin dissipativity condition (the linear
/// part `A` only helps and is dropped):
///
/// ```text
/// [2⟨F(x)−F(y), σ̃₀⁻²(x−y)⟩ + ‖σ̃₀⁻¹(σ̃₁(x)−σ̃₁(y))‖²_HS] / ‖σ̃₀⁻¹(x−y)‖²
/// ```
pub fn galerkin_dissipativity_quotient(g: &GalerkinModel, x: &[f64], y: &[f64]) -> Result<f64> {
    let sigma0 = g.sigma0();
    let d2 = sigma0.dist_sq(x, y)?;
    if d2 == 0.0 {
        return Err(LabError::Usage(
            "dissipativity quotient is undefined at x = y".into(),
        ));
    }
    let mut fx = vec![0.0; g.level];
    let mut fy = vec![0.0; g.level];
    g.f_into(x, &mut fx);
    g.f_into(y, &mut fy);
    let inner: f64 = sigma0
        .weights()
        .iter()
        .enumerate()
        .map(|(i, q)| (fx[i] - fy[i]) * (x[i] - y[i]) / (q * q))
        .sum();
    let ds1 = g.sigma1_entry(x) - g.sigma1_entry(y);
    let q1 = sigma0.weights()[0];
    let hs = (ds1 / q1) * (ds1 / q1);
    Ok((2.0 * inner + hs) / d2)
}

fn model_quotient(model: &Model, x: &[f64], y: &[f64]) -> Result<f64> {
    match model {
        Model::Diffusion(m) => dissipativity_quotient(m, x, y),
        Model::Galerkin(g) => galerkin_dissipativity_quotient(g, x, y),
    }
}

/// Certify a lower bound on the supremum of the dissipativity quotient over
/// `[lo, hi]^dim`: the maximum over `budget` random pairs, refined by
/// coordinate ascent with a shrinking step from the best pair found.
pub fn estimate_k(model: &Model, lo: f64, hi: f64, budget: usize, seed: u64) -> Result<f64> {
    if !(lo < hi) {
        return Err(LabError::Usage("estimate_k: empty domain".into()));
    }
    if budget == 0 {
        return Err(LabError::Usage("estimate_k: budget must be >= 1".into()));
    }
    let dim = model.dim();
    let stream = GaussianStream::new(seed, 0);
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (vec![0.0; dim], vec![0.0; dim]);
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    for s in 0..budget {
        for lane in 0..dim {
            x[lane] = stream.uniform(s as u64, Channel::Aux, (2 * lane) as u64, lo, hi);
            y[lane] = stream.uniform(s as u64, Channel::Aux, (2 * lane + 1) as u64, lo, hi);
        }
        if x == y {
            continue;
        }
        let q = model_quotient(model, &x, &y)?;
        if q > best {
            best = q;
            best_pair = (x.clone(), y.clone());
        }
    }
    if !best.is_finite() {
        return Err(LabError::Usage(
            "estimate_k: no valid pair found within budget".into(),
        ));
    }

    // Local refinement: coordinate ascent over the 2·dim coordinates of the
    // pair, shrinking the step whenever no move improves.
    let (mut bx, mut by) = best_pair;
    let mut step = 0.1 * (hi - lo);
    for _ in 0..100 {
        let mut improved = false;
        for coord in 0..(2 * dim) {
            for dir in [-1.0, 1.0] {
                let mut cx = bx.clone();
                let mut cy = by.clone();
                let target = if coord < dim {
                    &mut cx[coord]
                } else {
                    &mut cy[coord - dim]
                };
                *target = (*target + dir * step).clamp(lo, hi);
                if cx == cy {
                    continue;
                }
                let q = model_quotient(model, &cx, &cy)?;
                if q > best {
                    best = q;
                    bx = cx;
                    by = cy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-12 * (hi - lo) {
                break;
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Preset registry
// ---------------------------------------------------------------------------

/// Parameter map type used by configs: preset name -> numeric parameters.
pub type ParamMap = std::collections::BTreeMap<String, f64>;

/// Names of the built-in presets.
pub fn builtin_preset_names() -> Vec<&'static str> {
    vec!["ou", "tanh_perturbed", "galerkin_heat"]
}

/// Human-readable schema lines for `list-presets`.
pub fn preset_schema(name: &str) -> Option<&'static str> {
    match name {
        "ou" => Some(
            "ou: dX = -theta X dt + sigma0 dB (1-D). params: theta (0.5), sigma0 (1.0). \
             K = -2 theta. Exercises log-Harnack, coupling, gradient, entropy checks.",
        ),
        "tanh_perturbed" => Some(
            "tanh_perturbed: dX = -theta X dt + base(1 + amplitude tanh X) dB (1-D), \
             sigma0 = base(1 - amplitude). params: theta (1.0), base (1.0), amplitude (0.1). \
             K = amplitude^2 base^2/sigma0^2 - 2 theta at the defaults. State-dependent-noise \
             counterpart of every 1-D check.",
        ),
        "galerkin_heat" => Some(
            "galerkin_heat: spectral truncation, lambda_i = lambda_scale i^2, \
             q_i = (1+lambda_i)^(-q_decay), mode-wise logistic drift, rank-one (1+tanh) noise \
             perturbation. params: level (64), lambda_scale (pi^2), q_decay (0.3), \
             f_scale (0.5), sigma1_scale (0.1). Exercises truncation convergence.",
        ),
        _ => None,
    }
}

fn param(params: &ParamMap, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn reject_unknown(params: &ParamMap, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(LabError::Config(format!(
                "unknown model parameter `{key}` (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

/// Instantiate a built-in preset. `k_override` (allowed on every preset)
/// replaces the certified dissipativity constant; this exists so that
/// falsification configs can assert the harness detects a wrong K.
pub fn build_preset(name: &str, params: &ParamMap) -> Result<Model> {
    match name {
        "ou" => {
            reject_unknown(params, &["theta", "sigma0", "k_override"])?;
            let theta = param(params, "theta", 0.5);
            let sigma0 = param(params, "sigma0", 1.0);
            if sigma0 <= 0.0 {
                return Err(LabError::Config("ou: sigma0 must be > 0".into()));
            }
            let k = param(params, "k_override", -2.0 * theta);
            Ok(Model::Diffusion(DiffusionModel::new(
                1,
                Drift::Linear { rate: theta },
                Diffusion::Constant { level: sigma0 },
                WeightedNorm::uniform(1, sigma0)?,
                k,
            )?))
        }
        "tanh_perturbed" => {
            reject_unknown(params, &["theta", "base", "amplitude", "k_override"])?;
            let theta = param(params, "theta", 1.0);
            let base = param(params, "base", 1.0);
            let amplitude = param(params, "amplitude", 0.1);
            if base <= 0.0 || !(0.0..1.0).contains(&amplitude) {
                return Err(LabError::Config(
                    "tanh_perturbed: need base > 0 and amplitude in [0, 1)".into(),
                ));
            }
            // σ(x) ∈ [base(1-amplitude), base(1+amplitude)], so the largest
            // diagonal σ̃₀ dominated by σ everywhere is base(1-amplitude).
            let q = base * (1.0 - amplitude);
            // Quotient sup: the 1-D quotient is weight-free,
            // sup = (base·amplitude)² sup sech⁴ + 2 b' = (base amplitude)² − 2θ.
            let k_true = (base * amplitude) * (base * amplitude) - 2.0 * theta;
            let k = param(params, "k_override", k_true);
            Ok(Model::Diffusion(DiffusionModel::new(
                1,
                Drift::Linear { rate: theta },
                Diffusion::TanhModulated { base, amplitude },
                WeightedNorm::uniform(1, q)?,
                k,
            )?))
        }
        "galerkin_heat" => {
            reject_unknown(
                params,
                &[
                    "level",
                    "lambda_scale",
                    "q_decay",
                    "f_scale",
                    "sigma1_scale",
                    "k_override",
                ],
            )?;
            let level = param(params, "level", 64.0);
            if level < 1.0 || level.fract() != 0.0 {
                return Err(LabError::Config(
                    "galerkin_heat: level must be a positive integer".into(),
                ));
            }
            let lambda_scale = param(params, "lambda_scale", std::f64::consts::PI.powi(2));
            let q_decay = param(params, "q_decay", 0.3);
            let f_scale = param(params, "f_scale", 0.5);
            let sigma1_scale = param(params, "sigma1_scale", 0.1);
            let g = GalerkinModel::new(level as usize, lambda_scale, q_decay, f_scale, sigma1_scale, 0.0)?;
            let k = match params.get("k_override") {
                Some(k) => *k,
                // Certify K numerically over the box the experiments use.
                None => estimate_k(&Model::Galerkin(g.clone()), -3.0, 3.0, 2000, 0x4b51)?,
            };
            Ok(Model::Galerkin(GalerkinModel { k, ..g }))
        }
        other => Err(LabError::Config(format!(
            "unknown model preset `{other}` (built-ins: {})",
            builtin_preset_names().join(", ")
        ))),
    }
}
