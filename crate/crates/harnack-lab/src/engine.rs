//! Path simulation: Euler-Maruyama for generic diffusions, an exponential
//! Euler scheme for Galerkin truncations, synchronous couplings that share
//! Brownian increments, and exact sampling of the Ornstein-Uhlenbeck
//! stochastic convolution.
//!
//! All noise comes from the counter-based stream in [`crate::rng`], keyed by
//! `(seed, replicate, step, channel, mode)`. Because the key never involves
//! the truncation level, two truncations of the same model automatically see
//! the same projected Brownian sheet, which is what the truncation
//! convergence checks require.

use crate::error::{LabError, Result};
use crate::model::{DiffusionModel, GalerkinModel, Model, BLOWUP_GUARD};
use crate::rng::{Channel, GaussianStream};
use serde::{Deserialize, Serialize};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    /// Integrates the linear part of a Galerkin model exactly per mode and
    /// draws the σ̃₀ stochastic-convolution increment from its exact law,
    /// conditionally on the shared Brownian increment. Galerkin models only.
    ExponentialEuler,
}

/// Simulation parameters. `t_final` must be an integer multiple of `dt`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(t_final: f64, dt: f64, seed: u64, scheme: Scheme) -> Result<Self> {
        if !(t_final > 0.0) || !(dt > 0.0) || dt > t_final {
            return Err(LabError::Usage(format!(
                "need 0 < dt <= t_final, got dt = {dt}, t_final = {t_final}"
            )));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
            return Err(LabError::Usage(format!(
                "t_final = {t_final} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(SimConfig {
            t_final,
            dt,
            seed,
            scheme,
        })
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Same grid and seed, different horizon.
    pub fn with_t(&self, t_final: f64) -> Result<Self> {
        SimConfig::new(t_final, self.dt, self.seed, self.scheme)
    }
}

/// Endpoints of two paths driven by the same Brownian increments.
#[derive(Debug, Clone)]
pub struct CoupledEndpoint {
    pub x_end: Vec<f64>,
    pub y_end: Vec<f64>,
    /// Gaussian draws consumed: steps × dim.
    pub increments_consumed: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_guard(state: &[f64], step: usize, dt: f64) -> Result<()> {
    if norm(state) > BLOWUP_GUARD || state.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Explosion {
            guard: BLOWUP_GUARD,
            step,
            t: step as f64 * dt,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stepping kernels
// ---------------------------------------------------------------------------

/// One Euler-Maruyama step of a generic diffusion:
/// `x += b(x) dt + σ(x) √dt ξ`.
fn euler_step(m: &DiffusionModel, x: &mut [f64], xi: &[f64], dt: f64, drift_buf: &mut [f64]) {
    m.drift_into(x, drift_buf);
    let sig = m.diffusion_scalar(x);
    let sqrt_dt = dt.sqrt();
    for i in 0..x.len() {
        x[i] += drift_buf[i] * dt + sig * sqrt_dt * xi[i];
    }
}

/// Per-mode constants of the exponential Euler scheme, precomputed once per
/// (model, dt).
struct ExpEulerTables {
    /// e^{−λᵢ dt}
    decay: Vec<f64>,
    /// mean loading of the exact OU increment on the Brownian increment:
    /// qᵢ (1−e^{−λᵢ dt}) / (λᵢ dt), times √dt when applied to a unit normal
    mean_coef: Vec<f64>,
    /// standard deviation of the residual, σᵢ² = qᵢ² [vᵢ − cᵢ²/dt]
    resid_sd: Vec<f64>,
}

impl ExpEulerTables {
    fn new(g: &GalerkinModel, dt: f64) -> Self {
        let n = g.level;
        let mut decay = vec![0.0; n];
        let mut mean_coef = vec![0.0; n];
        let mut resid_sd = vec![0.0; n];
        for i in 0..n {
            let lam = g.lambda(i + 1);
            let q = g.weight(i + 1);
            let a = (-lam * dt).exp();
            // c = ∫₀^dt e^{−λ(dt−s)} ds, v = Var ∫₀^dt e^{−λ(dt−s)} dW
            let (c, v) = if lam == 0.0 {
                (dt, dt)
            } else {
                (
                    -(-lam * dt).exp_m1() / lam,
                    -(-2.0 * lam * dt).exp_m1() / (2.0 * lam),
                )
            };
            decay[i] = a;
            // increment = q [ (c/dt) ΔW + sqrt(v − c²/dt) ζ ], ΔW = √dt ξ
            mean_coef[i] = q * (c / dt) * dt.sqrt();
            resid_sd[i] = q * (v - c * c / dt).max(0.0).sqrt();
        }
        ExpEulerTables {
            decay,
            mean_coef,
            resid_sd,
        }
    }
}

/// One exponential Euler step: exact linear decay per mode, drift and σ̃₁
/// increments by Euler on the shared Brownian increment, and exact σ̃₀
/// stochastic-convolution increment conditional on that same increment.
fn exponential_euler_step(
    g: &GalerkinModel,
    tables: &ExpEulerTables,
    x: &mut [f64],
    xi: &[f64],
    zeta: &[f64],
    dt: f64,
    drift_buf: &mut [f64],
) {
    g.f_into(x, drift_buf);
    let s1 = g.sigma1_entry(x);
    let sqrt_dt = dt.sqrt();
    for i in 0..x.len() {
        let mut v = tables.decay[i] * x[i] + drift_buf[i] * dt;
        if i == 0 {
            v += s1 * sqrt_dt * xi[0];
        }
        v += tables.mean_coef[i] * xi[i] + tables.resid_sd[i] * zeta[i];
        x[i] = v;
    }
}

// ---------------------------------------------------------------------------
// Public simulation entry points
// ---------------------------------------------------------------------------

/// Simulate one path to `t_final` and return the endpoint. `replicate`
/// selects the noise stream; the same `(model, x0, cfg, replicate)` always
/// produces the same endpoint bit for bit.
pub fn simulate(model: &Model, x0: &[f64], cfg: &SimConfig, replicate: u64) -> Result<Vec<f64>> {
    let dim = model.dim();
    if x0.len() != dim {
        return Err(LabError::Usage(format!(
            "x0 has dimension {}, model has {}",
            x0.len(),
            dim
        )));
    }
    let stream = GaussianStream::new(cfg.seed, replicate);
    let mut x = x0.to_vec();
    let mut xi = vec![0.0; dim];
    let mut drift_buf = vec![0.0; dim];
    match (model, cfg.scheme) {
        (Model::Diffusion(m), Scheme::Euler) => {
            for step in 0..cfg.steps() {
                stream.fill_normals(step as u64, Channel::Brownian, &mut xi);
                euler_step(m, &mut x, &xi, cfg.dt, &mut drift_buf);
                check_guard(&x, step, cfg.dt)?;
            }
        }
        (Model::Galerkin(g), Scheme::Euler) => {
            // full drift −λᵢ xᵢ + Fᵢ by Euler; only usable when λ_max dt is small
            let evs = g.eigenvalues();
            for step in 0..cfg.steps() {
                stream.fill_normals(step as u64, Channel::Brownian, &mut xi);
                g.f_into(&x, &mut drift_buf);
                let s1 = g.sigma1_entry(&x);
                let sqrt_dt = cfg.dt.sqrt();
                for i in 0..dim {
                    let mut v = x[i] + (-evs[i] * x[i] + drift_buf[i]) * cfg.dt;
                    if i == 0 {
                        v += s1 * sqrt_dt * xi[0];
                    }
                    v += g.weight(i + 1) * sqrt_dt * xi[i];
                    x[i] = v;
                }
                check_guard(&x, step, cfg.dt)?;
            }
        }
        (Model::Galerkin(g), Scheme::ExponentialEuler) => {
            let tables = ExpEulerTables::new(g, cfg.dt);
            let mut zeta = vec![0.0; dim];
            for step in 0..cfg.steps() {
                stream.fill_normals(step as u64, Channel::Brownian, &mut xi);
                stream.fill_normals(step as u64, Channel::OuResidual, &mut zeta);
                exponential_euler_step(g, &tables, &mut x, &xi, &zeta, cfg.dt, &mut drift_buf);
                check_guard(&x, step, cfg.dt)?;
            }
        }
        (Model::Diffusion(_), Scheme::ExponentialEuler) => {
            return Err(LabError::Usage(
                "exponential_euler applies to Galerkin models only".into(),
            ));
        }
    }
    Ok(x)
}

/// Simulate the synchronous coupling: two paths from `x0` and `y0` stepped
/// with identical Gaussian increments.
pub fn simulate_coupled(
    model: &Model,
    x0: &[f64],
    y0: &[f64],
    cfg: &SimConfig,
    replicate: u64,
) -> Result<CoupledEndpoint> {
    let dim = model.dim();
    if x0.len() != dim || y0.len() != dim {
        return Err(LabError::Usage("coupled start points must match model dimension".into()));
    }
    let stream = GaussianStream::new(cfg.seed, replicate);
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut xi = vec![0.0; dim];
    let mut drift_buf = vec![0.0; dim];
    match (model, cfg.scheme) {
        (Model::Diffusion(m), Scheme::Euler) => {
            for step in 0..cfg.steps() {
                stream.fill_normals(step as u64, Channel::Brownian, &mut xi);
                euler_step(m, &mut x, &xi, cfg.dt, &mut drift_buf);
                euler_step(m, &mut y, &xi, cfg.dt, &mut drift_buf);
                check_guard(&x, step, cfg.dt)?;
                check_guard(&y, step, cfg.dt)?;
            }
        }
        (Model::Galerkin(g), Scheme::ExponentialEuler) => {
            let tables = ExpEulerTables::new(g, cfg.dt);
            let mut zeta = vec![0.0; dim];
            for step in 0..cfg.steps() {
                stream.fill_normals(step as u64, Channel::Brownian, &mut xi);
                stream.fill_normals(step as u64, Channel::OuResidual, &mut zeta);
                exponential_euler_step(g, &tables, &mut x, &xi, &zeta, cfg.dt, &mut drift_buf);
                exponential_euler_step(g, &tables, &mut y, &xi, &zeta, cfg.dt, &mut drift_buf);
                check_guard(&x, step, cfg.dt)?;
                check_guard(&y, step, cfg.dt)?;
            }
        }
        (Model::Galerkin(_), Scheme::Euler) => {
            return Err(LabError::Usage(
                "couple Galerkin models with the exponential_euler scheme".into(),
            ));
        }
        (Model::Diffusion(_), Scheme::ExponentialEuler) => {
            return Err(LabError::Usage(
                "exponential_euler applies to Galerkin models only".into(),
            ));
        }
    }
    Ok(CoupledEndpoint {
        x_end: x,
        y_end: y,
        increments_consumed: cfg.steps() * dim,
    })
}

/// Exact draw of the stochastic convolution `Y_t = ∫₀ᵗ T_{t−s} σ̃₀ dW_s` of a
/// Galerkin model: independent Gaussian modes with variance
/// `qᵢ² (1−e^{−2λᵢ t}) / (2λᵢ)` (`qᵢ² t` when λᵢ = 0).
pub fn sample_stochastic_convolution(
    g: &GalerkinModel,
    t: f64,
    seed: u64,
    draw: u64,
) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(LabError::Usage("stochastic convolution requires t > 0".into()));
    }
    let stream = GaussianStream::new(seed, draw);
    let mut z = vec![0.0; g.level];
    stream.fill_normals(0, Channel::Aux, &mut z);
    for (i, zi) in z.iter_mut().enumerate() {
        *zi *= stochastic_convolution_variance(g, i + 1, t).sqrt();
    }
    Ok(z)
}

/// Closed-form mode variance of the stochastic convolution at time `t`.
pub fn stochastic_convolution_variance(g: &GalerkinModel, mode: usize, t: f64) -> f64 {
    let lam = g.lambda(mode);
    let q = g.weight(mode);
    if lam == 0.0 {
        q * q * t
    } else {
        q * q * (-(-2.0 * lam * t).exp_m1()) / (2.0 * lam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_preset, Diffusion, Drift, ParamMap, WeightedNorm};
    use crate::rng::pairwise_sum;

    fn ou(theta: f64, sigma0: f64) -> Model {
        let mut p = ParamMap::new();
        p.insert("theta".into(), theta);
        p.insert("sigma0".into(), sigma0);
        build_preset("ou", &p).unwrap()
    }

    fn deterministic(drift: Drift, level: f64, dim: usize) -> Model {
        Model::Diffusion(
            DiffusionModel::new(
                dim,
                drift,
                Diffusion::Constant { level },
                WeightedNorm::uniform(dim, 1.0).unwrap(),
                0.0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let m = deterministic(Drift::Zero, 0.0, 2);
        let cfg = SimConfig::new(3.0, 0.01, 1, Scheme::Euler).unwrap();
        let end = simulate(&m, &[1.0, 2.0], &cfg, 0).unwrap();
        assert_eq!(end, vec![1.0, 2.0]);
    }

    #[test]
    fn noiseless_ou_matches_ode() {
        let m = deterministic(Drift::Linear { rate: 1.0 }, 0.0, 1);
        let cfg = SimConfig::new(1.0, 1e-4, 1, Scheme::Euler).unwrap();
        let end = simulate(&m, &[1.0], &cfg, 0).unwrap();
        assert!((end[0] - (-1.0f64).exp()).abs() < 1e-3, "{}", end[0]);
    }

    #[test]
    fn ou_monte_carlo_mean_matches_closed_form() {
        // E X_t = x0 e^{-theta t}; theta = 1, x0 = 2, t = 1.
        let m = ou(1.0, 1.0);
        let cfg = SimConfig::new(1.0, 1e-3, 7, Scheme::Euler).unwrap();
        let n = 100_000u64;
        let vals: Vec<f64> = (0..n)
            .map(|r| simulate(&m, &[2.0], &cfg, r).unwrap()[0])
            .collect();
        let mean = pairwise_sum(&vals) / n as f64;
        let s2 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let stderr = (s2 / n as f64).sqrt();
        let exact = 2.0 * (-1.0f64).exp();
        assert!(
            (mean - exact).abs() < 3.0 * stderr + 1e-3,
            "mean {mean} vs {exact}, stderr {stderr}"
        );
    }

    #[test]
    fn weak_error_of_the_mean_decays_first_order() {
        // For constant sigma the Euler mean is exactly x0 (1 - theta dt)^N;
        // that recursion is the oracle for the dt-bias of the MC mean.
        let theta = 1.0f64;
        let x0 = 2.0;
        let exact = x0 * (-theta).exp();
        let euler_mean = |dt: f64| x0 * (1.0 - theta * dt).powi((1.0 / dt).round() as i32);
        let bias2 = euler_mean(1e-2) - exact;
        let bias3 = euler_mean(1e-3) - exact;
        let bias4 = euler_mean(1e-4) - exact;
        assert!(bias2 / bias3 > 8.0 && bias2 / bias3 < 12.0);
        assert!(bias3 / bias4 > 8.0 && bias3 / bias4 < 12.0);
        // fitted slope from the coarsest level bounds the finer ones
        let c = bias2.abs() / 1e-2;
        let m = ou(theta, 1.0);
        for (dt, n) in [(1e-2, 40_000u64), (1e-3, 40_000)] {
            let cfg = SimConfig::new(1.0, dt, 11, Scheme::Euler).unwrap();
            let vals: Vec<f64> = (0..n)
                .map(|r| simulate(&m, &[x0], &cfg, r).unwrap()[0])
                .collect();
            let mean = pairwise_sum(&vals) / n as f64;
            let s2 =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            let stderr = (s2 / n as f64).sqrt();
            assert!(
                (mean - exact).abs() <= 3.0 * stderr + c * dt,
                "dt={dt}: |{mean} - {exact}| > 3*{stderr} + {}",
                c * dt
            );
        }
    }

    #[test]
    fn coupling_preserves_coincidence_and_swaps_exactly() {
        let model = build_preset("tanh_perturbed", &ParamMap::new()).unwrap();
        let cfg = SimConfig::new(0.5, 1e-3, 3, Scheme::Euler).unwrap();
        let same = simulate_coupled(&model, &[0.7], &[0.7], &cfg, 5).unwrap();
        assert_eq!(same.x_end, same.y_end);

        let ab = simulate_coupled(&model, &[1.0], &[-0.5], &cfg, 5).unwrap();
        let ba = simulate_coupled(&model, &[-0.5], &[1.0], &cfg, 5).unwrap();
        assert_eq!(ab.x_end, ba.y_end);
        assert_eq!(ab.y_end, ba.x_end);
        assert_eq!(ab.increments_consumed, 500);
    }

    #[test]
    fn coupled_difference_is_deterministic_for_constant_sigma() {
        // d(X-Y) = -theta (X-Y) dt exactly; theta = 0.5, t = 1, gap 1.
        let m = ou(0.5, 1.0);
        let cfg = SimConfig::new(1.0, 1e-3, 17, Scheme::Euler).unwrap();
        let e = simulate_coupled(&m, &[1.0], &[0.0], &cfg, 3).unwrap();
        let diff = e.x_end[0] - e.y_end[0];
        let exact = (-0.5f64).exp();
        assert!((diff - exact).abs() < 10.0 * cfg.dt, "diff {diff} vs {exact}");
    }

    #[test]
    fn coupling_contracts_at_the_certified_rate() {
        // tanh-perturbed model, K = -1.99: MC mean of the weighted squared
        // difference stays below e^{Kt} d0^2 within noise + O(dt).
        let model = build_preset("tanh_perturbed", &ParamMap::new()).unwrap();
        let m = model.as_diffusion().unwrap();
        let cfg = SimConfig::new(1.0, 1e-3, 23, Scheme::Euler).unwrap();
        let (x0, y0) = ([0.8], [-0.4]);
        let d0 = m.sigma0.dist_sq(&x0, &y0).unwrap();
        let n = 20_000u64;
        let vals: Vec<f64> = (0..n)
            .map(|r| {
                let e = simulate_coupled(&model, &x0, &y0, &cfg, r).unwrap();
                let d = [e.x_end[0] - e.y_end[0]];
                m.sigma0.norm_sq(&d).unwrap()
            })
            .collect();
        let mean = pairwise_sum(&vals) / n as f64;
        let s2 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let rel_stderr = (s2 / n as f64).sqrt() / mean;
        let bound = (m.k * 1.0).exp() * d0;
        assert!(
            mean <= bound * (1.0 + 3.0 * rel_stderr + 10.0 * cfg.dt),
            "mean {mean} vs bound {bound}"
        );
    }

    #[test]
    fn simulate_is_bit_reproducible() {
        let model = build_preset("galerkin_heat", &ParamMap::new()).unwrap();
        let g = model.as_galerkin().unwrap().at_level(8).unwrap();
        let m = Model::Galerkin(g);
        let cfg = SimConfig::new(0.25, 1e-3, 99, Scheme::ExponentialEuler).unwrap();
        let x0 = vec![0.5; 8];
        let a = simulate(&m, &x0, &cfg, 12).unwrap();
        let b = simulate(&m, &x0, &cfg, 12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncations_share_mode_noise() {
        // identical replicate => the first n modes of a finer truncation
        // evolve exactly like the coarser truncation when F and sigma1 are
        // diagonal-in-mode (here: additive case).
        let mut p = ParamMap::new();
        p.insert("f_scale".into(), 0.0);
        p.insert("sigma1_scale".into(), 0.0);
        p.insert("level".into(), 16.0);
        let base = build_preset("galerkin_heat", &p).unwrap();
        let g16 = base.as_galerkin().unwrap();
        let g4 = g16.at_level(4).unwrap();
        let cfg = SimConfig::new(0.5, 1e-3, 5, Scheme::ExponentialEuler).unwrap();
        let x16 = simulate(&Model::Galerkin(g16.clone()), &[0.0; 16], &cfg, 2).unwrap();
        let x4 = simulate(&Model::Galerkin(g4), &[0.0; 4], &cfg, 2).unwrap();
        for i in 0..4 {
            assert_eq!(x16[i], x4[i], "mode {i} diverged between levels");
        }
    }

    #[test]
    fn explosion_guard_fires_on_unstable_scheme() {
        // Euler on the stiff Galerkin family: lambda_64 dt = 40 >> 2 blows up.
        let model = build_preset("galerkin_heat", &ParamMap::new()).unwrap();
        let cfg = SimConfig::new(1.0, 1e-3, 1, Scheme::Euler).unwrap();
        let err = simulate(&model, &vec![1.0; 64], &cfg, 0).unwrap_err();
        assert!(matches!(err, LabError::Explosion { .. }), "{err}");
    }

    #[test]
    fn stochastic_convolution_matches_closed_form_variances() {
        // lambda = (1, 4), q = (1, 0.5), t = 1: variances
        // ((1-e^-2)/2, 0.25 (1-e^-8)/8). Realized by a custom family with
        // lambda_scale = 1 and weights pinned through q_decay? Not possible
        // exactly: use a direct two-mode model via lambda_scale = 1 and
        // explicit check of the closed form instead.
        let g = GalerkinModel::new(2, 1.0, 0.3, 0.0, 0.0, 0.0).unwrap();
        // closed form from the Ito isometry
        let v1 = stochastic_convolution_variance(&g, 1, 1.0);
        let v2 = stochastic_convolution_variance(&g, 2, 1.0);
        let q1 = g.weight(1);
        let q2 = g.weight(2);
        assert!((v1 - q1 * q1 * (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
        assert!((v2 - q2 * q2 * (1.0 - (-8.0f64).exp()) / 8.0).abs() < 1e-15);

        // empirical variances over many exact draws match within 1%
        let n = 1_000_000u64;
        let mut sums = [0.0f64; 2];
        let mut sq = [0.0f64; 2];
        for d in 0..n {
            let z = sample_stochastic_convolution(&g, 1.0, 31, d).unwrap();
            for i in 0..2 {
                sums[i] += z[i];
                sq[i] += z[i] * z[i];
            }
        }
        for (i, v_exact) in [v1, v2].iter().enumerate() {
            let mean = sums[i] / n as f64;
            let var = sq[i] / n as f64 - mean * mean;
            assert!(
                (var - v_exact).abs() < 0.01 * v_exact,
                "mode {i}: {var} vs {v_exact}"
            );
        }
    }

    #[test]
    fn convolution_variance_limits() {
        // Brownian case lambda = 0: variance q^2 t.
        let g = GalerkinModel::new(1, 0.0, 0.3, 0.0, 0.0, 0.0).unwrap();
        let q = g.weight(1);
        assert!((stochastic_convolution_variance(&g, 1, 2.0) - q * q * 2.0).abs() < 1e-15);
        // stationary OU limit: q^2/(2 lambda)
        let g = GalerkinModel::new(1, 1.0, 0.3, 0.0, 0.0, 0.0).unwrap();
        let q = g.weight(1);
        let v = stochastic_convolution_variance(&g, 1, 200.0);
        assert!((v - q * q / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sim_config_validates_grid() {
        assert!(SimConfig::new(1.0, 3e-4, 0, Scheme::Euler).is_err());
        assert!(SimConfig::new(1.0, 2e-3, 0, Scheme::Euler).is_ok());
        assert!(SimConfig::new(0.0, 1e-3, 0, Scheme::Euler).is_err());
        let cfg = SimConfig::new(2.0, 1e-3, 0, Scheme::Euler).unwrap();
        assert_eq!(cfg.steps(), 2000);
    }
}
