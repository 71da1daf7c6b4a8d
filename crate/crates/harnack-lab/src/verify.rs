//! Pass/fail verification of each semigroup inequality, with explicit
//! statistical and discretization tolerances.
//!
//! Paired quantities (the two points of the log-Harnack bound, the two
//! paths of a coupling, truncations at different levels) always share their
//! random numbers; the counter-based noise makes that automatic and keeps
//! every report reproducible bit for bit from its metadata.

use crate::engine::{simulate, simulate_coupled, SimConfig};
use crate::error::{LabError, Result};
use crate::estimator::{estimate_log_semigroup, estimate_semigroup, MCEstimate, TestFunction};
use crate::model::{harnack_constant, GalerkinModel, Model};
use crate::oracle1d::{adjoint_apply, band_range, dd_identity_gap, solve_backward, Grid1D, GridKernel};
use crate::transport::{w0_exact, w0_sinkhorn, DiscreteMeasure};
use crate::model::WeightedNorm;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

/// Relative allowance for deterministic (oracle-backed) comparisons.
pub const ORACLE_TOL: f64 = 5e-3;

/// One verified inequality. `slack = rhs − lhs`; the verdict passes when
/// `slack ≥ −tolerance` (and `slack ≤ tolerance` as well for two-sided
/// checks, recorded in the metadata).
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub verdict: bool,
    pub metadata: serde_json::Value,
}

impl VerificationReport {
    fn one_sided(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        mut metadata: serde_json::Value,
    ) -> Result<Self> {
        let slack = rhs - lhs;
        if !lhs.is_finite() || !rhs.is_finite() || !tolerance.is_finite() {
            return Err(LabError::Solver(format!(
                "non-finite report values: lhs = {lhs}, rhs = {rhs}, tol = {tolerance}"
            )));
        }
        metadata["comparison"] = json!("one_sided");
        Ok(VerificationReport {
            name: name.into(),
            lhs,
            rhs,
            slack,
            tolerance,
            verdict: slack >= -tolerance,
            metadata,
        })
    }

    fn two_sided(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        mut metadata: serde_json::Value,
    ) -> Result<Self> {
        let slack = rhs - lhs;
        if !lhs.is_finite() || !rhs.is_finite() || !tolerance.is_finite() {
            return Err(LabError::Solver(format!(
                "non-finite report values: lhs = {lhs}, rhs = {rhs}, tol = {tolerance}"
            )));
        }
        metadata["comparison"] = json!("two_sided");
        Ok(VerificationReport {
            name: name.into(),
            lhs,
            rhs,
            slack,
            tolerance,
            verdict: slack.abs() <= tolerance,
            metadata,
        })
    }
}

fn model_meta(model: &Model) -> serde_json::Value {
    serde_json::to_value(model).unwrap_or(serde_json::Value::Null)
}

// ---------------------------------------------------------------------------
// Log-Harnack
// ---------------------------------------------------------------------------

/// Monte Carlo check of
/// `P_t log f(x) ≤ log P_t f(y) + c_t ‖σ̃₀⁻¹(x−y)‖²`
/// with common random numbers across the two starting points.
#[allow(clippy::too_many_arguments)]
pub fn verify_log_harnack_mc(
    name: &str,
    model: &Model,
    x: &[f64],
    y: &[f64],
    t: f64,
    f: &TestFunction,
    n: usize,
    cfg: &SimConfig,
) -> Result<VerificationReport> {
    let cfg = cfg.with_t(t)?;
    let lhs_est = estimate_log_semigroup(model, x, f, n, &cfg)?;
    let rhs_est = estimate_semigroup(model, y, f, n, &cfg)?;
    if rhs_est.mean <= 0.0 {
        return Err(LabError::PositivityViolation { value: rhs_est.mean });
    }
    let c_t = harnack_constant(model.k(), t)?;
    let d2 = model.sigma0().dist_sq(x, y)?;
    let lhs = lhs_est.mean;
    let rhs = rhs_est.mean.ln() + c_t * d2;
    let propagated = (lhs_est.stderr.powi(2) + (rhs_est.stderr / rhs_est.mean).powi(2)).sqrt();
    let tolerance = 3.0 * propagated + 10.0 * cfg.dt;
    VerificationReport::one_sided(
        name,
        lhs,
        rhs,
        tolerance,
        json!({
            "check": "log_harnack",
            "backend": "mc",
            "model": model_meta(model),
            "x": x, "y": y, "t": t,
            "f": f,
            "n": n, "dt": cfg.dt, "seed": cfg.seed, "scheme": cfg.scheme,
            "c_t": c_t, "dist_sq": d2,
            "lhs_stderr": lhs_est.stderr, "rhs_stderr": rhs_est.stderr,
        }),
    )
}

/// Deterministic grid-oracle version of the same inequality (1-D models).
#[allow(clippy::too_many_arguments)]
pub fn verify_log_harnack_oracle(
    name: &str,
    model: &Model,
    x: f64,
    y: f64,
    t: f64,
    f: &TestFunction,
    grid: &Grid1D,
    dt_pde: f64,
) -> Result<VerificationReport> {
    let m = model
        .as_diffusion()
        .ok_or_else(|| LabError::Usage("oracle backend needs a 1-D diffusion model".into()))?;
    let f_grid = grid.sample(f);
    if f_grid.iter().any(|v| *v <= 0.0) {
        return Err(LabError::PositivityViolation {
            value: f_grid.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    let log_f: Vec<f64> = f_grid.iter().map(|v| v.ln()).collect();
    let p_log_f = solve_backward(m, &log_f, t, grid, dt_pde)?;
    let p_f = solve_backward(m, &f_grid, t, grid, dt_pde)?;
    let c_t = harnack_constant(m.k, t)?;
    let d2 = m.sigma0.dist_sq(&[x], &[y])?;
    let lhs = grid.interpolate(&p_log_f, x)?;
    let rhs = grid.interpolate(&p_f, y)?.ln() + c_t * d2;
    let tolerance = ORACLE_TOL * (1.0 + rhs.abs());
    VerificationReport::one_sided(
        name,
        lhs,
        rhs,
        tolerance,
        json!({
            "check": "log_harnack",
            "backend": "oracle",
            "model": model_meta(model),
            "x": x, "y": y, "t": t,
            "f": f,
            "grid": grid, "dt_pde": dt_pde,
            "c_t": c_t, "dist_sq": d2,
        }),
    )
}

/// Sharpness of the Harnack constant: evaluate the slack along a
/// displacement sweep and test that at `d_star` it vanishes to within
/// `bound`. Both semigroup fields come from one backward solve each.
#[allow(clippy::too_many_arguments)]
pub fn verify_sharpness(
    name: &str,
    model: &Model,
    f: &TestFunction,
    t: f64,
    d_star: f64,
    d_sweep: &[f64],
    bound: f64,
    grid: &Grid1D,
    dt_pde: f64,
) -> Result<VerificationReport> {
    let m = model
        .as_diffusion()
        .ok_or_else(|| LabError::Usage("sharpness check needs a 1-D diffusion model".into()))?;
    let f_grid = grid.sample(f);
    if f_grid.iter().any(|v| *v <= 0.0) {
        return Err(LabError::PositivityViolation {
            value: f_grid.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    let log_f: Vec<f64> = f_grid.iter().map(|v| v.ln()).collect();
    let p_log_f = solve_backward(m, &log_f, t, grid, dt_pde)?;
    let p_f = solve_backward(m, &f_grid, t, grid, dt_pde)?;
    let c_t = harnack_constant(m.k, t)?;
    let log_p_f_at_0 = grid.interpolate(&p_f, 0.0)?.ln();
    let slack_at = |d: f64| -> Result<f64> {
        let lhs = grid.interpolate(&p_log_f, d)?;
        let d2 = m.sigma0.dist_sq(&[d], &[0.0])?;
        Ok(log_p_f_at_0 + c_t * d2 - lhs)
    };
    let sweep: Vec<(f64, f64)> = d_sweep
        .iter()
        .map(|d| Ok((*d, slack_at(*d)?)))
        .collect::<Result<Vec<_>>>()?;
    let at_star = slack_at(d_star)?;
    VerificationReport::two_sided(
        name,
        at_star.abs(),
        0.0,
        bound,
        json!({
            "check": "sharpness",
            "model": model_meta(model),
            "f": f, "t": t,
            "d_star": d_star,
            "slack_at_d_star": at_star,
            "sweep": sweep,
            "grid": grid, "dt_pde": dt_pde,
            "c_t": c_t,
        }),
    )
}

// ---------------------------------------------------------------------------
// Coupling contraction
// ---------------------------------------------------------------------------

/// Synchronous-coupling contraction:
/// `E ‖σ̃₀⁻¹(X_t − Y_t)‖² ≤ e^{Kt} ‖σ̃₀⁻¹(x − y)‖²`.
pub fn verify_coupling_contraction(
    name: &str,
    model: &Model,
    x: &[f64],
    y: &[f64],
    t: f64,
    n: usize,
    cfg: &SimConfig,
) -> Result<VerificationReport> {
    let norm = model.sigma0();
    let d0 = norm.dist_sq(x, y)?;
    if d0 == 0.0 {
        return Err(LabError::Usage(
            "coupling contraction needs distinct starting points".into(),
        ));
    }
    let cfg = cfg.with_t(t)?;
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let e = simulate_coupled(model, x, y, &cfg, r)?;
            let diff: Vec<f64> = e.x_end.iter().zip(&e.y_end).map(|(a, b)| a - b).collect();
            norm.norm_sq(&diff)
        })
        .collect::<Result<Vec<f64>>>()?;
    let est = MCEstimate::from_values(&values)?;
    let rhs = (model.k() * t).exp() * d0;
    let tolerance = 3.0 * est.stderr + 10.0 * cfg.dt * rhs;
    VerificationReport::one_sided(
        name,
        est.mean,
        rhs,
        tolerance,
        json!({
            "check": "coupling_contraction",
            "model": model_meta(model),
            "x": x, "y": y, "t": t,
            "n": n, "dt": cfg.dt, "seed": cfg.seed, "scheme": cfg.scheme,
            "dist0_sq": d0,
            "stderr": est.stderr,
            "ratio": est.mean / rhs,
        }),
    )
}

// ---------------------------------------------------------------------------
// Gradient estimate
// ---------------------------------------------------------------------------

/// Grid check of `‖σ̃₀ ∇P_t f‖² ≤ e^{Kt} P_t ‖σ̃₀ ∇f‖²` over the interior
/// evaluation band; reports the node with the largest violation.
pub fn verify_gradient_estimate(
    name: &str,
    model: &Model,
    f: &TestFunction,
    t: f64,
    grid: &Grid1D,
    dt_pde: f64,
) -> Result<VerificationReport> {
    let m = model
        .as_diffusion()
        .ok_or_else(|| LabError::Usage("gradient check needs a 1-D diffusion model".into()))?;
    let q = m.sigma0.weights()[0];
    let f_grid = grid.sample(f);
    let u = solve_backward(m, &f_grid, t, grid, dt_pde)?;
    let grad_u = grid.gradient(&u);
    let grad_f = grid.gradient(&f_grid);
    let carre_f: Vec<f64> = grad_f.iter().map(|g| (q * g) * (q * g)).collect();
    let w = solve_backward(m, &carre_f, t, grid, dt_pde)?;
    let scale = (m.k * t).exp();
    let (b0, b1) = band_range(grid);
    let mut worst_violation = f64::NEG_INFINITY;
    let mut worst = (0usize, 0.0, 0.0);
    let mut max_rhs = 0.0f64;
    let mut max_abs_gap = 0.0f64;
    for i in b0..b1 {
        let lhs = (q * grad_u[i]) * (q * grad_u[i]);
        let rhs = scale * w[i];
        max_rhs = max_rhs.max(rhs);
        max_abs_gap = max_abs_gap.max((lhs - rhs).abs());
        if lhs - rhs > worst_violation {
            worst_violation = lhs - rhs;
            worst = (i, lhs, rhs);
        }
    }
    let tolerance = ORACLE_TOL * (1.0 + max_rhs);
    VerificationReport::one_sided(
        name,
        worst.1,
        worst.2,
        tolerance,
        json!({
            "check": "gradient_estimate",
            "model": model_meta(model),
            "f": f, "t": t,
            "grid": grid, "dt_pde": dt_pde,
            "worst_node_x": grid.node(worst.0),
            "max_rhs": max_rhs,
            "max_abs_gap": max_abs_gap,
            "band": [grid.node(b0), grid.node(b1 - 1)],
        }),
    )
}

// ---------------------------------------------------------------------------
// Entropy-production identity
// ---------------------------------------------------------------------------

/// Wrap the deterministic identity gap as a report with a relative
/// tolerance on the gap.
#[allow(clippy::too_many_arguments)]
pub fn verify_dd_identity(
    name: &str,
    model: &Model,
    f: &TestFunction,
    t: f64,
    s_list: &[f64],
    grid: &Grid1D,
    dt_pde: f64,
    rel_tol: f64,
) -> Result<VerificationReport> {
    let m = model
        .as_diffusion()
        .ok_or_else(|| LabError::Usage("identity check needs a 1-D diffusion model".into()))?;
    let gap = dd_identity_gap(m, f, t, s_list, grid, dt_pde)?;
    // report the worst point; tolerance is relative to the field scale
    VerificationReport::two_sided(
        name,
        gap.worst.2,
        gap.worst.3,
        rel_tol * gap.rhs_scale.max(1e-9),
        json!({
            "check": "dd_identity",
            "model": model_meta(model),
            "f": f, "t": t, "s_list": s_list,
            "grid": grid, "dt_pde": dt_pde,
            "max_abs_gap": gap.max_abs_gap,
            "rel_gap": gap.rel_gap,
            "rhs_scale": gap.rhs_scale,
            "worst_s": gap.worst.0,
            "worst_x": gap.worst.1,
        }),
    )
}

// ---------------------------------------------------------------------------
// Strong-Feller modulus
// ---------------------------------------------------------------------------

/// Result rows of the modulus sweep, kept for the plot CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusPoint {
    pub distance: f64,
    pub modulus: f64,
    pub eps_opt: f64,
}

/// Check the regularization bound
/// `P_t f(y) − ε‖f‖²_∞ ≤ ε⁻¹ log(1 + ε P_t f(x)) + c_t ‖x−y‖₀² / ε`
/// over a log-spaced ε sweep for every `y = x + d`, and extract the
/// ε-optimized continuity modulus `min_ε [bound(ε) − P_t f(x)]`.
#[allow(clippy::too_many_arguments)]
pub fn verify_feller_modulus(
    name_prefix: &str,
    model: &Model,
    f: &TestFunction,
    t: f64,
    x: f64,
    distances: &[f64],
    eps_lo: f64,
    eps_hi: f64,
    eps_points: usize,
    modulus_threshold: f64,
    grid: &Grid1D,
    dt_pde: f64,
) -> Result<(Vec<VerificationReport>, Vec<ModulusPoint>)> {
    let m = model
        .as_diffusion()
        .ok_or_else(|| LabError::Usage("feller check needs a 1-D diffusion model".into()))?;
    if !(eps_lo > 0.0) || !(eps_hi > eps_lo) || eps_points < 2 {
        return Err(LabError::Usage("bad epsilon sweep".into()));
    }
    let f_grid = grid.sample(f);
    if f_grid.iter().any(|v| *v < 0.0) {
        return Err(LabError::Usage(
            "feller modulus needs a nonnegative bounded test function".into(),
        ));
    }
    let f_sup = f_grid.iter().cloned().fold(0.0, f64::max);
    let u = solve_backward(m, &f_grid, t, grid, dt_pde)?;
    let c_t = harnack_constant(m.k, t)?;
    let u_x = grid.interpolate(&u, x)?;
    let q = m.sigma0.weights()[0];

    let eps_at = |k: usize| -> f64 {
        let s = k as f64 / (eps_points - 1) as f64;
        eps_lo * (eps_hi / eps_lo).powf(s)
    };

    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, 0.0, 0.0); // (norm gap, lhs, rhs, d, eps)
    let mut moduli = Vec::new();
    for &d in distances {
        let y = x + d;
        let u_y = grid.interpolate(&u, y)?;
        let d2 = (x - y) * (x - y) / (q * q);
        let mut best_bound = f64::INFINITY;
        let mut best_eps = eps_lo;
        for k in 0..eps_points {
            let eps = eps_at(k);
            let lhs = u_y - eps * f_sup * f_sup;
            let rhs = (1.0 + eps * u_x).ln() / eps + c_t * d2 / eps;
            let normalized = (lhs - rhs) / (1.0 + rhs.abs());
            if normalized > worst.0 {
                worst = (normalized, lhs, rhs, d, eps);
            }
            let bound = rhs + eps * f_sup * f_sup;
            if bound < best_bound {
                best_bound = bound;
                best_eps = eps;
            }
        }
        moduli.push(ModulusPoint {
            distance: d,
            modulus: best_bound - u_x,
            eps_opt: best_eps,
        });
    }

    let mut reports = Vec::new();
    reports.push(VerificationReport::one_sided(
        format!("{name_prefix}/inequality"),
        worst.1,
        worst.2,
        ORACLE_TOL * (1.0 + worst.2.abs()),
        json!({
            "check": "feller_inequality",
            "model": model_meta(model),
            "f": f, "t": t, "x": x,
            "worst_distance": worst.3,
            "worst_eps": worst.4,
            "eps_sweep": [eps_lo, eps_hi, eps_points],
            "grid": grid, "dt_pde": dt_pde,
        }),
    )?);

    // modulus must decrease with the distance (checked along the list as
    // given, which callers order from large to small)
    let mut max_increase = f64::NEG_INFINITY;
    for w in moduli.windows(2) {
        max_increase = max_increase.max(w[1].modulus - w[0].modulus);
    }
    if moduli.len() >= 2 {
        reports.push(VerificationReport::one_sided(
            format!("{name_prefix}/modulus_monotone"),
            max_increase,
            0.0,
            1e-4,
            json!({
                "check": "feller_modulus_monotone",
                "moduli": moduli,
                "t": t, "x": x,
            }),
        )?);
    }
    let last = moduli
        .last()
        .ok_or_else(|| LabError::Usage("no distances given".into()))?;
    reports.push(VerificationReport::one_sided(
        format!("{name_prefix}/modulus_small"),
        last.modulus,
        modulus_threshold,
        0.0,
        json!({
            "check": "feller_modulus_small",
            "distance": last.distance,
            "t": t, "x": x,
        }),
    )?);
    Ok((reports, moduli))
}

// ---------------------------------------------------------------------------
// Heat-kernel entropy and entropy-cost
// ---------------------------------------------------------------------------

fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// Heat-kernel entropy bound for an invariant reference measure:
/// `Σ_z p_t(x,z) log p_t(x,z) μ(z) ≤ −log Σ_y exp(−c_t ‖x−y‖₀²) μ(y)`.
pub fn verify_heat_kernel_entropy(
    name: &str,
    kernel: &GridKernel,
    k_disspativity: f64,
    x_value: f64,
) -> Result<VerificationReport> {
    let grid = kernel.grid;
    let xi = grid.nearest_index(x_value);
    let c_t = harnack_constant(k_disspativity, kernel.t)?;
    let q = kernel.sigma0_weight;
    // relative entropy of the row against mu
    let lhs: f64 = (0..grid.points)
        .map(|z| {
            let kv = kernel.kernel[xi][z];
            if kv > 0.0 {
                kv * (kv / kernel.mu[z]).ln()
            } else {
                0.0
            }
        })
        .sum();
    let x = grid.node(xi);
    let integral: f64 = (0..grid.points)
        .map(|j| {
            let d = (x - grid.node(j)) / q;
            (-c_t * d * d).exp() * kernel.mu[j]
        })
        .sum();
    let rhs = -integral.ln();
    let tolerance = ORACLE_TOL * (1.0 + rhs.abs());
    VerificationReport::one_sided(
        name,
        lhs,
        rhs,
        tolerance,
        json!({
            "check": "heat_kernel_entropy",
            "t": kernel.t,
            "k": k_disspativity,
            "c_t": c_t,
            "x": x,
            "grid": grid,
            "boundary_mass": kernel.boundary_mass(xi),
        }),
    )
}

/// Entropy-cost inequality for the adjoint semigroup:
/// `μ((P_t* f) log P_t* f) ≤ c_t · W₀(fμ, μ)²` for densities with μ(f) = 1.
pub fn verify_entropy_cost(
    name: &str,
    kernel: &GridKernel,
    k_dissipativity: f64,
    f: &[f64],
    sinkhorn_epsilon: Option<f64>,
) -> Result<Vec<VerificationReport>> {
    let grid = kernel.grid;
    let n = grid.points;
    if f.len() != n {
        return Err(LabError::Usage("density has wrong length".into()));
    }
    if f.iter().any(|v| *v < 0.0) {
        return Err(LabError::Usage("density must be nonnegative".into()));
    }
    let mass: f64 = f.iter().zip(&kernel.mu).map(|(fi, mi)| fi * mi).sum();
    if (mass - 1.0).abs() > 1e-8 {
        return Err(LabError::Usage(format!(
            "density integrates to {mass}, expected 1 within 1e-8"
        )));
    }
    let p_star_f = adjoint_apply(kernel, f)?;
    let lhs: f64 = p_star_f
        .iter()
        .zip(&kernel.mu)
        .map(|(v, m)| m * xlogx(*v))
        .sum();

    let nodes = grid.nodes();
    let f_mu: Vec<f64> = f.iter().zip(&kernel.mu).map(|(fi, mi)| fi * mi).collect();
    let mu1 = DiscreteMeasure::on_grid(&nodes, &f_mu)?;
    let mu2 = DiscreteMeasure::on_grid(&nodes, &kernel.mu)?;
    let norm = WeightedNorm::uniform(1, kernel.sigma0_weight)?;
    let (cost, plan) = w0_exact(&mu1, &mu2, &norm)?;
    let c_t = harnack_constant(k_dissipativity, kernel.t)?;
    let rhs = c_t * cost;
    let tolerance = ORACLE_TOL * (1.0 + rhs.abs());
    let mut reports = vec![VerificationReport::one_sided(
        name,
        lhs,
        rhs,
        tolerance,
        json!({
            "check": "entropy_cost",
            "t": kernel.t,
            "k": k_dissipativity,
            "c_t": c_t,
            "w0_cost": cost,
            "w0_duality_gap": plan.duality_gap,
            "w0_marginal_error": plan.marginal_error,
            "grid": grid,
        }),
    )?];

    if let Some(eps) = sinkhorn_epsilon {
        let (s_cost, s_plan) = w0_sinkhorn(&mu1, &mu2, &norm, eps)?;
        let bound = eps * (n as f64).ln() + 1e-6;
        reports.push(VerificationReport::one_sided(
            format!("{name}/sinkhorn"),
            (s_cost - cost).abs(),
            bound,
            0.0,
            json!({
                "check": "sinkhorn_vs_exact",
                "epsilon": eps,
                "exact_cost": cost,
                "sinkhorn_cost": s_cost,
                "sinkhorn_marginal_error": s_plan.marginal_error,
                "upper_bound_holds": s_cost >= cost - 1e-12,
            }),
        )?);
    }
    Ok(reports)
}

/// Density constructors for the entropy-cost checks: `uniform` (f = 1),
/// `shift1` (μ pushed one cell to the right, as a density against μ), and
/// `right_half` (renormalized indicator of the right half of the grid).
/// All satisfy μ(f) = 1.
pub fn named_density(kernel: &GridKernel, name: &str) -> Result<Vec<f64>> {
    let n = kernel.grid.points;
    let mu = &kernel.mu;
    match name {
        "uniform" => Ok(vec![1.0; n]),
        "shift1" => {
            // target measure v_i = mu_{i-1}; density f_i = v_i / (mu_i Σv)
            let mut v = vec![0.0; n];
            for i in 1..n {
                v[i] = mu[i - 1];
            }
            let total: f64 = v.iter().sum();
            if total <= 0.0 {
                return Err(LabError::Usage("shifted measure has no mass".into()));
            }
            Ok(v.iter().zip(mu).map(|(vi, mi)| vi / (mi * total)).collect())
        }
        "right_half" => {
            let half_mass: f64 = mu[n / 2..].iter().sum();
            if half_mass <= 0.0 {
                return Err(LabError::Usage("right half carries no mass".into()));
            }
            Ok((0..n)
                .map(|i| if i >= n / 2 { 1.0 / half_mass } else { 0.0 })
                .collect())
        }
        other => Err(LabError::Config(format!(
            "unknown density `{other}` (known: uniform, shift1, right_half)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Galerkin convergence
// ---------------------------------------------------------------------------

/// Per-level convergence data for the plot CSV.
#[derive(Debug, Clone, Serialize)]
pub struct LevelError {
    pub level: usize,
    pub d: f64,
    pub stderr: f64,
    /// closed-form value when the model is additive, else NaN-free 0
    pub tail: Option<f64>,
}

/// Closed-form `Σ_{i=n+1}^{ref} qᵢ² (1−e^{−2λᵢt}) / (2λᵢ)`: the exact mean
/// of `‖X^n_t − X^{ref}_t‖²` for the additive model under shared noise
/// (modes above the reference level cancel in the measured difference).
pub fn additive_tail(g: &GalerkinModel, n: usize, ref_level: usize, t: f64) -> f64 {
    (n + 1..=ref_level)
        .map(|i| crate::engine::stochastic_convolution_variance(g, i, t))
        .sum()
}

/// Simulate all truncation levels with shared mode noise and compare each
/// level's endpoint with the reference level.
///
/// With `compare_tail` (additive models) each level's error must match the
/// closed-form tail within 3 standard errors; otherwise the errors must be
/// nonincreasing within confidence bands and the last-to-first ratio must
/// stay below `max_ratio`.
#[allow(clippy::too_many_arguments)]
pub fn verify_galerkin_convergence(
    name_prefix: &str,
    g: &GalerkinModel,
    levels: &[usize],
    ref_level: usize,
    x0: &[f64],
    t: f64,
    n_mc: usize,
    cfg: &SimConfig,
    compare_tail: bool,
    max_ratio: f64,
) -> Result<(Vec<VerificationReport>, Vec<LevelError>)> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Usage("levels must be strictly increasing".into()));
    }
    if *levels.last().unwrap() >= ref_level {
        return Err(LabError::Usage("reference level must exceed all levels".into()));
    }
    if x0.len() > levels[0] {
        return Err(LabError::Usage(
            "x0 must lie in the span of the smallest level".into(),
        ));
    }
    let cfg = cfg.with_t(t)?;
    let models: Vec<Model> = levels
        .iter()
        .map(|n| Ok(Model::Galerkin(g.at_level(*n)?)))
        .collect::<Result<Vec<_>>>()?;
    let ref_model = Model::Galerkin(g.at_level(ref_level)?);
    let pad = |dim: usize| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[..x0.len()].copy_from_slice(x0);
        v
    };

    // per replicate: ‖X^n − X^ref‖² for every level, sharing the noise
    let per_level: Vec<Vec<f64>> = (0..n_mc as u64)
        .into_par_iter()
        .map(|r| {
            let x_ref = simulate(&ref_model, &pad(ref_level), &cfg, r)?;
            levels
                .iter()
                .zip(&models)
                .map(|(n, model)| {
                    let x_n = simulate(model, &pad(*n), &cfg, r)?;
                    let mut d2 = 0.0;
                    for i in 0..ref_level {
                        let xi = if i < *n { x_n[i] } else { 0.0 };
                        let diff = xi - x_ref[i];
                        d2 += diff * diff;
                    }
                    Ok(d2)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let mut level_errors = Vec::new();
    let mut estimates = Vec::new();
    for (k, n) in levels.iter().enumerate() {
        let vals: Vec<f64> = per_level.iter().map(|row| row[k]).collect();
        let est = MCEstimate::from_values(&vals)?;
        let tail = compare_tail.then(|| additive_tail(g, *n, ref_level, t));
        level_errors.push(LevelError {
            level: *n,
            d: est.mean,
            stderr: est.stderr,
            tail,
        });
        estimates.push(est);
    }

    let mut reports = Vec::new();
    if compare_tail {
        for (le, est) in level_errors.iter().zip(&estimates) {
            reports.push(VerificationReport::two_sided(
                format!("{name_prefix}/tail/n={}", le.level),
                le.d,
                le.tail.unwrap(),
                3.0 * est.stderr,
                json!({
                    "check": "galerkin_tail",
                    "model": model_meta(&Model::Galerkin(g.clone())),
                    "level": le.level, "ref_level": ref_level,
                    "t": t, "n_mc": n_mc, "dt": cfg.dt, "seed": cfg.seed,
                }),
            )?);
        }
    } else {
        // monotone within confidence bands
        let mut max_increase = f64::NEG_INFINITY;
        let mut max_band = 0.0;
        for w in estimates.windows(2) {
            let inc = w[1].mean - w[0].mean;
            if inc > max_increase {
                max_increase = inc;
                max_band = 3.0 * (w[0].stderr + w[1].stderr);
            }
        }
        reports.push(VerificationReport::one_sided(
            format!("{name_prefix}/monotone"),
            max_increase,
            0.0,
            max_band,
            json!({
                "check": "galerkin_monotone",
                "model": model_meta(&Model::Galerkin(g.clone())),
                "levels": levels, "ref_level": ref_level,
                "t": t, "n_mc": n_mc, "dt": cfg.dt, "seed": cfg.seed,
                "errors": level_errors,
            }),
        )?);
        let first = &estimates[0];
        let last = estimates.last().unwrap();
        let ratio = last.mean / first.mean;
        let ratio_tol = 3.0 * ratio * (last.stderr / last.mean + first.stderr / first.mean);
        reports.push(VerificationReport::one_sided(
            format!("{name_prefix}/ratio"),
            ratio,
            max_ratio,
            ratio_tol,
            json!({
                "check": "galerkin_ratio",
                "levels": levels, "ref_level": ref_level,
                "t": t, "n_mc": n_mc, "dt": cfg.dt, "seed": cfg.seed,
            }),
        )?);
    }
    Ok((reports, level_errors))
}
