//! Deterministic 1-D oracles: a Crank-Nicolson solver for the Kolmogorov
//! backward equation `∂_τ u = ½σ(x)² u″ + b(x) u′` with reflecting
//! (zero-derivative) boundary, a grid Markov kernel with its invariant
//! reference measure, and the L²(μ) adjoint.
//!
//! The reflecting discretization makes every row of the discrete generator
//! sum to zero, so constants are preserved exactly, the time-t kernel is a
//! genuine Markov matrix, and its left fixed vector is a fully supported
//! invariant probability on the grid. These oracles replace Monte Carlo
//! wherever sampling noise would drown an inequality.

use crate::error::{LabError, Result};
use crate::estimator::TestFunction;
use crate::model::{DiffusionModel, Model};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Equispaced grid on `[lo, hi]` with at least 51 nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(LabError::Usage(format!("bad grid interval [{lo}, {hi}]")));
        }
        if points < 51 {
            return Err(LabError::Usage(format!(
                "grid needs at least 51 nodes, got {points}"
            )));
        }
        Ok(Grid1D { lo, hi, points })
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.h() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.h()).round();
        (i.max(0.0) as usize).min(self.points - 1)
    }

    /// Sample a grid function at `x` by linear interpolation.
    pub fn interpolate(&self, u: &[f64], x: f64) -> Result<f64> {
        if u.len() != self.points {
            return Err(LabError::Usage("grid function has wrong length".into()));
        }
        if x < self.lo - 1e-12 || x > self.hi + 1e-12 {
            return Err(LabError::Usage(format!(
                "x = {x} outside grid [{}, {}]",
                self.lo, self.hi
            )));
        }
        let s = ((x - self.lo) / self.h()).clamp(0.0, (self.points - 1) as f64);
        let i = (s.floor() as usize).min(self.points - 2);
        let w = s - i as f64;
        Ok(u[i] * (1.0 - w) + u[i + 1] * w)
    }

    /// Evaluate a test function at every node.
    pub fn sample(&self, f: &TestFunction) -> Vec<f64> {
        (0..self.points).map(|i| f.eval_scalar(self.node(i))).collect()
    }

    /// Central-difference gradient with mirror ghosts: the reflecting
    /// boundary makes the discrete derivative vanish at both walls.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let m = self.points;
        let h = self.h();
        let mut g = vec![0.0; m];
        for i in 1..m - 1 {
            g[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
        }
        g
    }
}

// ---------------------------------------------------------------------------
// Tridiagonal machinery
// ---------------------------------------------------------------------------

/// Tridiagonal matrix stored as three diagonals.
#[derive(Debug, Clone)]
struct Tridiag {
    sub: Vec<f64>,  // a[i] multiplies u[i-1], a[0] unused
    diag: Vec<f64>, // b[i] multiplies u[i]
    sup: Vec<f64>,  // c[i] multiplies u[i+1], c[m-1] unused
}

impl Tridiag {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        out[0] = self.diag[0] * u[0] + self.sup[0] * u[1];
        for i in 1..m - 1 {
            out[i] = self.sub[i] * u[i - 1] + self.diag[i] * u[i] + self.sup[i] * u[i + 1];
        }
        out[m - 1] = self.sub[m - 1] * u[m - 2] + self.diag[m - 1] * u[m - 1];
    }

    fn transpose(&self) -> Tridiag {
        let m = self.diag.len();
        let mut sub = vec![0.0; m];
        let mut sup = vec![0.0; m];
        for i in 0..m - 1 {
            // (Aᵀ)[i+1][i] = A[i][i+1]
            sub[i + 1] = self.sup[i];
            sup[i] = self.sub[i + 1];
        }
        Tridiag {
            sub,
            diag: self.diag.clone(),
            sup,
        }
    }
}

/// Prefactored Thomas solve for a fixed tridiagonal matrix.
#[derive(Debug, Clone)]
struct ThomasFactor {
    /// forward-eliminated superdiagonal
    c_prime: Vec<f64>,
    /// pivots after elimination
    denom: Vec<f64>,
    sub: Vec<f64>,
}

impl ThomasFactor {
    fn new(m: &Tridiag) -> Result<Self> {
        let n = m.diag.len();
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        let mut d = m.diag[0];
        if d == 0.0 {
            return Err(LabError::Solver("zero pivot in tridiagonal factorization".into()));
        }
        denom[0] = d;
        c_prime[0] = m.sup[0] / d;
        for i in 1..n {
            d = m.diag[i] - m.sub[i] * c_prime[i - 1];
            if d == 0.0 {
                return Err(LabError::Solver("zero pivot in tridiagonal factorization".into()));
            }
            denom[i] = d;
            if i < n - 1 {
                c_prime[i] = m.sup[i] / d;
            }
        }
        Ok(ThomasFactor {
            c_prime,
            denom,
            sub: m.sub.clone(),
        })
    }

    fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        out[0] = rhs[0] / self.denom[0];
        for i in 1..n {
            out[i] = (rhs[i] - self.sub[i] * out[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            out[i] -= self.c_prime[i] * out[i + 1];
        }
    }
}

/// The discrete generator L on the grid, with reflecting boundary rows.
fn build_generator(m: &DiffusionModel, grid: &Grid1D) -> Tridiag {
    let n = grid.points;
    let h = grid.h();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for i in 0..n {
        let x = [grid.node(i)];
        let sig = m.diffusion_scalar(&x);
        let half_s2 = 0.5 * sig * sig;
        let mut b = [0.0];
        m.drift_into(&x, &mut b);
        if i == 0 {
            // mirror ghost u[-1] = u[1]: Lu = σ²(u₁ − u₀)/h²
            diag[0] = -2.0 * half_s2 / (h * h);
            sup[0] = 2.0 * half_s2 / (h * h);
        } else if i == n - 1 {
            diag[i] = -2.0 * half_s2 / (h * h);
            sub[i] = 2.0 * half_s2 / (h * h);
        } else {
            sub[i] = half_s2 / (h * h) - b[0] / (2.0 * h);
            diag[i] = -2.0 * half_s2 / (h * h);
            sup[i] = half_s2 / (h * h) + b[0] / (2.0 * h);
        }
    }
    Tridiag { sub, diag, sup }
}

/// One-step Crank-Nicolson operator u ⟵ (I − dt/2 L)⁻¹ (I + dt/2 L) u,
/// plus the half-step implicit matrix used for Rannacher startup.
struct CnStepper {
    explicit: Tridiag,
    implicit: Tridiag,
    factor: ThomasFactor,
    m: usize,
}

impl CnStepper {
    fn new(gen: &Tridiag, dt: f64) -> Result<Self> {
        let m = gen.diag.len();
        let mut explicit = gen.clone();
        let mut implicit = gen.clone();
        for i in 0..m {
            explicit.sub[i] *= 0.5 * dt;
            explicit.sup[i] *= 0.5 * dt;
            explicit.diag[i] = 1.0 + 0.5 * dt * gen.diag[i];
            implicit.sub[i] = -0.5 * dt * gen.sub[i];
            implicit.sup[i] = -0.5 * dt * gen.sup[i];
            implicit.diag[i] = 1.0 - 0.5 * dt * gen.diag[i];
        }
        let factor = ThomasFactor::new(&implicit)?;
        Ok(CnStepper {
            explicit,
            implicit,
            factor,
            m,
        })
    }

    /// Relative residual of the implicit solve; large values indicate a
    /// conditioning failure.
    fn residual(&self, sol: &[f64], rhs: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.m];
        self.implicit.apply(sol, &mut ax);
        let scale = rhs.iter().fold(1e-300f64, |a, r| a.max(r.abs()));
        ax.iter()
            .zip(rhs)
            .fold(0.0f64, |acc, (a, r)| acc.max((a - r).abs()))
            / scale
    }

    fn cn_step(&self, u: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        self.explicit.apply(u, scratch);
        self.factor.solve_into(scratch, u);
        let res = self.residual(u, scratch);
        if res > 1e-8 {
            return Err(LabError::Solver(format!(
                "Crank-Nicolson solve residual {res:.3e} exceeds 1e-8"
            )));
        }
        Ok(())
    }

    /// Implicit-Euler substep with step dt/2; reuses the same matrix
    /// (I − dt/2 L). Two of these replace one CN step during startup.
    fn ie_half_step(&self, u: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        scratch.copy_from_slice(u);
        self.factor.solve_into(scratch, u);
        let res = self.residual(u, scratch);
        if res > 1e-8 {
            return Err(LabError::Solver(format!(
                "implicit startup residual {res:.3e} exceeds 1e-8"
            )));
        }
        Ok(())
    }
}

/// Number of leading time steps replaced by damped implicit substeps.
/// Rough initial data (indicators, incompatible boundary derivatives) excite
/// oscillations under plain Crank-Nicolson; two damped steps remove them
/// without hurting second-order accuracy.
const RANNACHER_STEPS: usize = 2;

/// Solve the backward equation: returns `u(t, ·) ≈ P_t f` on the grid.
///
/// `t` is split into `ceil(t / dt_pde)` equal steps. Second-order accurate
/// in both the grid spacing and the step.
pub fn solve_backward(
    m: &DiffusionModel,
    f_grid: &[f64],
    t: f64,
    grid: &Grid1D,
    dt_pde: f64,
) -> Result<Vec<f64>> {
    if m.dim != 1 {
        return Err(LabError::Usage("the PDE oracle is one-dimensional".into()));
    }
    if f_grid.len() != grid.points {
        return Err(LabError::Usage("initial data has wrong length".into()));
    }
    if f_grid.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Usage("initial data must be finite".into()));
    }
    if t < 0.0 || !(dt_pde > 0.0) {
        return Err(LabError::Usage("need t >= 0 and dt_pde > 0".into()));
    }
    let mut u = f_grid.to_vec();
    if t == 0.0 {
        return Ok(u);
    }
    let steps = (t / dt_pde).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let gen = build_generator(m, grid);
    let stepper = CnStepper::new(&gen, dt)?;
    let mut scratch = vec![0.0; grid.points];
    for step in 0..steps {
        if step < RANNACHER_STEPS {
            stepper.ie_half_step(&mut u, &mut scratch)?;
            stepper.ie_half_step(&mut u, &mut scratch)?;
        } else {
            stepper.cn_step(&mut u, &mut scratch)?;
        }
    }
    Ok(u)
}

// ---------------------------------------------------------------------------
// Grid Markov kernel
// ---------------------------------------------------------------------------

/// Discrete transition kernel at time `t` together with its invariant
/// reference measure μ. `kernel[i][j]` is the mass moved from node i to
/// node j, so rows sum to one; the transition density against μ is
/// `kernel[i][j] / mu[j]`.
#[derive(Debug, Clone)]
pub struct GridKernel {
    pub grid: Grid1D,
    pub kernel: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub t: f64,
    /// σ̃₀ weight of the generating model, for the weighted cost on the grid.
    pub sigma0_weight: f64,
}

impl GridKernel {
    /// Transition density `p_t(x_i, x_j)` with respect to μ.
    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.kernel[i][j] / self.mu[j]
    }

    /// Mass the row places on the two outermost cells, a deterministic
    /// proxy for the boundary mass of the underlying diffusion.
    pub fn boundary_mass(&self, row: usize) -> f64 {
        let m = self.grid.points;
        self.kernel[row][0] + self.kernel[row][m - 1]
    }

    pub fn row_sum_defect(&self) -> f64 {
        self.kernel
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Mean and variance of μ on the grid.
    pub fn mu_moments(&self) -> (f64, f64) {
        let mean: f64 = self
            .mu
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.grid.node(i))
            .sum();
        let var: f64 = self
            .mu
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let d = self.grid.node(i) - mean;
                w * d * d
            })
            .sum();
        (mean, var)
    }
}

/// Build the time-`t` kernel as the `N`-th power of the one-step
/// Crank-Nicolson operator `S`, and μ as the normalized left fixed vector
/// of `S` (power iteration to ℓ¹ residual < 1e-12).
///
/// Requires the step operator to be entrywise nonnegative, which holds when
/// `dt_pde ≤ h²/σ²` (explicit half) and `h |b| ≤ σ²` (upwind margin); both
/// are validated and reported as oracle errors otherwise, because a signed
/// "kernel" is useless for entropy checks.
pub fn build_kernel(m: &DiffusionModel, t: f64, grid: &Grid1D, dt_pde: f64) -> Result<GridKernel> {
    if m.dim != 1 {
        return Err(LabError::Usage("the grid kernel is one-dimensional".into()));
    }
    if !(t > 0.0) || !(dt_pde > 0.0) {
        return Err(LabError::Usage("need t > 0 and dt_pde > 0".into()));
    }
    let steps = (t / dt_pde).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let gen = build_generator(m, grid);
    let stepper = CnStepper::new(&gen, dt)?;

    // positivity of the one-step operator
    let n = grid.points;
    for i in 0..n {
        let ok = stepper.explicit.diag[i] >= 0.0
            && stepper.explicit.sub[i] >= -1e-15
            && stepper.explicit.sup[i] >= -1e-15
            && stepper.implicit.sub[i] <= 1e-15
            && stepper.implicit.sup[i] <= 1e-15;
        if !ok {
            return Err(LabError::Oracle(format!(
                "one-step operator loses positivity at node {i} (x = {:.3}); \
                 reduce dt_pde or coarsen the grid",
                grid.node(i)
            )));
        }
    }

    // kernel rows: propagate basis columns of S^N, in parallel
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![0.0; n];
            col[j] = 1.0;
            let mut scratch = vec![0.0; n];
            for _ in 0..steps {
                stepper.explicit.apply(&col, &mut scratch);
                stepper.factor.solve_into(&scratch, &mut col);
            }
            col
        })
        .collect();
    let mut kernel = vec![vec![0.0; n]; n];
    let mut min_entry = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = columns[j][i];
            min_entry = min_entry.min(v);
            kernel[i][j] = v.max(0.0);
        }
    }
    if min_entry < -1e-10 {
        return Err(LabError::Oracle(format!(
            "kernel entry {min_entry:.3e} is significantly negative"
        )));
    }

    // Invariant measure. The generator is a birth-death chain, so its left
    // null vector obeys detailed balance, w_{j+1} = w_j sup_j / sub_{j+1},
    // and because S = (I − dt/2 L)⁻¹(I + dt/2 L) shares null directions
    // with L, the same vector is the exact left fixed vector of the
    // one-step operator for every dt. Computed in log space and verified
    // against the ℓ¹ fixed-point residual.
    let mut log_w = vec![0.0; n];
    for j in 0..n - 1 {
        let up = gen.sup[j];
        let down = gen.sub[j + 1];
        if !(up > 0.0) || !(down > 0.0) {
            return Err(LabError::Oracle(format!(
                "generator loses irreducibility between nodes {j} and {}",
                j + 1
            )));
        }
        log_w[j + 1] = log_w[j] + up.ln() - down.ln();
    }
    let log_max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut mu: Vec<f64> = log_w.iter().map(|lw| (lw - log_max).exp()).collect();
    let mass: f64 = mu.iter().sum();
    for w in &mut mu {
        *w /= mass;
    }
    if mu.iter().any(|w| !(*w > 0.0)) {
        return Err(LabError::Oracle(
            "invariant measure is not fully supported on the grid".into(),
        ));
    }
    // residual check: ‖μᵀS − μᵀ‖₁ = ‖Eᵀ(T⁻ᵀμ) − μ‖₁
    let implicit_t = stepper.implicit.transpose();
    let explicit_t = stepper.explicit.transpose();
    let factor_t = ThomasFactor::new(&implicit_t)?;
    let mut work = vec![0.0; n];
    let mut next = vec![0.0; n];
    factor_t.solve_into(&mu, &mut work);
    explicit_t.apply(&work, &mut next);
    let residual: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
    if residual > 1e-12 {
        return Err(LabError::Oracle(format!(
            "invariant-measure residual {residual:.3e} exceeds 1e-12"
        )));
    }

    Ok(GridKernel {
        grid: *grid,
        kernel,
        mu,
        t,
        sigma0_weight: m.sigma0.weights()[0],
    })
}

/// Serialize a grid function as `node,value` CSV.
pub fn grid_function_csv(grid: &Grid1D, values: &[f64]) -> Result<String> {
    if values.len() != grid.points {
        return Err(LabError::Usage("grid function has wrong length".into()));
    }
    let mut out = String::from("node,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", grid.node(i), v));
    }
    Ok(out)
}

impl GridKernel {
    /// Dense matrix CSV of the kernel, one row per source node.
    pub fn to_dense_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.kernel {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&v.to_string());
                first = false;
            }
            out.push('\n');
        }
        out
    }

    /// The reference measure as `node,value` CSV.
    pub fn mu_csv(&self) -> String {
        grid_function_csv(&self.grid, &self.mu).expect("mu matches its own grid")
    }
}

/// The L²(μ) adjoint: `(P_t* f)(y_j) = Σ_i μ(x_i) kernel[i][j] f(x_i) / μ(y_j)`.
pub fn adjoint_apply(k: &GridKernel, f: &[f64]) -> Result<Vec<f64>> {
    let n = k.grid.points;
    if f.len() != n {
        return Err(LabError::Usage("grid function has wrong length".into()));
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        let w = k.mu[i] * f[i];
        if w == 0.0 {
            continue;
        }
        for j in 0..n {
            out[j] += w * k.kernel[i][j];
        }
    }
    for j in 0..n {
        out[j] /= k.mu[j];
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Entropy-production identity
// ---------------------------------------------------------------------------

/// Gap data of the identity
/// `P_s log P_{t−s} f − log P_t f = −½ ∫₀ˢ P_r ‖σ ∇ log P_{t−r} f‖² dr`.
#[derive(Debug, Clone, Serialize)]
pub struct DdGap {
    /// max over s and the evaluation band of |lhs − rhs|
    pub max_abs_gap: f64,
    /// scale used for the relative gap: max |rhs| over the band
    pub rhs_scale: f64,
    /// max_abs_gap / max(rhs_scale, 1e-9)
    pub rel_gap: f64,
    /// worst (s, node x, lhs, rhs)
    pub worst: (f64, f64, f64, f64),
}

/// Fraction of nodes skipped on each side when taking maxima over the grid;
/// keeps boundary layers of the reflected problem out of the comparison.
pub const EVAL_BAND_MARGIN: f64 = 0.2;

/// Node range `[first, last)` of the evaluation band.
pub fn band_range(grid: &Grid1D) -> (usize, usize) {
    let skip = ((grid.points as f64) * EVAL_BAND_MARGIN).round() as usize;
    (skip.max(1), (grid.points - skip.max(1)).max(skip + 1))
}

/// Evaluate both sides of the identity at each `s` in `s_list` and report
/// the largest gap over the evaluation band.
///
/// The time integral uses the trapezoid rule with a mesh tied to `dt_pde`
/// (50 PDE steps per quadrature interval), so refining the solver refines
/// the quadrature with it.
pub fn dd_identity_gap(
    m: &DiffusionModel,
    f: &TestFunction,
    t: f64,
    s_list: &[f64],
    grid: &Grid1D,
    dt_pde: f64,
) -> Result<DdGap> {
    if !(t > 0.0) {
        return Err(LabError::Usage("identity check needs t > 0".into()));
    }
    let f_grid = grid.sample(f);
    if f_grid.iter().any(|v| *v <= 0.0) {
        return Err(LabError::PositivityViolation {
            value: f_grid.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    let sigma: Vec<f64> = (0..grid.points)
        .map(|i| m.diffusion_scalar(&[grid.node(i)]))
        .collect();
    let log_pt_f = {
        let u = solve_backward(m, &f_grid, t, grid, dt_pde)?;
        u.iter().map(|v| v.ln()).collect::<Vec<f64>>()
    };

    // squared carre-du-champ of log P_τ f on the grid
    let integrand = |u_tau: &[f64]| -> Vec<f64> {
        let log_u: Vec<f64> = u_tau.iter().map(|v| v.ln()).collect();
        let g = grid.gradient(&log_u);
        g.iter()
            .zip(&sigma)
            .map(|(gi, si)| (si * gi) * (si * gi))
            .collect()
    };

    let (b0, b1) = band_range(grid);
    let mut max_abs = 0.0f64;
    let mut rhs_scale = 0.0f64;
    let mut worst = (0.0, 0.0, 0.0, 0.0);
    for &s in s_list {
        if s < 0.0 || s > t + 1e-12 {
            return Err(LabError::Usage(format!("s = {s} outside [0, {t}]")));
        }
        // lhs = P_s [log P_{t-s} f] − log P_t f
        let u_ts = solve_backward(m, &f_grid, (t - s).max(0.0), grid, dt_pde)?;
        let log_u_ts: Vec<f64> = u_ts.iter().map(|v| v.ln()).collect();
        let lhs_field = solve_backward(m, &log_u_ts, s, grid, dt_pde)?;

        // rhs = −½ ∫₀ˢ P_r ‖σ ∇ log P_{t−r} f‖² dr, trapezoid in r
        let mut rhs_field = vec![0.0; grid.points];
        if s > 0.0 {
            let n_q = ((s / (50.0 * dt_pde)).round() as usize).max(4);
            let dr = s / n_q as f64;
            for k in 0..=n_q {
                let r = dr * k as f64;
                let u_tau = solve_backward(m, &f_grid, (t - r).max(0.0), grid, dt_pde)?;
                let phi = integrand(&u_tau);
                let pr_phi = solve_backward(m, &phi, r, grid, dt_pde)?;
                let w = if k == 0 || k == n_q { 0.5 } else { 1.0 };
                for i in 0..grid.points {
                    rhs_field[i] += w * dr * pr_phi[i];
                }
            }
        }

        for i in b0..b1 {
            let lhs = lhs_field[i] - log_pt_f[i];
            let rhs = -0.5 * rhs_field[i];
            rhs_scale = rhs_scale.max(rhs.abs());
            let gap = (lhs - rhs).abs();
            if gap > max_abs {
                max_abs = gap;
                worst = (s, grid.node(i), lhs, rhs);
            }
        }
    }
    Ok(DdGap {
        max_abs_gap: max_abs,
        rhs_scale,
        rel_gap: max_abs / rhs_scale.max(1e-9),
        worst,
    })
}

/// Fraction of `n` Euler endpoints that land within one cell of the grid
/// boundary (or outside). Used to validate that a grid is wide enough for
/// the diffusion it hosts.
pub fn boundary_exit_fraction(
    m: &Model,
    x0: f64,
    t: f64,
    grid: &Grid1D,
    n: usize,
    seed: u64,
) -> Result<f64> {
    use crate::engine::{simulate, Scheme, SimConfig};
    let cfg = SimConfig::new(t, t / (t / 1e-3).round().max(16.0), seed, Scheme::Euler)?;
    let h = grid.h();
    let hits: usize = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let end = simulate(m, &[x0], &cfg, r)?;
            Ok(usize::from(end[0] <= grid.lo + h || end[0] >= grid.hi - h))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(hits as f64 / n as f64)
}
