//! Weighted L²-transportation cost between discrete measures.
//!
//! `w0_exact` solves the transportation LP with cost
//! `c(i,j) = ‖σ̃₀⁻¹(xᵢ − yⱼ)‖²` and returns an optimal plan together with a
//! duality-gap certificate. One-dimensional supports use the monotone
//! (quantile) coupling, which is optimal for this convex cost and needs no
//! pivoting; general supports go through a transportation simplex.
//! `w0_sinkhorn` is the entropic-regularized alternative; its plan is
//! rounded back to exact marginals before the cost is evaluated, so the
//! reported value is always a feasible upper bound of the true cost.

use crate::error::{LabError, Result};
use crate::model::WeightedNorm;
use serde::Serialize;

/// Probability measure on finitely many support points.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub support: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(LabError::Usage(
                "measure needs matching, nonempty support and weights".into(),
            ));
        }
        let dim = support[0].len();
        if dim == 0 || support.iter().any(|p| p.len() != dim) {
            return Err(LabError::Usage("support points must share a dimension".into()));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(LabError::Usage("weights must be nonnegative and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(LabError::Usage(format!(
                "weights sum to {total}, expected 1 within 1e-10"
            )));
        }
        for i in 0..support.len() {
            for j in (i + 1)..support.len() {
                if support[i] == support[j] {
                    return Err(LabError::Usage(format!(
                        "support points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(DiscreteMeasure { support, weights })
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(vec![point], vec![1.0])
    }

    /// Measure on 1-D grid nodes with the given weights (renormalized).
    pub fn on_grid(nodes: &[f64], weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(LabError::Usage("grid measure has no mass".into()));
        }
        DiscreteMeasure::new(
            nodes.iter().map(|x| vec![*x]).collect(),
            weights.iter().map(|w| w / total).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Coupling between two discrete measures, stored sparsely.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan {
    /// (source index, target index, mass), mass > 0
    pub entries: Vec<(usize, usize, f64)>,
    /// Σ π(i,j) c(i,j)
    pub cost: f64,
    /// largest violation of the marginal constraints
    pub marginal_error: f64,
    /// primal-dual certificate; `None` for regularized plans
    pub duality_gap: Option<f64>,
}

impl TransportPlan {
    /// Sparse CSV serialization: `i,j,mass` lines with a header.
    pub fn to_sparse_csv(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for (i, j, w) in &self.entries {
            out.push_str(&format!("{i},{j},{w:.17e}\n"));
        }
        out
    }

    fn marginal_error_against(
        entries: &[(usize, usize, f64)],
        a: &[f64],
        b: &[f64],
    ) -> f64 {
        let mut row = vec![0.0; a.len()];
        let mut col = vec![0.0; b.len()];
        for (i, j, w) in entries {
            row[*i] += w;
            col[*j] += w;
        }
        let ra = row
            .iter()
            .zip(a)
            .fold(0.0f64, |acc, (r, w)| acc.max((r - w).abs()));
        let cb = col
            .iter()
            .zip(b)
            .fold(0.0f64, |acc, (c, w)| acc.max((c - w).abs()));
        ra.max(cb)
    }
}

fn cost_between(x: &[f64], y: &[f64], norm: &WeightedNorm) -> Result<f64> {
    norm.dist_sq(x, y)
}

fn cost_matrix(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, norm: &WeightedNorm) -> Result<Vec<f64>> {
    let (m, n) = (mu1.len(), mu2.len());
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            c[i * n + j] = cost_between(&mu1.support[i], &mu2.support[j], norm)?;
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Exact solver
// ---------------------------------------------------------------------------

/// Exact optimal transport cost and plan.
///
/// The returned plan satisfies the marginal constraints to 1e-8 and carries
/// a duality gap certificate `cost − dual + max dual infeasibility`.
pub fn w0_exact(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    norm: &WeightedNorm,
) -> Result<(f64, TransportPlan)> {
    if mu1.dim() != mu2.dim() {
        return Err(LabError::Usage("measures have different dimensions".into()));
    }
    if mu1.len() > 2000 || mu2.len() > 2000 {
        return Err(LabError::Usage(
            "exact transport is limited to supports of size <= 2000".into(),
        ));
    }
    let plan = if mu1.dim() == 1 {
        monotone_1d(mu1, mu2, norm)?
    } else {
        transportation_simplex(mu1, mu2, norm)?
    };
    Ok((plan.cost, plan))
}

/// Monotone coupling on the line: optimal for every convex cost of the
/// displacement, in particular the weighted squared distance.
fn monotone_1d(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    norm: &WeightedNorm,
) -> Result<TransportPlan> {
    let mut order1: Vec<usize> = (0..mu1.len()).collect();
    let mut order2: Vec<usize> = (0..mu2.len()).collect();
    order1.sort_by(|a, b| mu1.support[*a][0].total_cmp(&mu1.support[*b][0]));
    order2.sort_by(|a, b| mu2.support[*a][0].total_cmp(&mu2.support[*b][0]));

    let mut entries = Vec::new();
    let mut cost = 0.0;
    let (mut p, mut q) = (0usize, 0usize);
    let mut a_rem = mu1.weights[order1[0]];
    let mut b_rem = mu2.weights[order2[0]];
    // basic cells of the staircase, in visit order (including zero-mass steps)
    let mut staircase = Vec::new();
    loop {
        let (i, j) = (order1[p], order2[q]);
        let mass = a_rem.min(b_rem);
        let c = cost_between(&mu1.support[i], &mu2.support[j], norm)?;
        staircase.push((p, q, c));
        if mass > 0.0 {
            entries.push((i, j, mass));
            cost += mass * c;
        }
        a_rem -= mass;
        b_rem -= mass;
        let row_done = a_rem <= 0.0;
        let col_done = b_rem <= 0.0;
        if p + 1 >= mu1.len() && q + 1 >= mu2.len() {
            break;
        }
        if row_done && p + 1 < mu1.len() {
            p += 1;
            a_rem = mu1.weights[order1[p]];
        } else if col_done && q + 1 < mu2.len() {
            q += 1;
            b_rem = mu2.weights[order2[q]];
        } else {
            // trailing zero-mass points
            if p + 1 < mu1.len() {
                p += 1;
                a_rem = mu1.weights[order1[p]];
            } else {
                q += 1;
                b_rem = mu2.weights[order2[q]];
            }
        }
    }

    // duals along the staircase: u + v = c on visited cells
    let mut u = vec![f64::NAN; mu1.len()];
    let mut v = vec![f64::NAN; mu2.len()];
    u[order1[0]] = 0.0;
    for (p, q, c) in &staircase {
        let (i, j) = (order1[*p], order2[*q]);
        if !u[i].is_nan() && v[j].is_nan() {
            v[j] = c - u[i];
        } else if u[i].is_nan() && !v[j].is_nan() {
            u[i] = c - v[j];
        }
    }
    // any stragglers (possible only with zero-mass points): tightest feasible
    for i in 0..mu1.len() {
        if u[i].is_nan() {
            let mut best = f64::INFINITY;
            for j in 0..mu2.len() {
                if !v[j].is_nan() {
                    best = best.min(cost_between(&mu1.support[i], &mu2.support[j], norm)? - v[j]);
                }
            }
            u[i] = best;
        }
    }
    for j in 0..mu2.len() {
        if v[j].is_nan() {
            let mut best = f64::INFINITY;
            for i in 0..mu1.len() {
                best = best.min(cost_between(&mu1.support[i], &mu2.support[j], norm)? - u[i]);
            }
            v[j] = best;
        }
    }

    // certificate
    let mut infeas = 0.0f64;
    for i in 0..mu1.len() {
        for j in 0..mu2.len() {
            let c = cost_between(&mu1.support[i], &mu2.support[j], norm)?;
            infeas = infeas.max(u[i] + v[j] - c);
        }
    }
    let dual: f64 = u
        .iter()
        .zip(&mu1.weights)
        .map(|(ui, w)| ui * w)
        .chain(v.iter().zip(&mu2.weights).map(|(vj, w)| vj * w))
        .sum();
    let gap = (cost - dual).abs() + infeas.max(0.0);
    let marginal_error =
        TransportPlan::marginal_error_against(&entries, &mu1.weights, &mu2.weights);
    Ok(TransportPlan {
        entries,
        cost,
        marginal_error,
        duality_gap: Some(gap),
    })
}

/// Transportation simplex (MODI) for general supports. Dantzig entering
/// rule with a Bland fallback against degenerate cycling.
fn transportation_simplex(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    norm: &WeightedNorm,
) -> Result<TransportPlan> {
    let (m, n) = (mu1.len(), mu2.len());
    let a = &mu1.weights;
    let b = &mu2.weights;
    let c = cost_matrix(mu1, mu2, norm)?;

    // Northwest-corner start: exactly m + n - 1 basic cells.
    let mut mass = std::collections::BTreeMap::<(usize, usize), f64>::new();
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut a_rem = a[0];
        let mut b_rem = b[0];
        loop {
            let x = a_rem.min(b_rem);
            mass.insert((i, j), x);
            a_rem -= x;
            b_rem -= x;
            if i + 1 == m && j + 1 == n {
                break;
            }
            if a_rem <= b_rem && i + 1 < m {
                i += 1;
                a_rem = a[i];
            } else {
                j += 1;
                b_rem = b[j];
            }
        }
    }

    let basis_adjacency = |mass: &std::collections::BTreeMap<(usize, usize), f64>| {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in mass.keys() {
            rows[*i].push(*j);
            cols[*j].push(*i);
        }
        (rows, cols)
    };

    let max_pivots = 2000 + 200 * (m + n);
    let bland_after = 500 + 20 * (m + n);
    for pivot in 0..max_pivots {
        // duals from the spanning tree
        let (rows, cols) = basis_adjacency(&mass);
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        let mut stack: Vec<(bool, usize)> = vec![(true, 0)];
        while let Some((is_row, idx)) = stack.pop() {
            if is_row {
                for &j in &rows[idx] {
                    if v[j].is_nan() {
                        v[j] = c[idx * n + j] - u[idx];
                        stack.push((false, j));
                    }
                }
            } else {
                for &i in &cols[idx] {
                    if u[i].is_nan() {
                        u[i] = c[i * n + idx] - v[idx];
                        stack.push((true, i));
                    }
                }
            }
        }
        if u.iter().any(|x| x.is_nan()) || v.iter().any(|x| x.is_nan()) {
            return Err(LabError::Solver(
                "transportation basis lost its spanning tree".into(),
            ));
        }

        // entering cell
        let tol = 1e-12 * (1.0 + c.iter().cloned().fold(0.0, f64::max));
        let mut enter: Option<(usize, usize)> = None;
        if pivot < bland_after {
            let mut best = -tol;
            for i in 0..m {
                for j in 0..n {
                    if mass.contains_key(&(i, j)) {
                        continue;
                    }
                    let rc = c[i * n + j] - u[i] - v[j];
                    if rc < best {
                        best = rc;
                        enter = Some((i, j));
                    }
                }
            }
        } else {
            'outer: for i in 0..m {
                for j in 0..n {
                    if mass.contains_key(&(i, j)) {
                        continue;
                    }
                    if c[i * n + j] - u[i] - v[j] < -tol {
                        enter = Some((i, j));
                        break 'outer;
                    }
                }
            }
        }
        let Some((ei, ej)) = enter else {
            // optimal: assemble plan and certificate
            let entries: Vec<(usize, usize, f64)> = mass
                .iter()
                .filter(|(_, w)| **w > 0.0)
                .map(|((i, j), w)| (*i, *j, *w))
                .collect();
            let cost: f64 = entries.iter().map(|(i, j, w)| w * c[*i * n + *j]).sum();
            let dual: f64 = u
                .iter()
                .zip(a)
                .map(|(ui, w)| ui * w)
                .chain(v.iter().zip(b).map(|(vj, w)| vj * w))
                .sum();
            let mut infeas = 0.0f64;
            for i in 0..m {
                for j in 0..n {
                    infeas = infeas.max(u[i] + v[j] - c[i * n + j]);
                }
            }
            let gap = (cost - dual).abs() + infeas.max(0.0);
            let marginal_error = TransportPlan::marginal_error_against(&entries, a, b);
            return Ok(TransportPlan {
                entries,
                cost,
                marginal_error,
                duality_gap: Some(gap),
            });
        };

        // cycle: tree path from row ei to col ej, alternating
        let (rows, cols) = basis_adjacency(&mass);
        // BFS over tree nodes (rows 0..m, cols m..m+n)
        let total = m + n;
        let mut prev = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let start = ei;
        let goal = m + ej;
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == goal {
                break;
            }
            if node < m {
                for &j in &rows[node] {
                    if !seen[m + j] {
                        seen[m + j] = true;
                        prev[m + j] = node;
                        queue.push_back(m + j);
                    }
                }
            } else {
                for &i in &cols[node - m] {
                    if !seen[i] {
                        seen[i] = true;
                        prev[i] = node;
                        queue.push_back(i);
                    }
                }
            }
        }
        if !seen[goal] {
            return Err(LabError::Solver("transportation tree is disconnected".into()));
        }
        // path goal -> start, then close with the entering cell
        let mut path_nodes = vec![goal];
        while *path_nodes.last().unwrap() != start {
            path_nodes.push(prev[*path_nodes.last().unwrap()]);
        }
        path_nodes.reverse(); // start (row ei) ... goal (col ej)

        // cycle cells alternate +/- beginning with the entering cell (+)
        let mut minus_cells = Vec::new();
        let mut plus_cells = vec![(ei, ej)];
        for w in path_nodes.windows(2) {
            let cell = if w[0] < m {
                (w[0], w[1] - m)
            } else {
                (w[1], w[0] - m)
            };
            // edges along the path alternate -, +, -, ... starting at the
            // row-ei end, because the entering cell closes the cycle at ei
            if minus_cells.len() <= plus_cells.len() - 1 {
                minus_cells.push(cell);
            } else {
                plus_cells.push(cell);
            }
        }
        let theta = minus_cells
            .iter()
            .map(|cell| mass[cell])
            .fold(f64::INFINITY, f64::min);
        let leaving = *minus_cells
            .iter()
            .find(|cell| mass[*cell] <= theta)
            .expect("a minus cell attains the minimum");
        for cell in &plus_cells {
            *mass.entry(*cell).or_insert(0.0) += theta;
        }
        for cell in &minus_cells {
            let w = mass.get_mut(cell).unwrap();
            *w -= theta;
        }
        mass.remove(&leaving);
    }
    Err(LabError::Solver(format!(
        "transportation simplex did not terminate within {max_pivots} pivots"
    )))
}

// ---------------------------------------------------------------------------
// Entropic regularization
// ---------------------------------------------------------------------------

/// Sinkhorn iteration in the log domain with an epsilon ladder, followed by
/// rounding to exact marginals. The rounded plan is feasible, so the cost is
/// an upper bound of the exact one.
pub fn w0_sinkhorn(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    norm: &WeightedNorm,
    epsilon: f64,
) -> Result<(f64, TransportPlan)> {
    if !(epsilon > 0.0) {
        return Err(LabError::Usage("sinkhorn needs epsilon > 0".into()));
    }
    if mu1.dim() != mu2.dim() {
        return Err(LabError::Usage("measures have different dimensions".into()));
    }
    let (m, n) = (mu1.len(), mu2.len());
    let a = &mu1.weights;
    let b = &mu2.weights;
    let c = cost_matrix(mu1, mu2, norm)?;
    let c_max = c.iter().cloned().fold(0.0, f64::max);

    let log_a: Vec<f64> = a.iter().map(|w| if *w > 0.0 { w.ln() } else { -1e300 }).collect();
    let log_b: Vec<f64> = b.iter().map(|w| if *w > 0.0 { w.ln() } else { -1e300 }).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];

    // epsilon ladder from the cost scale down to the target
    let mut ladder = Vec::new();
    let mut eps = (0.5 * c_max).max(epsilon);
    while eps > epsilon * 1.5 {
        ladder.push(eps);
        eps *= 0.5;
    }
    ladder.push(epsilon);

    let lse = |terms: &mut dyn Iterator<Item = f64>| -> f64 {
        let vals: Vec<f64> = terms.collect();
        let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        mx + vals.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
    };

    let mut iterations_left = 100_000usize;
    let mut converged = false;
    for (lvl, &eps) in ladder.iter().enumerate() {
        let target_tol = if lvl + 1 == ladder.len() { 1e-9 } else { 1e-4 };
        loop {
            if iterations_left == 0 {
                return Err(LabError::Solver(
                    "sinkhorn did not converge within 1e5 iterations".into(),
                ));
            }
            iterations_left -= 1;
            for i in 0..m {
                let s = lse(&mut (0..n).map(|j| log_b[j] + (g[j] - c[i * n + j]) / eps));
                f[i] = -eps * s;
            }
            let mut marginal_err = 0.0f64;
            for j in 0..n {
                let s = lse(&mut (0..m).map(|i| log_a[i] + (f[i] - c[i * n + j]) / eps));
                let new_g = -eps * s;
                g[j] = new_g;
            }
            // row-marginal error of the implied plan
            for i in 0..m {
                if a[i] == 0.0 {
                    continue;
                }
                let row: f64 = (0..n)
                    .map(|j| {
                        (log_a[i] + log_b[j] + (f[i] + g[j] - c[i * n + j]) / eps)
                            .min(500.0)
                            .exp()
                    })
                    .sum();
                marginal_err = marginal_err.max((row - a[i]).abs());
            }
            if marginal_err < target_tol {
                if lvl + 1 == ladder.len() {
                    converged = true;
                }
                break;
            }
        }
    }
    if !converged {
        return Err(LabError::Solver("sinkhorn ladder ended unconverged".into()));
    }

    // dense plan, then round to the exact marginals
    let eps = *ladder.last().unwrap();
    let mut plan = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            plan[i * n + j] = (log_a[i] + log_b[j] + (f[i] + g[j] - c[i * n + j]) / eps)
                .min(500.0)
                .exp();
        }
    }
    round_to_feasible(&mut plan, a, b);

    let mut entries = Vec::new();
    let mut cost = 0.0;
    for i in 0..m {
        for j in 0..n {
            let w = plan[i * n + j];
            if w > 0.0 {
                entries.push((i, j, w));
                cost += w * c[i * n + j];
            }
        }
    }
    let marginal_error = TransportPlan::marginal_error_against(&entries, a, b);
    Ok((
        cost,
        TransportPlan {
            entries,
            cost,
            marginal_error,
            duality_gap: None,
        },
    ))
}

/// Round a nonnegative matrix to the exact marginals (a, b): scale rows
/// down, then columns, then patch the deficit with a rank-one correction.
fn round_to_feasible(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let m = a.len();
    let n = b.len();
    let mut row = vec![0.0; m];
    for i in 0..m {
        for j in 0..n {
            row[i] += plan[i * n + j];
        }
    }
    for i in 0..m {
        if row[i] > a[i] && row[i] > 0.0 {
            let s = a[i] / row[i];
            for j in 0..n {
                plan[i * n + j] *= s;
            }
        }
    }
    let mut col = vec![0.0; n];
    for i in 0..m {
        for j in 0..n {
            col[j] += plan[i * n + j];
        }
    }
    for j in 0..n {
        if col[j] > b[j] && col[j] > 0.0 {
            let s = b[j] / col[j];
            for i in 0..m {
                plan[i * n + j] *= s;
            }
        }
    }
    let mut row_def = vec![0.0; m];
    let mut col_def = vec![0.0; n];
    let mut total_def = 0.0;
    for i in 0..m {
        let r: f64 = (0..n).map(|j| plan[i * n + j]).sum();
        row_def[i] = (a[i] - r).max(0.0);
        total_def += row_def[i];
    }
    for j in 0..n {
        let c: f64 = (0..m).map(|i| plan[i * n + j]).sum();
        col_def[j] = (b[j] - c).max(0.0);
    }
    if total_def > 0.0 {
        for i in 0..m {
            if row_def[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                plan[i * n + j] += row_def[i] * col_def[j] / total_def;
            }
        }
    }
}
