//! Suite execution: expand a config into verification jobs, run them on a
//! bounded worker pool, and write reports and plot data atomically at the
//! end.
//!
//! Every job derives its noise seed from the suite seed and its own stable
//! name, and all reductions are deterministic, so `reports.json` is byte
//! identical across runs and across worker counts.

use crate::config::{Backend, ExperimentConfig, GridSpec, JobSpec};
use crate::engine::{Scheme, SimConfig};
use crate::error::{LabError, Result};
use crate::estimator::TestFunction;
use crate::model::Model;
use crate::oracle1d::{build_kernel, Grid1D};
use crate::rng::{derive_seed, Channel, GaussianStream};
use crate::verify::{
    verify_coupling_contraction, verify_dd_identity, verify_entropy_cost,
    verify_feller_modulus, verify_galerkin_convergence, verify_gradient_estimate,
    verify_heat_kernel_entropy, verify_log_harnack_mc, verify_log_harnack_oracle,
    verify_sharpness, LevelError, ModulusPoint, VerificationReport,
};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// CLI-level overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub tolerance_scale: Option<f64>,
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<VerificationReport>,
    pub out_dir: PathBuf,
    pub failures: usize,
}

impl SuiteOutcome {
    pub fn all_pass(&self) -> bool {
        self.failures == 0
    }
}

/// Everything a job needs, resolved once per suite.
struct SuiteContext {
    model: Model,
    sim: Option<(f64, Scheme, usize)>, // dt, scheme, n_samples
    grid: Option<(Grid1D, f64)>,       // grid, dt_pde
    functions: BTreeMap<String, TestFunction>,
    seed: u64,
}

impl SuiteContext {
    fn sim_cfg(&self, t: f64, job_seed: u64) -> Result<SimConfig> {
        let (dt, scheme, _) = self
            .sim
            .ok_or_else(|| LabError::Config("job needs the [sim] section".into()))?;
        SimConfig::new(t, dt, job_seed, scheme)
    }

    fn n_samples(&self, over: Option<usize>) -> Result<usize> {
        over.or(self.sim.map(|s| s.2))
            .ok_or_else(|| LabError::Config("job needs a sample count".into()))
    }

    fn grid(&self) -> Result<(Grid1D, f64)> {
        self.grid
            .ok_or_else(|| LabError::Config("job needs the [grid] section".into()))
    }

    fn function(&self, name: &str) -> Result<&TestFunction> {
        self.functions
            .get(name)
            .ok_or_else(|| LabError::Config(format!("unknown function `{name}`")))
    }
}

/// Rows destined for the plot CSVs.
#[derive(Debug, Default)]
struct JobOutput {
    reports: Vec<VerificationReport>,
    levels: Vec<(String, LevelError)>,
    moduli: Vec<(String, ModulusPoint)>,
    sharpness: Vec<(String, f64, f64)>, // name, d, slack
}

fn grid_of(spec: &GridSpec) -> Result<Grid1D> {
    Grid1D::new(spec.lo, spec.hi, spec.points)
}

/// Run one suite from an already-loaded config. `base_dir` anchors relative
/// paths (the registry) of the config file.
pub fn run_suite(
    config: &ExperimentConfig,
    base_dir: &Path,
    config_stem: &str,
    options: &SuiteOptions,
) -> Result<SuiteOutcome> {
    let seed = options.seed.unwrap_or(config.seed);
    let model = config.build_model(base_dir)?;
    let mut functions = BTreeMap::new();
    for f in &config.functions {
        functions.insert(f.name.clone(), f.build()?);
    }
    let ctx = SuiteContext {
        model,
        sim: config
            .sim
            .as_ref()
            .map(|s| (s.dt, s.scheme, s.n_samples)),
        grid: match &config.grid {
            Some(g) => Some((grid_of(g)?, g.dt_pde)),
            None => None,
        },
        functions,
        seed,
    };

    let run_all = || -> Result<Vec<JobOutput>> {
        config
            .jobs
            .par_iter()
            .enumerate()
            .map(|(idx, job)| run_job(&ctx, idx, job))
            .collect()
    };
    let outputs = match options.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| LabError::Solver(format!("worker pool: {e}")))?;
            pool.install(run_all)?
        }
        None => run_all()?,
    };

    let mut reports = Vec::new();
    let mut levels = Vec::new();
    let mut moduli = Vec::new();
    let mut sharpness = Vec::new();
    for mut out in outputs {
        reports.append(&mut out.reports);
        levels.append(&mut out.levels);
        moduli.append(&mut out.moduli);
        sharpness.append(&mut out.sharpness);
    }
    if let Some(scale) = options.tolerance_scale {
        if !(scale > 0.0) {
            return Err(LabError::Usage("tolerance scale must be > 0".into()));
        }
        for r in &mut reports {
            r.tolerance *= scale;
            let two_sided = r.metadata["comparison"] == "two_sided";
            r.verdict = if two_sided {
                r.slack.abs() <= r.tolerance
            } else {
                r.slack >= -r.tolerance
            };
        }
    }
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    levels.sort_by(|a, b| (&a.0, a.1.level).cmp(&(&b.0, b.1.level)));
    moduli.sort_by(|a, b| (&a.0, b.1.distance).partial_cmp(&(&b.0, a.1.distance)).unwrap());
    sharpness.sort_by(|a, b| (&a.0, a.1).partial_cmp(&(&b.0, b.1)).unwrap());

    let out_dir = resolve_out_dir(config, config_stem, options);
    write_outputs(&out_dir, &reports, &levels, &moduli, &sharpness)?;

    let failures = reports.iter().filter(|r| !r.verdict).count();
    Ok(SuiteOutcome {
        reports,
        out_dir,
        failures,
    })
}

fn resolve_out_dir(
    config: &ExperimentConfig,
    config_stem: &str,
    options: &SuiteOptions,
) -> PathBuf {
    if let Some(dir) = &options.out_dir {
        return dir.clone();
    }
    if let Some(dir) = &config.out_dir {
        return PathBuf::from(dir);
    }
    let base = std::env::var("HARNACK_LAB_OUT").unwrap_or_else(|_| "reports".to_string());
    PathBuf::from(base).join(config_stem)
}

fn run_job(ctx: &SuiteContext, idx: usize, job: &JobSpec) -> Result<JobOutput> {
    let mut out = JobOutput::default();
    match job {
        JobSpec::LogHarnack {
            backend,
            function,
            times,
            pairs,
            n_samples,
        } => {
            let f = ctx.function(function)?;
            let tag = match backend {
                Backend::Mc => "mc",
                Backend::Oracle => "oracle",
            };
            for (p_idx, pair) in pairs.iter().enumerate() {
                for t in times {
                    let name = format!("log_harnack/{tag}/{function}/t={t}/pair{p_idx}");
                    let report = match backend {
                        Backend::Mc => {
                            let cfg = ctx.sim_cfg(*t, derive_seed(ctx.seed, &name))?;
                            let n = ctx.n_samples(*n_samples)?;
                            verify_log_harnack_mc(
                                &name, &ctx.model, &pair.x, &pair.y, *t, f, n, &cfg,
                            )?
                        }
                        Backend::Oracle => {
                            let (grid, dt_pde) = ctx.grid()?;
                            verify_log_harnack_oracle(
                                &name,
                                &ctx.model,
                                pair.x[0],
                                pair.y[0],
                                *t,
                                f,
                                &grid,
                                dt_pde,
                            )?
                        }
                    };
                    out.reports.push(report);
                }
            }
        }
        JobSpec::CouplingContraction {
            times,
            pairs,
            random_pairs,
            n_samples,
        } => {
            let mut all_pairs: Vec<(Vec<f64>, Vec<f64>)> = pairs
                .iter()
                .map(|p| (p.x.clone(), p.y.clone()))
                .collect();
            if let Some(rp) = random_pairs {
                let stream =
                    GaussianStream::new(derive_seed(ctx.seed, &format!("job{idx}/pairs")), 0);
                let dim = ctx.model.dim();
                for k in 0..rp.count {
                    let mut x = vec![0.0; dim];
                    let mut y = vec![0.0; dim];
                    for lane in 0..dim {
                        x[lane] =
                            stream.uniform(k as u64, Channel::Aux, 2 * lane as u64, rp.lo, rp.hi);
                        y[lane] = stream.uniform(
                            k as u64,
                            Channel::Aux,
                            2 * lane as u64 + 1,
                            rp.lo,
                            rp.hi,
                        );
                    }
                    all_pairs.push((x, y));
                }
            }
            let n = ctx.n_samples(*n_samples)?;
            for (p_idx, (x, y)) in all_pairs.iter().enumerate() {
                for t in times {
                    let name = format!("coupling/t={t}/pair{p_idx}");
                    let cfg = ctx.sim_cfg(*t, derive_seed(ctx.seed, &name))?;
                    out.reports.push(verify_coupling_contraction(
                        &name, &ctx.model, x, y, *t, n, &cfg,
                    )?);
                }
            }
        }
        JobSpec::Sharpness {
            function,
            t,
            d_star,
            d_sweep,
            bound,
        } => {
            let f = ctx.function(function)?;
            let (grid, dt_pde) = ctx.grid()?;
            let name = format!("sharpness/{function}");
            let report = verify_sharpness(
                &name, &ctx.model, f, *t, *d_star, d_sweep, *bound, &grid, dt_pde,
            )?;
            if let Some(sweep) = report.metadata["sweep"].as_array() {
                for entry in sweep {
                    if let (Some(d), Some(s)) = (entry[0].as_f64(), entry[1].as_f64()) {
                        out.sharpness.push((name.clone(), d, s));
                    }
                }
            }
            out.reports.push(report);
        }
        JobSpec::DdIdentity {
            function,
            t,
            s_fractions,
            rel_tol,
        } => {
            let f = ctx.function(function)?;
            let (grid, dt_pde) = ctx.grid()?;
            let s_list: Vec<f64> = s_fractions.iter().map(|frac| frac * t).collect();
            let name = format!("dd_identity/{function}");
            out.reports.push(verify_dd_identity(
                &name, &ctx.model, f, *t, &s_list, &grid, dt_pde, *rel_tol,
            )?);
        }
        JobSpec::GradientEstimate { function, times } => {
            let f = ctx.function(function)?;
            let (grid, dt_pde) = ctx.grid()?;
            for t in times {
                let name = format!("gradient/{function}/t={t}");
                out.reports.push(verify_gradient_estimate(
                    &name, &ctx.model, f, *t, &grid, dt_pde,
                )?);
            }
        }
        JobSpec::FellerModulus {
            function,
            t,
            x,
            distances,
            eps_lo,
            eps_hi,
            eps_points,
            modulus_threshold,
        } => {
            let f = ctx.function(function)?;
            let (grid, dt_pde) = ctx.grid()?;
            let name = format!("feller/{function}");
            let (reports, moduli) = verify_feller_modulus(
                &name,
                &ctx.model,
                f,
                *t,
                *x,
                distances,
                *eps_lo,
                *eps_hi,
                *eps_points,
                *modulus_threshold,
                &grid,
                dt_pde,
            )?;
            out.reports.extend(reports);
            out.moduli
                .extend(moduli.into_iter().map(|m| (name.clone(), m)));
        }
        JobSpec::HeatKernelEntropy { times, x_values } => {
            let m = ctx
                .model
                .as_diffusion()
                .ok_or_else(|| LabError::Config("heat-kernel job needs a 1-D model".into()))?;
            let (grid, dt_pde) = ctx.grid()?;
            for t in times {
                let kernel = build_kernel(m, *t, &grid, dt_pde)?;
                for x in x_values {
                    let name = format!("heat_kernel/t={t}/x={x}");
                    out.reports
                        .push(verify_heat_kernel_entropy(&name, &kernel, m.k, *x)?);
                }
            }
        }
        JobSpec::EntropyCost {
            t,
            densities,
            sinkhorn_epsilon,
        } => {
            let m = ctx
                .model
                .as_diffusion()
                .ok_or_else(|| LabError::Config("entropy-cost job needs a 1-D model".into()))?;
            let (grid, dt_pde) = ctx.grid()?;
            let kernel = build_kernel(m, *t, &grid, dt_pde)?;
            for density in densities {
                let f = crate::verify::named_density(&kernel, density)?;
                let name = format!("entropy_cost/t={t}/{density}");
                out.reports.extend(verify_entropy_cost(
                    &name,
                    &kernel,
                    m.k,
                    &f,
                    *sinkhorn_epsilon,
                )?);
            }
        }
        JobSpec::GalerkinConvergence {
            levels,
            ref_level,
            x0,
            t,
            n_samples,
            compare_tail,
            max_ratio,
        } => {
            let g = ctx
                .model
                .as_galerkin()
                .ok_or_else(|| LabError::Config("convergence job needs a Galerkin model".into()))?;
            let name = if *compare_tail {
                "galerkin_additive".to_string()
            } else {
                "galerkin_full".to_string()
            };
            let cfg = ctx.sim_cfg(*t, derive_seed(ctx.seed, &name))?;
            let n = ctx.n_samples(*n_samples)?;
            let (reports, errors) = verify_galerkin_convergence(
                &name,
                g,
                levels,
                *ref_level,
                x0,
                *t,
                n,
                &cfg,
                *compare_tail,
                max_ratio.unwrap_or(0.2),
            )?;
            out.reports.extend(reports);
            out.levels
                .extend(errors.into_iter().map(|e| (name.clone(), e)));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_outputs(
    out_dir: &Path,
    reports: &[VerificationReport],
    levels: &[(String, LevelError)],
    moduli: &[(String, ModulusPoint)],
    sharpness: &[(String, f64, f64)],
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(reports)
        .map_err(|e| LabError::Solver(format!("report serialization: {e}")))?;
    atomic_write(&out_dir.join("reports.json"), &(json + "\n"))?;

    let mut summary = String::from("name,lhs,rhs,slack,tolerance,verdict\n");
    for r in reports {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name,
            r.lhs,
            r.rhs,
            r.slack,
            r.tolerance,
            if r.verdict { "pass" } else { "FAIL" }
        ));
    }
    atomic_write(&out_dir.join("summary.csv"), &summary)?;

    // slack against time for every report that carries a time
    let mut slack_rows = String::from("name,t,slack,tolerance\n");
    let mut have_slack = false;
    for r in reports {
        if let Some(t) = r.metadata.get("t").and_then(|v| v.as_f64()) {
            slack_rows.push_str(&format!("{},{},{},{}\n", r.name, t, r.slack, r.tolerance));
            have_slack = true;
        }
    }
    if have_slack {
        atomic_write(&out_dir.join("slack_vs_t.csv"), &slack_rows)?;
    }

    if !levels.is_empty() {
        let mut rows = String::from("name,level,error,stderr,tail\n");
        for (name, e) in levels {
            rows.push_str(&format!(
                "{},{},{},{},{}\n",
                name,
                e.level,
                e.d,
                e.stderr,
                e.tail.map(|t| t.to_string()).unwrap_or_default()
            ));
        }
        atomic_write(&out_dir.join("galerkin_levels.csv"), &rows)?;
    }

    if !moduli.is_empty() {
        let mut rows = String::from("name,distance,modulus,eps_opt\n");
        for (name, m) in moduli {
            rows.push_str(&format!(
                "{},{},{},{}\n",
                name, m.distance, m.modulus, m.eps_opt
            ));
        }
        atomic_write(&out_dir.join("feller_modulus.csv"), &rows)?;
    }

    if !sharpness.is_empty() {
        let mut rows = String::from("name,displacement,slack\n");
        for (name, d, s) in sharpness {
            rows.push_str(&format!("{name},{d},{s}\n"));
        }
        atomic_write(&out_dir.join("sharpness_sweep.csv"), &rows)?;
    }
    Ok(())
}
