//! Declarative experiment configs: one TOML file names a model preset, the
//! test functions, and the list of verification jobs to run. No embedded
//! code; everything is numeric and auditable, and a config plus its seed
//! reproduces a suite byte for byte.

use crate::engine::Scheme;
use crate::error::{LabError, Result};
use crate::estimator::{TestFunction, TestFunctionKind};
use crate::model::{build_preset, builtin_preset_names, Model, ParamMap};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Optional custom preset registry (TOML file, see `Registry`).
    #[serde(default)]
    pub registry: Option<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub sim: Option<SimSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    pub jobs: Vec<JobSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: String,
    #[serde(default)]
    pub params: ParamMap,
}

/// Monte Carlo defaults shared by simulation-backed jobs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dt: f64,
    pub scheme: Scheme,
    pub n_samples: usize,
}

/// Grid and step of the 1-D PDE oracle.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub dt_pde: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: TestFunctionKind,
    #[serde(default)]
    pub floor: f64,
}

impl FunctionSpec {
    pub fn build(&self) -> Result<TestFunction> {
        TestFunction::new(self.kind, self.floor)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPairs {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Mc,
    Oracle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JobSpec {
    LogHarnack {
        backend: Backend,
        function: String,
        times: Vec<f64>,
        pairs: Vec<PairSpec>,
        #[serde(default)]
        n_samples: Option<usize>,
    },
    CouplingContraction {
        times: Vec<f64>,
        #[serde(default)]
        pairs: Vec<PairSpec>,
        #[serde(default)]
        random_pairs: Option<RandomPairs>,
        #[serde(default)]
        n_samples: Option<usize>,
    },
    Sharpness {
        function: String,
        t: f64,
        d_star: f64,
        #[serde(default)]
        d_sweep: Vec<f64>,
        bound: f64,
    },
    DdIdentity {
        function: String,
        t: f64,
        s_fractions: Vec<f64>,
        rel_tol: f64,
    },
    GradientEstimate {
        function: String,
        times: Vec<f64>,
    },
    FellerModulus {
        function: String,
        t: f64,
        x: f64,
        distances: Vec<f64>,
        eps_lo: f64,
        eps_hi: f64,
        eps_points: usize,
        modulus_threshold: f64,
    },
    HeatKernelEntropy {
        times: Vec<f64>,
        x_values: Vec<f64>,
    },
    EntropyCost {
        t: f64,
        densities: Vec<String>,
        #[serde(default)]
        sinkhorn_epsilon: Option<f64>,
    },
    GalerkinConvergence {
        levels: Vec<usize>,
        ref_level: usize,
        x0: Vec<f64>,
        t: f64,
        #[serde(default)]
        n_samples: Option<usize>,
        compare_tail: bool,
        #[serde(default)]
        max_ratio: Option<f64>,
    },
}

impl JobSpec {
    pub fn needs_sim(&self) -> bool {
        matches!(
            self,
            JobSpec::LogHarnack {
                backend: Backend::Mc,
                ..
            } | JobSpec::CouplingContraction { .. }
                | JobSpec::GalerkinConvergence { .. }
        )
    }

    pub fn needs_grid(&self) -> bool {
        matches!(
            self,
            JobSpec::LogHarnack {
                backend: Backend::Oracle,
                ..
            } | JobSpec::Sharpness { .. }
                | JobSpec::DdIdentity { .. }
                | JobSpec::GradientEstimate { .. }
                | JobSpec::FellerModulus { .. }
                | JobSpec::HeatKernelEntropy { .. }
                | JobSpec::EntropyCost { .. }
        )
    }

    pub fn function_name(&self) -> Option<&str> {
        match self {
            JobSpec::LogHarnack { function, .. }
            | JobSpec::Sharpness { function, .. }
            | JobSpec::DdIdentity { function, .. }
            | JobSpec::GradientEstimate { function, .. }
            | JobSpec::FellerModulus { function, .. } => Some(function),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Custom preset registry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registry {
    #[serde(default)]
    pub presets: BTreeMap<String, RegistryEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryEntry {
    pub base: String,
    #[serde(default)]
    pub params: ParamMap,
}

impl Registry {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            LabError::Config(format!("cannot read registry {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| LabError::Config(format!("registry {}: {e}", path.display())))
    }

    /// Resolve a preset name to a base preset and merged parameters; custom
    /// entries may themselves be overridden by `extra` (the config's own
    /// parameter table).
    pub fn resolve(&self, name: &str, extra: &ParamMap) -> Result<(String, ParamMap)> {
        if let Some(entry) = self.presets.get(name) {
            if !builtin_preset_names().contains(&entry.base.as_str()) {
                return Err(LabError::Config(format!(
                    "registry preset `{name}` has unknown base `{}`",
                    entry.base
                )));
            }
            let mut params = entry.params.clone();
            for (k, v) in extra {
                params.insert(k.clone(), *v);
            }
            Ok((entry.base.clone(), params))
        } else {
            Ok((name.to_string(), extra.clone()))
        }
    }
}

// ---------------------------------------------------------------------------
// Loading and validation
// ---------------------------------------------------------------------------

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            LabError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| LabError::Config(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build the model, going through the custom registry when configured.
    pub fn build_model(&self, base_dir: &Path) -> Result<Model> {
        let registry = match &self.registry {
            Some(rel) => Registry::load(&base_dir.join(rel))?,
            None => Registry::default(),
        };
        let (base, params) = registry.resolve(&self.model.preset, &self.model.params)?;
        build_preset(&base, &params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs.is_empty() {
            return Err(LabError::Config("config declares no jobs".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for f in &self.functions {
            if !names.insert(f.name.clone()) {
                return Err(LabError::Config(format!(
                    "duplicate function name `{}`",
                    f.name
                )));
            }
            f.build()?;
        }
        for (idx, job) in self.jobs.iter().enumerate() {
            if let Some(f) = job.function_name() {
                if !names.contains(f) {
                    return Err(LabError::Config(format!(
                        "job #{idx} references unknown function `{f}`"
                    )));
                }
            }
            if job.needs_sim() && self.sim.is_none() {
                return Err(LabError::Config(format!(
                    "job #{idx} needs the [sim] section"
                )));
            }
            if job.needs_grid() && self.grid.is_none() {
                return Err(LabError::Config(format!(
                    "job #{idx} needs the [grid] section"
                )));
            }
            if let JobSpec::CouplingContraction {
                pairs,
                random_pairs,
                ..
            } = job
            {
                if pairs.is_empty() && random_pairs.is_none() {
                    return Err(LabError::Config(format!(
                        "job #{idx}: coupling needs explicit pairs or random_pairs"
                    )));
                }
            }
        }
        if let Some(sim) = &self.sim {
            if !(sim.dt > 0.0) || sim.n_samples < 100 {
                return Err(LabError::Config(
                    "[sim] needs dt > 0 and n_samples >= 100".into(),
                ));
            }
        }
        if let Some(grid) = &self.grid {
            if !(grid.lo < grid.hi) || grid.points < 51 || !(grid.dt_pde > 0.0) {
                return Err(LabError::Config(
                    "[grid] needs lo < hi, points >= 51, dt_pde > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 42

        [model]
        preset = "ou"
        params = { theta = 0.5, sigma0 = 1.0 }

        [grid]
        lo = -8.0
        hi = 8.0
        points = 401
        dt_pde = 1e-3

        [[functions]]
        name = "exp1"
        kind = "exponential"
        rate = 1.0

        [[jobs]]
        kind = "log_harnack"
        backend = "oracle"
        function = "exp1"
        times = [1.0]
        pairs = [{ x = [1.0], y = [0.0] }]
    "#;

    #[test]
    fn parses_minimal_config() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.functions.len(), 1);
        let f = cfg.functions[0].build().unwrap();
        assert_eq!(
            f.kind,
            TestFunctionKind::Exponential { rate: 1.0 }
        );
        let model = cfg.build_model(Path::new(".")).unwrap();
        assert_eq!(model.dim(), 1);
    }

    #[test]
    fn unknown_function_reference_is_caught() {
        let text = MINIMAL.replace("function = \"exp1\"", "function = \"nope\"");
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let text = MINIMAL.replace("seed = 42", "seed = 42\nbogus_key = 1");
        let err = toml::from_str::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn missing_grid_for_oracle_job_is_caught() {
        let text = MINIMAL.replace("[grid]", "[grid_unused]");
        // unknown section name already fails parsing; drop it instead
        let text = text
            .lines()
            .filter(|l| {
                !l.contains("grid_unused")
                    && !l.trim_start().starts_with("lo =")
                    && !l.trim_start().starts_with("hi =")
                    && !l.trim_start().starts_with("points =")
                    && !l.trim_start().starts_with("dt_pde =")
            })
            .collect::<Vec<_>>()
            .join("\n");
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("[grid]"));
    }

    #[test]
    fn registry_resolves_and_overrides() {
        let reg: Registry = toml::from_str(
            r#"
            [presets.fast_ou]
            base = "ou"
            params = { theta = 1.0 }
        "#,
        )
        .unwrap();
        let mut extra = ParamMap::new();
        extra.insert("sigma0".into(), 0.5);
        let (base, params) = reg.resolve("fast_ou", &extra).unwrap();
        assert_eq!(base, "ou");
        assert_eq!(params["theta"], 1.0);
        assert_eq!(params["sigma0"], 0.5);
        // unknown names pass through to the builtin registry
        let (base, _) = reg.resolve("tanh_perturbed", &ParamMap::new()).unwrap();
        assert_eq!(base, "tanh_perturbed");
    }
}
