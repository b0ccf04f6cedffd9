//! Run configuration: a line-based `key = value` format with `[section]`
//! headers, a canonical serializer, and stable hashes that tag on-disk
//! artifacts so stale files are detected instead of silently reused.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Result, RwkError};
use crate::kernel::RepairMode;
use crate::pipeline::{ArtifactOptions, FeatureMode, PairwiseMode};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSection {
    pub path: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturesSection {
    pub mode: FeatureMode,
    pub wl_rounds: usize,
    pub variation_hops: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSection {
    pub dimension: usize,
    pub diffusion_time: f64,
    pub pairwise: PairwiseMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSection {
    pub eta: f64,
    pub repair: RepairMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifySection {
    pub c_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub repair_grid: Vec<RepairMode>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: String,
    /// Worker threads for pair solves; 0 means one per logical core.
    pub workers: usize,
}

/// Full configuration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub features: FeaturesSection,
    pub embedding: EmbeddingSection,
    pub solver: SolverConfig,
    pub kernel: KernelSection,
    pub classify: ClassifySection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSection { path: "data/MUTAG".into(), name: "MUTAG".into() },
            features: FeaturesSection {
                mode: FeatureMode::Wl,
                wl_rounds: 2,
                variation_hops: 2,
            },
            embedding: EmbeddingSection {
                dimension: 64,
                diffusion_time: 1.0,
                pairwise: PairwiseMode::ShortestPath,
            },
            solver: SolverConfig::default(),
            kernel: KernelSection { eta: 1.0, repair: RepairMode::Clip },
            classify: ClassifySection {
                c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
                eta_grid: vec![0.1, 1.0, 10.0],
                repair_grid: vec![RepairMode::Clip],
                outer_folds: 10,
                inner_folds: 5,
                seed: 42,
            },
            output: OutputSection { directory: "out".into(), workers: 0 },
        }
    }
}

fn feature_mode_str(mode: FeatureMode) -> &'static str {
    match mode {
        FeatureMode::Continuous => "continuous",
        FeatureMode::Wl => "wl",
    }
}

fn parse_feature_mode(s: &str) -> Result<FeatureMode> {
    match s {
        "continuous" => Ok(FeatureMode::Continuous),
        "wl" => Ok(FeatureMode::Wl),
        other => Err(RwkError::Config(format!(
            "unknown feature mode {other:?} (expected continuous or wl)"
        ))),
    }
}

fn pairwise_mode_str(mode: PairwiseMode) -> &'static str {
    match mode {
        PairwiseMode::ShortestPath => "shortest_path",
        PairwiseMode::Adjacency => "adjacency",
        PairwiseMode::Embedding => "embedding",
    }
}

fn parse_pairwise_mode(s: &str) -> Result<PairwiseMode> {
    match s {
        "shortest_path" => Ok(PairwiseMode::ShortestPath),
        "adjacency" => Ok(PairwiseMode::Adjacency),
        "embedding" => Ok(PairwiseMode::Embedding),
        other => Err(RwkError::Config(format!(
            "unknown pairwise mode {other:?} (expected shortest_path, adjacency, or embedding)"
        ))),
    }
}

/// Floats render in plain decimal when readable, exponent form otherwise.
/// Either way the output re-parses to the identical bit pattern.
fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && (a < 1e-4 || a >= 1e6) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn fmt_float_list(vs: &[f64]) -> String {
    vs.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(", ")
}

fn fmt_repair_list(vs: &[RepairMode]) -> String {
    vs.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(", ")
}

fn parse_float(section: &str, key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        RwkError::Config(format!("[{section}] {key} = {value:?} is not a number"))
    })
}

fn parse_usize(section: &str, key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| {
        RwkError::Config(format!("[{section}] {key} = {value:?} is not a whole number"))
    })
}

fn parse_u64(section: &str, key: &str, value: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|_| {
        RwkError::Config(format!("[{section}] {key} = {value:?} is not a whole number"))
    })
}

fn parse_float_list(section: &str, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|part| parse_float(section, key, part.trim()))
        .collect()
}

fn parse_repair_list(value: &str) -> Result<Vec<RepairMode>> {
    value.split(',').map(|part| RepairMode::from_str(part.trim())).collect()
}

impl RunConfig {
    /// Parses the text form. Unknown sections, unknown keys, and repeated
    /// keys are errors; anything after `#` on a line is a comment.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let Some(name) = inner.strip_suffix(']') else {
                    return Err(RwkError::Config(format!(
                        "line {}: malformed section header {line:?}",
                        lineno + 1
                    )));
                };
                section = name.trim().to_string();
                match section.as_str() {
                    "dataset" | "features" | "embedding" | "solver" | "kernel"
                    | "classify" | "output" => {}
                    other => {
                        return Err(RwkError::Config(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )));
                    }
                }
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(RwkError::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    lineno + 1
                )));
            };
            if section.is_empty() {
                return Err(RwkError::Config(format!(
                    "line {}: key before any [section] header",
                    lineno + 1
                )));
            }
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(RwkError::Config(format!(
                    "line {}: empty key or value in {line:?}",
                    lineno + 1
                )));
            }
            if !seen.insert((section.clone(), key.clone())) {
                return Err(RwkError::Config(format!(
                    "line {}: repeated key {key:?} in [{section}]",
                    lineno + 1
                )));
            }
            cfg.apply(&section, &key, &value, lineno + 1)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, lineno: usize) -> Result<()> {
        let unknown = || {
            Err(RwkError::Config(format!(
                "line {lineno}: unknown key {key:?} in [{section}]"
            )))
        };
        match section {
            "dataset" => match key {
                "path" => self.dataset.path = value.to_string(),
                "name" => self.dataset.name = value.to_string(),
                _ => return unknown(),
            },
            "features" => match key {
                "mode" => self.features.mode = parse_feature_mode(value)?,
                "wl_rounds" => self.features.wl_rounds = parse_usize(section, key, value)?,
                "variation_hops" => {
                    self.features.variation_hops = parse_usize(section, key, value)?
                }
                _ => return unknown(),
            },
            "embedding" => match key {
                "dimension" => self.embedding.dimension = parse_usize(section, key, value)?,
                "diffusion_time" => {
                    self.embedding.diffusion_time = parse_float(section, key, value)?
                }
                "pairwise" => self.embedding.pairwise = parse_pairwise_mode(value)?,
                _ => return unknown(),
            },
            "solver" => match key {
                "beta1" => self.solver.beta1 = parse_float(section, key, value)?,
                "beta2" => self.solver.beta2 = parse_float(section, key, value)?,
                "lambda_mu" => self.solver.lambda_mu = parse_float(section, key, value)?,
                "lambda_nu" => self.solver.lambda_nu = parse_float(section, key, value)?,
                "rho" => self.solver.rho = parse_float(section, key, value)?,
                "lambda_g" => self.solver.lambda_g = parse_float(section, key, value)?,
                "sinkhorn_lambda" => {
                    self.solver.sinkhorn_lambda = parse_float(section, key, value)?
                }
                "sinkhorn_iters" => {
                    self.solver.sinkhorn_iters = parse_usize(section, key, value)?
                }
                "max_iters" => self.solver.max_iters = parse_usize(section, key, value)?,
                "epsilon" => self.solver.epsilon = parse_float(section, key, value)?,
                "alpha0" => self.solver.alpha0 = parse_float(section, key, value)?,
                "log_floor" => self.solver.log_floor = parse_float(section, key, value)?,
                _ => return unknown(),
            },
            "kernel" => match key {
                "eta" => self.kernel.eta = parse_float(section, key, value)?,
                "repair" => self.kernel.repair = RepairMode::from_str(value)?,
                _ => return unknown(),
            },
            "classify" => match key {
                "c_grid" => self.classify.c_grid = parse_float_list(section, key, value)?,
                "eta_grid" => self.classify.eta_grid = parse_float_list(section, key, value)?,
                "repair_grid" => self.classify.repair_grid = parse_repair_list(value)?,
                "outer_folds" => {
                    self.classify.outer_folds = parse_usize(section, key, value)?
                }
                "inner_folds" => {
                    self.classify.inner_folds = parse_usize(section, key, value)?
                }
                "seed" => self.classify.seed = parse_u64(section, key, value)?,
                _ => return unknown(),
            },
            "output" => match key {
                "directory" => self.output.directory = value.to_string(),
                "workers" => self.output.workers = parse_usize(section, key, value)?,
                _ => return unknown(),
            },
            _ => unreachable!("section already validated"),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| RwkError::Ingestion {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        RunConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.path.is_empty() || self.dataset.name.is_empty() {
            return Err(RwkError::Config("dataset path and name must be set".into()));
        }
        if self.embedding.dimension == 0 {
            return Err(RwkError::Config("embedding dimension must be at least 1".into()));
        }
        if self.embedding.diffusion_time < 0.0 {
            return Err(RwkError::Config("diffusion_time must be non-negative".into()));
        }
        self.solver.validate()?;
        if !(self.kernel.eta > 0.0) {
            return Err(RwkError::Config(format!(
                "kernel eta = {} must be positive",
                self.kernel.eta
            )));
        }
        if self.classify.c_grid.is_empty()
            || self.classify.eta_grid.is_empty()
            || self.classify.repair_grid.is_empty()
        {
            return Err(RwkError::Config("classify grids must be non-empty".into()));
        }
        if self.classify.c_grid.iter().any(|&c| !(c > 0.0)) {
            return Err(RwkError::Config("c_grid values must be positive".into()));
        }
        if self.classify.eta_grid.iter().any(|&s| !(s > 0.0)) {
            return Err(RwkError::Config("eta_grid values must be positive".into()));
        }
        if self.classify.outer_folds < 2 || self.classify.inner_folds < 2 {
            return Err(RwkError::Config("fold counts must be at least 2".into()));
        }
        Ok(())
    }

    /// Canonical text form; `parse(render())` reproduces the value exactly.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("[dataset]\n");
        out.push_str(&format!("path = {}\n", self.dataset.path));
        out.push_str(&format!("name = {}\n", self.dataset.name));
        out.push_str("\n[features]\n");
        out.push_str(&format!("mode = {}\n", feature_mode_str(self.features.mode)));
        out.push_str(&format!("wl_rounds = {}\n", self.features.wl_rounds));
        out.push_str(&format!("variation_hops = {}\n", self.features.variation_hops));
        out.push_str("\n[embedding]\n");
        out.push_str(&format!("dimension = {}\n", self.embedding.dimension));
        out.push_str(&format!(
            "diffusion_time = {}\n",
            fmt_float(self.embedding.diffusion_time)
        ));
        out.push_str(&format!("pairwise = {}\n", pairwise_mode_str(self.embedding.pairwise)));
        out.push_str("\n[solver]\n");
        out.push_str(&format!("beta1 = {}\n", fmt_float(self.solver.beta1)));
        out.push_str(&format!("beta2 = {}\n", fmt_float(self.solver.beta2)));
        out.push_str(&format!("lambda_mu = {}\n", fmt_float(self.solver.lambda_mu)));
        out.push_str(&format!("lambda_nu = {}\n", fmt_float(self.solver.lambda_nu)));
        out.push_str(&format!("rho = {}\n", fmt_float(self.solver.rho)));
        out.push_str(&format!("lambda_g = {}\n", fmt_float(self.solver.lambda_g)));
        out.push_str(&format!(
            "sinkhorn_lambda = {}\n",
            fmt_float(self.solver.sinkhorn_lambda)
        ));
        out.push_str(&format!("sinkhorn_iters = {}\n", self.solver.sinkhorn_iters));
        out.push_str(&format!("max_iters = {}\n", self.solver.max_iters));
        out.push_str(&format!("epsilon = {}\n", fmt_float(self.solver.epsilon)));
        out.push_str(&format!("alpha0 = {}\n", fmt_float(self.solver.alpha0)));
        out.push_str(&format!("log_floor = {}\n", fmt_float(self.solver.log_floor)));
        out.push_str("\n[kernel]\n");
        out.push_str(&format!("eta = {}\n", fmt_float(self.kernel.eta)));
        out.push_str(&format!("repair = {}\n", self.kernel.repair.as_str()));
        out.push_str("\n[classify]\n");
        out.push_str(&format!("c_grid = {}\n", fmt_float_list(&self.classify.c_grid)));
        out.push_str(&format!("eta_grid = {}\n", fmt_float_list(&self.classify.eta_grid)));
        out.push_str(&format!(
            "repair_grid = {}\n",
            fmt_repair_list(&self.classify.repair_grid)
        ));
        out.push_str(&format!("outer_folds = {}\n", self.classify.outer_folds));
        out.push_str(&format!("inner_folds = {}\n", self.classify.inner_folds));
        out.push_str(&format!("seed = {}\n", self.classify.seed));
        out.push_str("\n[output]\n");
        out.push_str(&format!("directory = {}\n", self.output.directory));
        out.push_str(&format!("workers = {}\n", self.output.workers));
        out
    }

    pub fn artifact_options(&self) -> ArtifactOptions {
        ArtifactOptions {
            feature_mode: self.features.mode,
            wl_rounds: self.features.wl_rounds,
            variation_hops: self.features.variation_hops,
            embed_dim: self.embedding.dimension,
            diffusion_time: self.embedding.diffusion_time,
            pairwise: self.embedding.pairwise,
        }
    }

    fn embed_material(&self) -> String {
        format!(
            "name={}\nmode={}\nwl_rounds={}\nvariation_hops={}\ndimension={}\n\
             diffusion_time={}\npairwise={}\n",
            self.dataset.name,
            feature_mode_str(self.features.mode),
            self.features.wl_rounds,
            self.features.variation_hops,
            self.embedding.dimension,
            fmt_float(self.embedding.diffusion_time),
            pairwise_mode_str(self.embedding.pairwise),
        )
    }

    fn solve_material(&self) -> String {
        let s = &self.solver;
        format!(
            "{}beta1={}\nbeta2={}\nlambda_mu={}\nlambda_nu={}\nrho={}\nlambda_g={}\n\
             sinkhorn_lambda={}\nsinkhorn_iters={}\nmax_iters={}\nepsilon={}\n\
             alpha0={}\nlog_floor={}\neta={}\n",
            self.embed_material(),
            fmt_float(s.beta1),
            fmt_float(s.beta2),
            fmt_float(s.lambda_mu),
            fmt_float(s.lambda_nu),
            fmt_float(s.rho),
            fmt_float(s.lambda_g),
            fmt_float(s.sinkhorn_lambda),
            s.sinkhorn_iters,
            s.max_iters,
            fmt_float(s.epsilon),
            fmt_float(s.alpha0),
            fmt_float(s.log_floor),
            fmt_float(self.kernel.eta),
        )
    }

    /// Sixteen hex characters over everything that shapes Gram entries:
    /// dataset name, feature and embedding settings, solver settings, and
    /// the kernel decay rate. Repair mode and classifier settings are
    /// excluded because they act downstream of the stored matrix.
    pub fn config_hash(&self) -> String {
        short_hash(&self.solve_material())
    }

    /// Hash over the settings that shape per-graph artifacts only.
    pub fn embed_hash(&self) -> String {
        short_hash(&self.embed_material())
    }
}

fn short_hash(material: &str) -> String {
    let digest = Sha256::digest(material.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
