use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gqlforge_core::da::{AlignMode, DaConfig};
use gqlforge_core::forge::ForgeConfig;
use gqlforge_core::quality::QualityConfig;
use gqlforge_core::textgen::EndpointConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Schema and graph JSON; the bundled fixture when both are absent.
    pub schema: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Fallback,
    Remote,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Align {
    #[default]
    Shape,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: u64,
    pub workers: usize,
    pub rounds_min: u32,
    pub rounds_max: u32,
    pub retry_budget: u32,
    pub quality: QualityConfig,
    pub align: Align,
    pub generator: GeneratorKind,
    pub embedder: EmbedderKind,
    pub endpoint: EndpointConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = ForgeConfig::default();
        RunConfig {
            paths: Paths::default(),
            seed: f.seed,
            workers: f.worker_count,
            rounds_min: f.rounds_min,
            rounds_max: f.rounds_max,
            retry_budget: f.retry_budget,
            quality: f.quality,
            align: Align::default(),
            generator: GeneratorKind::default(),
            embedder: EmbedderKind::default(),
            endpoint: EndpointConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken from the
    /// file's own directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut c: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut c.paths;
        for slot in
            [&mut p.schema, &mut p.graph, &mut p.dataset, &mut p.predictions, &mut p.output, &mut p.templates_dir]
        {
            if let Some(x) = slot.as_mut() {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let q = &self.quality;
        if self.rounds_min == 0 || self.rounds_min > self.rounds_max {
            bail!("rounds_min ({}) must be at least 1 and not above rounds_max ({})", self.rounds_min, self.rounds_max);
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        for (name, v) in [("tau_sem", q.tau_sem), ("dedup_threshold", q.dedup_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                bail!("{name} must lie in [0, 1], got {v}");
            }
        }
        if self.paths.schema.is_some() != self.paths.graph.is_some() {
            bail!("schema and graph paths must be given together");
        }
        Ok(())
    }

    pub fn forge(&self) -> ForgeConfig {
        ForgeConfig {
            rounds_min: self.rounds_min,
            rounds_max: self.rounds_max,
            retry_budget: self.retry_budget,
            seed: self.seed,
            worker_count: self.workers,
            quality: self.quality.clone(),
        }
    }

    pub fn da(&self) -> DaConfig {
        let align = match self.align {
            Align::Shape => AlignMode::Shape,
            Align::Reverse => AlignMode::Reverse { tau_sem: self.quality.tau_sem },
        };
        DaConfig { align, seed: self.seed, worker_count: self.workers }
    }
}
