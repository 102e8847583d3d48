//! TOML run configuration. Relative paths resolve against the directory
//! holding the config file. See `docs/CONFIG.md` for every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::data::CsvSchema;
use crate::distill::{BlendConfig, StudentConfig, TeacherConfig};
use crate::error::{Error, Result};

use super::recipes::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub schema: CsvSchema,
    pub min_freq: usize,
    /// Sentences are truncated to this many tokens.
    pub max_len: usize,
    /// Optional `word v1 … vd` text file of pretrained vectors.
    pub embeddings: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: None,
            test: None,
            schema: CsvSchema::default(),
            min_freq: 1,
            max_len: 400,
            embeddings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub teacher: TeacherConfig,
    pub student: StudentConfig,
    pub train: TrainConfig,
    pub blend: BlendConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            teacher: TeacherConfig::default(),
            student: StudentConfig::default(),
            train: TrainConfig::default(),
            blend: BlendConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, resolves and validates, including that every named input path
    /// exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::from_toml(&text, base)?;
        cfg.check_inputs_exist()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in [&mut self.data.train, &mut self.data.test, &mut self.data.embeddings]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for p in [&mut self.bench.teacher, &mut self.bench.student].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.blend.validate()?;
        self.train.validate()?;
        self.bench.validate()?;
        if self.data.max_len == 0 {
            return Err(Error::Config("data.max_len must be at least 1".into()));
        }
        for (name, d) in [("teacher", self.teacher.dropout), ("student", self.student.dropout)] {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("{name}.dropout = {d} outside [0, 1)")));
            }
        }
        if self.student.filter_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("student filter widths must be positive".into()));
        }
        Ok(())
    }

    pub fn check_inputs_exist(&self) -> Result<()> {
        for p in [&self.data.train, &self.data.test, &self.data.embeddings].into_iter().flatten() {
            require_path(p)?;
        }
        Ok(())
    }

    pub fn train_path(&self) -> Result<&Path> {
        self.data
            .train
            .as_deref()
            .ok_or_else(|| Error::Config("data.train is not set".into()))
    }

    pub fn test_path(&self) -> Result<&Path> {
        self.data
            .test
            .as_deref()
            .ok_or_else(|| Error::Config("data.test is not set".into()))
    }
}

pub fn require_path(p: &Path) -> Result<()> {
    if !p.exists() {
        return Err(Error::Config(format!("path does not exist: {}", p.display())));
    }
    Ok(())
}
