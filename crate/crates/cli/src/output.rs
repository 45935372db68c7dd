use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Writes the files of one experiment into the output directory; every file is tagged with the
/// experiment id and config hash.
pub struct Output {
    dir: PathBuf,
    experiment: &'static str,
    hash: String,
    config: serde_json::Value,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        Ok(Self {
            dir: cfg.out.clone(),
            experiment: cfg.experiment.id(),
            hash: cfg.hash(),
            config: serde_json::to_value(cfg)?,
            written: Vec::new(),
        })
    }

    /// Header body for CSV files: `experiment=… config_hash=… <extra> units: <units>`.
    pub fn header(&self, extra: &str, units: &str) -> String {
        let extra = if extra.is_empty() { String::new() } else { format!(" {extra}") };
        format!("experiment={} config_hash={}{extra} units: {units}", self.experiment, self.hash)
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// JSON document `{experiment, config_hash, config, report}`.
    pub fn json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<()> {
        let doc = serde_json::json!({
            "experiment": self.experiment,
            "config_hash": self.hash,
            "config": self.config,
            "report": report,
        });
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn svg(&mut self, name: &str, body: String) -> Result<()> {
        let path = self.dir.join(name);
        let tagged = body.replacen('\n', &format!("\n<!-- experiment={} config_hash={} -->\n", self.experiment, self.hash), 1);
        fs::write(&path, tagged).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// `t=0.5` → `0p5`, for file names.
pub fn time_tag(t: f64) -> String {
    format!("{t}").replace('.', "p").replace('-', "m")
}
