//! Output directory: `trials.jsonl`, `curves/*.csv`, `search_log.json`,
//! `bench_report.json` and `config.resolved`. A `.lock` file keeps two
//! runs from writing the same directory at once.

use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{io_err, json_err, Error, Result};
use crate::harness::TrialResult;

pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    /// Creates `root` if needed and takes its lock.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        let lock = root.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => return Err(Error::Locked(root.to_path_buf())),
            Err(e) => return Err(io_err(&lock)(e)),
        }
        Ok(Self {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn append_trial(&self, trial: &TrialResult) -> Result<()> {
        let path = self.root.join("trials.jsonl");
        let line = serde_json::to_string(trial).map_err(json_err(&path))?;
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        writeln!(f, "{line}").map_err(io_err(&path))
    }

    /// `curves/<trial id>_<method>.csv` with `stage,epoch,loss,val_acc`.
    pub fn write_curve(&self, trial: &TrialResult) -> Result<PathBuf> {
        let dir = self.root.join("curves");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(format!("{:04}_{}.csv", trial.trial_id, trial.method));
        let mut f = File::create(&path).map_err(io_err(&path))?;
        let mut text = String::from("stage,epoch,loss,val_acc\n");
        for p in &trial.curve {
            text.push_str(&format!("{},{},{},{}\n", p.stage, p.epoch, p.loss, p.val_acc));
        }
        f.write_all(text.as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.root.join(name);
        let text = serde_json::to_string_pretty(value).map_err(json_err(&path))?;
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Reads every record of a `trials.jsonl` file.
pub fn read_trials(path: &Path) -> Result<Vec<TrialResult>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(json_err(path)))
        .collect()
}
