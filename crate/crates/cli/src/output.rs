use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use snapmix_core::fsutil::write_atomic;
use snapmix_core::harness::Table;

use crate::OutArgs;

/// Bad invocation detected after argument parsing (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl OutArgs {
    /// `--out`, else `<out_root>/<command>`.
    pub fn dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.out_root.join(command))
    }
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force` is set.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if !force && is_non_empty(dir) {
        return Err(usage(format!(
            "{} already exists and is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn is_non_empty(dir: &Path) -> bool {
    fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

/// Writes `<stem>.csv` and `<stem>.txt` and echoes the text table to stdout.
pub fn write_table(dir: &Path, stem: &str, table: &Table) -> Result<()> {
    write_text(&dir.join(format!("{stem}.csv")), &table.to_csv())?;
    let text = table.to_text();
    write_text(&dir.join(format!("{stem}.txt")), &text)?;
    print!("{text}");
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
