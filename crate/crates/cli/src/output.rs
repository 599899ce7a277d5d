use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crate::failure::Failure;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QBSTAB_OUT_DIR";

#[derive(Args, Clone, Debug)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, env = OUT_DIR_ENV, default_value = "qbstab-out")]
    pub out: PathBuf,
}

impl OutArgs {
    pub fn dir(&self) -> Result<&Path, Failure> {
        fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Input(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

/// Floats in CSV files: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
