//! CSV and JSON writers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use tmb_core::eigfun::ProfileSamples;
use tmb_core::C64;

use crate::CliError;

/// Full double precision: 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn complex(z: C64) -> Value {
    serde_json::json!({ "re": z.re, "im": z.im })
}

/// Output directory plus the list of files written so far.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::csv(&path, e))?;
        w.write_record(header).map_err(|e| CliError::csv(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| CliError::csv(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

pub const PROFILE_HEADER: [&str; 7] = ["zone", "side", "x", "c_re", "c_im", "q_re", "q_im"];

pub fn profile_rows(s: &ProfileSamples) -> Vec<Vec<String>> {
    (0..s.len())
        .map(|i| {
            vec![
                s.zone[i].to_string(),
                s.side[i].tag().to_string(),
                num(s.x[i]),
                num(s.c[i].re),
                num(s.c[i].im),
                num(s.q[i].re),
                num(s.q[i].im),
            ]
        })
        .collect()
}
