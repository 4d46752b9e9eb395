//! Plain-text reports. Each one starts with the resolved config and its
//! sha256 and ends with `report_sha256`, the hash of everything above it.
//! Nothing time- or path-dependent is written, so reruns are byte-identical.

use std::fmt::Display;
use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub struct Report {
    body: String,
}

impl Report {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        let mut body = format!("# chemobound {command} report\n\n[config]\n");
        for line in config.canonical().lines() {
            let _ = writeln!(body, "  {line}");
        }
        let _ = writeln!(body, "config_sha256 = {}", config.sha256());
        Report { body }
    }

    pub fn section(&mut self, name: &str) {
        let _ = write!(self.body, "\n[{name}]\n");
    }

    pub fn kv(&mut self, key: &str, value: impl Display) {
        let _ = writeln!(self.body, "{key} = {value}");
    }

    pub fn line(&mut self, text: impl Display) {
        let _ = writeln!(self.body, "{text}");
    }

    /// Final text and its hash.
    pub fn finish(mut self) -> (String, String) {
        let hash = hex::encode(Sha256::digest(self.body.as_bytes()));
        let _ = write!(self.body, "\nreport_sha256 = {hash}\n");
        (self.body, hash)
    }
}
