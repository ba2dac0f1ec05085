//! CSV artifacts with `#`-prefixed metadata lines.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::ExperimentConfig;

pub const TOOL: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Header metadata: tool version, caller-supplied pairs, then the full
/// resolved config between `config-begin` / `config-end` markers. Removing
/// the leading `# ` from the enclosed lines gives a config file that
/// reproduces the run.
pub fn metadata(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tool: {TOOL}");
    let _ = writeln!(out, "# mode: {}", cfg.mode);
    let _ = writeln!(out, "# seed: {}", cfg.seed);
    let _ = writeln!(out, "# dt: {}", cfg.dt);
    let _ = writeln!(out, "# t_max: {}", cfg.t_max);
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str("# config-begin\n");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("# config-end\n");
    out
}

/// Recover the embedded config text from a CSV written by `write_csv`.
pub fn embedded_config(csv: &str) -> Option<String> {
    let mut lines = csv.lines().skip_while(|l| *l != "# config-begin").skip(1);
    let mut out = String::new();
    for line in lines.by_ref() {
        if line == "# config-end" {
            return Some(out);
        }
        out.push_str(
            line.strip_prefix("# ")
                .unwrap_or(line.trim_start_matches('#')),
        );
        out.push('\n');
    }
    None
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Write metadata, a header row and numeric rows (CRLF-free, shortest
/// round-trip float formatting).
pub fn write_csv(path: &Path, meta: &str, header: &[String], rows: &[Vec<f64>]) -> io::Result<()> {
    let mut out = String::with_capacity(meta.len() + rows.len() * header.len() * 12);
    out.push_str(meta);
    out.push_str(
        &header
            .iter()
            .map(|h| quote(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    fs::write(path, out)
}
