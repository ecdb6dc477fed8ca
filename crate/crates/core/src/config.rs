//! Flat `key = value` run configuration files.
//!
//! Keys mirror the command-line flags of `analyze`: `input`, `suite`, `grid`,
//! `tol`, `fd-tol`, `fd-check`, `seed`, `out`, `format`. Blank lines and lines
//! starting with `#` are ignored. Flags given on the command line win over
//! values from the file.

use std::path::PathBuf;

use crate::report::{parse_suites, InputRef, OutputFormat, Suite};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub input: Option<InputRef>,
    pub suites: Option<Vec<Suite>>,
    pub grid: Option<Vec<usize>>,
    pub tol: Option<f64>,
    pub fd_tol: Option<f64>,
    pub fd_check: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

pub fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<usize>().map_err(|_| format!("grid count `{}` is not a positive integer", c.trim())))
        .collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("`{s}` is not a boolean")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, String> {
        let mut cfg = ConfigFile::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let (key, value) = (key.trim().replace('_', "-"), value.trim());
            let at = |e: String| format!("line {}: {e}", lineno + 1);
            match key.as_str() {
                "input" => cfg.input = Some(value.parse().map_err(at)?),
                "suite" | "suites" => cfg.suites = Some(parse_suites(value).map_err(at)?),
                "grid" => cfg.grid = Some(parse_grid(value).map_err(at)?),
                "tol" => cfg.tol = Some(parse_num(&key, value).map_err(at)?),
                "fd-tol" => cfg.fd_tol = Some(parse_num(&key, value).map_err(at)?),
                "fd-check" => cfg.fd_check = Some(parse_bool(value).map_err(at)?),
                "seed" => cfg.seed = Some(parse_num(&key, value).map_err(at)?),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "format" => cfg.format = Some(value.parse().map_err(at)?),
                other => return Err(at(format!("unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }
}
