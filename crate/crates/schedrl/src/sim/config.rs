//! Environment configuration and its plain-text `key = value` file format.

use std::path::Path;

use crate::error::{Error, Result};

/// Simulator parameters. The three optional norms default to values derived
/// from the workload at reset: `work_norm = 4x mean cpu_work`,
/// `t_norm = n_tasks x mean cpu_work`, `r_norm = n_tasks x 2x mean
/// inter-arrival` (the latter two scale with task count because the
/// turnaround and response reward terms accrue per alive task per tick).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub cores: usize,
    pub mem_capacity: u64,
    pub io_channels: usize,
    /// Candidate window size: actions address the first `k` ready tasks.
    pub k: usize,
    /// Selectable time slices, strictly ascending.
    pub quanta: Vec<u64>,
    /// Reward is `w_util * U - w_turnaround * T + w_response * R`.
    pub w_util: f64,
    pub w_turnaround: f64,
    pub w_response: f64,
    pub tick_limit: u64,
    pub wait_norm: f64,
    pub qlen_norm: f64,
    pub load_norm: f64,
    pub io_norm: f64,
    pub work_norm: Option<f64>,
    pub t_norm: Option<f64>,
    pub r_norm: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            cores: 2,
            mem_capacity: 100,
            io_channels: 4,
            k: 8,
            quanta: vec![2, 8, 32],
            w_util: 1.0,
            w_turnaround: 0.5,
            w_response: -0.5,
            tick_limit: 60_000,
            wait_norm: 200.0,
            qlen_norm: 64.0,
            load_norm: 32.0,
            io_norm: 8.0,
            work_norm: None,
            t_norm: None,
            r_norm: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cores == 0 {
            return Err(Error::Config("cores: must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k: must be >= 1".into()));
        }
        if self.quanta.is_empty() {
            return Err(Error::Config("quanta: must name at least one time slice".into()));
        }
        if self.quanta.contains(&0) {
            return Err(Error::Config("quanta: slices must be >= 1 tick".into()));
        }
        if self.quanta.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("quanta: must be strictly ascending".into()));
        }
        for (name, v) in [
            ("wait_norm", self.wait_norm),
            ("qlen_norm", self.qlen_norm),
            ("load_norm", self.load_norm),
            ("io_norm", self.io_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name}: must be positive, got {v}")));
            }
        }
        for (name, v) in [("work_norm", self.work_norm), ("t_norm", self.t_norm), ("r_norm", self.r_norm)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!("{name}: must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [
            ("w_util", self.w_util),
            ("w_turnaround", self.w_turnaround),
            ("w_response", self.w_response),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name}: must be finite")));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<EnvConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses `key = value` lines; `#` starts a comment; unknown keys are
    /// rejected so typos surface instead of silently using defaults.
    pub fn parse(text: &str, path: &Path) -> Result<EnvConfig> {
        let mut cfg = EnvConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());

            match key {
                "cores" => cfg.cores = parse_num(key, value).map_err(err)?,
                "mem_capacity" => cfg.mem_capacity = parse_num(key, value).map_err(err)?,
                "io_channels" => cfg.io_channels = parse_num(key, value).map_err(err)?,
                "k" => cfg.k = parse_num(key, value).map_err(err)?,
                "quanta" => {
                    cfg.quanta = value
                        .split(',')
                        .map(|s| parse_num::<u64>(key, s.trim()))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(err)?;
                }
                "w_util" => cfg.w_util = parse_num(key, value).map_err(err)?,
                "w_turnaround" => cfg.w_turnaround = parse_num(key, value).map_err(err)?,
                "w_response" => cfg.w_response = parse_num(key, value).map_err(err)?,
                "tick_limit" => cfg.tick_limit = parse_num(key, value).map_err(err)?,
                "wait_norm" => cfg.wait_norm = parse_num(key, value).map_err(err)?,
                "qlen_norm" => cfg.qlen_norm = parse_num(key, value).map_err(err)?,
                "load_norm" => cfg.load_norm = parse_num(key, value).map_err(err)?,
                "io_norm" => cfg.io_norm = parse_num(key, value).map_err(err)?,
                "work_norm" => cfg.work_norm = Some(parse_num(key, value).map_err(err)?),
                "t_norm" => cfg.t_norm = Some(parse_num(key, value).map_err(err)?),
                "r_norm" => cfg.r_norm = Some(parse_num(key, value).map_err(err)?),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
}
