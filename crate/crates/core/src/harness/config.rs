//! Run configuration: flat `key = value` text, one entry per line, `#`
//! comments, comma-separated lists. Unknown or duplicate keys are errors.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::solver::Scheme;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: String,
    /// Nodes per axis; a single entry applies to every axis.
    pub n: Option<Vec<usize>>,
    pub eps_schedule: Option<Vec<f64>>,
    pub aux_value: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub emit_fields: bool,
    pub emit_cross_sections: bool,
    pub emit_reports: bool,
    pub gauss_k: Option<f64>,
    pub k_sweep: Option<Vec<f64>>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub warmup: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub scheme: Option<Scheme>,
    pub sample_stride: Option<usize>,
}

impl RunConfig {
    pub fn new(problem: impl Into<String>) -> Self {
        RunConfig {
            problem: problem.into(),
            n: None,
            eps_schedule: None,
            aux_value: None,
            out_dir: None,
            emit_fields: true,
            emit_cross_sections: true,
            emit_reports: true,
            gauss_k: None,
            k_sweep: None,
            abs_tol: None,
            rel_tol: None,
            max_iters: None,
            warmup: None,
            dt: None,
            t_end: None,
            scheme: None,
            sample_stride: None,
        }
    }

    pub fn is_parabolic(&self) -> bool {
        self.dt.is_some() || self.t_end.is_some() || self.scheme.is_some()
    }

    pub fn parse_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut problem: Option<String> = None;
        let mut cfg = RunConfig::new(String::new());
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(Error::Parse {
                    line,
                    message: "expected `key = value`".into(),
                });
            };
            let key = content[..eq].trim();
            let value = content[eq + 1..].trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            seen.push(key.to_string());
            apply_key(&mut cfg, &mut problem, key, value, line)?;
        }
        cfg.problem = problem.ok_or_else(|| Error::Config("missing required key `problem`".into()))?;
        Ok(cfg)
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| {
            s.trim().parse::<T>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid {what} entry `{}`", s.trim()),
            })
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(value: &str, line: usize, what: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} `{}`", value.trim()),
    })
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Parse {
            line,
            message: format!("expected true/false, got `{other}`"),
        }),
    }
}

fn apply_key(
    cfg: &mut RunConfig,
    problem: &mut Option<String>,
    key: &str,
    value: &str,
    line: usize,
) -> Result<()> {
    match key {
        "problem" => *problem = Some(value.to_string()),
        "n" => cfg.n = Some(parse_list(value, line, "node count")?),
        "eps_schedule" => cfg.eps_schedule = Some(parse_list(value, line, "epsilon")?),
        "aux_value" => cfg.aux_value = Some(parse_scalar(value, line, "aux_value")?),
        "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
        "emit_fields" => cfg.emit_fields = parse_bool(value, line)?,
        "emit_cross_sections" => cfg.emit_cross_sections = parse_bool(value, line)?,
        "emit_reports" => cfg.emit_reports = parse_bool(value, line)?,
        "gauss_k" => cfg.gauss_k = Some(parse_scalar(value, line, "gauss_k")?),
        "k_sweep" => cfg.k_sweep = Some(parse_list(value, line, "k_sweep")?),
        "abs_tol" => cfg.abs_tol = Some(parse_scalar(value, line, "abs_tol")?),
        "rel_tol" => cfg.rel_tol = Some(parse_scalar(value, line, "rel_tol")?),
        "max_iters" => cfg.max_iters = Some(parse_scalar(value, line, "max_iters")?),
        "warmup" => cfg.warmup = Some(parse_scalar(value, line, "warmup")?),
        "dt" => cfg.dt = Some(parse_scalar(value, line, "dt")?),
        "t_end" => cfg.t_end = Some(parse_scalar(value, line, "t_end")?),
        "sample_stride" => cfg.sample_stride = Some(parse_scalar(value, line, "sample_stride")?),
        "scheme" => {
            cfg.scheme = Some(match value {
                "backward_euler" => Scheme::BackwardEuler,
                "crank_nicolson" => Scheme::CrankNicolson,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown scheme `{other}`"),
                    })
                }
            })
        }
        other => {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{other}`"),
            })
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# comment line
problem = test1
n = 33
eps_schedule = 1e-1, 1e-2, 1e-3  # inline comment
aux_value = 0
emit_fields = true
out_dir = /tmp/run1
";
        let cfg = RunConfig::parse_str(text).unwrap();
        assert_eq!(cfg.problem, "test1");
        assert_eq!(cfg.n, Some(vec![33]));
        assert_eq!(cfg.eps_schedule, Some(vec![0.1, 0.01, 0.001]));
        assert_eq!(cfg.aux_value, Some(0.0));
        assert!(!cfg.is_parabolic());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = RunConfig::parse_str("problem = test1\nwat = 1\n").unwrap_err();
        match err {
            Error::Parse { line: 2, .. } => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(RunConfig::parse_str("problem = a\nproblem = b\n").is_err());
        assert!(RunConfig::parse_str("n = 33\n").is_err(), "problem is required");
    }

    #[test]
    fn rejects_malformed_values() {
        assert!(RunConfig::parse_str("problem = t\nn = x\n").is_err());
        assert!(RunConfig::parse_str("problem = t\nemit_fields = yes\n").is_err());
        assert!(RunConfig::parse_str("problem = t\nscheme = magic\n").is_err());
        assert!(RunConfig::parse_str("problem = t\nno equals sign\n").is_err());
    }

    #[test]
    fn parabolic_detection() {
        let cfg = RunConfig::parse_str("problem = test2\ndt = 0.05\nt_end = 1\n").unwrap();
        assert!(cfg.is_parabolic());
    }
}
