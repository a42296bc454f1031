//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Cost;
use crate::solver::{SolverConfig, Strategy, Truncation};

/// Every key accepted in a config file or through `--set`.
pub const KNOWN_KEYS: &[&str] = &[
    // inputs and outputs
    "source",
    "mesh",
    "density",
    "quadrature",
    "target",
    "source_hierarchy",
    "target_hierarchy",
    "sources",
    "field",
    "input",
    "output",
    // hierarchy
    "sizes",
    "kind",
    // solver
    "epsilon",
    "epsilon_start",
    "tau",
    "delta_thr",
    "truncation",
    "tolerance",
    "max_iter",
    "memory",
    "scaling_steps",
    "strategy",
    "cost",
    // applications
    "lambda",
    "damping",
    "alpha",
    "beta",
    "n_b",
    "mode",
    "max_outer",
    "rms_tol",
    "tol_nu",
    "tol_y",
    "init",
    "n",
    "subdivisions",
    "sphere_density",
    "riemannian_alpha",
    "riemannian_tol",
    "riemannian_max_iter",
    // validate
    "instances",
    // process
    "seed",
    "workers",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::param(key, "unknown configuration key"))
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected 'key = value', found '{line}'"),
            })?;
            let k = k.trim();
            check_key(k).map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("unknown key '{k}'"),
            })?;
            cfg.values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Apply a `KEY=VALUE` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::param("--set", format!("expected KEY=VALUE, got '{pair}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::param(key, format!("'{v}': {e}"))))
            .transpose()
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| Error::param(key, format!("'{s}': {e}"))))
                    .collect()
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key).ok_or_else(|| Error::param(key, "required"))
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed_or("seed", 0)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.path("output").unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn strategy(&self) -> Result<Strategy> {
        self.parsed_or("strategy", Strategy::Combined)
    }

    pub fn truncation(&self) -> Result<Truncation> {
        let kind = self.get("truncation").unwrap_or("geometric");
        let tau = self.parsed_or("tau", 1e-5)?;
        let t = match kind {
            "none" => Truncation::None,
            "pointwise" => Truncation::Pointwise {
                delta_thr: self.parsed_or("delta_thr", 1e-12)?,
            },
            "integrated" => Truncation::Integrated { tau },
            "geometric" => Truncation::Geometric { tau },
            _ => return Err(Error::param("truncation", format!("unknown kind '{kind}'"))),
        };
        t.validate()?;
        Ok(t)
    }

    /// Solver settings; `cost` is used when the key is absent.
    pub fn solver(&self, cost: Cost) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            epsilon: self.parsed_or("epsilon", d.epsilon)?,
            tolerance: self.parsed_or("tolerance", d.tolerance)?,
            truncation: self.truncation()?,
            cost: self.parsed_or("cost", cost)?,
            memory: self.parsed_or("memory", d.memory)?,
            max_iter: self.parsed_or("max_iter", d.max_iter)?,
            scaling_steps: self.parsed_or("scaling_steps", d.scaling_steps)?,
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut c = RunConfig::parse("epsilon = 0.1\n# note\ntau=1e-4  # inline\n", Path::new("x")).unwrap();
        c.set_pair("epsilon=0.05").unwrap();
        assert_eq!(c.parsed::<f64>("epsilon").unwrap(), Some(0.05));
        assert_eq!(c.truncation().unwrap(), Truncation::Geometric { tau: 1e-4 });
        assert_eq!(c.solver(Cost::Quadratic).unwrap().epsilon, 0.05);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("epsilom = 0.1", Path::new("x")).is_err());
        assert!(RunConfig::default().set_pair("foo=1").is_err());
        assert!(RunConfig::default().set_pair("foo").is_err());
    }

    #[test]
    fn ranges_checked() {
        let mut c = RunConfig::default();
        c.set("tau", "2").unwrap();
        assert!(c.truncation().is_err());
        let mut c = RunConfig::default();
        c.set("epsilon", "-1").unwrap();
        assert!(c.solver(Cost::Quadratic).is_err());
        let mut c = RunConfig::default();
        c.set("max_iter", "x").unwrap();
        assert!(c.solver(Cost::Quadratic).is_err());
    }

    #[test]
    fn lists() {
        let mut c = RunConfig::default();
        c.set("sizes", "4, 16,64").unwrap();
        assert_eq!(c.list::<usize>("sizes").unwrap(), Some(vec![4, 16, 64]));
    }
}
