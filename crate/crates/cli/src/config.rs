//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! suites = ["quaternion", "integrable"]
//!
//! [prepotential]
//! catalog = "ov-log"      # quadratic | cubic | ov-log, or `expression = "..."`
//! n = 1
//! lambda = 1.0
//! tau0 = [0.0, 1.0]
//!
//! [[bps]]
//! k = [1]
//! m = [0]
//! index = "1"
//!
//! [grid]
//! z_lo = [[-0.8, 0.5]]
//! z_hi = [[0.8, 3.0]]
//! counts = [3, 4]
//! fiber_samples = 2
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use joyce_hk::ask::{parse_prepotential, Prepotential};
use joyce_hk::bps::{make_bps_structure, parse_index, Charge};
use joyce_hk::joyce::{JoyceProvider, DEFAULT_COND_MAX};
use joyce_hk::model::{Model, DEFAULT_H_FD};
use coeffs::square;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Verification suites a run can select.
pub const SUITES: [&str; 8] = [
    "flatness",
    "plebanski",
    "quaternion",
    "closedness",
    "nijenhuis",
    "crosscheck",
    "integrable",
    "dilog",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub prepotential: PrepotentialConfig,
    #[serde(default)]
    pub bps: Vec<BpsEntry>,
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub suites: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepotentialConfig {
    pub catalog: Option<String>,
    pub expression: Option<String>,
    pub n: usize,
    /// Quadratic coefficients `c_ij` as `[re, im]` pairs.
    pub tau: Option<Vec<Vec<[f64; 2]>>>,
    pub lambda: Option<f64>,
    pub tau0: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpsEntry {
    #[serde(default)]
    pub m: Vec<i64>,
    pub k: Vec<i64>,
    pub index: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Lower corner `[re, im]` of the box for each `Z^i`.
    pub z_lo: Vec<[f64; 2]>,
    pub z_hi: Vec<[f64; 2]>,
    /// Samples along `Re` and `Im` of every coordinate.
    pub counts: [usize; 2],
    #[serde(default = "one")]
    pub fiber_samples: usize,
    /// Extra base points drawn uniformly from the box.
    #[serde(default)]
    pub random_points: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_h_fd")]
    pub h_fd: f64,
    #[serde(default = "default_cond_max")]
    pub cond_max: f64,
    /// Per-suite overrides of the residual budgets.
    #[serde(default)]
    pub budgets: BTreeMap<String, f64>,
}

fn default_tail_tol() -> f64 {
    1e-12
}

fn default_h_fd() -> f64 {
    DEFAULT_H_FD
}

fn default_cond_max() -> f64 {
    DEFAULT_COND_MAX
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tail_tol: default_tail_tol(),
            h_fd: default_h_fd(),
            cond_max: default_cond_max(),
            budgets: BTreeMap::new(),
        }
    }
}

/// Default budget for each suite.
pub fn default_budget(suite: &str) -> f64 {
    match suite {
        "flatness" | "closedness" | "nijenhuis" => 1e-5,
        "dilog" => 1e-9,
        _ => 1e-10,
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn budget(&self, suite: &str) -> f64 {
        self.tolerances
            .budgets
            .get(suite)
            .copied()
            .unwrap_or_else(|| default_budget(suite))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.prepotential.n;
        let bad = |path: &str, msg: String| Err(ConfigError::Invalid { path: path.into(), message: msg });
        if n == 0 {
            return bad("prepotential.n", "must be positive".into());
        }
        if self.suites.is_empty() {
            return bad("suites", "must name at least one suite".into());
        }
        for (k, s) in self.suites.iter().enumerate() {
            if !SUITES.contains(&s.as_str()) {
                return bad(&format!("suites[{k}]"), format!("unknown suite {s:?}"));
            }
        }
        let g = &self.grid;
        if g.z_lo.len() != n || g.z_hi.len() != n {
            return bad("grid.z_lo", format!("needs {n} corners"));
        }
        if g.counts.contains(&0) || g.fiber_samples == 0 {
            return bad("grid.counts", "grid must be nonempty".into());
        }
        for (k, (lo, hi)) in g.z_lo.iter().zip(&g.z_hi).enumerate() {
            if lo[0] > hi[0] || lo[1] > hi[1] {
                return bad(&format!("grid.z_hi[{k}]"), "upper corner below lower corner".into());
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("tail_tol", t.tail_tol), ("h_fd", t.h_fd), ("cond_max", t.cond_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("tolerances.{name}"), format!("must be positive, got {v}"));
            }
        }
        for (name, v) in &t.budgets {
            if !SUITES.contains(&name.as_str()) {
                return bad(&format!("tolerances.budgets.{name}"), "unknown suite".into());
            }
            if !(*v > 0.0) {
                return bad(&format!("tolerances.budgets.{name}"), format!("must be positive, got {v}"));
            }
        }
        for (k, b) in self.bps.iter().enumerate() {
            if b.k.len() != n || !(b.m.is_empty() || b.m.len() == n) {
                return bad(&format!("bps[{k}]"), format!("charge must have rank {n}"));
            }
        }
        if self.bps.is_empty() && self.suites.iter().any(|s| s == "dilog") {
            return bad("suites", "the dilog suite needs BPS data".into());
        }
        self.model().map(|_| ())
    }

    pub fn prepotential(&self) -> Result<Prepotential, ConfigError> {
        let p = &self.prepotential;
        let core = |e: joyce_hk::Error| ConfigError::Invalid {
            path: "prepotential".into(),
            message: e.to_string(),
        };
        if let Some(text) = &p.expression {
            if p.catalog.is_some() {
                return Err(ConfigError::Invalid {
                    path: "prepotential".into(),
                    message: "give either catalog or expression".into(),
                });
            }
            return parse_prepotential(text, p.n).map_err(core);
        }
        let name = p.catalog.as_deref().unwrap_or("");
        let f = match name {
            "quadratic" => {
                let rows = p.tau.clone().unwrap_or_else(|| square(p.n));
                if rows.len() != p.n || rows.iter().any(|r| r.len() != p.n) {
                    return Err(ConfigError::Invalid {
                        path: "prepotential.tau".into(),
                        message: format!("must be {0}×{0}", p.n),
                    });
                }
                let m = coeffs::matrix(&rows);
                Prepotential::quadratic(&m).map_err(core)?
            }
            "cubic" => Prepotential::cubic(),
            "ov-log" => {
                let t = p.tau0.unwrap_or([0.0, 1.0]);
                Prepotential::ov_log(p.lambda.unwrap_or(1.0), Complex64::new(t[0], t[1])).map_err(core)?
            }
            other => {
                return Err(ConfigError::Invalid {
                    path: "prepotential.catalog".into(),
                    message: format!("unknown catalog entry {other:?}"),
                })
            }
        };
        if f.n() != p.n {
            return Err(ConfigError::Invalid {
                path: "prepotential.n".into(),
                message: format!("{name} has {} variables", f.n()),
            });
        }
        Ok(f)
    }

    pub fn provider(&self) -> Result<JoyceProvider, ConfigError> {
        if self.bps.is_empty() {
            return Ok(JoyceProvider::Zero);
        }
        let n = self.prepotential.n;
        let mut entries = Vec::new();
        for (k, b) in self.bps.iter().enumerate() {
            let m = if b.m.is_empty() { vec![0; n] } else { b.m.clone() };
            let idx = parse_index(&b.index).map_err(|e| ConfigError::Invalid {
                path: format!("bps[{k}].index"),
                message: e.to_string(),
            })?;
            entries.push((Charge::new(m, b.k.clone()), idx));
        }
        let invalid = |e: joyce_hk::Error| ConfigError::Invalid {
            path: "bps".into(),
            message: e.to_string(),
        };
        let bps = make_bps_structure(n, &entries).map_err(invalid)?;
        JoyceProvider::uncoupled(bps, self.tolerances.tail_tol).map_err(invalid)
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        let m = Model::new(self.prepotential()?, self.provider()?).map_err(|e| ConfigError::Invalid {
            path: "bps".into(),
            message: e.to_string(),
        })?;
        Ok(m.with_h_fd(self.tolerances.h_fd).with_cond_max(self.tolerances.cond_max))
    }
}

/// Quadratic coefficient tables.
mod coeffs {
    use num_complex::Complex64;

    pub fn square(n: usize) -> Vec<Vec<[f64; 2]>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { [0.0, 1.0] } else { [0.0, 0.0] }).collect())
            .collect()
    }

    pub fn matrix(rows: &[Vec<[f64; 2]>]) -> joyce_hk::linalg::CMat {
        let n = rows.len();
        joyce_hk::linalg::CMat::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]))
    }
}
