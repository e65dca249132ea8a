use std::fs::File;
use std::path::{Path, PathBuf};

use dendrite_taper::io::ParameterSet;
use dendrite_taper::model::PhysicalParams;
use dendrite_taper::optimize::{Criterion, Geometry, SearchConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Everything one run needs, stored as a single flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub set: ParameterSet,
    pub x_cells: usize,
    pub y_cells: usize,
    pub modes: usize,
    pub seed: u64,
    pub restarts: usize,
    pub criterion: Criterion,
    pub profile_nodes: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub xi_points: usize,
    pub time_points: usize,
    /// End of the exported time series; defaults to `5 / lambda_1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Taper profile CSV (`x,a`); the cylinder of radius `a0` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
}

const OPTIONAL_KEYS: [&str; 3] = ["M", "t_max", "profile"];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            set: ParameterSet {
                params: PhysicalParams {
                    r_a: 1.0,
                    c_m: 1.0,
                    g_m: 1.0,
                    g_s: 1.0,
                    a_s: 2.0 * std::f64::consts::PI,
                },
                geometry: Geometry {
                    ell: 1.0,
                    a0: 1.0,
                    s: 2.0,
                    m: Some(4.0),
                },
            },
            x_cells: 2048,
            y_cells: 2048,
            modes: 64,
            seed: 0,
            restarts: 1,
            criterion: Criterion::Mu1,
            profile_nodes: 17,
            max_iter: 500,
            rel_tol: 1e-10,
            xi_points: 101,
            time_points: 200,
            t_max: None,
            profile: None,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub cells: Option<usize>,
    pub modes: Option<usize>,
    pub seed: Option<u64>,
    pub set: Vec<String>,
}

impl RunConfig {
    /// Reads `path` (or starts from the defaults), applies `--set` pairs and
    /// the dedicated flags, and validates the result.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        if let Some(path) = path {
            let file = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let user: Value = serde_json::from_reader(file)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let Value::Object(user) = user else {
                return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
            };
            merge(&mut value, user)?;
        }
        let mut pairs = Map::new();
        for item in &overrides.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {item:?}")))?;
            let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            pairs.insert(k.trim().to_string(), v);
        }
        merge(&mut value, pairs)?;
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if let Some(n) = overrides.cells {
            cfg.x_cells = n;
            cfg.y_cells = n;
        }
        if let Some(n) = overrides.modes {
            cfg.modes = n;
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.set.validate()?;
        for (name, n, min) in [
            ("x_cells", self.x_cells, 8),
            ("y_cells", self.y_cells, 1),
            ("modes", self.modes, 1),
            ("restarts", self.restarts, 1),
            ("profile_nodes", self.profile_nodes, 2),
            ("xi_points", self.xi_points, 2),
            ("time_points", self.time_points, 1),
        ] {
            if n < min {
                return Err(CliError::Config(format!("{name} must be at least {min}, got {n}")));
            }
        }
        if self.modes > self.x_cells + 1 {
            return Err(CliError::Config(format!(
                "{} modes requested from {} cells",
                self.modes, self.x_cells
            )));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(CliError::Config("rel_tol must be nonnegative".into()));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("t_max must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.set.params
    }

    pub fn geometry(&self) -> &Geometry {
        &self.set.geometry
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            profile_nodes: self.profile_nodes,
            x_cells: self.x_cells,
            y_cells: self.y_cells,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            seed: self.seed,
        }
    }
}

fn merge(base: &mut Value, pairs: Map<String, Value>) -> Result<(), CliError> {
    let Value::Object(obj) = base else { unreachable!("config is an object") };
    for (k, v) in pairs {
        if !obj.contains_key(&k) && !OPTIONAL_KEYS.contains(&k.as_str()) {
            return Err(CliError::Config(format!("unknown config key {k:?}")));
        }
        obj.insert(k, v);
    }
    Ok(())
}
