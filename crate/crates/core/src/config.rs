//! Run configuration: a flat `key = value` file with dotted keys, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so7::StructureTolerances;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CkConfig {
    pub samples: usize,
    pub accept_spread: f64,
    pub reject_spread: f64,
    /// Negative controls must exceed this spread.
    pub negative_min_spread: f64,
    /// Relative tolerance on predicted means.
    pub mean_tol: f64,
    pub restriction_tol: f64,
    pub restriction_samples: usize,
    pub observation_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub samples: usize,
    /// Number of consecutive seeds over which the sampled maximum must agree.
    pub seeds: usize,
    pub min_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesyConfig {
    pub restarts: usize,
    /// Endpoint defect accepted by shooting.
    pub tol: f64,
    /// Agreement with the eigenangle oracle, normalized units.
    pub oracle_tol: f64,
    pub oracle_targets: usize,
    pub energy_tol: f64,
    pub order_target: f64,
    pub order_tol: f64,
    pub injectivity_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwConfig {
    pub samples: usize,
    /// Relative spread bound at the sweep points adjacent to 1.
    pub spread_tol: f64,
    /// Relative agreement with the predicted displacement there.
    pub match_tol: f64,
    /// Spread and agreement bound at `s = 1`.
    pub bi_tol: f64,
    pub negative_min_spread: f64,
    pub negative_t0: f64,
    pub negative_samples: usize,
    /// Explicit `t0`; when absent the non-identity elements of Gamma are used.
    pub t0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub s_values: Vec<f64>,
    pub n: usize,
    pub structure: StructureTolerances,
    pub ck: CkConfig,
    pub orbit: OrbitConfig,
    pub geodesy: GeodesyConfig,
    pub cw: CwConfig,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub structure_file: Option<PathBuf>,
    pub jobs: Option<usize>,
}

pub const DEFAULT_SWEEP: [f64; 7] = [0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.25];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            s_values: DEFAULT_SWEEP.to_vec(),
            n: 1,
            structure: StructureTolerances::default(),
            ck: CkConfig {
                samples: 10_000,
                accept_spread: crate::ck::ACCEPT_SPREAD,
                reject_spread: crate::ck::REJECT_SPREAD,
                negative_min_spread: 1e-2,
                mean_tol: 1e-9,
                restriction_tol: 1e-9,
                restriction_samples: 200,
                observation_tol: 1e-10,
            },
            orbit: OrbitConfig { samples: 500, seeds: 3, min_gap: 1e4 },
            geodesy: GeodesyConfig {
                restarts: 50,
                tol: 1e-9,
                oracle_tol: 1e-4,
                oracle_targets: 50,
                energy_tol: 1e-9,
                order_target: 4.0,
                order_tol: 0.3,
                injectivity_pairs: 10_000,
            },
            cw: CwConfig {
                samples: 40,
                spread_tol: 1e-3,
                match_tol: 1e-3,
                bi_tol: 1e-4,
                negative_min_spread: 1e-2,
                negative_t0: std::f64::consts::FRAC_PI_3,
                negative_samples: 40,
                t0: None,
            },
            out: None,
            csv: None,
            structure_file: None,
            jobs: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("cannot parse value {value:?} for key {key}")))
}

pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|x| parse::<f64>(key, x.trim())).collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "s" | "s_values" => self.s_values = parse_list(key, v)?,
            "n" => self.n = parse(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "csv" => self.csv = Some(PathBuf::from(v)),
            "structure_file" => self.structure_file = Some(PathBuf::from(v)),
            "jobs" => self.jobs = Some(parse(key, v)?),
            "structure.tol" => self.structure = StructureTolerances::uniform(parse(key, v)?),
            "structure.closure_tol" => self.structure.closure = parse(key, v)?,
            "structure.root_tol" => self.structure.root = parse(key, v)?,
            "structure.phi_tol" => self.structure.phi = parse(key, v)?,
            "structure.bracket_tol" => self.structure.bracket_relation = parse(key, v)?,
            "structure.intersection_tol" => self.structure.intersection = parse(key, v)?,
            "ck.samples" => self.ck.samples = parse(key, v)?,
            "ck.accept_spread" => self.ck.accept_spread = parse(key, v)?,
            "ck.reject_spread" => self.ck.reject_spread = parse(key, v)?,
            "ck.negative_min_spread" => self.ck.negative_min_spread = parse(key, v)?,
            "ck.mean_tol" => self.ck.mean_tol = parse(key, v)?,
            "ck.restriction_tol" => self.ck.restriction_tol = parse(key, v)?,
            "ck.restriction_samples" => self.ck.restriction_samples = parse(key, v)?,
            "ck.observation_tol" => self.ck.observation_tol = parse(key, v)?,
            "orbit.samples" => self.orbit.samples = parse(key, v)?,
            "orbit.seeds" => self.orbit.seeds = parse(key, v)?,
            "orbit.min_gap" => self.orbit.min_gap = parse(key, v)?,
            "geodesy.restarts" => self.geodesy.restarts = parse(key, v)?,
            "geodesy.tol" => self.geodesy.tol = parse(key, v)?,
            "geodesy.oracle_tol" => self.geodesy.oracle_tol = parse(key, v)?,
            "geodesy.oracle_targets" => self.geodesy.oracle_targets = parse(key, v)?,
            "geodesy.energy_tol" => self.geodesy.energy_tol = parse(key, v)?,
            "geodesy.order_target" => self.geodesy.order_target = parse(key, v)?,
            "geodesy.order_tol" => self.geodesy.order_tol = parse(key, v)?,
            "geodesy.injectivity_pairs" => self.geodesy.injectivity_pairs = parse(key, v)?,
            "cw.samples" => self.cw.samples = parse(key, v)?,
            "cw.spread_tol" => self.cw.spread_tol = parse(key, v)?,
            "cw.match_tol" => self.cw.match_tol = parse(key, v)?,
            "cw.bi_tol" => self.cw.bi_tol = parse(key, v)?,
            "cw.negative_min_spread" => self.cw.negative_min_spread = parse(key, v)?,
            "cw.negative_t0" => self.cw.negative_t0 = parse(key, v)?,
            "cw.negative_samples" => self.cw.negative_samples = parse(key, v)?,
            "cw.t0" => self.cw.t0 = Some(parse(key, v)?),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", lineno + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_values.is_empty() || self.s_values.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config("all s values must be positive and finite".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let counts = [
            ("ck.samples", self.ck.samples),
            ("ck.restriction_samples", self.ck.restriction_samples),
            ("orbit.samples", self.orbit.samples),
            ("orbit.seeds", self.orbit.seeds),
            ("geodesy.restarts", self.geodesy.restarts),
            ("geodesy.oracle_targets", self.geodesy.oracle_targets),
            ("geodesy.injectivity_pairs", self.geodesy.injectivity_pairs),
            ("cw.samples", self.cw.samples),
            ("cw.negative_samples", self.cw.negative_samples),
        ];
        for (k, c) in counts {
            if c == 0 {
                return Err(Error::Config(format!("{k} must be at least 1")));
            }
        }
        let st = &self.structure;
        let tols = [
            ("structure.closure_tol", st.closure),
            ("structure.root_tol", st.root),
            ("structure.phi_tol", st.phi),
            ("structure.bracket_tol", st.bracket_relation),
            ("structure.intersection_tol", st.intersection),
            ("ck.accept_spread", self.ck.accept_spread),
            ("ck.reject_spread", self.ck.reject_spread),
            ("ck.negative_min_spread", self.ck.negative_min_spread),
            ("ck.mean_tol", self.ck.mean_tol),
            ("ck.restriction_tol", self.ck.restriction_tol),
            ("ck.observation_tol", self.ck.observation_tol),
            ("orbit.min_gap", self.orbit.min_gap),
            ("geodesy.tol", self.geodesy.tol),
            ("geodesy.oracle_tol", self.geodesy.oracle_tol),
            ("geodesy.energy_tol", self.geodesy.energy_tol),
            ("geodesy.order_tol", self.geodesy.order_tol),
            ("cw.spread_tol", self.cw.spread_tol),
            ("cw.match_tol", self.cw.match_tol),
            ("cw.bi_tol", self.cw.bi_tol),
            ("cw.negative_min_spread", self.cw.negative_min_spread),
        ];
        for (k, t) in tols {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        if self.ck.accept_spread >= self.ck.reject_spread {
            return Err(Error::Config("ck.accept_spread must lie below ck.reject_spread".into()));
        }
        for t in self.cw.t0.iter().chain(std::iter::once(&self.cw.negative_t0)) {
            if !(t.abs() < std::f64::consts::PI) || *t == 0.0 {
                return Err(Error::Config(format!("t0 = {t} must lie in (-pi, 0) or (0, pi)")));
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.s_values, DEFAULT_SWEEP);
        assert_eq!((c.ck.samples, c.orbit.samples, c.cw.samples, c.geodesy.restarts), (10_000, 500, 40, 50));
    }

    #[test]
    fn parses_dotted_keys_and_comments() {
        let c = RunConfig::from_text("# run\nseed = 7\ns = 0.9, 1.1\nck.samples=123  # inline\n\nstructure.tol = 1e-30\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.s_values, vec![0.9, 1.1]);
        assert_eq!(c.ck.samples, 123);
        assert_eq!(c.structure.phi, 1e-30);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_text("nonsense").is_err());
        assert!(RunConfig::from_text("bogus.key = 1").is_err());
        assert!(RunConfig::from_text("seed = x").is_err());
        let c = RunConfig::from_text("s = 1.0, -2").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_text("cw.samples = 0").unwrap();
        assert!(c.validate().is_err());
    }
}
