//! JSON scenario files.
//!
//! ```json
//! {
//!   "alpha": 4, "rho_m": 1, "rho_c": 1e-4, "K": 10,
//!   "N": [8, 16, 32, 64],
//!   "disk_radius": 1000,
//!   "policy": {"type": "path_loss_inversion"},
//!   "trials": 1000, "seed": 1
//! }
//! ```
//!
//! Exactly one of `disk_radius` and `c` is given. `N` and `policy` accept a
//! single value or a list; every (policy, N) pair is one scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SamplingMode, ScenarioParams};
use crate::powerctl::PowerPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub alpha: f64,
    pub rho_m: f64,
    pub rho_c: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n_antennas: OneOrMany<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub policy: OneOrMany<PowerPolicy>,
    #[serde(rename = "P_M", default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(rename = "P_lb", default, skip_serializing_if = "Option::is_none")]
    pub p_lb: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling_mode: SamplingMode,
}

/// `n`, `c` and `R` as actually used for one `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconciled {
    #[serde(rename = "N")]
    pub n_antennas: usize,
    pub n: usize,
    pub c: f64,
    pub disk_radius: f64,
}

fn config_error(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        context: context.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            let context = if e.line() > 0 {
                format!("{source}:{}:{}", e.line(), e.column())
            } else {
                source.to_string()
            };
            config_error(context, e.to_string())
        })?;
        cfg.validate(source)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn antennas(&self) -> Vec<usize> {
        self.n_antennas.to_vec()
    }

    pub fn policies(&self) -> Vec<PowerPolicy> {
        self.policy.to_vec()
    }

    fn disk_radius_for(&self, n_antennas: usize) -> f64 {
        match (self.disk_radius, self.c) {
            (Some(r), _) => r,
            (None, Some(c)) => ScenarioParams::radius_for_c(c, n_antennas, self.rho_m),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn params(&self, policy: PowerPolicy, n_antennas: usize) -> ScenarioParams {
        ScenarioParams {
            alpha: self.alpha,
            rho_m: self.rho_m,
            rho_c: self.rho_c,
            k: self.k,
            n_antennas,
            disk_radius: self.disk_radius_for(n_antennas),
            policy,
            p_max: self.p_max,
            p_lb: self.p_lb,
            sampling_mode: self.sampling_mode,
        }
    }

    /// Every (policy, N) scenario, policies outermost.
    pub fn scenarios(&self) -> Vec<ScenarioParams> {
        let ns = self.antennas();
        self.policies()
            .into_iter()
            .flat_map(|p| ns.iter().map(move |&n| (p, n)))
            .map(|(p, n)| self.params(p, n))
            .collect()
    }

    pub fn reconciled(&self) -> Vec<Reconciled> {
        self.antennas()
            .into_iter()
            .map(|n| {
                let r = self.disk_radius_for(n);
                let p = ScenarioParams {
                    disk_radius: r,
                    n_antennas: n,
                    ..self.params(PowerPolicy::Constant { power: 1.0 }, n)
                };
                Reconciled {
                    n_antennas: n,
                    n: p.n_mobiles(),
                    c: p.c(),
                    disk_radius: r,
                }
            })
            .collect()
    }

    fn validate(&self, source: &str) -> Result<()> {
        let field = |name: &str| format!("{source}: field `{name}`");
        match (self.disk_radius, self.c) {
            (Some(_), Some(_)) => return Err(config_error(field("c"), "give either disk_radius or c, not both")),
            (None, None) => {
                return Err(config_error(
                    field("disk_radius"),
                    "one of disk_radius or c is required",
                ))
            }
            (_, Some(c)) if !(c > 0.0 && c.is_finite()) => {
                return Err(config_error(field("c"), format!("must be positive, got {c}")))
            }
            _ => {}
        }
        if self.antennas().is_empty() {
            return Err(config_error(field("N"), "needs at least one antenna count"));
        }
        if self.policies().is_empty() {
            return Err(config_error(field("policy"), "needs at least one policy"));
        }
        if self.trials == 0 {
            return Err(config_error(field("trials"), "must be at least 1"));
        }
        let many = self.policies().len() > 1;
        for (i, policy) in self.policies().into_iter().enumerate() {
            for n in self.antennas() {
                self.params(policy, n).validate().map_err(|e| match e {
                    Error::InvalidParameter { field: f, message } => {
                        let name = match f.strip_prefix("policy.") {
                            Some(rest) if many => format!("policy[{i}].{rest}"),
                            _ => f.to_string(),
                        };
                        config_error(field(&name), message)
                    }
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, trials: Option<usize>, seed: Option<u64>) -> Result<Self> {
        if let Some(t) = trials {
            if t == 0 {
                return Err(config_error("--trials", "must be at least 1"));
            }
            self.trials = t;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INVERSION: &str = r#"{
        "alpha": 4, "rho_m": 1, "rho_c": 1e-4, "K": 10,
        "N": [8, 16],
        "disk_radius": 500,
        "policy": {"type": "path_loss_inversion"},
        "trials": 10, "seed": 3
    }"#;

    #[test]
    fn parses_and_expands() {
        let cfg = ScenarioConfig::from_json(INVERSION, "inversion").unwrap();
        let s = cfg.scenarios();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].n_antennas, 16);
        assert_eq!(s[0].policy, PowerPolicy::PathLossInversion { d_min: 1.0 });
        assert_eq!(s[0].sampling_mode, SamplingMode::Fast);
        let rec = cfg.reconciled();
        assert_eq!(rec[0].n, 785_398);
        assert!((rec[0].c - 785_398.0 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ScenarioConfig::from_json(INVERSION, "inversion").unwrap();
        let again = ScenarioConfig::from_json(&cfg.to_json(), "echo").unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn c_sets_radius_per_antenna_count() {
        let text = INVERSION.replace("\"disk_radius\": 500", "\"c\": 10");
        let cfg = ScenarioConfig::from_json(&text, "c").unwrap();
        for r in cfg.reconciled() {
            assert!((r.c - 10.0).abs() < 0.1, "{r:?}");
        }
    }

    #[test]
    fn radius_and_c_are_exclusive() {
        let text = INVERSION.replace("\"disk_radius\": 500", "\"disk_radius\": 500, \"c\": 10");
        let err = ScenarioConfig::from_json(&text, "both").unwrap_err();
        assert!(err.to_string().contains("not both"), "{err}");
        let text = INVERSION.replace("\"disk_radius\": 500,", "");
        assert!(ScenarioConfig::from_json(&text, "none").is_err());
    }

    #[test]
    fn errors_carry_location() {
        let err = ScenarioConfig::from_json(&INVERSION.replace("\"K\": 10", "\"K\": -1"), "cfg.json").unwrap_err();
        assert!(err.to_string().contains("cfg.json:2"), "{err}");
        let err =
            ScenarioConfig::from_json(&INVERSION.replace("\"alpha\": 4", "\"alpha\": 2"), "cfg.json").unwrap_err();
        assert!(err.to_string().contains("`alpha`"), "{err}");
        let err = ScenarioConfig::from_json(
            &INVERSION.replace("\"seed\": 3", "\"seed\": 3, \"bogus\": 1"),
            "cfg.json",
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn policy_list_errors_name_the_entry() {
        let text = INVERSION.replace(
            r#"{"type": "path_loss_inversion"}"#,
            r#"[{"type": "fractional", "epsilon": 0.5}, {"type": "fractional", "epsilon": 1.5}]"#,
        );
        let err = ScenarioConfig::from_json(&text, "cfg").unwrap_err();
        assert!(err.to_string().contains("policy[1].epsilon"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let cfg = ScenarioConfig::from_json(INVERSION, "inversion")
            .unwrap()
            .with_overrides(Some(5), Some(9))
            .unwrap();
        assert_eq!((cfg.trials, cfg.seed), (5, 9));
        assert!(ScenarioConfig::from_json(INVERSION, "inversion")
            .unwrap()
            .with_overrides(Some(0), None)
            .is_err());
    }
}
