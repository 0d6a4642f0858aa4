use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::powerctl::PowerPolicy;

/// How mobile positions are drawn for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Draw only the mobiles that can become active, cell by cell.
    #[default]
    Fast,
    /// Draw all `n` mobiles in the disk and assign them to cells.
    Exact,
}

/// Scalar model parameters for one network size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Path-loss exponent, > 2.
    pub alpha: f64,
    /// Density of potential mobiles.
    pub rho_m: f64,
    /// Density of base stations; the cell area is `1 / rho_c`.
    pub rho_c: f64,
    /// Per-cell cap on active mobiles.
    pub k: usize,
    /// Antennas at the representative base station.
    pub n_antennas: usize,
    pub disk_radius: f64,
    pub policy: PowerPolicy,
    /// Overrides the policy's natural maximum power.
    pub p_max: Option<f64>,
    /// Overrides the policy's natural lower power bound.
    pub p_lb: Option<f64>,
    pub sampling_mode: SamplingMode,
}

impl ScenarioParams {
    /// alpha = 4, rho_m = 1, rho_c = 1e-4, K = 10, disk radius 500.
    pub fn reference(policy: PowerPolicy, n_antennas: usize) -> Self {
        ScenarioParams {
            alpha: 4.0,
            rho_m: 1.0,
            rho_c: 1e-4,
            k: 10,
            n_antennas,
            disk_radius: 500.0,
            policy,
            p_max: None,
            p_lb: None,
            sampling_mode: SamplingMode::Fast,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must exceed 2, got {}", self.alpha)));
        }
        positive("rho_m", self.rho_m)?;
        positive("rho_c", self.rho_c)?;
        positive("disk_radius", self.disk_radius)?;
        if self.k == 0 {
            return Err(Error::invalid("K", "must be at least 1"));
        }
        if self.n_antennas == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        self.policy.validate()?;
        if let Some(p) = self.p_max {
            positive("P_M", p)?;
        }
        if let Some(p) = self.p_lb {
            positive("P_lb", p)?;
        }
        Ok(())
    }

    /// `n = round(pi rho_m R^2)`.
    pub fn n_mobiles(&self) -> usize {
        (std::f64::consts::PI * self.rho_m * self.disk_radius * self.disk_radius).round() as usize
    }

    /// Ratio of potential mobiles to antennas, `n / N`.
    pub fn c(&self) -> f64 {
        self.n_mobiles() as f64 / self.n_antennas as f64
    }

    pub fn cell_area(&self) -> f64 {
        1.0 / self.rho_c
    }

    /// Expected fraction of potential mobiles that transmit, `K rho_c / rho_m`,
    /// capped at one.
    pub fn activity(&self) -> f64 {
        (self.k as f64 * self.rho_c / self.rho_m).min(1.0)
    }

    /// Disk radius that realises a given `c` at `N` antennas.
    pub fn radius_for_c(c: f64, n_antennas: usize, rho_m: f64) -> f64 {
        (c * n_antennas as f64 / (std::f64::consts::PI * rho_m)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = ScenarioParams::reference(PowerPolicy::Constant { power: 1.0 }, 64);
        assert_eq!(p.n_mobiles(), 785_398);
        assert!((p.c() - 785_398.0 / 64.0).abs() < 1e-12);
        assert!((p.activity() - 1e-3).abs() < 1e-15);
        assert!((p.cell_area() - 1e4).abs() < 1e-9);
        p.validate().unwrap();
    }

    #[test]
    fn radius_for_c_round_trips() {
        let r = ScenarioParams::radius_for_c(10.0, 1000, 1.0);
        let p = ScenarioParams {
            disk_radius: r,
            ..ScenarioParams::reference(PowerPolicy::Constant { power: 1.0 }, 1000)
        };
        assert_eq!(p.n_mobiles(), 10_000);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let base = ScenarioParams::reference(PowerPolicy::Constant { power: 1.0 }, 8);
        let bad = ScenarioParams {
            alpha: 2.0,
            ..base.clone()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { field: "alpha", .. })
        ));
        let bad = ScenarioParams { k: 0, ..base.clone() };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { field: "K", .. })
        ));
        let bad = ScenarioParams { rho_m: -1.0, ..base };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { field: "rho_m", .. })
        ));
    }
}
