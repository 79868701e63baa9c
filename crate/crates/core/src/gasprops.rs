//! Natural gas property correlations: pseudo-critical properties, the
//! Beggs–Brill compressibility factor and Lee–Gonzalez–Eakin viscosity.
//!
//! Pressures are psia, temperatures °R unless a function name says otherwise.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const RANKINE_OFFSET: f64 = 459.67;
pub const AIR_MOLECULAR_WEIGHT: f64 = 28.97;
/// Universal gas constant in psia·ft³/(lbmol·°R).
pub const GAS_CONSTANT: f64 = 10.732;

const SG_MIN: f64 = 0.55;
const SG_MAX: f64 = 1.0;

pub fn fahrenheit_to_rankine(t_f: f64) -> f64 {
    t_f + RANKINE_OFFSET
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoCritical {
    pub t_pc: f64,
    pub p_pc: f64,
}

/// A pseudo-critical property correlation keyed on specific gravity.
pub trait PseudoCriticalCorrelation: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, sg: f64) -> PseudoCritical;

    fn pseudo_critical(&self, sg: f64) -> Result<PseudoCritical> {
        check_sg(sg)?;
        Ok(self.evaluate(sg))
    }
}

/// Standing's natural-gas quadratics (the default).
#[derive(Debug, Clone, Copy, Default)]
pub struct Standing;

impl PseudoCriticalCorrelation for Standing {
    fn name(&self) -> &'static str {
        "standing"
    }
    fn evaluate(&self, sg: f64) -> PseudoCritical {
        PseudoCritical {
            t_pc: 168.0 + 325.0 * sg - 12.5 * sg * sg,
            p_pc: 677.0 + 15.0 * sg - 37.5 * sg * sg,
        }
    }
}

/// Sutton's high-molecular-weight gas correlation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sutton;

impl PseudoCriticalCorrelation for Sutton {
    fn name(&self) -> &'static str {
        "sutton"
    }
    fn evaluate(&self, sg: f64) -> PseudoCritical {
        PseudoCritical {
            t_pc: 169.2 + 349.5 * sg - 74.0 * sg * sg,
            p_pc: 756.8 - 131.0 * sg - 3.6 * sg * sg,
        }
    }
}

fn check_sg(sg: f64) -> Result<()> {
    if !(SG_MIN..=SG_MAX).contains(&sg) {
        return Err(Error::Domain(format!(
            "specific gravity {sg} outside [{SG_MIN}, {SG_MAX}]"
        )));
    }
    Ok(())
}

/// Pseudo-critical temperature (°R) and pressure (psia) from Standing's correlation.
pub fn pseudo_critical(sg: f64) -> Result<PseudoCritical> {
    Standing.pseudo_critical(sg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoReduced {
    pub t_pr: f64,
    pub p_pr: f64,
}

impl PseudoReduced {
    pub fn from_conditions(pressure: f64, temperature: f64, pc: PseudoCritical) -> Self {
        Self { t_pr: temperature / pc.t_pc, p_pr: pressure / pc.p_pc }
    }
}

/// Beggs–Brill compressibility factor.
///
/// Requires `t_pr > 0.92` (the A term takes `sqrt(t_pr - 0.92)`) and `p_pr >= 0`.
pub fn z_factor(pr: PseudoReduced) -> Result<f64> {
    let z = z_correlation(pr)?;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Domain(format!("z-factor evaluated to {z} at t_pr={}, p_pr={}", pr.t_pr, pr.p_pr)));
    }
    Ok(z)
}

/// The raw Beggs–Brill value. Just above t_pr = 0.92 it dips below zero
/// around p_pr ≈ 1, which [`z_factor`] rejects.
pub fn z_correlation(pr: PseudoReduced) -> Result<f64> {
    let PseudoReduced { t_pr, p_pr } = pr;
    if !(t_pr.is_finite() && t_pr > 0.92) {
        return Err(Error::Domain(format!("reduced temperature {t_pr} must exceed 0.92")));
    }
    if !(p_pr.is_finite() && p_pr >= 0.0) {
        return Err(Error::Domain(format!("reduced pressure {p_pr} must be non-negative")));
    }
    // The B term divides by (t_pr - 0.86); unreachable past the guard above
    // but kept explicit so the guard can be relaxed safely.
    if t_pr == 0.86 {
        return Err(Error::Domain("reduced temperature 0.86 is singular".into()));
    }
    let a = 1.39 * (t_pr - 0.92).sqrt() - 0.36 * t_pr - 0.101;
    let b = (0.62 - 0.23 * t_pr) * p_pr
        + (0.066 / (t_pr - 0.86) - 0.037) * p_pr.powi(2)
        + 0.32 * p_pr.powi(6) / 10f64.powf(9.0 * (t_pr - 1.0));
    let c = 0.132 - 0.32 * t_pr.log10();
    let d = 10f64.powf(0.3106 - 0.49 * t_pr + 0.1824 * t_pr * t_pr);
    Ok(a + (1.0 - a) * (-b).exp() + c * p_pr.powf(d))
}

/// A fully resolved gas state. Construct with [`GasState::new`] so that
/// molecular weight and density stay consistent with the other fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub pressure: f64,
    pub temperature: f64,
    pub specific_gravity: f64,
    pub molecular_weight: f64,
    pub density: f64,
    pub z: f64,
}

impl GasState {
    /// Resolves a state at `pressure` (psia) and `temperature` (°R) using the
    /// given pseudo-critical correlation.
    pub fn new(
        pressure: f64,
        temperature: f64,
        specific_gravity: f64,
        correlation: &dyn PseudoCriticalCorrelation,
    ) -> Result<Self> {
        if !(pressure.is_finite() && pressure > 0.0) {
            return Err(Error::Domain(format!("pressure {pressure} must be positive")));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::Domain(format!("temperature {temperature} °R must be positive")));
        }
        let pc = correlation.pseudo_critical(specific_gravity)?;
        let z = z_factor(PseudoReduced::from_conditions(pressure, temperature, pc))?;
        let molecular_weight = AIR_MOLECULAR_WEIGHT * specific_gravity;
        let density = pressure * molecular_weight / (z * GAS_CONSTANT * temperature);
        Ok(Self { pressure, temperature, specific_gravity, molecular_weight, density, z })
    }

    /// Same as [`GasState::new`] with Standing pseudo-criticals and a °F temperature.
    pub fn from_field_units(pressure: f64, temperature_f: f64, specific_gravity: f64) -> Result<Self> {
        Self::new(pressure, fahrenheit_to_rankine(temperature_f), specific_gravity, &Standing)
    }
}

/// Lee–Gonzalez–Eakin viscosity (cp) of the resolved state.
pub fn gas_viscosity(state: &GasState) -> Result<f64> {
    viscosity_lge(state.temperature, state.molecular_weight, state.density)
}

/// Lee–Gonzalez–Eakin viscosity (cp) from temperature (°R), molecular weight
/// and density (lb/ft³).
pub fn viscosity_lge(temperature: f64, molecular_weight: f64, density: f64) -> Result<f64> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Domain(format!("temperature {temperature} °R must be positive")));
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::Domain(format!("density {density} must be positive")));
    }
    let m = molecular_weight;
    let k = (9.4 + 0.02 * m) * temperature.powf(1.5) / (209.0 + 19.0 * m + temperature) * 1e-4;
    let x = 3.5 + 0.01 * m + 986.0 / temperature;
    let y = 2.4 - 0.2 * x;
    Ok(k * (x * (density / 62.4).powf(y)).exp())
}
