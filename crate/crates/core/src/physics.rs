//! Deterministic forward maps from yield to observables.
//!
//! Incident overpressure follows the Kingery-Bulmash hemispherical
//! surface-burst fit in the simplified Swisdak form, which is a quartic in
//! `ln Z` for `ln P` (natural logs on both sides; the coefficient table only
//! reproduces the published curves under that reading).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Feet per metre.
pub const FT_PER_M: f64 = 3.28084;
/// Pounds per kilogram.
pub const LB_PER_KG: f64 = 2.20462;
/// Kilopascals per psi.
pub const KPA_PER_PSI: f64 = 6.89476;
/// TNT-equivalent kilograms per kiloton.
pub const KG_PER_KT: f64 = 1.0e6;

/// Lower and upper limits of the fitted scaled-distance range, ft/lb^(1/3).
pub const Z_EN_MIN: f64 = 0.5;
pub const Z_EN_MAX: f64 = 500.0;

/// Explosive yield in kilotons of TNT equivalent.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct YieldKt(f64);

impl YieldKt {
    pub fn new(kt: f64) -> Result<Self> {
        if kt.is_finite() && kt > 0.0 {
            Ok(YieldKt(kt))
        } else {
            Err(Error::InvalidArgument(format!("yield must be positive and finite, got {kt}")))
        }
    }

    pub fn kt(self) -> f64 {
        self.0
    }
}

/// One row of the piecewise fit: `ln P = A + B L + C L^2 + D L^3 + E L^4`, `L = ln Z_en`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KbRow {
    pub z_lo: f64,
    pub z_hi: f64,
    pub coef: [f64; 5],
}

/// Kingery-Bulmash incident-overpressure coefficients (hemispherical surface burst).
#[derive(Clone, Debug, PartialEq)]
pub struct KbCoefficients {
    pub rows: [KbRow; 3],
}

pub const KB_INCIDENT: KbCoefficients = KbCoefficients {
    rows: [
        KbRow { z_lo: 0.5, z_hi: 7.25, coef: [6.914, -1.439, -0.282, -0.142, 0.069] },
        KbRow { z_lo: 7.25, z_hi: 60.0, coef: [8.831, -3.700, 0.271, 0.073, -0.013] },
        KbRow { z_lo: 60.0, z_hi: 500.0, coef: [5.424, -1.407, 0.0, 0.0, 0.0] },
    ],
};

impl KbCoefficients {
    /// Row whose interval contains `z_en`. Intervals are half-open except the last.
    pub fn row_for(&self, z_en: f64) -> Result<&KbRow> {
        if !(Z_EN_MIN..=Z_EN_MAX).contains(&z_en) {
            return Err(Error::ScaledDistanceOutOfRange { z_en });
        }
        Ok(self
            .rows
            .iter()
            .find(|r| z_en < r.z_hi)
            .unwrap_or(&self.rows[2]))
    }
}

/// Index of the KB regime containing `z_en`, or `None` outside the fitted range.
pub fn regime_index(z_en: f64) -> Option<usize> {
    if !(Z_EN_MIN..=Z_EN_MAX).contains(&z_en) {
        return None;
    }
    Some(KB_INCIDENT.rows.iter().position(|r| z_en < r.z_hi).unwrap_or(2))
}

/// `ln Z_en` for a charge of `exp(ln_yield_kt)` kilotons observed at `range_m`.
///
/// Affine in `ln Y`, so callers evaluating many ranges at one yield can
/// share the `ln Y` term.
#[inline]
pub fn ln_scaled_distance<T: Real>(range_m: f64, ln_yield_kt: T) -> T {
    let offset = range_m.ln() + FT_PER_M.ln() - LB_PER_KG.ln() / 3.0 - KG_PER_KT.ln() / 3.0;
    T::lit(offset) - ln_yield_kt / T::lit(3.0)
}

/// Natural log of incident overpressure in psi at scaled distance `exp(ln_z_en)`.
pub fn kb_ln_psi<T: Real>(ln_z_en: T) -> Result<T> {
    let z = ln_z_en.value().exp();
    let row = KB_INCIDENT.row_for(z)?;
    let [a, b, c, d, e] = row.coef;
    let l = ln_z_en;
    // Horner form
    Ok(T::lit(a) + l * (T::lit(b) + l * (T::lit(c) + l * (T::lit(d) + l * T::lit(e)))))
}

/// Incident overpressure (psi) at a given scaled distance in ft/lb^(1/3).
pub fn kb_overpressure_at_scaled_distance(z_en: f64) -> Result<f64> {
    let row = KB_INCIDENT.row_for(z_en)?;
    let l = z_en.ln();
    let [a, b, c, d, e] = row.coef;
    Ok((a + l * (b + l * (c + l * (d + l * e)))).exp())
}

/// Scaled distance in ft/lb^(1/3) for a range in metres and yield in kt.
pub fn scaled_distance_en(range_m: f64, yield_kt: YieldKt) -> f64 {
    let w = yield_kt.kt() * KG_PER_KT;
    let z_si = range_m / w.cbrt();
    z_si * FT_PER_M / LB_PER_KG.cbrt()
}

/// Peak incident overpressure in psi.
pub fn kb_incident_overpressure(range_m: f64, yield_kt: YieldKt) -> Result<f64> {
    if !(range_m.is_finite() && range_m > 0.0) {
        return Err(Error::InvalidArgument(format!("range must be positive, got {range_m}")));
    }
    kb_overpressure_at_scaled_distance(scaled_distance_en(range_m, yield_kt))
}

#[inline]
pub fn psi_to_kpa<T: Real>(p: T) -> T {
    p * T::lit(KPA_PER_PSI)
}

/// Expected `log10` crater diameter (m) under cube-root scaling.
#[inline]
pub fn crater_mu_log10<T: Real>(yield_kt: T) -> T {
    (yield_kt.log10() + T::lit(6.0)) / T::lit(3.0)
}

/// Affine yield-magnitude regression `ln Y = alpha + beta * Mw`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeLink {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for MagnitudeLink {
    fn default() -> Self {
        MagnitudeLink { alpha: -14.587, beta: 3.004 }
    }
}

impl MagnitudeLink {
    /// Predicted moment magnitude for a yield given in kt.
    #[inline]
    pub fn magnitude<T: Real>(&self, yield_kt: T) -> T {
        self.magnitude_from_ln_yield(yield_kt.ln())
    }

    #[inline]
    pub fn magnitude_from_ln_yield<T: Real>(&self, ln_yield_kt: T) -> T {
        (ln_yield_kt - T::lit(self.alpha)) / T::lit(self.beta)
    }

    /// Yield (kt) implied by a magnitude.
    pub fn yield_kt(&self, mw: f64) -> f64 {
        (self.alpha + self.beta * mw).exp()
    }
}

pub fn magnitude_from_yield(yield_kt: YieldKt, link: &MagnitudeLink) -> f64 {
    link.magnitude(yield_kt.kt())
}

/// Moment magnitude from `log10` seismic moment in N·m.
pub fn mw_from_log_moment(log10_m0_nm: f64) -> f64 {
    2.0 / 3.0 * log10_m0_nm - 6.07
}
