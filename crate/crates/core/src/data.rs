//! Observation containers for the four modalities and their JSON form.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_BINS: usize = 9;

/// SAR damage percentages are clamped into this band before the logit.
pub const DAMAGE_CLAMP: (f64, f64) = (0.5, 99.5);

const PMF_SUM_TOL: f64 = 1e-6 + 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Seismic,
    Crater,
    Sar,
    Vlm,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Seismic, Modality::Crater, Modality::Sar, Modality::Vlm];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Seismic => "seismic",
            Modality::Crater => "crater",
            Modality::Sar => "sar",
            Modality::Vlm => "vlm",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        Modality::ALL.into_iter().find(|m| m.name() == s.to_ascii_lowercase())
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeismicObs {
    pub mw_obs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CraterObs {
    pub width_m: f64,
    pub length_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SarBox {
    pub range_m: f64,
    pub damage_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlmRecord {
    pub range_m: f64,
    pub pmf: [f64; N_BINS],
}

/// The four observation blocks. Immutable once validated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seismic: Option<SeismicObs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crater: Option<CraterObs>,
    #[serde(default)]
    pub sar: Vec<SarBox>,
    #[serde(default)]
    pub vlm: Vec<VlmRecord>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

fn positive(field: String, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Schema(format!("{field} must be positive and finite, got {v}")))
    }
}

impl Dataset {
    /// Validate and apply the two documented repairs (damage clamp, PMF renormalization).
    pub fn validated(self) -> Result<Self> {
        self.validated_inner(true)
    }

    pub(crate) fn validated_inner(mut self, magnitude_bound: bool) -> Result<Self> {
        if let Some(s) = self.seismic {
            if !s.mw_obs.is_finite() || magnitude_bound && !(s.mw_obs > 0.0 && s.mw_obs < 10.0) {
                return Err(Error::Schema(format!("seismic.mw_obs must lie in (0, 10), got {}", s.mw_obs)));
            }
        }
        if let Some(c) = self.crater {
            positive("crater.width_m".into(), c.width_m)?;
            positive("crater.length_m".into(), c.length_m)?;
            if c.width_m > c.length_m {
                return Err(Error::Schema(format!(
                    "crater.width_m ({}) exceeds crater.length_m ({})",
                    c.width_m, c.length_m
                )));
            }
        }
        for (i, b) in self.sar.iter_mut().enumerate() {
            positive(format!("sar[{i}].range_m"), b.range_m)?;
            if !(b.damage_pct.is_finite() && (0.0..=100.0).contains(&b.damage_pct)) {
                return Err(Error::Schema(format!("sar[{i}].damage_pct must lie in [0, 100], got {}", b.damage_pct)));
            }
            b.damage_pct = b.damage_pct.clamp(DAMAGE_CLAMP.0, DAMAGE_CLAMP.1);
        }
        for (i, r) in self.vlm.iter_mut().enumerate() {
            positive(format!("vlm[{i}].range_m"), r.range_m)?;
            if let Some(k) = r.pmf.iter().position(|q| !(q.is_finite() && *q >= 0.0)) {
                return Err(Error::Schema(format!("vlm[{i}].pmf[{k}] must be a nonnegative number, got {}", r.pmf[k])));
            }
            let total: f64 = r.pmf.iter().sum();
            if (total - 1.0).abs() > PMF_SUM_TOL {
                return Err(Error::Schema(format!("vlm[{i}].pmf sums to {total}, expected 1")));
            }
            for q in r.pmf.iter_mut() {
                *q /= total;
            }
        }
        if self.modalities().is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: Dataset = serde_json::from_str(s)?;
        // generator output carries its config and may hold implausible magnitudes
        let synthetic = raw.meta.get("generator").is_some();
        raw.validated_inner(!synthetic)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    pub fn has(&self, m: Modality) -> bool {
        match m {
            Modality::Seismic => self.seismic.is_some(),
            Modality::Crater => self.crater.is_some(),
            Modality::Sar => !self.sar.is_empty(),
            Modality::Vlm => !self.vlm.is_empty(),
        }
    }

    /// Present modalities in canonical order (seismic, crater, sar, vlm).
    pub fn modalities(&self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|m| self.has(*m)).collect()
    }

    pub fn n_sar(&self) -> usize {
        self.sar.len()
    }

    pub fn n_vlm(&self) -> usize {
        self.vlm.len()
    }

    /// Copy keeping only the listed modalities.
    pub fn restricted(&self, keep: &[Modality]) -> Dataset {
        Dataset {
            seismic: if keep.contains(&Modality::Seismic) { self.seismic } else { None },
            crater: if keep.contains(&Modality::Crater) { self.crater } else { None },
            sar: if keep.contains(&Modality::Sar) { self.sar.clone() } else { Vec::new() },
            vlm: if keep.contains(&Modality::Vlm) { self.vlm.clone() } else { Vec::new() },
            meta: self.meta.clone(),
        }
    }

    pub fn without(&self, drop: Modality) -> Dataset {
        let keep: Vec<_> = self.modalities().into_iter().filter(|m| *m != drop).collect();
        self.restricted(&keep)
    }

    pub fn only(&self, m: Modality) -> Dataset {
        self.restricted(&[m])
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    Dataset::from_json_str(&text)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dataset.to_json_string())?;
    Ok(())
}

/// The two published scalar Beirut observations: Mw 4.50 and the fitted crater ellipse.
pub fn beirut_summary_dataset() -> Dataset {
    Dataset {
        seismic: Some(SeismicObs { mw_obs: 4.50 }),
        crater: Some(CraterObs { width_m: 46.7, length_m: 108.1 }),
        sar: Vec::new(),
        vlm: Vec::new(),
        meta: serde_json::json!({
            "event": "Beirut, 2020-08-04",
            "epicenter": { "lat": 33.9011, "lon": 35.5193 }
        }),
    }
}
