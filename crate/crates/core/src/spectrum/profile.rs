use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::token::OperatorClass;
use crate::ids::{BandId, RegionId};
use crate::time::Window;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AccessModel {
    Exclusive,
    Tiered,
    Open,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfileError {
    #[error("incumbent schedule names band {0} which is not TIERED in this profile")]
    IncumbentOnNonTiered(BandId),
    #[error("empty incumbent window for band {0}")]
    EmptyIncumbentWindow(BandId),
}

/// Per-region spectrum rules applied by a policy server.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionalProfile {
    pub region: RegionId,
    pub bands: BTreeMap<BandId, AccessModel>,
    pub excluded_operator_classes: BTreeSet<OperatorClass>,
    pub incumbent_schedule: Vec<(BandId, Window)>,
    pub max_power_dbm: f64,
}

impl RegionalProfile {
    pub fn new(
        region: RegionId,
        bands: BTreeMap<BandId, AccessModel>,
        excluded_operator_classes: BTreeSet<OperatorClass>,
        incumbent_schedule: Vec<(BandId, Window)>,
        max_power_dbm: f64,
    ) -> Result<Self, ProfileError> {
        for (band, w) in &incumbent_schedule {
            if bands.get(band) != Some(&AccessModel::Tiered) {
                return Err(ProfileError::IncumbentOnNonTiered(band.clone()));
            }
            if w.is_empty() {
                return Err(ProfileError::EmptyIncumbentWindow(band.clone()));
            }
        }
        Ok(RegionalProfile { region, bands, excluded_operator_classes, incumbent_schedule, max_power_dbm })
    }

    pub fn allows(&self, band: &BandId) -> bool {
        self.bands.contains_key(band)
    }

    pub fn access_model(&self, band: &BandId) -> Option<AccessModel> {
        self.bands.get(band).copied()
    }

    pub fn incumbents<'a>(&'a self, band: &'a BandId) -> impl Iterator<Item = &'a Window> + 'a {
        self.incumbent_schedule.iter().filter(move |(b, _)| b == band).map(|(_, w)| w)
    }
}
