use serde::Serialize;

use super::profile::{AccessModel, RegionalProfile};
use crate::ids::{BandId, GrantId, NodeId, RegionId, TokenId};
use crate::time::Window;

/// Short-term, region-scoped license to transmit on one band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grant {
    pub grant_id: GrantId,
    pub token_id: TokenId,
    pub holder: NodeId,
    pub band: BandId,
    pub region: RegionId,
    pub window: Window,
    pub power_cap_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictCheck {
    Clear,
    Conflict { grants: Vec<GrantId>, incumbent: bool },
}

impl ConflictCheck {
    pub fn is_clear(&self) -> bool {
        *self == ConflictCheck::Clear
    }
}

/// Conflict test for a candidate `(band, region, window)`.
pub fn check_conflict<'a>(
    active: impl IntoIterator<Item = &'a Grant>,
    band: &BandId,
    region: &RegionId,
    window: &Window,
    profile: &RegionalProfile,
) -> ConflictCheck {
    let model = match profile.access_model(band) {
        Some(AccessModel::Open) | None => return ConflictCheck::Clear,
        Some(m) => m,
    };
    let grants: Vec<GrantId> = active
        .into_iter()
        .filter(|g| &g.band == band && &g.region == region && g.window.overlaps(window))
        .map(|g| g.grant_id.clone())
        .collect();
    let incumbent = model == AccessModel::Tiered && profile.incumbents(band).any(|w| w.overlaps(window));
    if grants.is_empty() && !incumbent {
        ConflictCheck::Clear
    } else {
        ConflictCheck::Conflict { grants, incumbent }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    fn profile(model: AccessModel, incumbent: Option<Window>) -> RegionalProfile {
        RegionalProfile::new(
            "R".into(),
            [("b".into(), model)].into_iter().collect(),
            Default::default(),
            incumbent.map(|w| ("b".into(), w)).into_iter().collect(),
            30.0,
        )
        .unwrap()
    }

    fn grant(id: &str, s: u64, e: u64) -> Grant {
        Grant {
            grant_id: id.into(),
            token_id: "t".into(),
            holder: "A".into(),
            band: "b".into(),
            region: "R".into(),
            window: Window::new(SimTime::from_secs(s), SimTime::from_secs(e)),
            power_cap_dbm: 20.0,
        }
    }

    fn w(s: u64, e: u64) -> Window {
        Window::new(SimTime::from_secs(s), SimTime::from_secs(e))
    }

    #[test]
    fn exclusive_overlap_conflicts() {
        let p = profile(AccessModel::Exclusive, None);
        let g = [grant("g1", 0, 10)];
        assert_eq!(
            check_conflict(&g, &"b".into(), &"R".into(), &w(5, 15), &p),
            ConflictCheck::Conflict { grants: vec!["g1".into()], incumbent: false }
        );
        assert!(check_conflict(&g, &"b".into(), &"R".into(), &w(10, 20), &p).is_clear());
        assert!(check_conflict(&g, &"b".into(), &"R2".into(), &w(5, 15), &p).is_clear());
    }

    #[test]
    fn tiered_incumbent_conflicts() {
        let p = profile(AccessModel::Tiered, Some(w(30, 60)));
        assert_eq!(
            check_conflict(&[], &"b".into(), &"R".into(), &w(50, 70), &p),
            ConflictCheck::Conflict { grants: vec![], incumbent: true }
        );
        assert!(check_conflict(&[], &"b".into(), &"R".into(), &w(10, 30), &p).is_clear());
    }

    #[test]
    fn open_always_clear() {
        let p = profile(AccessModel::Open, None);
        let g = [grant("g1", 0, 10)];
        assert!(check_conflict(&g, &"b".into(), &"R".into(), &w(0, 10), &p).is_clear());
    }
}
