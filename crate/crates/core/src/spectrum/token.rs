use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::{compute_mac, MacTag, MAC_LEN};
use crate::codec::{DecodeError, Reader, Writer};
use crate::ids::{AuthorityId, BandId, RegionId, TokenId};
use crate::time::{SimTime, Window};

const TOKEN_MAGIC: u8 = b'T';
const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OperatorClass {
    Private,
    Mno,
}

impl OperatorClass {
    fn tag(self) -> u8 {
        match self {
            OperatorClass::Private => 0,
            OperatorClass::Mno => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    pub operator: String,
    pub class: OperatorClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionScope {
    /// Every region under the issuer's own jurisdiction.
    Any,
    Set(BTreeSet<RegionId>),
}

/// Signed, conditional spectrum-access credential.
#[derive(Clone, Debug, PartialEq)]
pub struct EntitlementToken {
    pub token_id: TokenId,
    pub issuer: AuthorityId,
    pub subject: Subject,
    pub bands: BTreeSet<BandId>,
    pub regions: RegionScope,
    pub valid: Window,
    pub max_power_dbm: f64,
    pub mac: MacTag,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TokenError {
    #[error("requested validity window is empty")]
    EmptyWindow,
    #[error("token must name at least one band")]
    NoBands,
    #[error("max power must be finite")]
    InvalidPower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TokenRequest {
    pub subject: Subject,
    pub bands: BTreeSet<BandId>,
    pub regions: RegionScope,
    pub valid: Window,
    pub max_power_dbm: f64,
}

fn write_set<'a>(w: &mut Writer, items: impl ExactSizeIterator<Item = &'a str>) {
    w.u16(items.len() as u16);
    for s in items {
        w.str(s);
    }
}

fn read_set(r: &mut Reader<'_>) -> Result<Vec<String>, DecodeError> {
    let n = r.u16()? as usize;
    let mut out: Vec<String> = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let s = r.str()?;
        if out.last().is_some_and(|prev| *prev >= s) {
            return Err(DecodeError::OutOfRange("set not strictly ascending"));
        }
        out.push(s);
    }
    Ok(out)
}

impl EntitlementToken {
    /// Canonical serialization of every field except the MAC.
    pub fn body(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(TOKEN_MAGIC)
            .u8(VERSION)
            .str(self.token_id.as_str())
            .str(self.issuer.as_str())
            .str(&self.subject.operator)
            .u8(self.subject.class.tag());
        write_set(&mut w, self.bands.iter().map(BandId::as_str));
        match &self.regions {
            RegionScope::Any => {
                w.u8(0);
            }
            RegionScope::Set(rs) => {
                w.u8(1);
                write_set(&mut w, rs.iter().map(RegionId::as_str));
            }
        }
        w.u64(self.valid.start.as_micros()).u64(self.valid.end.as_micros()).f64(self.max_power_dbm);
        w.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.body();
        out.extend_from_slice(&self.mac);
        out
    }

    /// Strict decoder: rejects non-canonical sets, empty windows, non-finite
    /// power and trailing bytes.
    pub fn decode(bytes: &[u8]) -> Result<EntitlementToken, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.u8()? != TOKEN_MAGIC || r.u8()? != VERSION {
            return Err(DecodeError::BadHeader);
        }
        let token_id = TokenId::new(r.str()?);
        let issuer = AuthorityId::new(r.str()?);
        let operator = r.str()?;
        let off = r.position();
        let class = match r.u8()? {
            0 => OperatorClass::Private,
            1 => OperatorClass::Mno,
            tag => return Err(DecodeError::InvalidTag { tag, offset: off }),
        };
        let bands: BTreeSet<BandId> = read_set(&mut r)?.into_iter().map(BandId::new).collect();
        if bands.is_empty() {
            return Err(DecodeError::OutOfRange("empty band set"));
        }
        let off = r.position();
        let regions = match r.u8()? {
            0 => RegionScope::Any,
            1 => RegionScope::Set(read_set(&mut r)?.into_iter().map(RegionId::new).collect()),
            tag => return Err(DecodeError::InvalidTag { tag, offset: off }),
        };
        let valid = Window::new(SimTime(r.u64()?), SimTime(r.u64()?));
        if valid.is_empty() {
            return Err(DecodeError::OutOfRange("empty validity window"));
        }
        let max_power_dbm = r.f64()?;
        if !max_power_dbm.is_finite() {
            return Err(DecodeError::OutOfRange("non-finite power"));
        }
        let mac = r.array::<MAC_LEN>()?;
        r.finish()?;
        Ok(EntitlementToken {
            token_id,
            issuer,
            subject: Subject { operator, class },
            bands,
            regions,
            valid,
            max_power_dbm,
            mac,
        })
    }

    pub fn covers_region(&self, region: &RegionId, region_authority: &AuthorityId) -> bool {
        match &self.regions {
            RegionScope::Any => *region_authority == self.issuer,
            RegionScope::Set(rs) => rs.contains(region),
        }
    }
}

/// Token issuance for one authority. Token ids are `<authority>-<serial>`.
#[derive(Clone, Debug)]
pub struct Issuer {
    pub authority: AuthorityId,
    key: Vec<u8>,
    serial: u64,
}

impl Issuer {
    pub fn new(authority: AuthorityId, key: Vec<u8>) -> Self {
        Issuer { authority, key, serial: 0 }
    }

    pub fn key(&self) -> &[u8] {
        &self.key
    }

    pub fn issue_token(&mut self, req: TokenRequest) -> Result<EntitlementToken, TokenError> {
        if req.valid.is_empty() {
            return Err(TokenError::EmptyWindow);
        }
        if req.bands.is_empty() {
            return Err(TokenError::NoBands);
        }
        if !req.max_power_dbm.is_finite() {
            return Err(TokenError::InvalidPower);
        }
        self.serial += 1;
        let mut token = EntitlementToken {
            token_id: TokenId::new(format!("{}-{}", self.authority, self.serial)),
            issuer: self.authority.clone(),
            subject: req.subject,
            bands: req.bands,
            regions: req.regions,
            valid: req.valid,
            max_power_dbm: req.max_power_dbm,
            mac: [0; MAC_LEN],
        };
        token.mac = compute_mac(&self.key, &token.body());
        Ok(token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{derive_key, verify_mac};

    pub(crate) fn request() -> TokenRequest {
        TokenRequest {
            subject: Subject { operator: "acme".into(), class: OperatorClass::Private },
            bands: ["n78".into()].into_iter().collect(),
            regions: RegionScope::Any,
            valid: Window::new(SimTime::ZERO, SimTime::from_secs(7200)),
            max_power_dbm: 30.0,
        }
    }

    #[test]
    fn issue_roundtrip_and_distinct_ids() {
        let mut iss = Issuer::new("DE".into(), derive_key("DE"));
        let a = iss.issue_token(request()).unwrap();
        let b = iss.issue_token(request()).unwrap();
        assert_ne!(a.token_id, b.token_id);
        assert!(verify_mac(iss.key(), &a.body(), &a.mac));
        assert_eq!(EntitlementToken::decode(&a.encode()).unwrap(), a);
    }

    #[test]
    fn empty_window_rejected() {
        let mut iss = Issuer::new("DE".into(), derive_key("DE"));
        let mut req = request();
        req.valid = Window::new(SimTime(5), SimTime(5));
        assert_eq!(iss.issue_token(req).err(), Some(TokenError::EmptyWindow));
    }

    #[test]
    fn canonical_layout() {
        let mut iss = Issuer::new("X".into(), vec![1]);
        let t = iss.issue_token(request()).unwrap();
        let body = t.body();
        assert_eq!(&body[..2], b"T\x01");
        assert_eq!(&body[2..7], b"\x00\x03X-1");
        // trailing 8+8+8 bytes: not_before, not_after, power bits
        let tail = &body[body.len() - 24..];
        assert_eq!(&tail[..8], &[0; 8]);
        assert_eq!(&tail[8..16], &7_200_000_000u64.to_be_bytes());
        assert_eq!(&tail[16..], &30.0f64.to_bits().to_be_bytes());
    }

    #[test]
    fn decode_rejects_unsorted_sets() {
        let mut iss = Issuer::new("X".into(), vec![1]);
        let mut req = request();
        req.bands = ["a".into(), "b".into()].into_iter().collect();
        let enc = iss.issue_token(req).unwrap().encode();
        let mut swapped = enc.clone();
        let pos = enc.windows(3).position(|w| w == b"\x00\x01a").unwrap();
        swapped[pos + 2] = b'b';
        assert!(EntitlementToken::decode(&swapped).is_err());
    }
}
