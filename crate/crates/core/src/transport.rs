//! Virtual interfaces over physical bearers: health estimation, bearer
//! selection with hysteresis and protocol-parameter adaptation.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{BearerId, NodeId};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportParams {
    pub rto_min: SimTime,
    pub rto_max: SimTime,
    pub base_window: u32,
    pub loss_window_len: usize,
    /// Bearers at or above this lost fraction are not candidates.
    pub loss_threshold_pct: u32,
    /// Lost fraction above which acknowledgments switch to per-packet.
    pub per_packet_ack_pct: u32,
    pub switch_hysteresis: SimTime,
    /// Estimator gains are `1/srtt_gain_den` and `1/rttvar_gain_den`.
    pub srtt_gain_den: u64,
    pub rttvar_gain_den: u64,
}

impl TransportParams {
    pub fn health_stats(&self) -> HealthStats {
        HealthStats::with_gains(self.loss_window_len, self.srtt_gain_den, self.rttvar_gain_den)
    }

    /// Retransmission timeout for `health`, or `fallback` before any RTT sample.
    pub fn rto_or(&self, health: &HealthStats, fallback: SimTime) -> SimTime {
        adapt_params(health, self).map(|p| p.rto).unwrap_or(fallback)
    }
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            rto_min: SimTime::from_millis(200),
            rto_max: SimTime::from_secs(10),
            base_window: 16,
            loss_window_len: 20,
            loss_threshold_pct: 50,
            per_packet_ack_pct: 20,
            switch_hysteresis: SimTime::from_secs(1),
            srtt_gain_den: 8,
            rttvar_gain_den: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sample {
    Rtt(SimTime),
    Loss,
}

/// Smoothed RTT estimator (gain 1/8) with deviation (gain 1/4) and a sliding
/// window of probe outcomes, all in integer microseconds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HealthStats {
    pub srtt: Option<SimTime>,
    pub rttvar: SimTime,
    window: VecDeque<bool>,
    window_len: usize,
    srtt_den: u64,
    rttvar_den: u64,
    pub last_probe: Option<SimTime>,
}

impl HealthStats {
    pub fn new(window_len: usize) -> Self {
        Self::with_gains(window_len, 8, 4)
    }

    /// Gains are `1/srtt_den` and `1/rttvar_den`.
    pub fn with_gains(window_len: usize, srtt_den: u64, rttvar_den: u64) -> Self {
        HealthStats {
            srtt: None,
            rttvar: SimTime::ZERO,
            window: VecDeque::new(),
            window_len,
            srtt_den: srtt_den.max(1),
            rttvar_den: rttvar_den.max(1),
            last_probe: None,
        }
    }

    pub fn record(&mut self, sample: Sample, now: SimTime) {
        self.last_probe = Some(now);
        let lost = matches!(sample, Sample::Loss);
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(lost);
        if let Sample::Rtt(rtt) = sample {
            let r = rtt.as_micros();
            match self.srtt {
                None => {
                    self.srtt = Some(rtt);
                    self.rttvar = SimTime(r / 2);
                }
                Some(prev) => {
                    let p = prev.as_micros();
                    let (a, b) = (self.srtt_den, self.rttvar_den);
                    self.rttvar = SimTime(((b - 1) * self.rttvar.as_micros() + p.abs_diff(r)) / b);
                    self.srtt = Some(SimTime(((a - 1) * p + r) / a));
                }
            }
        }
    }

    pub fn probes(&self) -> usize {
        self.window.len()
    }

    pub fn lost(&self) -> usize {
        self.window.iter().filter(|l| **l).count()
    }

    /// Fraction of the last `W` probes lost (0 with no probes).
    pub fn loss_window(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.lost() as f64 / self.window.len() as f64
        }
    }

    fn loss_at_least_pct(&self, pct: u32) -> bool {
        !self.window.is_empty() && self.lost() * 100 >= pct as usize * self.window.len()
    }

    fn loss_above_pct(&self, pct: u32) -> bool {
        self.lost() * 100 > pct as usize * self.window.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AckMode {
    PerPacket,
    Cumulative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AdaptiveParams {
    pub rto: SimTime,
    pub flow_window: u32,
    pub ack_mode: AckMode,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("bearer {0} is not bound to this interface")]
    UnboundBearer(BearerId),
    #[error("no RTT samples recorded")]
    NoSamples,
}

pub fn adapt_params(health: &HealthStats, params: &TransportParams) -> Result<AdaptiveParams, TransportError> {
    let srtt = health.srtt.ok_or(TransportError::NoSamples)?;
    let raw = srtt.as_micros() + 4 * health.rttvar.as_micros();
    let rto = SimTime(raw.clamp(params.rto_min.as_micros(), params.rto_max.as_micros()));
    let n = health.probes() as u64;
    let flow_window = if n == 0 {
        params.base_window
    } else {
        let ok = n - health.lost() as u64;
        ((params.base_window as u64 * ok / n) as u32).max(1)
    };
    let ack_mode = if health.loss_above_pct(params.per_packet_ack_pct) {
        AckMode::PerPacket
    } else {
        AckMode::Cumulative
    };
    Ok(AdaptiveParams { rto, flow_window, ack_mode })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BearerSwitch {
    pub at: SimTime,
    pub from: Option<BearerId>,
    pub to: Option<BearerId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    Active(BearerId),
    NoneUp,
}

#[derive(Clone, Debug, Default)]
struct Candidacy {
    since: Option<SimTime>,
    lost_since: Option<SimTime>,
}

/// One logical interface of a node (e.g. its N2 or N3 side) bound to a
/// priority-ordered list of bearers.
#[derive(Clone, Debug)]
pub struct VirtualInterface {
    pub owner: NodeId,
    bound: Vec<BearerId>,
    active: Option<BearerId>,
    health: BTreeMap<BearerId, HealthStats>,
    candidacy: BTreeMap<BearerId, Candidacy>,
    params: TransportParams,
}

impl VirtualInterface {
    pub fn new(owner: NodeId, bound: Vec<BearerId>, params: TransportParams) -> Self {
        let health = bound.iter().map(|b| (b.clone(), params.health_stats())).collect();
        let candidacy = bound.iter().map(|b| (b.clone(), Candidacy::default())).collect();
        VirtualInterface { owner, bound, active: None, health, candidacy, params }
    }

    pub fn bound(&self) -> &[BearerId] {
        &self.bound
    }

    pub fn active(&self) -> Option<&BearerId> {
        self.active.as_ref()
    }

    pub fn health(&self, bearer: &BearerId) -> Option<&HealthStats> {
        self.health.get(bearer)
    }

    pub fn params(&self) -> &TransportParams {
        &self.params
    }

    pub fn record_sample(&mut self, bearer: &BearerId, sample: Sample, now: SimTime) -> Result<&HealthStats, TransportError> {
        let h = self
            .health
            .get_mut(bearer)
            .ok_or_else(|| TransportError::UnboundBearer(bearer.clone()))?;
        h.record(sample, now);
        Ok(h)
    }

    /// Adaptive parameters for the active bearer, if it has samples.
    pub fn current_params(&self) -> Option<AdaptiveParams> {
        let h = self.health.get(self.active.as_ref()?)?;
        adapt_params(h, &self.params).ok()
    }

    fn is_candidate(&self, bearer: &BearerId, up: &dyn Fn(&BearerId) -> bool) -> bool {
        up(bearer)
            && !self
                .health
                .get(bearer)
                .is_some_and(|h| h.loss_at_least_pct(self.params.loss_threshold_pct))
    }

    /// The next instant at which a pending hysteresis interval completes.
    pub fn next_deadline(&self, now: SimTime) -> Option<SimTime> {
        let h = self.params.switch_hysteresis;
        self.candidacy
            .iter()
            .flat_map(|(b, c)| {
                if self.active.as_ref() == Some(b) {
                    [None, c.lost_since]
                } else {
                    [c.since, None]
                }
            })
            .flatten()
            .map(|t| t + h)
            .filter(|t| *t > now)
            .min()
    }

    /// Choose the active bearer.
    ///
    /// A DOWN active bearer is left immediately. An UP but unhealthy active
    /// bearer is left once it has been out of the candidate set for the
    /// hysteresis interval. A higher-priority candidate must be continuously
    /// healthy for the hysteresis interval before it takes over.
    pub fn select_bearer(&mut self, now: SimTime, up: &dyn Fn(&BearerId) -> bool) -> (Selection, Option<BearerSwitch>) {
        let cand: Vec<bool> = self.bound.iter().map(|b| self.is_candidate(b, up)).collect();
        for (b, is) in self.bound.iter().zip(&cand) {
            let c = self.candidacy.get_mut(b).expect("bound");
            if *is {
                c.since.get_or_insert(now);
                c.lost_since = None;
            } else {
                c.since = None;
                c.lost_since.get_or_insert(now);
            }
        }
        let h = self.params.switch_hysteresis;
        let stable = |b: &BearerId, cands: &BTreeMap<BearerId, Candidacy>| {
            cands[b].since.is_some_and(|s| now.saturating_sub(s) >= h)
        };
        let best = self.bound.iter().zip(&cand).find(|(_, c)| **c).map(|(b, _)| b.clone());

        let next = match self.active.clone() {
            None => best,
            Some(cur) if !up(&cur) || !self.bound.contains(&cur) => best,
            Some(cur) => {
                let idx = self.bound.iter().position(|b| *b == cur).expect("bound");
                let cur_lost_long = self.candidacy[&cur].lost_since.is_some_and(|s| now.saturating_sub(s) >= h);
                if cur_lost_long {
                    best.or(Some(cur))
                } else {
                    let better = self.bound[..idx]
                        .iter()
                        .zip(&cand)
                        .find(|(b, c)| **c && stable(b, &self.candidacy))
                        .map(|(b, _)| b.clone());
                    better.or(Some(cur))
                }
            }
        };

        let switch = (next != self.active).then(|| BearerSwitch { at: now, from: self.active.clone(), to: next.clone() });
        self.active = next;
        let sel = match &self.active {
            Some(b) => Selection::Active(b.clone()),
            None => Selection::NoneUp,
        };
        (sel, switch)
    }
}
