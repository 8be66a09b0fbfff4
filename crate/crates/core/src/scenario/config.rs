//! The defaults table. Every tunable a run uses lives here; a scenario's
//! `config` section overrides individual entries.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::transport::TransportParams;

/// Resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Continuous backhaul DOWN time before N2 declares isolation.
    pub backhaul_loss_hysteresis: SimTime,
    pub beacon_interval: SimTime,
    /// Peer entries expire after this long without a fresh beacon.
    pub peer_ttl: SimTime,
    /// Maximum distance for an internode radio bearer to be usable.
    pub neighbor_range_m: f64,
    /// Per-node DTN buffer, bytes.
    pub buffer_capacity: u64,
    pub packet_ttl: SimTime,
    pub rreq_timeout: SimTime,
    /// Wait after a failed discovery before flooding again.
    pub rreq_retry: SimTime,
    /// Per-hop retransmissions before a route error.
    pub relay_max_retx: u32,
    pub transport: TransportParams,
    /// Health-probe period on every backhaul bearer.
    pub probe_interval: SimTime,
    /// A probe without an echo after this long counts as lost.
    pub probe_timeout: SimTime,
    /// Retransmission timeout before the first RTT sample.
    pub initial_rto: SimTime,
    pub max_grant_duration: SimTime,
    /// Window length a node asks for in each grant request.
    pub grant_request_duration: SimTime,
    pub spectrum_request_timeout: SimTime,
    pub spectrum_max_retries: u32,
    /// Renewal is requested this long before the current grant ends.
    pub grant_renew_lead: SimTime,
    /// Retry period after a Conflict denial.
    pub conflict_retry: SimTime,
    pub radio_power_dbm: f64,
    pub regulatory_latency: SimTime,
    pub regulatory_loss: f64,
    /// Period of the position check that detects region crossings.
    pub region_poll: SimTime,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            backhaul_loss_hysteresis: SimTime::from_secs(2),
            beacon_interval: SimTime::from_secs(1),
            peer_ttl: SimTime::from_secs(3),
            neighbor_range_m: 5000.0,
            buffer_capacity: 10_000_000,
            packet_ttl: SimTime::from_secs(30),
            rreq_timeout: SimTime::from_millis(500),
            rreq_retry: SimTime::from_secs(1),
            relay_max_retx: 3,
            transport: TransportParams::default(),
            probe_interval: SimTime::from_secs(1),
            probe_timeout: SimTime::from_secs(3),
            initial_rto: SimTime::from_secs(1),
            max_grant_duration: SimTime::from_secs(3600),
            grant_request_duration: SimTime::from_secs(3600),
            spectrum_request_timeout: SimTime::from_secs(2),
            spectrum_max_retries: 3,
            grant_renew_lead: SimTime::from_secs(10),
            conflict_retry: SimTime::from_secs(5),
            radio_power_dbm: 20.0,
            regulatory_latency: SimTime::from_millis(20),
            regulatory_loss: 0.0,
            region_poll: SimTime::from_millis(100),
        }
    }
}

/// Per-scenario overrides of [`Config`]. Durations are milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backhaul_loss_hysteresis_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beacon_interval_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer_ttl_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor_range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_capacity_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_ttl_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rreq_timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rreq_retry_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relay_max_retx: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rto_min_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rto_max_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_window: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_threshold_pct: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_packet_ack_pct: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_hysteresis_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srtt_gain_den: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rttvar_gain_den: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_interval_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_rto_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_grant_duration_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_request_duration_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_request_timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_max_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_renew_lead_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflict_retry_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radio_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regulatory_latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regulatory_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_poll_ms: Option<u64>,
}

fn ms(v: Option<u64>, slot: &mut SimTime) {
    if let Some(v) = v {
        *slot = SimTime::from_millis(v);
    }
}

fn set<T: Copy>(v: Option<T>, slot: &mut T) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ConfigOverrides {
    pub fn resolve(&self) -> Config {
        let mut c = Config::default();
        ms(self.backhaul_loss_hysteresis_ms, &mut c.backhaul_loss_hysteresis);
        ms(self.beacon_interval_ms, &mut c.beacon_interval);
        match (self.peer_ttl_ms, self.beacon_interval_ms) {
            (Some(t), _) => c.peer_ttl = SimTime::from_millis(t),
            (None, Some(b)) => c.peer_ttl = SimTime::from_millis(3 * b),
            (None, None) => {}
        }
        set(self.neighbor_range_m, &mut c.neighbor_range_m);
        set(self.buffer_capacity_bytes, &mut c.buffer_capacity);
        ms(self.packet_ttl_ms, &mut c.packet_ttl);
        ms(self.rreq_timeout_ms, &mut c.rreq_timeout);
        ms(self.rreq_retry_ms, &mut c.rreq_retry);
        set(self.relay_max_retx, &mut c.relay_max_retx);
        let t = &mut c.transport;
        ms(self.rto_min_ms, &mut t.rto_min);
        ms(self.rto_max_ms, &mut t.rto_max);
        set(self.flow_window, &mut t.base_window);
        set(self.loss_window, &mut t.loss_window_len);
        set(self.loss_threshold_pct, &mut t.loss_threshold_pct);
        set(self.per_packet_ack_pct, &mut t.per_packet_ack_pct);
        ms(self.switch_hysteresis_ms, &mut t.switch_hysteresis);
        set(self.srtt_gain_den, &mut t.srtt_gain_den);
        set(self.rttvar_gain_den, &mut t.rttvar_gain_den);
        ms(self.probe_interval_ms, &mut c.probe_interval);
        ms(self.probe_timeout_ms, &mut c.probe_timeout);
        ms(self.initial_rto_ms, &mut c.initial_rto);
        ms(self.max_grant_duration_ms, &mut c.max_grant_duration);
        match self.grant_request_duration_ms {
            Some(d) => c.grant_request_duration = SimTime::from_millis(d),
            None => c.grant_request_duration = c.max_grant_duration,
        }
        ms(self.spectrum_request_timeout_ms, &mut c.spectrum_request_timeout);
        set(self.spectrum_max_retries, &mut c.spectrum_max_retries);
        ms(self.grant_renew_lead_ms, &mut c.grant_renew_lead);
        ms(self.conflict_retry_ms, &mut c.conflict_retry);
        set(self.radio_power_dbm, &mut c.radio_power_dbm);
        ms(self.regulatory_latency_ms, &mut c.regulatory_latency);
        set(self.regulatory_loss, &mut c.regulatory_loss);
        ms(self.region_poll_ms, &mut c.region_poll);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_overrides_are_defaults() {
        assert_eq!(ConfigOverrides::default().resolve(), Config::default());
    }

    #[test]
    fn beacon_interval_scales_ttl() {
        let o = ConfigOverrides { beacon_interval_ms: Some(500), ..Default::default() };
        assert_eq!(o.resolve().peer_ttl, SimTime::from_millis(1500));
    }
}
