use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkState {
    Up,
    Down,
}

/// Parametric one-way link: latency, uniform jitter, Bernoulli loss and a
/// serialization rate.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkModel {
    pub base_latency: SimTime,
    /// Jitter is drawn uniformly from `[-jitter_bound, +jitter_bound]`.
    pub jitter_bound: SimTime,
    pub loss_prob: f64,
    pub bandwidth_bps: u64,
    pub state: LinkState,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkModelError {
    #[error("loss probability {0} outside [0, 1]")]
    LossOutOfRange(f64),
    #[error("jitter bound {jitter} exceeds base latency {base}")]
    JitterExceedsLatency { jitter: SimTime, base: SimTime },
    #[error("bandwidth must be positive")]
    ZeroBandwidth,
}

impl LinkModel {
    pub fn new(
        base_latency: SimTime,
        jitter_bound: SimTime,
        loss_prob: f64,
        bandwidth_bps: u64,
    ) -> Result<Self, LinkModelError> {
        let link = LinkModel {
            base_latency,
            jitter_bound,
            loss_prob,
            bandwidth_bps,
            state: LinkState::Up,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<(), LinkModelError> {
        if !(0.0..=1.0).contains(&self.loss_prob) || self.loss_prob.is_nan() {
            return Err(LinkModelError::LossOutOfRange(self.loss_prob));
        }
        if self.jitter_bound > self.base_latency {
            return Err(LinkModelError::JitterExceedsLatency {
                jitter: self.jitter_bound,
                base: self.base_latency,
            });
        }
        if self.bandwidth_bps == 0 {
            return Err(LinkModelError::ZeroBandwidth);
        }
        Ok(())
    }

    pub fn is_up(&self) -> bool {
        self.state == LinkState::Up
    }

    /// Serialization delay for `size_bytes`, rounded down to whole microseconds.
    pub fn serialization_delay(&self, size_bytes: u64) -> SimTime {
        let bits = size_bytes as u128 * 8;
        SimTime((bits * 1_000_000 / self.bandwidth_bps as u128) as u64)
    }

    pub fn with_state(&self, state: LinkState) -> LinkModel {
        LinkModel { state, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    LinkDown,
    Loss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeliveryOutcome {
    Delivered { at: SimTime },
    Dropped(DropCause),
}

impl DeliveryOutcome {
    pub fn is_delivered(&self) -> bool {
        matches!(self, DeliveryOutcome::Delivered { .. })
    }
}

/// Push one message of `size_bytes` through `link` at `now`.
///
/// A DOWN link drops without consuming randomness. Otherwise one uniform draw
/// decides loss and, when the link has jitter, a second draw picks the jitter.
pub fn transmit<R: Rng + ?Sized>(
    size_bytes: u64,
    link: &LinkModel,
    now: SimTime,
    rng: &mut R,
) -> DeliveryOutcome {
    if !link.is_up() {
        return DeliveryOutcome::Dropped(DropCause::LinkDown);
    }
    let u: f64 = rng.random();
    if u < link.loss_prob {
        return DeliveryOutcome::Dropped(DropCause::Loss);
    }
    let bound = link.jitter_bound.as_micros() as i64;
    let jitter = if bound > 0 {
        rng.random_range(-bound..=bound)
    } else {
        0
    };
    let latency = (link.base_latency.as_micros() as i64 + jitter).max(0) as u64;
    DeliveryOutcome::Delivered {
        at: now + SimTime(latency) + link.serialization_delay(size_bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn link(loss: f64, jitter_ms: u64) -> LinkModel {
        LinkModel::new(
            SimTime::from_millis(10),
            SimTime::from_millis(jitter_ms),
            loss,
            1_000_000_000,
        )
        .unwrap()
    }

    #[test]
    fn lossless_tiny_message_arrives_after_base_latency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = transmit(64, &link(0.0, 0), SimTime::from_secs(1), &mut rng);
        assert_eq!(
            out,
            DeliveryOutcome::Delivered {
                at: SimTime::from_secs(1) + SimTime::from_millis(10)
            }
        );
    }

    #[test]
    fn certain_loss_drops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(
                transmit(64, &link(1.0, 0), SimTime::ZERO, &mut rng),
                DeliveryOutcome::Dropped(DropCause::Loss)
            );
        }
    }

    #[test]
    fn down_link_drops_with_link_down() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = link(0.0, 0).with_state(LinkState::Down);
        assert_eq!(
            transmit(64, &l, SimTime::ZERO, &mut rng),
            DeliveryOutcome::Dropped(DropCause::LinkDown)
        );
    }

    #[test]
    fn jitter_stays_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = link(0.0, 4);
        for _ in 0..1000 {
            match transmit(0, &l, SimTime::ZERO, &mut rng) {
                DeliveryOutcome::Delivered { at } => {
                    assert!(at >= SimTime::from_millis(6) && at <= SimTime::from_millis(14))
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn serialization_delay_rounds_down() {
        let l = LinkModel::new(SimTime::ZERO, SimTime::ZERO, 0.0, 8_000_000).unwrap();
        assert_eq!(l.serialization_delay(1000), SimTime(1000));
        assert_eq!(l.serialization_delay(0), SimTime::ZERO);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(LinkModel::new(SimTime(5), SimTime(6), 0.0, 1).is_err());
        assert!(LinkModel::new(SimTime(5), SimTime(0), 1.5, 1).is_err());
        assert!(LinkModel::new(SimTime(5), SimTime(0), 0.0, 0).is_err());
    }
}
