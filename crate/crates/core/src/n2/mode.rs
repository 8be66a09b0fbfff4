use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum N2Mode {
    Connected,
    Isolated,
    Reconciling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModeTransition {
    pub at: SimTime,
    pub from: N2Mode,
    pub to: N2Mode,
}

/// Dual-mode state machine. Backhaul loss is only declared after
/// `hysteresis` of continuous DOWN; restoration and loss during
/// reconciliation take effect immediately.
#[derive(Clone, Debug)]
pub struct ModeMachine {
    mode: N2Mode,
    down_since: Option<SimTime>,
    hysteresis: SimTime,
}

impl ModeMachine {
    pub fn new(backhaul_up: bool, hysteresis: SimTime) -> Self {
        ModeMachine {
            mode: if backhaul_up { N2Mode::Connected } else { N2Mode::Isolated },
            down_since: None,
            hysteresis,
        }
    }

    pub fn mode(&self) -> N2Mode {
        self.mode
    }

    pub fn hysteresis(&self) -> SimTime {
        self.hysteresis
    }

    /// When the pending loss declaration fires, if backhaul stays down.
    pub fn loss_deadline(&self) -> Option<SimTime> {
        match self.mode {
            N2Mode::Connected => self.down_since.map(|t| t + self.hysteresis),
            _ => None,
        }
    }

    fn go(&mut self, to: N2Mode, now: SimTime) -> Option<ModeTransition> {
        let from = self.mode;
        self.mode = to;
        self.down_since = None;
        Some(ModeTransition { at: now, from, to })
    }

    pub fn update_mode(&mut self, backhaul_up: bool, now: SimTime) -> Option<ModeTransition> {
        match (self.mode, backhaul_up) {
            (N2Mode::Connected, true) => {
                self.down_since = None;
                None
            }
            (N2Mode::Connected, false) => {
                let since = *self.down_since.get_or_insert(now);
                if now.saturating_sub(since) >= self.hysteresis {
                    self.go(N2Mode::Isolated, now)
                } else {
                    None
                }
            }
            (N2Mode::Isolated, true) => self.go(N2Mode::Reconciling, now),
            (N2Mode::Isolated, false) => None,
            (N2Mode::Reconciling, false) => self.go(N2Mode::Isolated, now),
            (N2Mode::Reconciling, true) => None,
        }
    }

    pub fn reconcile_complete(&mut self, now: SimTime) -> Option<ModeTransition> {
        if self.mode == N2Mode::Reconciling {
            self.go(N2Mode::Connected, now)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: u64) -> SimTime {
        SimTime::from_millis(x)
    }

    #[test]
    fn loss_declared_after_hysteresis() {
        let mut m = ModeMachine::new(true, SimTime::from_secs(2));
        assert_eq!(m.update_mode(false, s(1000)), None);
        assert_eq!(m.loss_deadline(), Some(s(3000)));
        assert_eq!(m.update_mode(false, s(2999)), None);
        let t = m.update_mode(false, s(3000)).unwrap();
        assert_eq!((t.from, t.to), (N2Mode::Connected, N2Mode::Isolated));
    }

    #[test]
    fn short_blip_keeps_connected() {
        let mut m = ModeMachine::new(true, SimTime::from_secs(2));
        m.update_mode(false, s(0));
        m.update_mode(true, s(1000));
        assert_eq!(m.update_mode(false, s(2500)), None);
        assert_eq!(m.update_mode(false, s(4000)), None);
        assert_eq!(m.mode(), N2Mode::Connected);
    }

    #[test]
    fn restore_reconcile_and_mid_reconcile_loss() {
        let mut m = ModeMachine::new(false, SimTime::from_secs(2));
        assert_eq!(m.mode(), N2Mode::Isolated);
        assert_eq!(m.update_mode(true, s(10)).unwrap().to, N2Mode::Reconciling);
        assert_eq!(m.update_mode(false, s(11)).unwrap().to, N2Mode::Isolated);
        m.update_mode(true, s(12));
        assert_eq!(m.reconcile_complete(s(13)).unwrap().to, N2Mode::Connected);
        assert_eq!(m.reconcile_complete(s(14)), None);
    }
}
