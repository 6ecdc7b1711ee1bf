//! Self and peer risk.
//!
//! The current window is reduced to plain topic shares; the baseline is a
//! smoothed distribution, so every baseline share is positive when the
//! smoothing is. Per topic, the one-sided relative excess
//! `Δ = max(0, c − b) / b` is squashed to `Δ / (1 + Δ)`, which lies in `[0, 1)`,
//! is zero whenever the current share does not exceed the baseline, and does
//! not change when all current weights are scaled together.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize_weights, ActivityProfile, Distribution, Result, TopicGridError, TopicId, Window};

pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    #[serde(rename = "self")]
    SelfHistory,
    Peer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskGrid {
    pub entity_id: String,
    pub window: Window,
    pub kind: RiskKind,
    pub values: BTreeMap<TopicId, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn current_shares(current: &ActivityProfile, universe: &[TopicId]) -> Result<Distribution> {
    normalize_weights(&current.weights, 0.0, universe)
}

fn excess_risk(current: &Distribution, baseline: &Distribution) -> Result<BTreeMap<TopicId, f64>> {
    current
        .iter()
        .map(|(topic, &c)| {
            let b = baseline[topic];
            let risk = if c <= b {
                0.0
            } else if b == 0.0 {
                return Err(TopicGridError::ZeroBaseline(topic.clone()));
            } else {
                let delta = (c - b) / b;
                delta / (1.0 + delta)
            };
            Ok((topic.clone(), risk))
        })
        .collect()
}

/// Risk of `current` against the entity's own pooled history.
pub fn self_risk(
    current: &ActivityProfile,
    history: &[ActivityProfile],
    universe: &[TopicId],
    smoothing: f64,
) -> Result<RiskGrid> {
    for h in history {
        if h.entity_id != current.entity_id {
            return Err(TopicGridError::EntityMismatch {
                expected: current.entity_id.clone(),
                found: h.entity_id.clone(),
            });
        }
        if h.window.overlaps(&current.window) || h.window.start >= current.window.end {
            return Err(TopicGridError::OverlappingWindows { a: h.window, b: current.window });
        }
    }
    for (i, a) in history.iter().enumerate() {
        if let Some(b) = history[i + 1..].iter().find(|b| a.window.overlaps(&b.window)) {
            return Err(TopicGridError::OverlappingWindows { a: a.window, b: b.window });
        }
    }

    let c = current_shares(current, universe)?;
    let mut warnings = Vec::new();
    let values = if history.is_empty() {
        warnings.push("no history before this window; self risk is zero".to_string());
        universe.iter().map(|t| (t.clone(), 0.0)).collect()
    } else {
        let mut pooled: BTreeMap<TopicId, f64> = BTreeMap::new();
        for h in history {
            for (t, w) in &h.weights {
                *pooled.entry(t.clone()).or_default() += w;
            }
        }
        let baseline = normalize_weights(&pooled, smoothing, universe)?;
        excess_risk(&c, &baseline)?
    };
    Ok(RiskGrid {
        entity_id: current.entity_id.clone(),
        window: current.window,
        kind: RiskKind::SelfHistory,
        values,
        warnings,
    })
}

/// Risk of `current` against the equal-weight mean of the peers' smoothed
/// distributions.
pub fn peer_risk(
    current: &ActivityProfile,
    peers: &[ActivityProfile],
    universe: &[TopicId],
    smoothing: f64,
) -> Result<RiskGrid> {
    if peers.is_empty() {
        return Err(TopicGridError::NoPeers);
    }
    if peers.iter().any(|p| p.entity_id == current.entity_id) {
        return Err(TopicGridError::SelfInPeers { entity: current.entity_id.clone() });
    }
    let mut baseline: Distribution = universe.iter().map(|t| (t.clone(), 0.0)).collect();
    for p in peers {
        for (t, q) in normalize_weights(&p.weights, smoothing, universe)? {
            *baseline.get_mut(&t).expect("same universe") += q;
        }
    }
    let k = peers.len() as f64;
    baseline.values_mut().for_each(|v| *v /= k);

    let c = current_shares(current, universe)?;
    Ok(RiskGrid {
        entity_id: current.entity_id.clone(),
        window: current.window,
        kind: RiskKind::Peer,
        values: excess_risk(&c, &baseline)?,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::window;
    use super::*;

    fn prof(entity: &str, day: u32, weights: &[(&str, f64)]) -> ActivityProfile {
        ActivityProfile::new(entity, window(day), weights.iter().map(|(t, w)| (t.to_string(), *w)).collect())
            .unwrap()
    }

    fn topics(ids: &[&str]) -> Vec<TopicId> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn match_gives_zero() {
        let u = topics(&["t1", "t2", "t3"]);
        let hist = prof("u1", 1, &[("t1", 4.0), ("t2", 2.0)]);
        // Current shares equal to the smoothed history: (w + λ) / (Σ + λ|T|).
        let cur = prof("u1", 2, &[("t1", 4.5), ("t2", 2.5), ("t3", 0.5)]);
        let r = self_risk(&cur, &[hist], &u, 0.5).unwrap();
        assert!(r.values.values().all(|&v| v.abs() <= 1e-12), "{:?}", r.values);
    }

    #[test]
    fn doubled_share_gives_half() {
        let u = topics(&["t1", "t2"]);
        // Baseline with λ = 0.5: t1 = (1 + .5)/(8 + 1) = 1/6.
        let hist = prof("u1", 1, &[("t1", 1.0), ("t2", 7.0)]);
        // Current t1 share 1/3 = 2 · (1/6).
        let cur = prof("u1", 2, &[("t1", 1.0), ("t2", 2.0)]);
        let r = self_risk(&cur, &[hist], &u, 0.5).unwrap();
        let delta: f64 = (1.0 / 3.0 - 1.0 / 6.0) / (1.0 / 6.0);
        assert!((r.values["t1"] - delta / (1.0 + delta)).abs() < 1e-12);
        assert!((r.values["t1"] - 0.5).abs() < 1e-12);
        assert_eq!(r.values["t2"], 0.0);
    }

    #[test]
    fn empty_history_warns() {
        let u = topics(&["t1"]);
        let r = self_risk(&prof("u1", 2, &[("t1", 1.0)]), &[], &u, 0.5).unwrap();
        assert_eq!(r.values["t1"], 0.0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn self_risk_contract_errors() {
        let u = topics(&["t1"]);
        let cur = prof("u1", 2, &[("t1", 1.0)]);
        assert!(matches!(
            self_risk(&cur, &[prof("u2", 1, &[])], &u, 0.5),
            Err(TopicGridError::EntityMismatch { .. })
        ));
        assert!(matches!(
            self_risk(&cur, &[prof("u1", 2, &[])], &u, 0.5),
            Err(TopicGridError::OverlappingWindows { .. })
        ));
        assert!(matches!(
            self_risk(&cur, &[prof("u1", 1, &[]), prof("u1", 1, &[])], &u, 0.5),
            Err(TopicGridError::OverlappingWindows { .. })
        ));
        assert!(matches!(
            self_risk(&cur, &[prof("u1", 3, &[])], &u, 0.5),
            Err(TopicGridError::OverlappingWindows { .. })
        ));
    }

    #[test]
    fn peer_examples() {
        let u = topics(&["t1", "t2"]);
        let cur = prof("u1", 2, &[("t1", 1.0)]);
        let peers = [prof("u2", 2, &[("t1", 1.0), ("t2", 0.0)]), prof("u3", 2, &[("t2", 1.0)])];
        let r = peer_risk(&cur, &peers, &u, 0.0).unwrap();
        assert!((r.values["t1"] - 0.5).abs() < 1e-15);
        assert_eq!(r.values["t2"], 0.0);
        assert_eq!(r.kind, RiskKind::Peer);

        let same = peer_risk(&prof("u1", 2, &[("t1", 3.0), ("t2", 1.0)]), &[prof("u2", 2, &[("t1", 3.0), ("t2", 1.0)])], &u, 0.0)
            .unwrap();
        assert!(same.values.values().all(|&v| v == 0.0));
    }

    #[test]
    fn idle_entity_is_uniform() {
        let u = topics(&["t1", "t2", "t3", "t4"]);
        let peers = [prof("u2", 2, &[("t1", 10.0), ("t2", 2.0)])];
        let r = peer_risk(&prof("u1", 2, &[]), &peers, &u, 0.5).unwrap();
        // Peer baseline: t1 = 10.5/14, t2 = 2.5/14, t3 = t4 = 0.5/14; current = 1/4 each.
        for (t, b) in [("t1", 10.5 / 14.0), ("t2", 2.5 / 14.0), ("t3", 0.5 / 14.0), ("t4", 0.5 / 14.0)] {
            let c: f64 = 0.25;
            let expected = if c > b { (c - b) / b / (1.0 + (c - b) / b) } else { 0.0 };
            assert!((r.values[t] - expected).abs() < 1e-12, "{t}");
        }
        assert_eq!(r.values["t1"], 0.0);
        assert!(r.values["t2"] > 0.0);
    }

    #[test]
    fn peer_contract_errors() {
        let u = topics(&["t1"]);
        let cur = prof("u1", 2, &[("t1", 1.0)]);
        assert_eq!(peer_risk(&cur, &[], &u, 0.5), Err(TopicGridError::NoPeers));
        assert!(matches!(
            peer_risk(&cur, &[prof("u1", 1, &[])], &u, 0.5),
            Err(TopicGridError::SelfInPeers { .. })
        ));
        let u2 = topics(&["t1", "t2"]);
        assert!(matches!(
            peer_risk(&prof("u1", 2, &[("t2", 1.0)]), &[prof("u2", 2, &[("t1", 1.0)])], &u2, 0.0),
            Err(TopicGridError::ZeroBaseline(_))
        ));
    }

    #[test]
    fn serializes_kind_names() {
        assert_eq!(serde_json::to_string(&RiskKind::SelfHistory).unwrap(), "\"self\"");
        assert_eq!(serde_json::to_string(&RiskKind::Peer).unwrap(), "\"peer\"");
    }
}
