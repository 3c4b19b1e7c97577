//! Acceptance gates and ranking over metric reports.
//!
//! A variant is rejected when any area is (near) solid, when its variance of
//! relative variances does not beat the original's by `tau`, or when no area
//! shows a relative-variance gain above `mu`. Survivors are ranked by a key,
//! largest first.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateThresholds {
    /// Minimum relative area variance.
    pub epsilon: f64,
    /// Minimum RVV.
    pub tau: f64,
    /// Some area's VVO must exceed this.
    pub mu: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        Self {
            epsilon: 0.001,
            tau: 1.0,
            mu: 1.0,
        }
    }
}

impl GateThresholds {
    /// Largest epsilon accepted by [`GateThresholds::validate`].
    pub const MAX_EPSILON: f64 = 0.01;

    pub fn new(epsilon: f64, tau: f64, mu: f64) -> Result<Self> {
        let th = Self { epsilon, tau, mu };
        th.validate()?;
        Ok(th)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < Self::MAX_EPSILON) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be in (0, {}), got {}",
                Self::MAX_EPSILON,
                self.epsilon
            )));
        }
        if !(self.tau.is_finite() && self.tau >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "tau must be >= 1, got {}",
                self.tau
            )));
        }
        if !(self.mu.is_finite() && self.mu >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "mu must be >= 1, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    /// Some area's relative variance is below epsilon.
    SolidArea,
    /// RVV below tau: detail spread evenly everywhere.
    FakeDetailEverywhere,
    /// No area's VVO exceeds mu.
    NoDetailGain,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::SolidArea => "SolidArea",
            RejectReason::FakeDetailEverywhere => "FakeDetailEverywhere",
            RejectReason::NoDetailGain => "NoDetailGain",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub variant_id: String,
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
}

pub fn gate(report: &MetricsReport, th: &GateThresholds) -> Verdict {
    let mut reasons = Vec::new();
    if report.rav.iter().any(|&r| r < th.epsilon) {
        reasons.push(RejectReason::SolidArea);
    }
    if report.rvv < th.tau {
        reasons.push(RejectReason::FakeDetailEverywhere);
    }
    if !report.vvo.iter().any(|&v| v > th.mu) {
        reasons.push(RejectReason::NoDetailGain);
    }
    Verdict {
        variant_id: report.variant_id.clone(),
        accepted: reasons.is_empty(),
        reasons,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankKey {
    /// Largest per-area VVO.
    #[default]
    MaxVvo,
    Rvv,
}

impl RankKey {
    pub fn value(self, report: &MetricsReport) -> f64 {
        match self {
            RankKey::MaxVvo => report.max_vvo,
            RankKey::Rvv => report.rvv,
        }
    }
}

impl fmt::Display for RankKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankKey::MaxVvo => "max-vvo",
            RankKey::Rvv => "rvv",
        })
    }
}

impl FromStr for RankKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "max-vvo" | "maxvvo" | "vvo" => Ok(RankKey::MaxVvo),
            "rvv" => Ok(RankKey::Rvv),
            other => Err(Error::InvalidParams(format!(
                "unknown rank key '{other}' (expected max-vvo or rvv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    /// 1 is best.
    pub rank: usize,
    pub variant_id: String,
    pub key_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub key: RankKey,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn best(&self) -> Option<&RankedEntry> {
        self.entries.first()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.variant_id.as_str()).collect()
    }

    pub fn rank_of(&self, variant_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.variant_id == variant_id)
            .map(|e| e.rank)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Orders by key descending, then id ascending.
pub fn rank<'a>(accepted: impl IntoIterator<Item = &'a MetricsReport>, key: RankKey) -> RankedList {
    let mut keyed: Vec<(&str, f64)> = accepted
        .into_iter()
        .map(|r| (r.variant_id.as_str(), key.value(r)))
        .collect();
    keyed.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(b.0),
        o => o,
    });
    RankedList {
        key,
        entries: keyed
            .into_iter()
            .enumerate()
            .map(|(i, (id, v))| RankedEntry {
                rank: i + 1,
                variant_id: id.to_owned(),
                key_value: v,
            })
            .collect(),
    }
}

/// Gates every report and ranks the accepted ones. Verdicts keep input order.
pub fn select_and_rank(
    reports: &[MetricsReport],
    th: &GateThresholds,
    key: RankKey,
) -> (RankedList, Vec<Verdict>) {
    let verdicts: Vec<Verdict> = reports.iter().map(|r| gate(r, th)).collect();
    let ranked = rank(
        reports
            .iter()
            .zip(&verdicts)
            .filter(|(_, v)| v.accepted)
            .map(|(r, _)| r),
        key,
    );
    (ranked, verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::report_from_precomputed;

    fn report(id: &str, rav: Vec<f64>, vvo: Vec<f64>, rvv: f64) -> MetricsReport {
        let max_vvo = vvo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        MetricsReport {
            variant_id: id.into(),
            total_variance: 1.0,
            aav: rav.clone(),
            rav,
            vvo,
            avv: 0.0,
            rvv,
            max_vvo,
        }
    }

    #[test]
    fn self_report_fails_detail_gain() {
        let orig = [9.0, 11.0, 20.0, 58.0, 110.0];
        let r = report_from_precomputed("self", &orig, 577.0, &orig, 577.0).unwrap();
        let v = gate(&r, &GateThresholds::default());
        assert!(!v.accepted);
        assert_eq!(v.reasons, vec![RejectReason::NoDetailGain]);
    }

    #[test]
    fn all_reasons_can_fire_together() {
        let r = report("x", vec![0.0, 0.5], vec![0.0, 0.9], 0.2);
        let v = gate(&r, &GateThresholds::default());
        assert_eq!(
            v.reasons,
            vec![
                RejectReason::SolidArea,
                RejectReason::FakeDetailEverywhere,
                RejectReason::NoDetailGain
            ]
        );
    }

    #[test]
    fn infinite_vvo_counts_as_gain() {
        let r = report("x", vec![0.2, 0.5], vec![f64::INFINITY, 0.9], 3.0);
        let th = GateThresholds::new(0.001, 1.0, 1e300).unwrap();
        assert!(gate(&r, &th).accepted);
    }

    #[test]
    fn solid_area_rejected_even_with_strong_gain() {
        let r = report("x", vec![0.0, 0.5], vec![0.0, 50.0], 30.0);
        let v = gate(&r, &GateThresholds::default());
        assert_eq!(v.reasons, vec![RejectReason::SolidArea]);
    }

    #[test]
    fn ties_break_by_id() {
        let a = report("b", vec![0.5], vec![2.0], 2.0);
        let b = report("a", vec![0.5], vec![2.0], 2.0);
        let c = report("c", vec![0.5], vec![3.0], 1.0);
        let ranked = rank([&a, &b, &c], RankKey::MaxVvo);
        assert_eq!(ranked.ids(), vec!["c", "a", "b"]);
        assert_eq!(ranked.rank_of("b"), Some(3));
        let ranked = rank([&a, &b, &c], RankKey::Rvv);
        assert_eq!(ranked.ids(), vec!["a", "b", "c"]);
    }

    #[test]
    fn singleton_and_empty() {
        let a = report("only", vec![0.5], vec![2.0], 2.0);
        for key in [RankKey::MaxVvo, RankKey::Rvv] {
            assert_eq!(rank([&a], key).best().unwrap().rank, 1);
        }
        let (ranked, verdicts) = select_and_rank(&[], &GateThresholds::default(), RankKey::MaxVvo);
        assert!(ranked.is_empty() && verdicts.is_empty());
    }

    #[test]
    fn threshold_validation() {
        assert!(GateThresholds::new(0.0, 1.0, 1.0).is_err());
        assert!(GateThresholds::new(0.05, 1.0, 1.0).is_err());
        assert!(GateThresholds::new(0.001, 0.5, 1.0).is_err());
        assert!(GateThresholds::new(0.001, 1.0, 0.99).is_err());
        assert!(GateThresholds::new(0.001, 1.0, 1.0).is_ok());
    }

    #[test]
    fn rank_key_parsing() {
        assert_eq!("max-vvo".parse::<RankKey>().unwrap(), RankKey::MaxVvo);
        assert_eq!("MAX_VVO".parse::<RankKey>().unwrap(), RankKey::MaxVvo);
        assert_eq!("rvv".parse::<RankKey>().unwrap(), RankKey::Rvv);
        assert!("psnr".parse::<RankKey>().is_err());
    }
}
