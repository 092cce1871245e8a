use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::policy::{parse_policy, Policy};
use crate::reward::RewardReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeStatus {
    Ok,
    Failed,
}

/// One search episode. Wall time is kept in memory only so that logs of
/// identical runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub status: EpisodeStatus,
    /// Compact policy (for input-aware runs, the policy of the first
    /// training example).
    pub policy: String,
    pub policies_sampled: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activity_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    /// Baseline subtracted from this episode's reward.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl EpisodeRecord {
    pub fn succeeded(
        episode: usize,
        policy: &Policy,
        policies_sampled: usize,
        report: &RewardReport,
        baseline: f64,
        wall_time: Duration,
    ) -> Self {
        EpisodeRecord {
            episode,
            status: EpisodeStatus::Ok,
            policy: policy.to_compact(),
            policies_sampled,
            activity_f1: Some(report.activity_f1),
            entity_f1: Some(report.entity_f1),
            reward: Some(report.weighted),
            baseline: Some(baseline),
            error: None,
            wall_time,
        }
    }

    pub fn failed(episode: usize, policy: &Policy, policies_sampled: usize, error: String, wall_time: Duration) -> Self {
        EpisodeRecord {
            episode,
            status: EpisodeStatus::Failed,
            policy: policy.to_compact(),
            policies_sampled,
            activity_f1: None,
            entity_f1: None,
            reward: None,
            baseline: None,
            error: Some(error),
            wall_time,
        }
    }

    pub fn policy(&self) -> Result<Policy> {
        parse_policy(&self.policy)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchLog {
    pub records: Vec<EpisodeRecord>,
}

impl SearchLog {
    pub fn push(&mut self, record: EpisodeRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.episode < record.episode));
        self.records.push(record);
    }

    /// Successful episode with the highest reward; the earliest wins ties.
    pub fn best(&self) -> Option<&EpisodeRecord> {
        let mut best: Option<&EpisodeRecord> = None;
        for record in &self.records {
            let Some(reward) = record.reward else { continue };
            if best.is_none_or(|b| reward > b.reward.expect("successful")) {
                best = Some(record);
            }
        }
        best
    }

    /// Up to `k` distinct policies in order of decreasing reward.
    pub fn top_policies(&self, k: usize) -> Vec<&EpisodeRecord> {
        let mut ok: Vec<&EpisodeRecord> = self.records.iter().filter(|r| r.reward.is_some()).collect();
        // stable sort keeps earlier episodes first among equal rewards
        ok.sort_by(|a, b| b.reward.unwrap().total_cmp(&a.reward.unwrap()));
        let mut seen = std::collections::HashSet::new();
        ok.into_iter().filter(|r| seen.insert(r.policy.clone())).take(k).collect()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("plain data serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut log = SearchLog::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: EpisodeRecord = serde_json::from_str(line)
                .map_err(|e| Error::parse("search log", i + 1, e.to_string()))?;
            if log.records.last().is_some_and(|r| r.episode >= record.episode) {
                return Err(Error::parse("search log", i + 1, "episode indices must increase"));
            }
            log.records.push(record);
        }
        Ok(log)
    }

    /// Wall time per episode, one `episode<TAB>milliseconds` line each.
    pub fn timings(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{}\t{}\n", r.episode, r.wall_time.as_millis()))
            .collect()
    }
}
