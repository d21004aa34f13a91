use std::collections::BTreeMap;

use serde::Serialize;

use ctxtrust::sim::{MetricsLog, Outcome, ScenarioConfig};
use ctxtrust::EntityId;

/// One `--set` or `--seed` override as given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Override {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalTrust {
    pub observer: EntityId,
    pub subject: EntityId,
    pub trv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalRecommenderTrust {
    pub observer: EntityId,
    pub recommender: EntityId,
    pub rt: f64,
}

/// Summary written to `report.json` after a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub overrides: Vec<Override>,
    pub episodes: usize,
    pub succeeded: usize,
    /// `None` when no episode was scheduled.
    pub success_rate: Option<f64>,
    pub final_trust: Vec<FinalTrust>,
    pub final_recommender_trust: Vec<FinalRecommenderTrust>,
}

impl RunReport {
    pub fn new(config: &ScenarioConfig, overrides: Vec<Override>, log: &MetricsLog) -> Self {
        let mut trust = BTreeMap::new();
        let mut rt = BTreeMap::new();
        for row in log.rows() {
            let Some(subject) = &row.subject else {
                continue;
            };
            let key = (row.observer.clone(), subject.clone());
            match (row.outcome, row.trv, row.rt) {
                (Outcome::Recommender, _, Some(v)) => {
                    rt.insert(key, v);
                }
                (_, Some(v), _) => {
                    trust.insert(key, v);
                }
                _ => {}
            }
        }
        let episodes = log.episode_rows().count();
        let succeeded = log
            .episode_rows()
            .filter(|r| r.outcome != Outcome::Failed)
            .count();
        RunReport {
            scenario: config.name.clone(),
            seed: config.seed,
            ticks: config.ticks,
            overrides,
            episodes,
            succeeded,
            success_rate: (episodes > 0).then(|| succeeded as f64 / episodes as f64),
            final_trust: trust
                .into_iter()
                .map(|((observer, subject), trv)| FinalTrust {
                    observer,
                    subject,
                    trv,
                })
                .collect(),
            final_recommender_trust: rt
                .into_iter()
                .map(|((observer, recommender), rt)| FinalRecommenderTrust {
                    observer,
                    recommender,
                    rt,
                })
                .collect(),
        }
    }
}
