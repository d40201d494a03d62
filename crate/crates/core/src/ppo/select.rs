use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trained model competing for selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model_id: u32,
    pub checkpoint: PathBuf,
    /// Mean cumulative reward over the evaluation episodes.
    pub mean_reward: f64,
    pub seed: u64,
}

/// Number of candidates kept out of `n` for a top-`fraction` cut.
pub fn select_count(n: usize, fraction: f64) -> usize {
    // tolerate products such as 0.3 * 20 landing a hair above an integer
    let k = (fraction * n as f64 - 1e-9).ceil() as usize;
    k.clamp(1, n)
}

/// The top `ceil(fraction * N)` candidates by mean reward, best first.
///
/// Equal rewards are ordered by the lower model id. The result depends only
/// on the ranking, so any increasing affine map of all rewards selects the
/// same models.
pub fn select_models(candidates: &[Candidate], fraction: f64) -> Result<Vec<Candidate>> {
    if candidates.is_empty() {
        return Err(Error::Invalid("no candidates to select from".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config("fraction must be in (0,1]".into()));
    }
    if let Some(c) = candidates.iter().find(|c| c.mean_reward.is_nan()) {
        return Err(Error::NonFinite(format!(
            "mean reward of candidate {}",
            c.model_id
        )));
    }
    let mut ranked: Vec<&Candidate> = candidates.iter().collect();
    ranked.sort_by(|a, b| {
        b.mean_reward
            .total_cmp(&a.mean_reward)
            .then(a.model_id.cmp(&b.model_id))
    });
    Ok(ranked
        .into_iter()
        .take(select_count(candidates.len(), fraction))
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cands(rewards: &[f64]) -> Vec<Candidate> {
        rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| Candidate {
                model_id: i as u32,
                checkpoint: PathBuf::from(format!("c{i}")),
                mean_reward: r,
                seed: i as u64,
            })
            .collect()
    }

    #[test]
    fn counts() {
        assert_eq!(select_count(20, 0.3), 6);
        assert_eq!(select_count(10, 0.3), 3);
        assert_eq!(select_count(1, 0.3), 1);
        assert_eq!(select_count(3, 1.0), 3);
    }

    #[test]
    fn top_three_of_ten() {
        let c = cands(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0]);
        let picked: Vec<f64> = select_models(&c, 0.3)
            .unwrap()
            .iter()
            .map(|c| c.mean_reward)
            .collect();
        assert_eq!(picked, vec![100.0, 90.0, 80.0]);
    }

    #[test]
    fn ties_prefer_lower_id() {
        let c = cands(&[5.0, 7.0, 7.0, 7.0, 1.0]);
        let ids: Vec<u32> = select_models(&c, 0.4)
            .unwrap()
            .iter()
            .map(|c| c.model_id)
            .collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(select_models(&[], 0.3).is_err());
        assert!(select_models(&cands(&[1.0]), 0.0).is_err());
        assert!(select_models(&cands(&[f64::NAN]), 0.5).is_err());
    }
}
