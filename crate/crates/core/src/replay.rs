//! FIFO experience storage and hindsight goal relabeling.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TransitionRecord;
use crate::rng::SimRng;

pub const DEFAULT_HER_K: usize = 4;

/// Bounded ring of transitions; the oldest records are evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    records: VecDeque<TransitionRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "replay capacity must be positive".into(),
            ));
        }
        Ok(ReplayBuffer {
            capacity,
            records: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.records.iter()
    }

    fn push(&mut self, record: TransitionRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    /// Append an episode's transitions. All records must share one goal and
    /// follow each other (`s` of each equals `s_next` of the previous).
    pub fn push_episode(&mut self, episode: &[TransitionRecord]) -> Result<()> {
        check_episode(episode)?;
        for r in episode {
            self.push(*r);
        }
        Ok(())
    }

    /// Append records without the episode checks (e.g. relabeled copies,
    /// which need not be consecutive after truncation).
    pub fn extend(&mut self, records: impl IntoIterator<Item = TransitionRecord>) {
        for r in records {
            self.push(r);
        }
    }

    /// `n` uniform draws with replacement.
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<Vec<TransitionRecord>> {
        if self.records.is_empty() {
            return Err(Error::EmptyBatch("sample from an empty replay buffer"));
        }
        Ok((0..n)
            .map(|_| self.records[rng.below(self.records.len())])
            .collect())
    }
}

fn check_episode(episode: &[TransitionRecord]) -> Result<()> {
    if let Some(first) = episode.first() {
        for (i, r) in episode.iter().enumerate() {
            if r.g != first.g {
                return Err(Error::InconsistentEpisode(format!(
                    "record {i} has goal {} but the episode goal is {}",
                    r.g, first.g
                )));
            }
            if i > 0 && episode[i - 1].s_next != r.s {
                return Err(Error::InconsistentEpisode(format!(
                    "record {i} starts at {} but the previous one ended at {}",
                    r.s,
                    episode[i - 1].s_next
                )));
            }
        }
    }
    Ok(())
}

/// Which achieved states become substitute goals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum HerStrategy {
    /// The episode's last achieved state.
    Final,
    /// `k` states drawn uniformly, per transition, from the states achieved
    /// from that transition onwards (its own `s_next` included).
    Future { k: usize },
}

/// Copy an episode's transitions under hindsight goals. `goal_reached` is
/// recomputed for each copy, and no copy is emitted for a transition that
/// comes after the substitute goal was first achieved.
pub fn relabel_hindsight(
    episode: &[TransitionRecord],
    strategy: HerStrategy,
    rng: &mut SimRng,
) -> Result<Vec<TransitionRecord>> {
    if episode.is_empty() {
        return Err(Error::InconsistentEpisode(
            "cannot relabel an empty episode".into(),
        ));
    }
    check_episode(episode)?;
    let first_hit = |g: usize| episode.iter().position(|r| r.s_next == g);
    let mut out = Vec::new();
    match strategy {
        HerStrategy::Final => {
            let g = episode[episode.len() - 1].s_next;
            let last = first_hit(g).expect("final state is achieved");
            out.extend(episode[..=last].iter().map(|r| r.with_goal(g)));
        }
        HerStrategy::Future { k } => {
            if k < 1 {
                return Err(Error::InvalidArgument(
                    "future relabeling needs k >= 1".into(),
                ));
            }
            for (i, r) in episode.iter().enumerate() {
                for _ in 0..k {
                    let j = i + rng.below(episode.len() - i);
                    let g = episode[j].s_next;
                    if first_hit(g).is_some_and(|hit| hit >= i) {
                        out.push(r.with_goal(g));
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(path: &[usize], g: usize) -> Vec<TransitionRecord> {
        path.windows(2)
            .map(|w| TransitionRecord::new(w[0], 0, w[1], g, false))
            .collect()
    }

    #[test]
    fn push_counts_and_fifo() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.push_episode(&episode(&[0, 1, 2, 3, 4, 5], 9)).unwrap();
        assert_eq!(buf.len(), 5);

        let mut small = ReplayBuffer::new(3).unwrap();
        small
            .push_episode(&episode(&[0, 1, 2, 3, 4, 5], 9))
            .unwrap();
        let kept: Vec<usize> = small.iter().map(|r| r.s).collect();
        assert_eq!(kept, vec![2, 3, 4]);
    }

    #[test]
    fn rejects_mixed_goals() {
        let mut ep = episode(&[0, 1, 2], 9);
        ep[1].g = 8;
        let mut buf = ReplayBuffer::new(10).unwrap();
        assert!(matches!(
            buf.push_episode(&ep),
            Err(Error::InconsistentEpisode(_))
        ));
    }

    #[test]
    fn sample_single_record() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        buf.push_episode(&episode(&[3, 4], 9)).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        let batch = buf.sample(4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|r| *r == batch[0]));
    }

    #[test]
    fn sample_empty_is_error() {
        let buf = ReplayBuffer::new(4).unwrap();
        assert!(buf.sample(1, &mut SimRng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn final_relabel() {
        let ep = episode(&[0, 1, 2], 9);
        let out =
            relabel_hindsight(&ep, HerStrategy::Final, &mut SimRng::seed_from_u64(0)).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|r| r.g == 2));
        assert!(!out[0].goal_reached);
        assert!(out[1].goal_reached && out[1].s == 1);
    }

    #[test]
    fn final_relabel_truncates_after_first_visit() {
        // 0 -> 2 -> 1 -> 2: the final goal 2 is first achieved at step 0
        let ep = episode(&[0, 2, 1, 2], 9);
        let out =
            relabel_hindsight(&ep, HerStrategy::Final, &mut SimRng::seed_from_u64(0)).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].goal_reached);
    }

    #[test]
    fn one_step_future_uses_own_endpoint() {
        let ep = episode(&[0, 1], 9);
        let out = relabel_hindsight(
            &ep,
            HerStrategy::Future { k: 1 },
            &mut SimRng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(out, vec![TransitionRecord::new(0, 0, 1, 1, false)]);
        assert!(out[0].goal_reached);
    }

    #[test]
    fn future_needs_positive_k() {
        let ep = episode(&[0, 1], 9);
        assert!(relabel_hindsight(
            &ep,
            HerStrategy::Future { k: 0 },
            &mut SimRng::seed_from_u64(0)
        )
        .is_err());
    }
}
