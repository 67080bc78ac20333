//! Synthetic cohorts: one full session per participant, run in parallel.

use rayon::prelude::*;

use crate::config::SessionConfig;
use crate::log::SessionLog;
use crate::protocol::{Session, SessionError};
use crate::rng::participant_seed;
use crate::synthetic::SyntheticParticipant;

/// Participant id used for cohort member `index` (zero-based).
pub fn participant_id(index: usize) -> String {
    format!("s{:02}", index + 1)
}

/// Run one synthetic session. The session seed is derived from the master
/// seed and the participant index, so members are independent of cohort size
/// and of scheduling.
pub fn simulate_participant(cfg: &SessionConfig, index: usize, master_seed: u64) -> Result<SessionLog, SessionError> {
    let mut cfg = cfg.clone();
    cfg.session.seed = participant_seed(master_seed, index);
    let group = cfg.session.group.resolve(index);
    let ceiling = cfg.device.force_limit.min(crate::device::MAX_COMMANDED_FORCE_N);
    let participant = SyntheticParticipant::new(&cfg.participant, cfg.session.seed, ceiling);
    Session::new(&cfg, &participant_id(index), group, participant)?.run()
}

/// Run `n` participants; logs come back in index order regardless of
/// scheduling.
pub fn simulate_cohort(cfg: &SessionConfig, n: usize, master_seed: u64) -> Result<Vec<SessionLog>, SessionError> {
    (0..n)
        .into_par_iter()
        .map(|i| simulate_participant(cfg, i, master_seed))
        .collect()
}
