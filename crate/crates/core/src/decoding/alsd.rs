//! Alignment-length synchronous beam search.
//!
//! Hypotheses are synchronized on alignment length i = t + u. At each step a
//! live hypothesis expands by blank (advance t, same prefix) or by each
//! non-blank token (same t, longer prefix); duplicate prefixes land on the
//! same lattice node and merge. A hypothesis finalizes when its blank move
//! crosses the last frame.
//!
//! The search is incremental: it only consumes frames that exist, stalling
//! otherwise, so a streaming session and an offline pass over the same
//! frames execute identical expansions in identical order.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::numerics::ops::log_add;
use crate::transducer::BLANK;

use super::scorer::TransducerScorer;
use super::{DecodeError, NBest, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeMode {
    /// Sum branch probabilities (true sequence posterior).
    LogSum,
    /// Keep the best branch only.
    Max,
}

fn merge(mode: MergeMode, a: f64, b: f64) -> f64 {
    match mode {
        MergeMode::LogSum => log_add(a, b),
        MergeMode::Max => a.max(b),
    }
}

/// Ranking: higher log-prob first; ties broken by shorter prefix, then
/// lexicographic token order.
pub(crate) fn rank(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| a.0.len().cmp(&b.0.len()))
        .then_with(|| a.0.cmp(&b.0))
}

struct Hyp<St> {
    prefix: Vec<usize>,
    log_prob: f64,
    state: St,
    /// Frames consumed so far.
    t: usize,
    /// Last alignment step this hypothesis was expanded at.
    step: usize,
}

struct Candidate {
    log_prob: f64,
    /// Index of the live hypothesis whose state reproduces this prefix.
    parent: usize,
    /// None for a blank move (parent state carries over).
    label: Option<usize>,
    t: usize,
}

pub struct AlsdSearch<St> {
    live: Vec<Hyp<St>>,
    finals: BTreeMap<Vec<usize>, f64>,
    step: usize,
    beam: usize,
    u_max: usize,
    mode: MergeMode,
}

/// Default bound on emitted labels.
pub fn default_u_max(t: usize) -> usize {
    t * 2
}

impl<St: Clone> AlsdSearch<St> {
    pub fn new<S>(scorer: &S, beam: usize, u_max: usize, mode: MergeMode) -> Result<Self>
    where
        S: TransducerScorer<State = St>,
    {
        if beam < 1 {
            return Err(DecodeError::BeamTooSmall);
        }
        let start = Hyp {
            prefix: Vec::new(),
            log_prob: 0.0,
            state: scorer.start_state()?,
            t: 0,
            step: 0,
        };
        Ok(AlsdSearch {
            live: vec![start],
            finals: BTreeMap::new(),
            step: 0,
            beam,
            u_max,
            mode,
        })
    }

    /// Process alignment steps while every live hypothesis can score its
    /// current frame. `total_frames` is known only once the input has ended;
    /// until then finalization is impossible and hypotheses at the frontier
    /// stall.
    pub fn advance<S>(&mut self, scorer: &S, total_frames: Option<usize>) -> Result<()>
    where
        S: TransducerScorer<State = St>,
    {
        let kbar = scorer.n_tokens();
        loop {
            if self.live.is_empty() {
                return Ok(());
            }
            let avail = scorer.frames_available();
            if self.live.iter().any(|h| h.t >= avail) {
                return Ok(()); // wait for more frames
            }

            // candidates merged by prefix; BTreeMap keeps merge order
            // deterministic across runs
            let mut cands: BTreeMap<Vec<usize>, Candidate> = BTreeMap::new();
            let mut add = |prefix: Vec<usize>, cand: Candidate, mode: MergeMode| {
                cands
                    .entry(prefix)
                    .and_modify(|c| c.log_prob = merge(mode, c.log_prob, cand.log_prob))
                    .or_insert(cand);
            };

            for (idx, h) in self.live.iter().enumerate() {
                let lp = scorer.log_probs(h.t, &h.state);
                let blank_lp = h.log_prob + lp[BLANK];
                if total_frames == Some(h.t + 1) {
                    self.finals
                        .entry(h.prefix.clone())
                        .and_modify(|v| *v = merge(self.mode, *v, blank_lp))
                        .or_insert(blank_lp);
                } else {
                    add(
                        h.prefix.clone(),
                        Candidate { log_prob: blank_lp, parent: idx, label: None, t: h.t + 1 },
                        self.mode,
                    );
                }
                if h.prefix.len() < self.u_max {
                    for k in 1..kbar {
                        let mut prefix = h.prefix.clone();
                        prefix.push(k);
                        add(
                            prefix,
                            Candidate {
                                log_prob: h.log_prob + lp[k],
                                parent: idx,
                                label: Some(k),
                                t: h.t,
                            },
                            self.mode,
                        );
                    }
                }
            }

            // prune to the beam, then materialize survivor states
            let mut ranked: Vec<(Vec<usize>, Candidate)> = cands.into_iter().collect();
            ranked.sort_by(|a, b| rank(&(a.0.clone(), a.1.log_prob), &(b.0.clone(), b.1.log_prob)));
            ranked.truncate(self.beam);

            self.step += 1;
            let mut next = Vec::with_capacity(ranked.len());
            for (prefix, cand) in ranked {
                let state = match cand.label {
                    None => self.live[cand.parent].state.clone(),
                    Some(k) => scorer.advance_label(&self.live[cand.parent].state, k)?,
                };
                next.push(Hyp { prefix, log_prob: cand.log_prob, state, t: cand.t, step: self.step });
            }
            self.live = next;
        }
    }

    /// Longest common prefix of everything still contending (live
    /// hypotheses and finals); safe to emit because the eventual winner
    /// must extend it.
    pub fn committed_prefix(&self) -> Vec<usize> {
        let mut iter = self
            .live
            .iter()
            .map(|h| h.prefix.as_slice())
            .chain(self.finals.keys().map(|k| k.as_slice()));
        let mut common: Vec<usize> = match iter.next() {
            Some(p) => p.to_vec(),
            None => return Vec::new(),
        };
        for p in iter {
            let n = common.iter().zip(p).take_while(|(a, b)| a == b).count();
            common.truncate(n);
        }
        common
    }

    /// Drain the search against the now-known total frame count and return
    /// the ranked n-best (at most `beam` entries).
    pub fn finish<S>(mut self, scorer: &S, total_frames: usize) -> Result<NBest>
    where
        S: TransducerScorer<State = St>,
    {
        // hypotheses whose blank already crossed the last frame while the
        // total was unknown are complete alignments
        let mut still_live = Vec::new();
        for h in self.live.drain(..) {
            if h.t >= total_frames {
                self.finals
                    .entry(h.prefix)
                    .and_modify(|v| *v = merge(self.mode, *v, h.log_prob))
                    .or_insert(h.log_prob);
            } else {
                still_live.push(h);
            }
        }
        self.live = still_live;
        self.advance(scorer, Some(total_frames))?;
        debug_assert!(self.live.is_empty(), "search did not drain");
        let mut ranked: Vec<(Vec<usize>, f64)> = self.finals.into_iter().collect();
        ranked.sort_by(rank);
        ranked.truncate(self.beam);
        Ok(NBest::from_ranked(ranked))
    }
}

/// Offline beam search over a fully available encoder output.
pub fn alsd_beam<S: TransducerScorer>(
    scorer: &S,
    beam: usize,
    u_max: usize,
    mode: MergeMode,
) -> Result<NBest> {
    let total = scorer.frames_available();
    let mut search = AlsdSearch::new(scorer, beam, u_max, mode)?;
    search.advance(scorer, Some(total))?;
    search.finish(scorer, total)
}
