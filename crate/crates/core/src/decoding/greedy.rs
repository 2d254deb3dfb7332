//! Greedy transducer search: emit argmax tokens until blank wins, then
//! advance to the next frame. Incremental so sessions can drive it frame by
//! frame; offline decoding runs the same engine to completion.

use super::scorer::TransducerScorer;
use super::Result;

/// Per-frame emission cap against livelock on untrained models.
pub const DEFAULT_EMISSION_CAP: usize = 10;

pub struct GreedySearch<S: TransducerScorer> {
    state: S::State,
    t: usize,
    emitted: Vec<usize>,
    emissions_this_frame: usize,
    cap: usize,
}

impl<S: TransducerScorer> GreedySearch<S> {
    pub fn new(scorer: &S, cap: usize) -> Result<Self> {
        Ok(GreedySearch {
            state: scorer.start_state()?,
            t: 0,
            emitted: Vec::new(),
            emissions_this_frame: 0,
            cap,
        })
    }

    /// Consume every currently-available frame.
    pub fn advance(&mut self, scorer: &S) -> Result<()> {
        while self.t < scorer.frames_available() {
            let lp = scorer.log_probs(self.t, &self.state);
            let mut best = 0usize;
            for (k, &v) in lp.iter().enumerate() {
                if v > lp[best] {
                    best = k;
                }
            }
            if best == crate::transducer::BLANK || self.emissions_this_frame >= self.cap {
                self.t += 1;
                self.emissions_this_frame = 0;
            } else {
                self.emitted.push(best);
                self.state = scorer.advance_label(&self.state, best)?;
                self.emissions_this_frame += 1;
            }
        }
        Ok(())
    }

    pub fn emitted(&self) -> &[usize] {
        &self.emitted
    }

    pub fn into_emitted(self) -> Vec<usize> {
        self.emitted
    }
}

/// Decode all available frames with the default emission cap.
pub fn greedy_decode<S: TransducerScorer>(scorer: &S) -> Result<Vec<usize>> {
    let mut search = GreedySearch::new(scorer, DEFAULT_EMISSION_CAP)?;
    search.advance(scorer)?;
    Ok(search.into_emitted())
}
