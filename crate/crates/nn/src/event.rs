//! Detector events as network input, and the on-wire formats for events
//! and classification results.

use apeiron_core::Activation;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Inference, INPUTS};

/// PMT channels in the default readout.
pub const DEFAULT_PMTS: u32 = 2048;

/// Up to 64 hit PMTs, each ID normalized to `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventInput {
    hits: Vec<Activation>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EventError {
    #[error("{0} hits, an event holds at most {INPUTS}")]
    TooManyHits(usize),
    #[error("PMT id {id} outside 0-{}", .n_pmts - 1)]
    BadId { id: u32, n_pmts: u32 },
    #[error("PMT count must be at least 1")]
    NoPmts,
}

/// Normalized ID: `id / n_pmts` truncated to 10 fractional bits, so the
/// result is below 1 even for the last PMT.
pub fn normalize(id: u32, n_pmts: u32) -> Activation {
    let raw = (u64::from(id) << Activation::FORMAT.frac_bits()) / u64::from(n_pmts);
    Activation::from_raw_saturating(raw as i64)
}

impl EventInput {
    pub fn from_pmt_ids(ids: &[u32], n_pmts: u32) -> Result<Self, EventError> {
        if n_pmts == 0 {
            return Err(EventError::NoPmts);
        }
        if ids.len() > INPUTS {
            return Err(EventError::TooManyHits(ids.len()));
        }
        let hits = ids
            .iter()
            .map(|&id| {
                if id < n_pmts {
                    Ok(normalize(id, n_pmts))
                } else {
                    Err(EventError::BadId { id, n_pmts })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(EventInput { hits })
    }

    pub fn hits(&self) -> &[Activation] {
        &self.hits
    }

    /// Fixed 64-slot vector, unused slots zero.
    pub fn slots(&self) -> [Activation; INPUTS] {
        let mut s = [Activation::ZERO; INPUTS];
        s[..self.hits.len()].copy_from_slice(&self.hits);
        s
    }

    /// Two raw values per word, low half first. Never empty.
    pub fn pack(&self) -> Vec<u32> {
        let mut words: Vec<u32> = self
            .hits
            .chunks(2)
            .map(|c| {
                let lo = c[0].raw() as u16 as u32;
                let hi = c.get(1).map_or(0, |a| a.raw() as u16 as u32);
                lo | hi << 16
            })
            .collect();
        if words.is_empty() {
            words.push(0);
        }
        words
    }

    /// Inverse of [`EventInput::pack`], up to trailing zero slots. Words
    /// past the 64th slot are ignored.
    pub fn unpack(words: &[u32]) -> Vec<Activation> {
        words
            .iter()
            .flat_map(|w| [*w as u16, (*w >> 16) as u16])
            .take(INPUTS)
            .map(|h| Activation::from_raw_saturating(i64::from(h as i16)))
            .collect()
    }
}

/// Result message: two packed score words and the class.
pub fn pack_result(r: &Inference) -> Vec<u32> {
    let mut v: Vec<u32> = r
        .scores
        .chunks(2)
        .map(|c| (c[0].raw() as u16 as u32) | (c.get(1).map_or(0, |a| a.raw() as u16 as u32) << 16))
        .collect();
    v.push(r.class as u32);
    v
}

pub fn unpack_result(words: &[u32], classes: usize) -> Option<Inference> {
    let (&class, packed) = words.split_last()?;
    if packed.len() * 2 < classes || class as usize >= classes {
        return None;
    }
    let scores = EventInput::unpack(packed).into_iter().take(classes).collect();
    Some(Inference {
        scores,
        class: class as usize,
    })
}

/// Events file: `{"n_pmts": 2048, "events": [[id, ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsFile {
    #[serde(default = "default_pmts")]
    pub n_pmts: u32,
    pub events: Vec<Vec<u32>>,
}

fn default_pmts() -> u32 {
    DEFAULT_PMTS
}

impl EventsFile {
    pub fn inputs(&self) -> Result<Vec<EventInput>, (usize, EventError)> {
        self.events
            .iter()
            .enumerate()
            .map(|(i, e)| EventInput::from_pmt_ids(e, self.n_pmts).map_err(|err| (i, err)))
            .collect()
    }
}

/// Synthetic events: hit count uniform in `1..=max_hits`, distinct PMT IDs
/// drawn uniformly.
pub fn random_event(rng: &mut impl Rng, max_hits: usize, n_pmts: u32) -> Vec<u32> {
    let n = rng.gen_range(1..=max_hits.clamp(1, INPUTS)).min(n_pmts as usize);
    rand::seq::index::sample(rng, n_pmts as usize, n)
        .into_iter()
        .map(|i| i as u32)
        .collect()
}
