use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Recording;

/// Smallest RMS ratio represented (−240 dB); keeps silent neighbours finite.
pub const CROSSTALK_RATIO_FLOOR: f64 = 1e-12;

/// `db[r][c]` = 20·log10(RMS of channel `channels[c]` / RMS of the stimulated
/// channel `stimulated[r]`), 0 dB on the stimulated channel itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkMatrix {
    pub stimulated: Vec<u8>,
    pub channels: Vec<u8>,
    pub db: Vec<Vec<f64>>,
    /// Largest off-diagonal coupling.
    pub worst_db: Option<f64>,
}

impl CrosstalkMatrix {
    pub fn get(&self, stimulated: u8, channel: u8) -> Option<f64> {
        let r = self.stimulated.iter().position(|&s| s == stimulated)?;
        let c = self.channels.iter().position(|&s| s == channel)?;
        Some(self.db[r][c])
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// One recording per stimulated channel, each tagged with that channel id.
pub fn assess_crosstalk(recordings: &[(u8, Recording)]) -> Result<CrosstalkMatrix> {
    let (_, first) = recordings
        .first()
        .ok_or_else(|| Error::empty("crosstalk needs at least one recording"))?;
    let channels: Vec<u8> = first.channels().iter().map(|c| c.id).collect();

    let mut rows: Vec<(u8, Vec<f64>)> = Vec::with_capacity(recordings.len());
    for (stim, rec) in recordings {
        let ids: Vec<u8> = rec.channels().iter().map(|c| c.id).collect();
        if ids != channels {
            return Err(Error::invalid(format!(
                "recording for stimulus on channel {stim} has a different channel set"
            )));
        }
        if rows.iter().any(|(s, _)| s == stim) {
            return Err(Error::invalid(format!("duplicate stimulus channel {stim}")));
        }
        let source = rec
            .channel(*stim)
            .ok_or_else(|| Error::invalid(format!("stimulated channel {stim} not in recording")))?;
        let source_rms = rms(&source.samples);
        if source_rms == 0.0 {
            return Err(Error::invalid(format!(
                "no stimulus present on channel {stim} (RMS = 0)"
            )));
        }
        let row = rec
            .channels()
            .iter()
            .map(|c| {
                if c.id == *stim {
                    0.0
                } else {
                    20.0 * (rms(&c.samples) / source_rms)
                        .max(CROSSTALK_RATIO_FLOOR)
                        .log10()
                }
            })
            .collect();
        rows.push((*stim, row));
    }
    rows.sort_by_key(|(s, _)| *s);

    let worst_db = rows
        .iter()
        .flat_map(|(s, row)| {
            channels
                .iter()
                .zip(row)
                .filter(move |(c, _)| *c != s)
                .map(|(_, v)| *v)
        })
        .reduce(f64::max);
    let (stimulated, db) = rows.into_iter().unzip();
    Ok(CrosstalkMatrix {
        stimulated,
        channels,
        db,
        worst_db,
    })
}
