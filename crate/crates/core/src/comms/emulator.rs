use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Frame, FRAME_CHANNELS, FRAME_LEN};
use crate::error::{Error, Result};

/// Consecutive frames removed from the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BurstDrop {
    pub start_frame: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultPlan {
    pub drop_probability: f64,
    pub corrupt_probability: f64,
    /// Upper bound of the uniform timestamp delay added to each frame.
    pub jitter_ms: u32,
    pub burst_drop: Option<BurstDrop>,
    pub seed: u64,
}

impl Default for FaultPlan {
    fn default() -> Self {
        Self {
            drop_probability: 0.0,
            corrupt_probability: 0.0,
            jitter_ms: 0,
            burst_drop: None,
            seed: 0,
        }
    }
}

impl FaultPlan {
    pub fn clean(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self, n_frames: u64) -> Result<()> {
        for (name, p) in [
            ("drop probability", self.drop_probability),
            ("corrupt probability", self.corrupt_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if let Some(b) = self.burst_drop {
            // the first and last frames anchor the session and are never removed
            if b.length == 0 || b.start_frame == 0 || b.start_frame + b.length >= n_frames {
                return Err(Error::invalid(format!(
                    "burst of {} frames at {} does not fit inside a {n_frames}-frame session",
                    b.length, b.start_frame
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulatorConfig {
    pub nominal_rate_hz: f64,
    pub start_seq: u16,
    pub start_t_ms: u32,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            nominal_rate_hz: 800.0,
            start_seq: 0,
            start_t_ms: 0,
        }
    }
}

/// Sample payload written into each frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SignalSource {
    Constant(u16),
    /// Frame index plus channel offset, wrapping.
    Ramp,
    /// Mid-scale sine, per-channel phase offset.
    Sine {
        amplitude: u16,
        period_frames: u32,
    },
}

impl SignalSource {
    pub fn samples(&self, frame_index: u64) -> [u16; FRAME_CHANNELS] {
        let mut out = [0u16; FRAME_CHANNELS];
        for (ch, s) in out.iter_mut().enumerate() {
            *s = match *self {
                SignalSource::Constant(v) => v,
                SignalSource::Ramp => (frame_index as u16).wrapping_add(ch as u16 * 1000),
                SignalSource::Sine {
                    amplitude,
                    period_frames,
                } => {
                    let phase = (frame_index as f64 / period_frames.max(1) as f64
                        + ch as f64 / FRAME_CHANNELS as f64)
                        * std::f64::consts::TAU;
                    (32768.0 + amplitude as f64 * phase.sin())
                        .round()
                        .clamp(0.0, 65535.0) as u16
                }
            };
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    Drop,
    BurstDrop,
    Corrupt { byte: usize, bit: u8 },
    Jitter { delay_ms: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedFault {
    pub frame_index: u64,
    pub seq: u16,
    #[serde(flatten)]
    pub kind: FaultKind,
}

/// Ground truth of everything the emulator did to the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultLedger {
    pub n_frames: u64,
    pub nominal_rate_hz: f64,
    pub seed: u64,
    pub faults: Vec<InjectedFault>,
}

impl FaultLedger {
    fn count(&self, pred: impl Fn(&FaultKind) -> bool) -> u64 {
        self.faults.iter().filter(|f| pred(&f.kind)).count() as u64
    }

    /// Frames removed, random and burst.
    pub fn dropped(&self) -> u64 {
        self.count(|k| matches!(k, FaultKind::Drop | FaultKind::BurstDrop))
    }

    pub fn corrupted(&self) -> u64 {
        self.count(|k| matches!(k, FaultKind::Corrupt { .. }))
    }

    pub fn delivered_intact(&self) -> u64 {
        self.n_frames - self.dropped() - self.corrupted()
    }

    /// Jitter delay applied to `frame_index`, 0 if none.
    pub fn delay_ms(&self, frame_index: u64) -> u32 {
        self.faults
            .iter()
            .find_map(|f| match f.kind {
                FaultKind::Jitter { delay_ms } if f.frame_index == frame_index => Some(delay_ms),
                _ => None,
            })
            .unwrap_or(0)
    }

    pub fn is_dropped(&self, frame_index: u64) -> bool {
        self.faults.iter().any(|f| {
            f.frame_index == frame_index && matches!(f.kind, FaultKind::Drop | FaultKind::BurstDrop)
        })
    }

    pub fn is_corrupted(&self, frame_index: u64) -> bool {
        self.faults
            .iter()
            .any(|f| f.frame_index == frame_index && matches!(f.kind, FaultKind::Corrupt { .. }))
    }
}

/// Output of one emulated frame slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFrame {
    /// `None` when the frame was dropped.
    pub bytes: Option<[u8; FRAME_LEN]>,
    pub faults: Vec<InjectedFault>,
}

/// Seeded frame producer. Every slot consumes the same number of random
/// draws, so the fault pattern of frame `i` does not depend on earlier faults.
#[derive(Debug)]
pub struct Emulator {
    n_frames: u64,
    next: u64,
    source: SignalSource,
    plan: FaultPlan,
    config: EmulatorConfig,
    rng: ChaCha8Rng,
}

impl Emulator {
    pub fn new(
        n_frames: u64,
        source: SignalSource,
        plan: FaultPlan,
        config: EmulatorConfig,
    ) -> Result<Self> {
        plan.validate(n_frames)?;
        if !(config.nominal_rate_hz.is_finite() && config.nominal_rate_hz > 0.0) {
            return Err(Error::invalid("nominal rate must be > 0"));
        }
        Ok(Self {
            n_frames,
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(plan.seed),
            source,
            plan,
            config,
        })
    }
}

impl Iterator for Emulator {
    type Item = EmittedFrame;

    fn next(&mut self) -> Option<EmittedFrame> {
        if self.next >= self.n_frames {
            return None;
        }
        let i = self.next;
        self.next += 1;

        let u_drop: f64 = self.rng.random();
        let u_corrupt: f64 = self.rng.random();
        let byte = self.rng.random_range(2..FRAME_LEN);
        let bit = self.rng.random_range(0..8u8);
        let delay_ms = if self.plan.jitter_ms > 0 {
            self.rng.random_range(0..=self.plan.jitter_ms)
        } else {
            0
        };

        let seq = self.config.start_seq.wrapping_add(i as u16);
        let fault = |kind| InjectedFault {
            frame_index: i,
            seq,
            kind,
        };
        let pinned = i == 0 || i + 1 == self.n_frames;
        let in_burst = self
            .plan
            .burst_drop
            .is_some_and(|b| i >= b.start_frame && i < b.start_frame + b.length);
        if in_burst {
            return Some(EmittedFrame {
                bytes: None,
                faults: vec![fault(FaultKind::BurstDrop)],
            });
        }
        if !pinned && u_drop < self.plan.drop_probability {
            return Some(EmittedFrame {
                bytes: None,
                faults: vec![fault(FaultKind::Drop)],
            });
        }

        let mut faults = Vec::new();
        let nominal = (i as f64 * 1000.0 / self.config.nominal_rate_hz).floor() as u32;
        let t_ms = self
            .config
            .start_t_ms
            .wrapping_add(nominal)
            .wrapping_add(delay_ms);
        if delay_ms > 0 {
            faults.push(fault(FaultKind::Jitter { delay_ms }));
        }
        let mut bytes = Frame {
            seq,
            t_ms,
            samples: self.source.samples(i),
        }
        .encode();
        if u_corrupt < self.plan.corrupt_probability {
            bytes[byte] ^= 1 << bit;
            faults.push(fault(FaultKind::Corrupt { byte, bit }));
        }
        Some(EmittedFrame {
            bytes: Some(bytes),
            faults,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmulatedStream {
    pub bytes: Vec<u8>,
    pub ledger: FaultLedger,
}

/// Emulates `n_frames` frame slots into one byte buffer.
pub fn emulate(
    n_frames: u64,
    source: &SignalSource,
    plan: &FaultPlan,
    config: &EmulatorConfig,
) -> Result<EmulatedStream> {
    let em = Emulator::new(n_frames, source.clone(), plan.clone(), config.clone())?;
    let mut bytes = Vec::with_capacity(n_frames as usize * FRAME_LEN);
    let mut faults = Vec::new();
    for f in em {
        if let Some(b) = f.bytes {
            bytes.extend_from_slice(&b);
        }
        faults.extend(f.faults);
    }
    Ok(EmulatedStream {
        bytes,
        ledger: FaultLedger {
            n_frames,
            nominal_rate_hz: config.nominal_rate_hz,
            seed: plan.seed,
            faults,
        },
    })
}
