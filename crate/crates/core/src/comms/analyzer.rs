use serde::{Deserialize, Serialize};

use super::frame::{Frame, FRAME_LEN, SYNC};
use crate::error::{Error, Result};
use crate::model::VerdictLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    /// Frames per second the device is configured to emit.
    pub nominal_rate_hz: f64,
    pub duration_s: f64,
    /// Allowed |received − expected| for session start/stop truncation; 0 = strict.
    pub tolerance_frames: u64,
}

impl AnalyzeOptions {
    pub fn new(nominal_rate_hz: f64, duration_s: f64) -> Self {
        Self {
            nominal_rate_hz,
            duration_s,
            tolerance_frames: 1,
        }
    }
}

/// A run of missing sequence numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceGap {
    pub first_missing_seq: u16,
    /// Sequence slots skipped, including corrupted frames seen inside the gap.
    pub missing: u64,
    /// Slots not explained by corrupted frames.
    pub lost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamIntegrityReport {
    pub nominal_rate_hz: f64,
    pub duration_s: f64,
    pub expected_frames: u64,
    pub received_ok: u64,
    pub lost: u64,
    pub corrupted: u64,
    pub resyncs: u64,
    pub duplicates: u64,
    pub skipped_bytes: u64,
    pub tolerance_frames: u64,
    pub count_matches_expected: bool,
    pub continuity_ok: bool,
    pub nominal_period_ms: f64,
    /// Largest forward timestamp step between consecutive good frames.
    pub max_inter_frame_gap_ms: Option<u32>,
    /// Good frames whose timestamp is earlier than their predecessor's (jitter).
    pub timestamp_regressions: u64,
    pub observed_span_ms: Option<u32>,
    pub gaps: Vec<SequenceGap>,
    pub verdict: VerdictLevel,
}

/// Sequential frame-stream state machine. Bytes may arrive in arbitrary
/// chunks; results do not depend on chunk boundaries.
#[derive(Debug)]
pub struct StreamAnalyzer {
    opts: AnalyzeOptions,
    buf: Vec<u8>,
    head: usize,
    scanning: bool,
    saw_sync: bool,
    received_ok: u64,
    lost: u64,
    corrupted: u64,
    resyncs: u64,
    duplicates: u64,
    skipped_bytes: u64,
    pending_corrupt: u64,
    last_seq: Option<u16>,
    first_t: Option<u32>,
    last_t: Option<u32>,
    max_gap: Option<u32>,
    timestamp_regressions: u64,
    gaps: Vec<SequenceGap>,
}

enum Scan {
    Found(usize),
    /// Nothing acceptable before this offset; more bytes needed beyond it.
    Exhausted(usize),
}

impl StreamAnalyzer {
    pub fn new(opts: AnalyzeOptions) -> Result<Self> {
        if !(opts.nominal_rate_hz.is_finite() && opts.nominal_rate_hz > 0.0) {
            return Err(Error::invalid("nominal rate must be > 0"));
        }
        if !(opts.duration_s.is_finite() && opts.duration_s >= 0.0) {
            return Err(Error::invalid("duration must be >= 0"));
        }
        Ok(Self {
            opts,
            buf: Vec::new(),
            head: 0,
            scanning: false,
            saw_sync: false,
            received_ok: 0,
            lost: 0,
            corrupted: 0,
            resyncs: 0,
            duplicates: 0,
            skipped_bytes: 0,
            pending_corrupt: 0,
            last_seq: None,
            first_t: None,
            last_t: None,
            max_gap: None,
            timestamp_regressions: 0,
            gaps: Vec::new(),
        })
    }

    pub fn push(&mut self, chunk: &[u8]) {
        if self.head > 0 && self.head * 2 >= self.buf.len() {
            self.buf.drain(..self.head);
            self.head = 0;
        }
        self.buf.extend_from_slice(chunk);
        self.process(false);
    }

    pub fn finish(mut self) -> Result<StreamIntegrityReport> {
        self.process(true);
        if !self.saw_sync {
            return Err(Error::NotAFrameStream);
        }
        let o = &self.opts;
        let expected = (o.nominal_rate_hz * o.duration_s).round() as u64;
        let count_matches_expected = self.received_ok.abs_diff(expected) <= o.tolerance_frames;
        let continuity_ok = self.lost == 0 && self.corrupted == 0;
        let verdict = if !continuity_ok {
            VerdictLevel::Fail
        } else if !count_matches_expected {
            VerdictLevel::Marginal
        } else {
            VerdictLevel::Pass
        };
        Ok(StreamIntegrityReport {
            nominal_rate_hz: o.nominal_rate_hz,
            duration_s: o.duration_s,
            expected_frames: expected,
            received_ok: self.received_ok,
            lost: self.lost,
            corrupted: self.corrupted,
            resyncs: self.resyncs,
            duplicates: self.duplicates,
            skipped_bytes: self.skipped_bytes,
            tolerance_frames: o.tolerance_frames,
            count_matches_expected,
            continuity_ok,
            nominal_period_ms: 1000.0 / o.nominal_rate_hz,
            max_inter_frame_gap_ms: self.max_gap,
            timestamp_regressions: self.timestamp_regressions,
            observed_span_ms: self
                .first_t
                .zip(self.last_t)
                .map(|(a, b)| b.wrapping_sub(a)),
            gaps: self.gaps,
            verdict,
        })
    }

    fn accept(&mut self, f: Frame) {
        if let Some(prev) = self.last_seq {
            let step = f.seq.wrapping_sub(prev);
            if step == 0 {
                self.duplicates += 1;
                return;
            }
            let missing = u64::from(step) - 1;
            if missing > 0 {
                let lost = missing.saturating_sub(self.pending_corrupt);
                self.lost += lost;
                if lost > 0 {
                    self.gaps.push(SequenceGap {
                        first_missing_seq: prev.wrapping_add(1),
                        missing,
                        lost,
                    });
                }
            }
        }
        self.pending_corrupt = 0;
        self.received_ok += 1;
        if let Some(t0) = self.last_t {
            // signed so that a jittered frame arriving "early" is not a 49-day gap
            let step = f.t_ms.wrapping_sub(t0) as i32;
            if step < 0 {
                self.timestamp_regressions += 1;
            } else {
                let gap = step as u32;
                self.max_gap = Some(self.max_gap.map_or(gap, |m| m.max(gap)));
            }
        }
        self.first_t.get_or_insert(f.t_ms);
        self.last_t = Some(f.t_ms);
        self.last_seq = Some(f.seq);
    }

    /// Finds a sync position whose frame checksums and is followed by another
    /// sync word (or the end of the stream).
    fn scan(&mut self, is_final: bool) -> Scan {
        let avail = &self.buf[self.head..];
        let mut p = 0;
        while p + FRAME_LEN <= avail.len() {
            if avail[p..p + 2] == SYNC {
                self.saw_sync = true;
                if Frame::decode(&avail[p..p + FRAME_LEN]).is_ok() {
                    let rest = &avail[p + FRAME_LEN..];
                    if rest.len() >= 2 {
                        if rest[..2] == SYNC {
                            return Scan::Found(p);
                        }
                    } else if !is_final {
                        return Scan::Exhausted(p);
                    } else if rest.is_empty() || rest[0] == SYNC[0] {
                        return Scan::Found(p);
                    }
                }
            }
            p += 1;
        }
        if !self.saw_sync && avail.windows(2).any(|w| w == SYNC) {
            self.saw_sync = true;
        }
        Scan::Exhausted(p)
    }

    fn process(&mut self, is_final: bool) {
        loop {
            let avail_len = self.buf.len() - self.head;
            if self.scanning {
                match self.scan(is_final) {
                    Scan::Found(p) => {
                        self.skipped_bytes += p as u64;
                        self.head += p;
                        self.scanning = false;
                    }
                    Scan::Exhausted(p) => {
                        let skip = if is_final { avail_len } else { p };
                        self.skipped_bytes += skip as u64;
                        self.head += skip;
                        return;
                    }
                }
                continue;
            }

            if avail_len < FRAME_LEN {
                if is_final {
                    self.skipped_bytes += avail_len as u64;
                    self.head += avail_len;
                }
                return;
            }
            let avail = &self.buf[self.head..];
            if avail[..2] != SYNC {
                self.scanning = true;
                self.resyncs += 1;
                continue;
            }
            self.saw_sync = true;
            match Frame::decode(&avail[..FRAME_LEN]) {
                Ok(f) => {
                    self.head += FRAME_LEN;
                    self.accept(f);
                }
                Err(_) => {
                    if avail_len < FRAME_LEN + 2 && !is_final {
                        return;
                    }
                    let at_boundary =
                        avail_len == FRAME_LEN || avail[FRAME_LEN..FRAME_LEN + 2] == SYNC;
                    self.resyncs += 1;
                    if at_boundary {
                        // intact framing, damaged content
                        self.corrupted += 1;
                        self.pending_corrupt += 1;
                        self.head += FRAME_LEN;
                    } else {
                        self.scanning = true;
                        self.skipped_bytes += 1;
                        self.head += 1;
                    }
                }
            }
        }
    }
}

/// Analyses a complete byte dump.
pub fn analyze_stream(bytes: &[u8], opts: &AnalyzeOptions) -> Result<StreamIntegrityReport> {
    let mut a = StreamAnalyzer::new(opts.clone())?;
    a.push(bytes);
    a.finish()
}
