//! Player buffer event logs, stall summarization over temporal thirds,
//! and the 53-model impairment scenario corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{AsqmError, Result};
use crate::fit::DatasetRow;
use crate::ge::PlayoutTrace;
use crate::qoe::{Segment, SegmentStalls, SegmentWeights, StallSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferEventKind {
    InitialBuffering,
    Playing,
    Rebuffering,
}

/// One captured player buffer state interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferEvent {
    pub kind: BufferEventKind,
    pub wall_start: f64,
    pub wall_end: f64,
    pub media_position_at_start: f64,
}

/// Session metadata carried on the log's header record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub audio_id: String,
    pub category: String,
    pub codec: String,
    pub bitrate_kbps: f64,
    pub media_len: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub header: SessionHeader,
    pub events: Vec<BufferEvent>,
}

/// Checks ordering, contiguity and the player state machine.
pub fn validate_events(events: &[BufferEvent]) -> Result<()> {
    let first = events
        .first()
        .ok_or_else(|| AsqmError::InvalidInput("session has no events".to_string()))?;
    if first.kind != BufferEventKind::InitialBuffering {
        return Err(AsqmError::InvalidInput(
            "first event must be initial_buffering".to_string(),
        ));
    }
    let mut seen_playing = false;
    for (i, event) in events.iter().enumerate() {
        if event.wall_end < event.wall_start {
            return Err(AsqmError::InvalidInput(format!(
                "event {i}: wall_end {} before wall_start {}",
                event.wall_end, event.wall_start
            )));
        }
        match event.kind {
            BufferEventKind::InitialBuffering => {
                if i != 0 {
                    return Err(AsqmError::InvalidInput(format!(
                        "event {i}: initial_buffering only allowed as the first event"
                    )));
                }
            }
            BufferEventKind::Playing => seen_playing = true,
            BufferEventKind::Rebuffering => {
                if !seen_playing {
                    return Err(AsqmError::InvalidInput(format!(
                        "event {i}: rebuffering before any playing event"
                    )));
                }
            }
        }
        if i > 0 && (event.wall_start - events[i - 1].wall_end).abs() > 1e-9 {
            return Err(AsqmError::InvalidInput(format!(
                "event {i}: starts at {} but previous event ended at {}",
                event.wall_start,
                events[i - 1].wall_end
            )));
        }
    }
    Ok(())
}

/// Parses a session log: a JSON header record followed by one JSON event
/// record per line.
pub fn parse_session<R: BufRead>(reader: R) -> Result<Session> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str::<SessionHeader>(&line)
                    .map_err(|e| AsqmError::Parse { line: i + 1, message: e.to_string() })?;
            }
            None => {
                return Err(AsqmError::Parse {
                    line: 1,
                    message: "empty session log".to_string(),
                })
            }
        }
    };
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: BufferEvent = serde_json::from_str(&line)
            .map_err(|e| AsqmError::Parse { line: i + 1, message: e.to_string() })?;
        events.push(event);
    }
    if events.is_empty() {
        return Err(AsqmError::Parse {
            line: 2,
            message: "session log carries no events".to_string(),
        });
    }
    validate_events(&events)?;
    Ok(Session { header, events })
}

pub fn write_session<W: Write>(writer: &mut W, session: &Session) -> Result<()> {
    serde_json::to_writer(&mut *writer, &session.header)
        .map_err(|e| AsqmError::Parse { line: 1, message: e.to_string() })?;
    writer.write_all(b"\n")?;
    for (i, event) in session.events.iter().enumerate() {
        serde_json::to_writer(&mut *writer, event)
            .map_err(|e| AsqmError::Parse { line: i + 2, message: e.to_string() })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn segment_of(position: f64, media_len: f64) -> Segment {
    let third = media_len / 3.0;
    if position < third {
        Segment::A
    } else if position < 2.0 * third {
        Segment::B
    } else {
        Segment::C
    }
}

/// Reduces a validated event list to per-segment stall statistics.
pub fn summarize(events: &[BufferEvent], media_len: f64) -> Result<StallSummary> {
    validate_events(events)?;
    if !(media_len > 0.0) {
        return Err(AsqmError::InvalidInput(format!(
            "media length must be positive, got {media_len}"
        )));
    }
    let initial_delay = match events[0].kind {
        BufferEventKind::InitialBuffering => events[0].wall_end - events[0].wall_start,
        _ => unreachable!("validate_events checked the first event"),
    };
    let mut durations: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for event in events.iter().filter(|e| e.kind == BufferEventKind::Rebuffering) {
        let pos = event.media_position_at_start;
        if pos > media_len {
            return Err(AsqmError::InvalidInput(format!(
                "stall at media position {pos} beyond media length {media_len}"
            )));
        }
        durations[segment_of(pos, media_len).index()].push(event.wall_end - event.wall_start);
    }
    let seg_len = media_len / 3.0;
    let segments = durations.map(|d| SegmentStalls {
        stalls: d.len() as u32,
        mean_len: if d.is_empty() { 0.0 } else { d.iter().sum::<f64>() / d.len() as f64 },
        seg_len,
    });
    Ok(StallSummary { segments, initial_delay, media_len })
}

/// Impairment level for the initial buffering delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayLevel {
    Low,
    Medium,
    High,
}

impl DelayLevel {
    /// Inclusive delay range in seconds.
    pub fn range(self) -> (f64, f64) {
        match self {
            DelayLevel::Low => (1.0, 3.0),
            DelayLevel::Medium => (4.0, 6.0),
            DelayLevel::High => (7.0, 9.0),
        }
    }
}

/// Impairment level for the number of stalls in a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountLevel {
    Low,
    Medium,
    High,
}

impl CountLevel {
    /// Inclusive stall-count range.
    pub fn range(self) -> (u32, u32) {
        match self {
            CountLevel::Low => (1, 4),
            CountLevel::Medium => (5, 8),
            CountLevel::High => (9, 12),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CountLevel::Low => "Ns-L",
            CountLevel::Medium => "Ns-M",
            CountLevel::High => "Ns-H",
        }
    }
}

/// Impairment level for individual stall lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthLevel {
    Low,
    Medium,
    High,
}

impl LengthLevel {
    /// Inclusive stall-length range in seconds.
    pub fn range(self) -> (f64, f64) {
        match self {
            LengthLevel::Low => (1.0, 2.0),
            LengthLevel::Medium => (3.0, 5.0),
            LengthLevel::High => (6.0, 7.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LengthLevel::Low => "Sl-L",
            LengthLevel::Medium => "Sl-M",
            LengthLevel::High => "Sl-H",
        }
    }
}

/// One row of the impairment-model table: per-segment level pair or none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub id: u8,
    pub segments: [Option<(CountLevel, LengthLevel)>; 3],
}

impl ModelSpec {
    pub fn name(&self) -> String {
        format!("M{}", self.id)
    }
}

use CountLevel::{High as NH, Low as NL, Medium as NM};
use LengthLevel::{High as LH, Low as LL, Medium as LM};

/// The 53 impairment models.
pub const MODEL_TABLE: [ModelSpec; 53] = {
    const fn m(
        id: u8,
        a: Option<(CountLevel, LengthLevel)>,
        b: Option<(CountLevel, LengthLevel)>,
        c: Option<(CountLevel, LengthLevel)>,
    ) -> ModelSpec {
        ModelSpec { id, segments: [a, b, c] }
    }
    [
        m(1, Some((NL, LL)), None, None),
        m(2, None, Some((NL, LL)), None),
        m(3, None, None, Some((NL, LL))),
        m(4, Some((NL, LM)), None, None),
        m(5, None, Some((NL, LM)), None),
        m(6, None, None, Some((NL, LM))),
        m(7, Some((NL, LH)), None, None),
        m(8, None, Some((NL, LH)), None),
        m(9, None, None, Some((NL, LH))),
        m(10, Some((NM, LL)), None, None),
        m(11, None, Some((NM, LL)), None),
        m(12, None, None, Some((NM, LL))),
        m(13, Some((NM, LM)), None, None),
        m(14, None, Some((NM, LM)), None),
        m(15, None, None, Some((NM, LM))),
        m(16, Some((NM, LH)), None, None),
        m(17, None, Some((NM, LH)), None),
        m(18, None, None, Some((NM, LH))),
        m(19, Some((NH, LL)), None, None),
        m(20, None, Some((NH, LL)), None),
        m(21, None, None, Some((NH, LL))),
        m(22, Some((NH, LM)), None, None),
        m(23, None, Some((NH, LM)), None),
        m(24, None, None, Some((NH, LM))),
        m(25, Some((NH, LH)), None, None),
        m(26, None, Some((NH, LH)), None),
        m(27, None, None, Some((NH, LH))),
        m(28, Some((NL, LL)), None, None),
        m(29, None, Some((NL, LL)), None),
        m(30, None, None, Some((NL, LL))),
        m(31, Some((NM, LM)), None, None),
        m(32, None, Some((NM, LM)), None),
        m(33, None, None, Some((NM, LM))),
        m(34, Some((NH, LH)), None, None),
        m(35, None, Some((NH, LH)), None),
        m(36, None, None, Some((NH, LH))),
        m(37, Some((NL, LL)), Some((NM, LM)), Some((NH, LH))),
        m(38, Some((NH, LH)), Some((NM, LM)), Some((NL, LL))),
        m(39, Some((NM, LM)), Some((NL, LL)), None),
        m(40, Some((NM, LM)), Some((NH, LH)), None),
        m(41, None, Some((NM, LM)), Some((NL, LL))),
        m(42, None, Some((NM, LM)), Some((NH, LH))),
        m(43, Some((NL, LL)), Some((NL, LL)), Some((NL, LL))),
        m(44, Some((NM, LM)), Some((NM, LM)), Some((NM, LM))),
        m(45, Some((NH, LH)), Some((NH, LH)), Some((NH, LH))),
        m(46, Some((NH, LL)), Some((NH, LL)), Some((NH, LL))),
        m(47, Some((NL, LH)), Some((NL, LH)), Some((NL, LH))),
        m(48, Some((NL, LM)), Some((NL, LH)), None),
        m(49, None, Some((NL, LM)), Some((NL, LH))),
        m(50, None, Some((NH, LM)), Some((NH, LM))),
        m(51, Some((NH, LM)), Some((NH, LM)), None),
        m(52, Some((NH, LL)), Some((NH, LL)), None),
        m(53, None, Some((NH, LL)), Some((NH, LL))),
    ]
};

pub fn model_by_name(name: &str) -> Option<&'static ModelSpec> {
    let id: u8 = name.trim().trim_start_matches(['M', 'm']).parse().ok()?;
    MODEL_TABLE.iter().find(|m| m.id == id)
}

/// Tab-separated rendering of the model table, one model per line.
pub fn serialize_model_table() -> String {
    let mut out = String::new();
    for model in &MODEL_TABLE {
        out.push_str(&model.name());
        for seg in &model.segments {
            match seg {
                Some((count, len)) => {
                    out.push('\t');
                    out.push_str(count.label());
                    out.push('\t');
                    out.push_str(len.label());
                }
                None => out.push_str("\t-\t-"),
            }
        }
        out.push('\n');
    }
    out
}

/// One stall realized at a media position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedStall {
    pub media_position: f64,
    pub length: f64,
}

/// A concrete sampled instance of an impairment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentScenario {
    pub model_id: String,
    pub media_len: f64,
    pub initial_delay_level: Option<DelayLevel>,
    pub initial_delay: f64,
    /// Stalls per segment, sorted by media position within each segment.
    pub stalls: [Vec<RealizedStall>; 3],
}

impl ImpairmentScenario {
    /// Per-segment summary with the same aggregation the log summarizer
    /// uses, so the roundtrip through a synthesized session is exact.
    pub fn summary(&self) -> StallSummary {
        let seg_len = self.media_len / 3.0;
        let segments = [0, 1, 2].map(|i| {
            let stalls = &self.stalls[i];
            SegmentStalls {
                stalls: stalls.len() as u32,
                mean_len: if stalls.is_empty() {
                    0.0
                } else {
                    stalls.iter().map(|s| s.length).sum::<f64>() / stalls.len() as f64
                },
                seg_len,
            }
        });
        StallSummary {
            segments,
            initial_delay: self.initial_delay,
            media_len: self.media_len,
        }
    }
}

const GRANULARITY: f64 = 0.1;
const PLACEMENT_RETRIES: usize = 1000;

fn sample_grid(v: u64) -> f64 {
    v as f64 * GRANULARITY
}

/// Samples `count` distinct stall positions on the 0.1 s grid within the
/// half-open segment [lo, hi). Position 0 is excluded so a stall never
/// precedes the first playing interval.
fn place_stalls(
    rng: &mut ChaCha8Rng,
    lo: f64,
    hi: f64,
    count: u32,
) -> Result<Vec<f64>> {
    // Smallest grid slot at or after lo, excluding position 0; slots end
    // strictly before hi.
    let first_slot = ((lo / GRANULARITY - 1e-9).ceil() as u64).max(1);
    let end_slot = (hi / GRANULARITY - 1e-9).ceil() as u64;
    let slots = end_slot.saturating_sub(first_slot);
    if slots < u64::from(count) {
        return Err(AsqmError::Placement(format!(
            "segment [{lo}, {hi}) has {slots} grid positions for {count} stalls"
        )));
    }
    for _ in 0..PLACEMENT_RETRIES {
        let mut picks: Vec<u64> = (0..count)
            .map(|_| first_slot + rng.gen_range(0..slots))
            .collect();
        picks.sort_unstable();
        picks.dedup();
        if picks.len() == count as usize {
            return Ok(picks.into_iter().map(sample_grid).collect());
        }
    }
    Err(AsqmError::Placement(format!(
        "could not place {count} distinct stalls in [{lo}, {hi}) after {PLACEMENT_RETRIES} tries"
    )))
}

fn sample_length(rng: &mut ChaCha8Rng, level: LengthLevel) -> f64 {
    let (lo, hi) = level.range();
    let slots = ((hi - lo) / GRANULARITY).round() as u64;
    sample_grid((lo / GRANULARITY).round() as u64 + rng.gen_range(0..=slots))
}

/// Samples concrete scenarios for the selected models. Deterministic per
/// seed; the optional delay level applies to every scenario.
pub fn generate_scenarios(
    seed: u64,
    media_len: f64,
    models: &[&ModelSpec],
    delay_level: Option<DelayLevel>,
) -> Result<Vec<ImpairmentScenario>> {
    if models.is_empty() {
        return Err(AsqmError::InvalidInput("no impairment models selected".to_string()));
    }
    if !(media_len > 0.0) {
        return Err(AsqmError::InvalidInput(format!(
            "media length must be positive, got {media_len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let third = media_len / 3.0;
    let mut scenarios = Vec::with_capacity(models.len());
    for model in models {
        let initial_delay = match delay_level {
            Some(level) => {
                let (lo, hi) = level.range();
                let slots = ((hi - lo) / GRANULARITY).round() as u64;
                sample_grid((lo / GRANULARITY).round() as u64 + rng.gen_range(0..=slots))
            }
            None => 0.0,
        };
        let mut stalls: [Vec<RealizedStall>; 3] = Default::default();
        for (i, seg) in model.segments.iter().enumerate() {
            if let Some((count_level, length_level)) = seg {
                let (c_lo, c_hi) = count_level.range();
                let count = rng.gen_range(c_lo..=c_hi);
                let lo = i as f64 * third;
                let hi = (i + 1) as f64 * third;
                let positions = place_stalls(&mut rng, lo, hi, count)?;
                stalls[i] = positions
                    .into_iter()
                    .map(|media_position| RealizedStall {
                        media_position,
                        length: sample_length(&mut rng, *length_level),
                    })
                    .collect();
            }
        }
        scenarios.push(ImpairmentScenario {
            model_id: model.name(),
            media_len,
            initial_delay_level: delay_level,
            initial_delay,
            stalls,
        });
    }
    Ok(scenarios)
}

/// Synthesizes a buffer event log that realizes the scenario exactly.
pub fn scenario_to_session(scenario: &ImpairmentScenario) -> Vec<BufferEvent> {
    let mut events = Vec::new();
    events.push(BufferEvent {
        kind: BufferEventKind::InitialBuffering,
        wall_start: 0.0,
        wall_end: scenario.initial_delay,
        media_position_at_start: 0.0,
    });
    let mut wall = scenario.initial_delay;
    let mut media = 0.0;
    let mut all: Vec<RealizedStall> =
        scenario.stalls.iter().flatten().copied().collect();
    all.sort_by(|a, b| a.media_position.total_cmp(&b.media_position));
    for stall in all {
        let play_end = wall + (stall.media_position - media);
        events.push(BufferEvent {
            kind: BufferEventKind::Playing,
            wall_start: wall,
            wall_end: play_end,
            media_position_at_start: media,
        });
        events.push(BufferEvent {
            kind: BufferEventKind::Rebuffering,
            wall_start: play_end,
            wall_end: play_end + stall.length,
            media_position_at_start: stall.media_position,
        });
        wall = play_end + stall.length;
        media = stall.media_position;
    }
    events.push(BufferEvent {
        kind: BufferEventKind::Playing,
        wall_start: wall,
        wall_end: wall + (scenario.media_len - media),
        media_position_at_start: media,
    });
    events
}

/// Converts a simulated playout timeline into the buffer event log.
pub fn events_from_playout(trace: &PlayoutTrace) -> Vec<BufferEvent> {
    let mut events = Vec::new();
    events.push(BufferEvent {
        kind: BufferEventKind::InitialBuffering,
        wall_start: 0.0,
        wall_end: trace.initial_delay,
        media_position_at_start: 0.0,
    });
    let mut wall = trace.initial_delay;
    let mut media = 0.0;
    for stall in &trace.stalls {
        events.push(BufferEvent {
            kind: BufferEventKind::Playing,
            wall_start: wall,
            wall_end: stall.wall_start,
            media_position_at_start: media,
        });
        events.push(BufferEvent {
            kind: BufferEventKind::Rebuffering,
            wall_start: stall.wall_start,
            wall_end: stall.wall_start + stall.duration,
            media_position_at_start: stall.media_position,
        });
        wall = stall.wall_start + stall.duration;
        media = stall.media_position;
    }
    events.push(BufferEvent {
        kind: BufferEventKind::Playing,
        wall_start: wall,
        wall_end: trace.end_wall,
        media_position_at_start: media,
    });
    events
}

/// Turns a scenario into one observation row of the fit dataset, with a
/// synthetic MOS generated from the given weights.
pub fn scenario_to_dataset_row(
    scenario: &ImpairmentScenario,
    q_a: f64,
    weights: &SegmentWeights,
) -> DatasetRow {
    let summary = scenario.summary();
    let exponent: f64 = Segment::ALL
        .iter()
        .map(|&seg| {
            let s = summary.segment(seg);
            f64::from(s.stalls) * s.mean_len * weights.weight(seg) / s.seg_len
        })
        .sum();
    let mos = (weights.ln_c + exponent).exp();
    let [a, b, c] = summary.segments;
    DatasetRow {
        model_id: scenario.model_id.clone(),
        s_a: f64::from(a.stalls),
        l_a: a.mean_len,
        t_a: a.seg_len,
        s_b: f64::from(b.stalls),
        l_b: b.mean_len,
        t_b: b.seg_len,
        s_c: f64::from(c.stalls),
        l_c: c.mean_len,
        t_c: c.seg_len,
        q_a,
        mos,
    }
}
