//! Two-state Markov packet-loss process and a deterministic fluid
//! buffer/playout model that turns loss traces and bandwidth throttles
//! into initial-delay and stall events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{AsqmError, Result};

/// Initial state of the loss chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartState {
    /// Start in the good (delivering) state.
    #[default]
    Good,
    /// Draw the initial state from the stationary distribution.
    Stationary,
}

/// Gilbert-Elliott channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeChannel {
    /// Good-to-bad transition probability.
    pub p: f64,
    /// Bad-to-good transition probability.
    pub r: f64,
    pub seed: u64,
    #[serde(default)]
    pub start: StartState,
}

impl GeChannel {
    pub fn new(p: f64, r: f64, seed: u64) -> Result<Self> {
        for (name, v) in [("p", p), ("r", r)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(AsqmError::InvalidInput(format!(
                    "transition probability {name} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { p, r, seed, start: StartState::Good })
    }
}

/// Stationary packet loss rate p / (p + r).
pub fn ge_plr(p: f64, r: f64) -> Result<f64> {
    if p + r <= 0.0 {
        return Err(AsqmError::InvalidInput(
            "stationary loss rate undefined for p + r = 0".to_string(),
        ));
    }
    Ok(p / (p + r))
}

/// Aggregate statistics of a loss trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub packets: usize,
    pub losses: usize,
    pub empirical_plr: f64,
    /// Burst length -> number of loss bursts of that length.
    pub burst_histogram: BTreeMap<usize, usize>,
}

impl LossStats {
    pub fn from_trace(trace: &[bool]) -> Self {
        let mut burst_histogram = BTreeMap::new();
        let mut losses = 0usize;
        let mut run = 0usize;
        for &lost in trace {
            if lost {
                losses += 1;
                run += 1;
            } else if run > 0 {
                *burst_histogram.entry(run).or_insert(0) += 1;
                run = 0;
            }
        }
        if run > 0 {
            *burst_histogram.entry(run).or_insert(0) += 1;
        }
        LossStats {
            packets: trace.len(),
            losses,
            empirical_plr: if trace.is_empty() { 0.0 } else { losses as f64 / trace.len() as f64 },
            burst_histogram,
        }
    }

    /// Mean length of consecutive-loss runs, 0 when there are none.
    pub fn mean_burst_len(&self) -> f64 {
        let bursts: usize = self.burst_histogram.values().sum();
        if bursts == 0 {
            return 0.0;
        }
        let total: usize = self.burst_histogram.iter().map(|(len, n)| len * n).sum();
        total as f64 / bursts as f64
    }
}

/// Generates a loss trace of `n` packets; `true` marks a lost packet.
pub fn ge_trace(channel: &GeChannel, n: usize) -> Result<Vec<bool>> {
    if n == 0 {
        return Err(AsqmError::InvalidInput("trace needs at least one packet".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(channel.seed);
    let mut bad = match channel.start {
        StartState::Good => false,
        StartState::Stationary => {
            let plr = ge_plr(channel.p, channel.r).unwrap_or(0.0);
            rng.gen::<f64>() < plr
        }
    };
    let mut trace = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        bad = if bad { u >= channel.r } else { u < channel.p };
        trace.push(bad);
    }
    Ok(trace)
}

/// Renders a trace as one character per packet: '.' delivered, 'x' lost.
pub fn trace_to_string(trace: &[bool]) -> String {
    trace.iter().map(|&lost| if lost { 'x' } else { '.' }).collect()
}

/// Stream and player constants for the fluid playout model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub media_bitrate_kbps: f64,
    pub media_len_secs: f64,
    /// Download bandwidth as a percentage of the media bitrate.
    pub bandwidth_pct: f64,
    pub packet_size_bytes: f64,
    /// Seconds of stalled download added per lost packet.
    pub loss_penalty_secs: f64,
    /// Seconds of media buffered before playback starts.
    pub startup_threshold_secs: f64,
    /// Seconds of media re-buffered before playback resumes after a stall.
    pub rebuffer_threshold_secs: f64,
    /// Wall-clock cap on startup; exceeding it is a timeout error.
    pub startup_cap_secs: f64,
}

impl StreamConfig {
    pub fn new(media_bitrate_kbps: f64, media_len_secs: f64, bandwidth_pct: f64) -> Self {
        Self {
            media_bitrate_kbps,
            media_len_secs,
            bandwidth_pct,
            packet_size_bytes: 1316.0,
            loss_penalty_secs: 0.2,
            startup_threshold_secs: 2.0,
            rebuffer_threshold_secs: 2.0,
            startup_cap_secs: 3600.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("media_bitrate_kbps", self.media_bitrate_kbps),
            ("media_len_secs", self.media_len_secs),
            ("bandwidth_pct", self.bandwidth_pct),
            ("packet_size_bytes", self.packet_size_bytes),
            ("startup_threshold_secs", self.startup_threshold_secs),
            ("rebuffer_threshold_secs", self.rebuffer_threshold_secs),
            ("startup_cap_secs", self.startup_cap_secs),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AsqmError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.loss_penalty_secs >= 0.0) {
            return Err(AsqmError::InvalidInput(format!(
                "loss_penalty_secs must be non-negative, got {}",
                self.loss_penalty_secs
            )));
        }
        Ok(())
    }

    /// Number of packets the media occupies.
    pub fn packet_count(&self) -> usize {
        let bits = self.media_len_secs * self.media_bitrate_kbps * 1000.0;
        ((bits / 8.0 / self.packet_size_bytes).ceil() as usize).max(1)
    }
}

/// A single playback interruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallEvent {
    /// Media position at which playback halted, in seconds.
    pub media_position: f64,
    /// Wall-clock time at which the stall began, in seconds.
    pub wall_start: f64,
    pub duration: f64,
}

/// Reconstructed playback timeline of one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayoutTrace {
    pub initial_delay: f64,
    pub stalls: Vec<StallEvent>,
    pub loss_stats: LossStats,
    /// Wall-clock time at which playback of the full media finished.
    pub end_wall: f64,
    pub media_len: f64,
}

impl PlayoutTrace {
    pub fn total_stall_time(&self) -> f64 {
        self.stalls.iter().map(|s| s.duration).sum()
    }
}

/// Runs the fluid buffer model: download at the throttled bandwidth with
/// a fixed penalty per lost packet, start playback once the startup
/// threshold is buffered, stall whenever the buffer empties.
pub fn simulate_playout(cfg: &StreamConfig, channel: &GeChannel) -> Result<PlayoutTrace> {
    cfg.validate()?;
    let n = cfg.packet_count();
    let trace = ge_trace(channel, n)?;
    let loss_stats = LossStats::from_trace(&trace);

    let media_per_packet = cfg.media_len_secs / n as f64;
    // Wall seconds to download one packet at the throttled rate.
    let base_time = media_per_packet * 100.0 / cfg.bandwidth_pct;
    let mut done_at = Vec::with_capacity(n);
    let mut wall = 0.0;
    for &lost in &trace {
        wall += base_time;
        if lost {
            wall += cfg.loss_penalty_secs;
        }
        done_at.push(wall);
    }
    let media_at = |i: usize| (i + 1) as f64 * media_per_packet;

    let startup_media = cfg.startup_threshold_secs.min(cfg.media_len_secs);
    let startup_idx = (0..n)
        .find(|&i| media_at(i) >= startup_media - 1e-12)
        .unwrap_or(n - 1);
    let initial_delay = done_at[startup_idx];
    if initial_delay > cfg.startup_cap_secs {
        return Err(AsqmError::StartupTimeout { cap_secs: cfg.startup_cap_secs });
    }

    let mut stalls = Vec::new();
    let mut resume_media = 0.0;
    let mut resume_wall = initial_delay;
    for j in startup_idx..n - 1 {
        // Wall time at which playback consumes the last byte of packet j.
        let reach = resume_wall + (media_at(j) - resume_media);
        if done_at[j + 1] > reach + 1e-12 {
            let target = (media_at(j) + cfg.rebuffer_threshold_secs).min(cfg.media_len_secs);
            let k = (j + 1..n).find(|&k| media_at(k) >= target - 1e-12).unwrap_or(n - 1);
            let resumed = done_at[k].max(reach);
            stalls.push(StallEvent {
                media_position: media_at(j),
                wall_start: reach,
                duration: resumed - reach,
            });
            resume_media = media_at(j);
            resume_wall = resumed;
        }
    }
    let end_wall = resume_wall + (cfg.media_len_secs - resume_media);

    Ok(PlayoutTrace {
        initial_delay,
        stalls,
        loss_stats,
        end_wall,
        media_len: cfg.media_len_secs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plr_matches_published_parameter_pairs() {
        assert_abs_diff_eq!(ge_plr(0.0010101, 0.10).unwrap(), 0.01, epsilon = 1e-6);
        assert_abs_diff_eq!(ge_plr(0.0075758, 0.75).unwrap(), 0.01, epsilon = 1e-6);
        assert_eq!(ge_plr(0.0, 0.5).unwrap(), 0.0);
        assert!(ge_plr(0.0, 0.0).is_err());
    }

    #[test]
    fn lossless_channel_delivers_everything() {
        let ch = GeChannel::new(0.0, 0.5, 7).unwrap();
        let trace = ge_trace(&ch, 1000).unwrap();
        assert!(trace.iter().all(|&lost| !lost));
    }

    #[test]
    fn absorbing_bad_state_loses_everything() {
        let ch = GeChannel::new(1.0, 0.0, 7).unwrap();
        let trace = ge_trace(&ch, 100).unwrap();
        assert!(trace.iter().all(|&lost| lost));
    }

    #[test]
    fn traces_are_seed_deterministic() {
        let ch = GeChannel::new(0.01, 0.2, 42).unwrap();
        assert_eq!(ge_trace(&ch, 5000).unwrap(), ge_trace(&ch, 5000).unwrap());
        let other = GeChannel::new(0.01, 0.2, 43).unwrap();
        assert_ne!(ge_trace(&ch, 5000).unwrap(), ge_trace(&other, 5000).unwrap());
    }

    #[test]
    fn empirical_plr_approaches_stationary_rate() {
        let ch = GeChannel::new(0.0010101, 0.10, 11).unwrap();
        let trace = ge_trace(&ch, 1_000_000).unwrap();
        let stats = LossStats::from_trace(&trace);
        assert!((0.009..=0.011).contains(&stats.empirical_plr), "plr {}", stats.empirical_plr);
    }

    #[test]
    fn burst_stats_and_rendering() {
        let trace = vec![false, true, true, false, true, false, true, true, true];
        let stats = LossStats::from_trace(&trace);
        assert_eq!(stats.losses, 6);
        assert_eq!(stats.burst_histogram[&1], 1);
        assert_eq!(stats.burst_histogram[&2], 1);
        assert_eq!(stats.burst_histogram[&3], 1);
        assert_abs_diff_eq!(stats.mean_burst_len(), 2.0);
        assert_eq!(trace_to_string(&trace), ".xx.x.xxx");
    }

    #[test]
    fn rejects_invalid_probabilities_and_empty_traces() {
        assert!(GeChannel::new(1.5, 0.0, 0).is_err());
        assert!(GeChannel::new(0.5, -0.1, 0).is_err());
        let ch = GeChannel::new(0.1, 0.1, 0).unwrap();
        assert!(ge_trace(&ch, 0).is_err());
    }

    fn lossless(cfg: &StreamConfig) -> PlayoutTrace {
        let ch = GeChannel::new(0.0, 1.0, 1).unwrap();
        simulate_playout(cfg, &ch).unwrap()
    }

    #[test]
    fn double_bandwidth_halves_startup_delay() {
        let cfg = StreamConfig::new(128.0, 60.0, 200.0);
        let trace = lossless(&cfg);
        // 2 s of media at twice real time.
        assert_abs_diff_eq!(trace.initial_delay, 1.0, epsilon = 0.05);
        assert!(trace.stalls.is_empty());
    }

    #[test]
    fn matched_bandwidth_never_stalls() {
        let cfg = StreamConfig::new(128.0, 60.0, 100.0);
        let trace = lossless(&cfg);
        assert!(trace.stalls.is_empty());
        // Startup rounds up to a packet boundary.
        assert_abs_diff_eq!(trace.initial_delay, 2.0, epsilon = 0.1);
    }

    #[test]
    fn half_bandwidth_doubles_wall_time() {
        let cfg = StreamConfig::new(128.0, 60.0, 50.0);
        let trace = lossless(&cfg);
        assert!(!trace.stalls.is_empty());
        assert_abs_diff_eq!(trace.end_wall, 2.0 * 60.0, epsilon = 2.5);
        // Stalls are sorted and non-overlapping in media position.
        for pair in trace.stalls.windows(2) {
            assert!(pair[0].media_position < pair[1].media_position);
            assert!(pair[0].wall_start + pair[0].duration <= pair[1].wall_start + 1e-9);
        }
    }

    #[test]
    fn lower_bandwidth_never_reduces_stall_time() {
        let mut previous = -1.0;
        for pct in [200.0, 100.0, 90.0, 80.0, 70.0, 50.0] {
            let cfg = StreamConfig::new(128.0, 60.0, pct);
            let total = lossless(&cfg).total_stall_time();
            assert!(
                total >= previous - 1e-9,
                "stall time dropped from {previous} to {total} at {pct}%"
            );
            previous = total;
        }
    }

    #[test]
    fn startup_cap_yields_timeout() {
        let cfg = StreamConfig {
            startup_cap_secs: 0.5,
            ..StreamConfig::new(128.0, 60.0, 50.0)
        };
        let ch = GeChannel::new(0.0, 1.0, 1).unwrap();
        assert!(matches!(
            simulate_playout(&cfg, &ch),
            Err(AsqmError::StartupTimeout { .. })
        ));
    }

    #[test]
    fn playout_is_deterministic_per_seed() {
        let cfg = StreamConfig::new(128.0, 60.0, 90.0);
        let ch = GeChannel::new(0.005, 0.3, 99).unwrap();
        let a = simulate_playout(&cfg, &ch).unwrap();
        let b = simulate_playout(&cfg, &ch).unwrap();
        assert_eq!(a, b);
    }
}
