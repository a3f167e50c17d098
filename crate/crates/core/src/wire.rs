//! Sampled-value stream replay over a datagram socket.
//!
//! A publisher paces labelled frames onto UDP at the native 208 µs period
//! (or faster); a subscriber decodes, classifies through the streaming
//! pipeline, and measures true end-to-end latency as decision wall time
//! minus the frame's send timestamp. Both sides stamp time from
//! `CLOCK_MONOTONIC`, which is shared across processes on one host, so
//! latencies are non-negative without clock discipline.
//!
//! Wire layout, little-endian, 69 bytes:
//! `seq u32 | send_ts_us u64 | 14 x channel f32 | label i8`.

use std::collections::VecDeque;
use std::net::UdpSocket;
use std::path::Path;
use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabelledDataset, NUM_CHANNELS};
use crate::error::{Error, Result};
use crate::preprocess::Scaler;
use crate::streaming::{
    Decision, DecisionTrace, ProbabilityFrame, ProbabilitySource, RawPrediction, Smoother,
    SmootherConfig,
};

/// Encoded frame length in bytes.
pub const FRAME_LEN: usize = 4 + 8 + NUM_CHANNELS * 4 + 1;

/// Microseconds on the host-wide monotonic clock.
pub fn monotonic_micros() -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // CLOCK_MONOTONIC shares its origin across processes on one host
    unsafe {
        libc::clock_gettime(libc::CLOCK_MONOTONIC, &mut ts);
    }
    ts.tv_sec as u64 * 1_000_000 + ts.tv_nsec as u64 / 1_000
}

/// One sampled-value frame on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct SvFrame {
    pub seq: u32,
    pub send_ts_us: u64,
    pub channels: [f32; NUM_CHANNELS],
    pub label: i8,
}

pub fn encode_frame(frame: &SvFrame) -> [u8; FRAME_LEN] {
    let mut buf = [0u8; FRAME_LEN];
    buf[0..4].copy_from_slice(&frame.seq.to_le_bytes());
    buf[4..12].copy_from_slice(&frame.send_ts_us.to_le_bytes());
    for (i, v) in frame.channels.iter().enumerate() {
        let o = 12 + 4 * i;
        buf[o..o + 4].copy_from_slice(&v.to_le_bytes());
    }
    buf[FRAME_LEN - 1] = frame.label as u8;
    buf
}

pub fn decode_frame(bytes: &[u8]) -> Result<SvFrame> {
    if bytes.len() != FRAME_LEN {
        return Err(Error::Wire(format!(
            "frame must be exactly {} bytes, got {}",
            FRAME_LEN,
            bytes.len()
        )));
    }
    let seq = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let send_ts_us = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let mut channels = [0f32; NUM_CHANNELS];
    for (i, v) in channels.iter_mut().enumerate() {
        let o = 12 + 4 * i;
        *v = f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    }
    let label = bytes[FRAME_LEN - 1] as i8;
    if !(-1..=17).contains(&label) {
        return Err(Error::Wire(format!("reserved label value {}", label)));
    }
    Ok(SvFrame { seq, send_ts_us, channels, label })
}

/// How fast the publisher paces frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacingMode {
    /// One frame per native sample period (208.33 µs at 4.8 kHz).
    Realtime,
    /// Native period divided by this factor.
    Multiplier(f64),
    /// No pacing; send as fast as the socket accepts.
    MaxRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacingConfig {
    pub mode: PacingMode,
}

impl PacingConfig {
    pub fn realtime() -> PacingConfig {
        PacingConfig { mode: PacingMode::Realtime }
    }

    /// Target inter-send period in microseconds; zero means unpaced.
    pub fn target_period_us(&self, sample_rate: f64) -> Result<f64> {
        match self.mode {
            PacingMode::Realtime => Ok(1e6 / sample_rate),
            PacingMode::Multiplier(m) => {
                if m <= 0.0 {
                    return Err(Error::Config("pacing multiplier must be positive".to_string()));
                }
                Ok(1e6 / sample_rate / m)
            }
            PacingMode::MaxRate => Ok(0.0),
        }
    }
}

/// Publisher-side statistics of one replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SendStats {
    pub frames_sent: u64,
    pub wall_s: f64,
    pub target_period_us: f64,
    pub mean_period_us: f64,
    pub stddev_period_us: f64,
    pub min_period_us: f64,
    pub max_period_us: f64,
    /// Mean period overran the target by more than 5%.
    pub unsustainable: bool,
}

/// Sends every frame of the dataset to `endpoint` in order with
/// monotonically increasing sequence numbers, pacing against absolute
/// deadlines so the long-run mean period stays on target.
pub fn publish(dataset: &LabelledDataset, endpoint: &str, pacing: &PacingConfig) -> Result<SendStats> {
    if dataset.is_empty() {
        return Err(Error::Data("nothing to publish".to_string()));
    }
    let socket = UdpSocket::bind("127.0.0.1:0")?;
    socket.connect(endpoint)?;
    let period_us = pacing.target_period_us(dataset.sample_rate)?;

    let start = monotonic_micros();
    let mut send_times = Vec::with_capacity(dataset.len());
    for (n, frame) in dataset.frames.iter().enumerate() {
        if period_us > 0.0 {
            let deadline = start + (n as f64 * period_us) as u64;
            loop {
                let now = monotonic_micros();
                if now >= deadline {
                    break;
                }
                let remain = deadline - now;
                if remain > 300 {
                    std::thread::sleep(Duration::from_micros(remain - 200));
                } else {
                    std::hint::spin_loop();
                }
            }
        }
        let now = monotonic_micros();
        let sv = SvFrame {
            seq: n as u32,
            send_ts_us: now,
            channels: frame.channels,
            label: frame.label,
        };
        socket.send(&encode_frame(&sv))?;
        send_times.push(now);
    }
    let wall_s = (monotonic_micros() - start) as f64 / 1e6;

    let deltas: Vec<f64> =
        send_times.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let (mean, std, min, max) = if deltas.is_empty() {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / deltas.len() as f64;
        let min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
        let max = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (mean, var.sqrt(), min, max)
    };
    Ok(SendStats {
        frames_sent: dataset.len() as u64,
        wall_s,
        target_period_us: period_us,
        mean_period_us: mean,
        stddev_period_us: std,
        min_period_us: min,
        max_period_us: max,
        unsustainable: period_us > 0.0 && mean > period_us * 1.05,
    })
}

#[derive(Debug, Clone)]
pub struct SubscribeOptions {
    /// Stop after the frame with sequence `expected_frames - 1` arrives.
    pub expected_frames: Option<u64>,
    /// Stop when the socket stays silent this long.
    pub idle_timeout_ms: u64,
    /// Sample rate of the replayed stream, for trace timing.
    pub sample_rate: f64,
}

impl Default for SubscribeOptions {
    fn default() -> Self {
        SubscribeOptions { expected_frames: None, idle_timeout_ms: 1_000, sample_rate: 4800.0 }
    }
}

/// Subscriber-side statistics of one replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiveStats {
    pub frames_received: u64,
    /// Frames missing from the sequence (gaps).
    pub drops: u64,
    /// Frames that arrived late or duplicated and were discarded.
    pub reordered: u64,
    pub decode_failures: u64,
}

/// Everything the subscriber produced: the decision trace, end-to-end
/// latency per inferred frame, ground-truth labels by sequence number, and
/// transport statistics.
#[derive(Debug)]
pub struct SubscribeOutcome {
    pub trace: DecisionTrace,
    pub latencies_us: Vec<f64>,
    pub truth_labels: Vec<i8>,
    pub stats: ReceiveStats,
}

pub fn bind_subscriber(endpoint: &str) -> Result<UdpSocket> {
    Ok(UdpSocket::bind(endpoint)?)
}

/// Binds `endpoint` and classifies the incoming stream.
pub fn subscribe_classify<C: ProbabilitySource>(
    endpoint: &str,
    classifier: &C,
    scaler: &Scaler,
    smoother_cfg: &SmootherConfig,
    opts: &SubscribeOptions,
) -> Result<SubscribeOutcome> {
    let socket = bind_subscriber(endpoint)?;
    subscribe_classify_on(&socket, classifier, scaler, smoother_cfg, opts)
}

/// Classifies the stream arriving on an already-bound socket. Frames are
/// processed strictly in sequence order: late or duplicate datagrams are
/// dropped and counted, gaps are counted as drops.
pub fn subscribe_classify_on<C: ProbabilitySource>(
    socket: &UdpSocket,
    classifier: &C,
    scaler: &Scaler,
    smoother_cfg: &SmootherConfig,
    opts: &SubscribeOptions,
) -> Result<SubscribeOutcome> {
    smoother_cfg.validate()?;
    socket.set_read_timeout(Some(Duration::from_millis(opts.idle_timeout_ms.max(1))))?;
    let wl = classifier.window_len();
    let mut smoother = Smoother::new(smoother_cfg.clone())?;
    let mut ring: VecDeque<[f32; NUM_CHANNELS]> = VecDeque::with_capacity(wl + 1);
    let mut window = Array2::<f32>::zeros((wl, NUM_CHANNELS));

    let mut stats = ReceiveStats { frames_received: 0, drops: 0, reordered: 0, decode_failures: 0 };
    let mut truth_labels: Vec<i8> = Vec::new();
    let mut decisions: Vec<Decision> = Vec::new();
    let mut raw: Vec<RawPrediction> = Vec::new();
    let mut per_sample_us: Vec<f64> = Vec::new();
    let mut forward_us: Vec<f64> = Vec::new();
    let mut latencies_us: Vec<f64> = Vec::new();
    let mut next_seq: Option<u64> = None;

    let mut buf = [0u8; 256];
    loop {
        let n = match socket.recv(&mut buf) {
            Ok(n) => n,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let received_at = monotonic_micros();
        let frame = match decode_frame(&buf[..n]) {
            Ok(f) => f,
            Err(_) => {
                stats.decode_failures += 1;
                continue;
            }
        };
        let seq = frame.seq as u64;
        if let Some(expected) = next_seq {
            if seq < expected {
                stats.reordered += 1;
                continue;
            }
            if seq > expected {
                stats.drops += seq - expected;
            }
        }
        next_seq = Some(seq + 1);
        stats.frames_received += 1;

        while truth_labels.len() < seq as usize {
            truth_labels.push(0);
        }
        truth_labels.push(frame.label);

        ring.push_back(frame.channels);
        if ring.len() > wl {
            ring.pop_front();
        }
        if ring.len() == wl {
            for (t, channels) in ring.iter().enumerate() {
                for (c, &v) in channels.iter().enumerate() {
                    window[[t, c]] = scaler.transform_value(c, v);
                }
            }
            let forward_started = monotonic_micros();
            let probs = classifier.predict(seq, window.view())?;
            let fwd_us = (monotonic_micros() - forward_started) as f64;

            let (raw_class, raw_conf) = {
                let mut best = 0usize;
                let mut best_v = f32::NEG_INFINITY;
                for (k, &v) in probs.iter().enumerate() {
                    if v > best_v {
                        best_v = v;
                        best = k;
                    }
                }
                (best as i8, best_v as f64)
            };
            let decision = smoother.push_and_decide(ProbabilityFrame { index: seq, probs })?;
            let done = monotonic_micros();
            raw.push(RawPrediction { index: seq, class_id: raw_class, confidence: raw_conf });
            if let Some(d) = decision {
                decisions.push(d);
            }
            per_sample_us.push((done - received_at) as f64);
            forward_us.push(fwd_us);
            latencies_us.push((done - frame.send_ts_us) as f64);
        }

        if let Some(expected) = opts.expected_frames {
            if next_seq.unwrap_or(0) >= expected {
                break;
            }
        }
    }

    if stats.frames_received == 0 {
        return Err(Error::Wire("no frames received before timeout".to_string()));
    }
    Ok(SubscribeOutcome {
        trace: DecisionTrace {
            sample_rate: opts.sample_rate,
            look_ahead_samples: smoother_cfg.half_window,
            decisions,
            raw,
            per_sample_us,
            forward_us,
        },
        latencies_us,
        truth_labels,
        stats,
    })
}

/// Serializes send/receive statistics as JSON.
pub fn write_stats_json<T: Serialize, P: AsRef<Path>>(stats: &T, path: P) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(stats)?)?;
    Ok(())
}
