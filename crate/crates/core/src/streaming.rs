//! Real-time decision layer: per-sample inference, ring-buffered one-cycle
//! centered smoothing, and confidence-gated abstention.
//!
//! Posterior vectors enter a ring buffer of one cycle (80 samples). Once the
//! buffer is full, every new sample emits a decision for the window's center
//! a half cycle back: the element-wise mean of the buffered posteriors is
//! taken, the top class is emitted if its smoothed probability clears the
//! confidence threshold, otherwise the pipeline abstains (-1). The
//! half-cycle (40-sample, ~8.33 ms) look-ahead this introduces is recorded
//! in the trace and charged to classification time by the metrics layer.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};

use crate::dataset::{LabelledDataset, NUM_CHANNELS};
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::preprocess::Scaler;

/// Smoothing window and abstention threshold.
#[derive(Debug, Clone)]
pub struct SmootherConfig {
    /// Samples per fundamental cycle; the smoothing window length.
    pub samples_per_cycle: usize,
    /// Half window; decisions are attributed this many samples back.
    pub half_window: usize,
    /// Confidence threshold for emitting a class (inclusive). Values above 1
    /// force permanent abstention.
    pub tau: f64,
    pub num_classes: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            samples_per_cycle: 80,
            half_window: 40,
            tau: 0.60,
            num_classes: crate::dataset::NUM_CLASSES,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_cycle != 2 * self.half_window {
            return Err(Error::Config(format!(
                "samples_per_cycle {} must be twice the half window {}",
                self.samples_per_cycle, self.half_window
            )));
        }
        if self.samples_per_cycle == 0 {
            return Err(Error::Config("smoothing window must be non-empty".to_string()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config("tau must be positive".to_string()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("need at least one class".to_string()));
        }
        Ok(())
    }
}

/// Model posterior for one sample.
#[derive(Debug, Clone)]
pub struct ProbabilityFrame {
    pub index: u64,
    pub probs: Vec<f32>,
}

/// Smoothed class-or-abstain output for one center sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Sample index the decision is about (the smoothing window center).
    pub center_index: u64,
    /// Emitted class, or -1 for abstention.
    pub class_id: i8,
    /// Maximum of the smoothed distribution.
    pub confidence: f64,
    /// The full smoothed distribution.
    pub smoothed: Vec<f64>,
}

/// Unsmoothed per-sample argmax, kept for stability comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPrediction {
    pub index: u64,
    pub class_id: i8,
    pub confidence: f64,
}

/// Element-wise mean of the last full cycle of posteriors.
///
/// Accepts any slice holding at least one cycle and averages the most recent
/// `samples_per_cycle` frames, matching the ring-buffer behaviour.
pub fn smooth(buffer: &[ProbabilityFrame], cfg: &SmootherConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = cfg.samples_per_cycle;
    if buffer.len() < n {
        return Err(Error::Data(format!(
            "smoothing needs {} buffered frames, have {}",
            n,
            buffer.len()
        )));
    }
    let window = &buffer[buffer.len() - n..];
    let mut mean = vec![0f64; cfg.num_classes];
    for frame in window {
        if frame.probs.len() != cfg.num_classes {
            return Err(Error::Shape(format!(
                "probability frame has {} classes, expected {}",
                frame.probs.len(),
                cfg.num_classes
            )));
        }
        for (acc, &p) in mean.iter_mut().zip(&frame.probs) {
            *acc += p as f64;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    Ok(mean)
}

/// Argmax with confidence gating: the top class if its smoothed probability
/// is at least `tau` (inclusive), else -1. Ties break toward the lowest
/// class index.
pub fn decide(smoothed: &[f64], tau: f64) -> (i8, f64) {
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for (k, &v) in smoothed.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = k;
        }
    }
    if best_v >= tau {
        (best as i8, best_v)
    } else {
        (-1, best_v)
    }
}

/// The streaming pipeline state: one ring buffer per stream.
///
/// Not reentrant; use one `Smoother` per stream.
#[derive(Debug, Clone)]
pub struct Smoother {
    cfg: SmootherConfig,
    buffer: VecDeque<ProbabilityFrame>,
    last_index: Option<u64>,
}

impl Smoother {
    pub fn new(cfg: SmootherConfig) -> Result<Smoother> {
        cfg.validate()?;
        let capacity = cfg.samples_per_cycle;
        Ok(Smoother { cfg, buffer: VecDeque::with_capacity(capacity + 1), last_index: None })
    }

    pub fn config(&self) -> &SmootherConfig {
        &self.cfg
    }

    /// Buffers one posterior and, once a full cycle is buffered, emits the
    /// decision for center index `frame.index - half_window`.
    pub fn push_and_decide(&mut self, frame: ProbabilityFrame) -> Result<Option<Decision>> {
        if frame.probs.len() != self.cfg.num_classes {
            return Err(Error::Shape(format!(
                "probability frame has {} classes, expected {}",
                frame.probs.len(),
                self.cfg.num_classes
            )));
        }
        if let Some(last) = self.last_index {
            if frame.index <= last {
                return Err(Error::Data(format!(
                    "out-of-order probability frame: index {} after {}",
                    frame.index, last
                )));
            }
        }
        self.last_index = Some(frame.index);
        let newest = frame.index;
        self.buffer.push_back(frame);
        if self.buffer.len() > self.cfg.samples_per_cycle {
            self.buffer.pop_front();
        }
        if self.buffer.len() < self.cfg.samples_per_cycle {
            return Ok(None);
        }
        let (frames_a, frames_b) = self.buffer.as_slices();
        let mut mean = vec![0f64; self.cfg.num_classes];
        for frame in frames_a.iter().chain(frames_b) {
            for (acc, &p) in mean.iter_mut().zip(&frame.probs) {
                *acc += p as f64;
            }
        }
        for v in &mut mean {
            *v /= self.cfg.samples_per_cycle as f64;
        }
        let (class_id, confidence) = decide(&mean, self.cfg.tau);
        Ok(Some(Decision {
            center_index: newest - self.cfg.half_window as u64,
            class_id,
            confidence,
            smoothed: mean,
        }))
    }
}

/// Anything that can turn a scaled window into class probabilities.
pub trait ProbabilitySource {
    fn num_classes(&self) -> usize;
    fn window_len(&self) -> usize;
    /// Posterior for the window of samples ending at `index`.
    fn predict(&self, index: u64, window: ArrayView2<f32>) -> Result<Vec<f32>>;
}

impl ProbabilitySource for Network<f32> {
    fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn window_len(&self) -> usize {
        self.spec.input_len
    }

    fn predict(&self, _index: u64, window: ArrayView2<f32>) -> Result<Vec<f32>> {
        let batch = window.insert_axis(Axis(0));
        let probs = self.forward(batch)?;
        Ok(probs.row(0).to_vec())
    }
}

/// Emits the ground-truth label as a one-hot posterior (uniform for
/// out-of-zone samples). Used to exercise the pipeline with an ideal model.
pub struct OracleSource {
    pub labels: Vec<i8>,
    pub num_classes: usize,
    pub window_len: usize,
}

impl ProbabilitySource for OracleSource {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn window_len(&self) -> usize {
        self.window_len
    }

    fn predict(&self, index: u64, _window: ArrayView2<f32>) -> Result<Vec<f32>> {
        let label = self.labels[index as usize];
        let mut probs = vec![0f32; self.num_classes];
        if label >= 0 {
            probs[label as usize] = 1.0;
        } else {
            probs.fill(1.0 / self.num_classes as f32);
        }
        Ok(probs)
    }
}

/// The full decision record of one streaming run.
#[derive(Debug, Clone)]
pub struct DecisionTrace {
    pub sample_rate: f64,
    /// Samples between a decision's center and the moment it was emittable.
    pub look_ahead_samples: usize,
    pub decisions: Vec<Decision>,
    pub raw: Vec<RawPrediction>,
    /// Full decision-path compute time per processed sample, microseconds
    /// (window build + scale + forward + smooth + decide).
    pub per_sample_us: Vec<f64>,
    /// Forward-pass-only time per processed sample, microseconds.
    pub forward_us: Vec<f64>,
}

impl DecisionTrace {
    pub fn look_ahead_ms(&self) -> f64 {
        self.look_ahead_samples as f64 / self.sample_rate * 1e3
    }

    pub fn center_time(&self, decision: &Decision) -> f64 {
        decision.center_index as f64 / self.sample_rate
    }

    pub fn decision_classes(&self) -> Vec<i8> {
        self.decisions.iter().map(|d| d.class_id).collect()
    }

    pub fn raw_classes(&self) -> Vec<i8> {
        self.raw.iter().map(|r| r.class_id).collect()
    }

    /// Compute time of the sample that emitted decision `i`, when recorded.
    pub fn decision_compute_us(&self, i: usize) -> Option<f64> {
        let warm = self.samples_before_first_decision();
        self.per_sample_us.get(warm + i).copied()
    }

    fn samples_before_first_decision(&self) -> usize {
        self.per_sample_us.len().saturating_sub(self.decisions.len())
    }

    /// CSV: `center_index,time_s,class_id,confidence,compute_us`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["center_index", "time_s", "class_id", "confidence", "compute_us"])?;
        for (i, d) in self.decisions.iter().enumerate() {
            w.write_record(&[
                d.center_index.to_string(),
                self.center_time(d).to_string(),
                d.class_id.to_string(),
                d.confidence.to_string(),
                self.decision_compute_us(i).unwrap_or(0.0).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV: `index,time_s,class_id,confidence` of the unsmoothed argmax.
    pub fn write_raw_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "time_s", "class_id", "confidence"])?;
        for r in &self.raw {
            w.write_record(&[
                r.index.to_string(),
                (r.index as f64 / self.sample_rate).to_string(),
                r.class_id.to_string(),
                r.confidence.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads back a decision CSV written by [`write_csv`](Self::write_csv).
    /// The smoothed distributions are not stored on disk, so they come back
    /// empty; scoring only needs center, class, and confidence.
    pub fn read_csv<P: AsRef<Path>>(
        path: P,
        sample_rate: f64,
        look_ahead_samples: usize,
    ) -> Result<DecisionTrace> {
        let mut r = csv::Reader::from_path(path)?;
        let mut decisions = Vec::new();
        let mut per_sample = Vec::new();
        for record in r.records() {
            let record = record?;
            let bad = |what: &str| Error::Data(format!("bad trace field: {}", what));
            decisions.push(Decision {
                center_index: record[0].parse().map_err(|_| bad("center_index"))?,
                class_id: record[2].parse().map_err(|_| bad("class_id"))?,
                confidence: record[3].parse().map_err(|_| bad("confidence"))?,
                smoothed: Vec::new(),
            });
            per_sample.push(record[4].parse().map_err(|_| bad("compute_us"))?);
        }
        Ok(DecisionTrace {
            sample_rate,
            look_ahead_samples,
            decisions,
            raw: Vec::new(),
            per_sample_us: per_sample,
            forward_us: Vec::new(),
        })
    }
}

/// Runs the full per-sample pipeline over a dataset: for every sample with a
/// complete look-back window, build the window, scale it, run the model,
/// and feed the smoother. Per-sample compute time is measured on the
/// monotonic clock around the whole decision path.
pub fn run_stream<C: ProbabilitySource>(
    classifier: &C,
    scaler: &Scaler,
    dataset: &LabelledDataset,
    cfg: &SmootherConfig,
) -> Result<DecisionTrace> {
    cfg.validate()?;
    let wl = classifier.window_len();
    if dataset.len() < wl + cfg.samples_per_cycle {
        return Err(Error::Data(format!(
            "dataset of {} samples is shorter than window {} + cycle {}",
            dataset.len(),
            wl,
            cfg.samples_per_cycle
        )));
    }
    if scaler.means.len() != NUM_CHANNELS || scaler.stddevs.len() != NUM_CHANNELS {
        return Err(Error::Shape("scaler does not cover the 14 channels".to_string()));
    }
    if classifier.num_classes() != cfg.num_classes {
        return Err(Error::Shape(format!(
            "model emits {} classes, smoother expects {}",
            classifier.num_classes(),
            cfg.num_classes
        )));
    }

    let n = dataset.len();
    let mut smoother = Smoother::new(cfg.clone())?;
    let mut window = Array2::<f32>::zeros((wl, NUM_CHANNELS));
    let mut decisions = Vec::with_capacity(n.saturating_sub(wl + cfg.samples_per_cycle - 2));
    let mut raw = Vec::with_capacity(n + 1 - wl);
    let mut per_sample_us = Vec::with_capacity(n + 1 - wl);
    let mut forward_us = Vec::with_capacity(n + 1 - wl);

    for i in (wl - 1)..n {
        let started = Instant::now();
        for (t, frame) in dataset.frames[i + 1 - wl..=i].iter().enumerate() {
            for (c, &v) in frame.channels.iter().enumerate() {
                window[[t, c]] = scaler.transform_value(c, v);
            }
        }
        let forward_started = Instant::now();
        let probs = classifier.predict(i as u64, window.view())?;
        let fwd = forward_started.elapsed().as_secs_f64() * 1e6;

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
        let decision = smoother.push_and_decide(ProbabilityFrame { index: i as u64, probs })?;
        let total = started.elapsed().as_secs_f64() * 1e6;

        raw.push(RawPrediction { index: i as u64, class_id: raw_class, confidence: raw_conf });
        if let Some(d) = decision {
            decisions.push(d);
        }
        per_sample_us.push(total);
        forward_us.push(fwd);
    }

    Ok(DecisionTrace {
        sample_rate: dataset.sample_rate,
        look_ahead_samples: cfg.half_window,
        decisions,
        raw,
        per_sample_us,
        forward_us,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::WINDOW_LEN;
    use crate::waveform::{build_event_stream, event1_script, GridConfig};

    fn one_hot(k: usize, class: usize) -> Vec<f32> {
        let mut v = vec![0f32; k];
        v[class] = 1.0;
        v
    }

    fn frames_of(probs: Vec<Vec<f32>>) -> Vec<ProbabilityFrame> {
        probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| ProbabilityFrame { index: i as u64, probs: p })
            .collect()
    }

    fn cfg2() -> SmootherConfig {
        SmootherConfig { num_classes: 2, ..SmootherConfig::default() }
    }

    #[test]
    fn constant_buffer_smooths_to_itself() {
        let mut probs = vec![0f32; 18];
        probs[0] = 0.7;
        probs[1] = 0.3;
        let frames = frames_of(vec![probs; 80]);
        let mean = smooth(&frames, &SmootherConfig::default()).unwrap();
        assert_eq!(mean[0], 0.7f32 as f64);
        assert_eq!(mean[1], 0.3f32 as f64);
        assert!(mean[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_and_half_buffer_smooths_to_even_split() {
        let mut probs: Vec<Vec<f32>> = vec![one_hot(2, 0); 40];
        probs.extend(vec![one_hot(2, 1); 40]);
        let mean = smooth(&frames_of(probs), &cfg2()).unwrap();
        assert!((mean[0] - 0.5).abs() < 1e-12);
        assert!((mean[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smoothing_matches_naive_summation_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cfg = SmootherConfig::default();
        for _ in 0..100 {
            let frames: Vec<ProbabilityFrame> = (0..80)
                .map(|i| {
                    let mut p: Vec<f32> = (0..18).map(|_| rng.gen_range(0f32..1.0)).collect();
                    let sum: f32 = p.iter().sum();
                    for v in &mut p {
                        *v /= sum;
                    }
                    ProbabilityFrame { index: i, probs: p }
                })
                .collect();
            let mean = smooth(&frames, &cfg).unwrap();
            // oracle: per-class scan in the transposed order
            for k in 0..18 {
                let direct: f64 =
                    frames.iter().map(|f| f.probs[k] as f64).sum::<f64>() / 80.0;
                assert!((mean[k] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn underfull_buffer_is_rejected() {
        let frames = frames_of(vec![one_hot(18, 0); 79]);
        assert!(smooth(&frames, &SmootherConfig::default()).is_err());
    }

    #[test]
    fn decide_thresholds_inclusively() {
        assert_eq!(decide(&[0.7, 0.3], 0.6), (0, 0.7));
        assert_eq!(decide(&[0.5, 0.5], 0.6), (-1, 0.5));
        // boundary is inclusive
        assert_eq!(decide(&[0.6, 0.4], 0.6), (0, 0.6));
        // ties break toward the lowest class index
        assert_eq!(decide(&[0.5, 0.5], 0.5), (0, 0.5));
    }

    #[test]
    fn first_decision_comes_with_the_80th_frame() {
        let mut smoother = Smoother::new(cfg2()).unwrap();
        for i in 0..79u64 {
            let out = smoother
                .push_and_decide(ProbabilityFrame { index: i, probs: one_hot(2, 0) })
                .unwrap();
            assert!(out.is_none(), "no decision expected at frame {}", i);
        }
        let out = smoother
            .push_and_decide(ProbabilityFrame { index: 79, probs: one_hot(2, 0) })
            .unwrap()
            .expect("80th frame must decide");
        // causal re-attribution: center = newest index - half window
        assert_eq!(out.center_index, 39);
        assert_eq!(out.class_id, 0);
        assert_eq!(out.confidence, 1.0);
    }

    #[test]
    fn constant_stream_stays_confident() {
        let mut smoother = Smoother::new(cfg2()).unwrap();
        let mut emitted = 0;
        for i in 0..200u64 {
            if let Some(d) = smoother
                .push_and_decide(ProbabilityFrame { index: i, probs: one_hot(2, 1) })
                .unwrap()
            {
                assert_eq!(d.class_id, 1);
                assert_eq!(d.confidence, 1.0);
                assert_eq!(d.center_index, i - 40);
                emitted += 1;
            }
        }
        assert_eq!(emitted, 200 - 79);
    }

    #[test]
    fn step_change_flips_within_half_window_plus_one() {
        let mut smoother = Smoother::new(cfg2()).unwrap();
        let step_at = 300u64;
        let mut flip_emission: Option<u64> = None;
        let mut emissions_since_step = 0u64;
        let mut saw_new_class = false;
        for i in 0..500u64 {
            let class = if i < step_at { 0 } else { 1 };
            if let Some(d) = smoother
                .push_and_decide(ProbabilityFrame { index: i, probs: one_hot(2, class) })
                .unwrap()
            {
                if i >= step_at {
                    emissions_since_step += 1;
                    // first decision that leaves the old class is the flip
                    if d.class_id != 0 && flip_emission.is_none() {
                        flip_emission = Some(emissions_since_step);
                    }
                }
                saw_new_class |= d.class_id == 1;
            }
        }
        let flip = flip_emission.expect("the decision must flip");
        assert!(flip <= 41, "flip after {} emissions", flip);
        assert!(saw_new_class, "decision never settled on the new class");
    }

    #[test]
    fn out_of_order_frame_is_rejected() {
        let mut smoother = Smoother::new(cfg2()).unwrap();
        smoother
            .push_and_decide(ProbabilityFrame { index: 5, probs: one_hot(2, 0) })
            .unwrap();
        assert!(smoother
            .push_and_decide(ProbabilityFrame { index: 5, probs: one_hot(2, 0) })
            .is_err());
    }

    #[test]
    fn abstention_is_monotone_in_tau() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut p: Vec<f64> = (0..5).map(|_| rng.gen_range(0f64..1.0)).collect();
            let sum: f64 = p.iter().sum();
            for v in &mut p {
                *v /= sum;
            }
            let lo = decide(&p, 0.4);
            let hi = decide(&p, 0.7);
            if lo.0 == -1 {
                assert_eq!(hi.0, -1, "raising tau must not un-abstain {:?}", p);
            }
        }
    }

    #[test]
    fn shift_equivariance() {
        let probs: Vec<Vec<f32>> = (0..150)
            .map(|i| if i % 3 == 0 { one_hot(2, 1) } else { one_hot(2, 0) })
            .collect();
        let run = |offset: u64| -> Vec<Decision> {
            let mut smoother = Smoother::new(cfg2()).unwrap();
            let mut out = Vec::new();
            for (i, p) in probs.iter().enumerate() {
                if let Some(d) = smoother
                    .push_and_decide(ProbabilityFrame {
                        index: i as u64 + offset,
                        probs: p.clone(),
                    })
                    .unwrap()
                {
                    out.push(d);
                }
            }
            out
        };
        let base = run(0);
        let shifted = run(17);
        assert_eq!(base.len(), shifted.len());
        for (a, b) in base.iter().zip(&shifted) {
            assert_eq!(a.center_index + 17, b.center_index);
            assert_eq!(a.class_id, b.class_id);
            assert_eq!(a.confidence, b.confidence);
        }
    }

    #[test]
    fn oracle_on_event1_tracks_ground_truth_outside_transitions() {
        let ds = build_event_stream(&event1_script(), &GridConfig::default()).unwrap();
        let labels = ds.labels();
        let oracle = OracleSource { labels: labels.clone(), num_classes: 18, window_len: WINDOW_LEN };
        let scaler = Scaler {
            means: vec![0.0; NUM_CHANNELS],
            stddevs: vec![1.0; NUM_CHANNELS],
            epsilon: 1e-8,
        };
        let cfg = SmootherConfig::default();
        let trace = run_stream(&oracle, &scaler, &ds, &cfg).unwrap();
        assert_eq!(trace.decisions.len(), ds.len() - WINDOW_LEN + 1 - 79);
        for d in &trace.decisions {
            let c = d.center_index as usize;
            let lo = c - cfg.half_window + 1;
            let hi = c + cfg.half_window;
            let window = &labels[lo..=hi];
            if window.iter().all(|&l| l == window[0]) {
                assert_eq!(d.class_id, window[0], "center {}", c);
                assert_eq!(d.confidence, 1.0);
            }
        }
    }

    #[test]
    fn unattainable_tau_forces_full_abstention() {
        let ds = build_event_stream(&event1_script(), &GridConfig::default())
            .unwrap()
            .truncated(400);
        let oracle =
            OracleSource { labels: ds.labels(), num_classes: 18, window_len: WINDOW_LEN };
        let scaler = Scaler {
            means: vec![0.0; NUM_CHANNELS],
            stddevs: vec![1.0; NUM_CHANNELS],
            epsilon: 1e-8,
        };
        let cfg = SmootherConfig { tau: 1.01, ..SmootherConfig::default() };
        let trace = run_stream(&oracle, &scaler, &ds, &cfg).unwrap();
        assert!(!trace.decisions.is_empty());
        assert!(trace.decisions.iter().all(|d| d.class_id == -1));
    }

    #[test]
    fn too_short_dataset_is_rejected() {
        let ds = build_event_stream(&event1_script(), &GridConfig::default())
            .unwrap()
            .truncated(128);
        let oracle =
            OracleSource { labels: ds.labels(), num_classes: 18, window_len: WINDOW_LEN };
        let scaler = Scaler {
            means: vec![0.0; NUM_CHANNELS],
            stddevs: vec![1.0; NUM_CHANNELS],
            epsilon: 1e-8,
        };
        assert!(run_stream(&oracle, &scaler, &ds, &SmootherConfig::default()).is_err());
    }

    #[test]
    fn trace_csv_round_trip_for_scoring_fields() {
        let ds = build_event_stream(&event1_script(), &GridConfig::default())
            .unwrap()
            .truncated(600);
        let oracle =
            OracleSource { labels: ds.labels(), num_classes: 18, window_len: WINDOW_LEN };
        let scaler = Scaler {
            means: vec![0.0; NUM_CHANNELS],
            stddevs: vec![1.0; NUM_CHANNELS],
            epsilon: 1e-8,
        };
        let trace = run_stream(&oracle, &scaler, &ds, &SmootherConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        let back = DecisionTrace::read_csv(&path, trace.sample_rate, trace.look_ahead_samples)
            .unwrap();
        assert_eq!(back.decisions.len(), trace.decisions.len());
        for (a, b) in trace.decisions.iter().zip(&back.decisions) {
            assert_eq!(a.center_index, b.center_index);
            assert_eq!(a.class_id, b.class_id);
            assert_eq!(a.confidence, b.confidence);
        }
    }
}
