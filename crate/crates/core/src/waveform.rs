//! Synthetic three-phase waveform streams with injected faults and attacks.
//!
//! Generates balanced 60 Hz steady state for two merging units at 4.8 kHz
//! (80 samples per cycle) and overlays the 18-class anomaly taxonomy:
//!
//! | class | anomaly                         |
//! |-------|---------------------------------|
//! | 0     | normal operation                |
//! | 1-3   | SLG faults (A-N, B-N, C-N)      |
//! | 4, 8  | CT ratio attacks (MU23, MU32)   |
//! | 5-7   | LL faults (AB, AC, BC)          |
//! | 9-11  | DLG faults (AB-N, AC-N, BC-N)   |
//! | 12-13 | PT ratio attacks (MU23, MU32)   |
//! | 14-15 | three-phase faults (ABC, ABC-N) |
//! | 16-17 | GPS spoofing (MU23, MU32)       |
//!
//! Faults superimpose a surge current with a decaying DC offset on both
//! merging units and sag the faulted phase voltages. Ratio attacks rescale
//! one merging unit's current or voltage channels. GPS spoofing shifts one
//! merging unit's waveforms in phase. An out-of-zone disturbance (label -1)
//! is an attenuated single-line-to-ground signature that belongs to no
//! trained class.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{LabelledDataset, SampleFrame, CHANNELS_PER_MU, NUM_CHANNELS, OUT_OF_ZONE_LABEL};
use crate::error::{Error, Result};

/// Fraction of the fault amplitude used as the zero-sequence component of a
/// grounded three-phase fault; this is what separates class 15 from 14.
const GROUND_COMPONENT_FRACTION: f64 = 0.3;

/// Generator configuration for the steady-state grid signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub system_frequency_hz: f64,
    pub sample_rate_hz: f64,
    /// Peak phase voltage in per-unit.
    pub nominal_voltage: f64,
    /// Peak phase current in per-unit.
    pub nominal_current: f64,
    /// Standard deviation of additive Gaussian measurement noise, per-unit.
    pub noise_stddev: f64,
    pub rng_seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            system_frequency_hz: 60.0,
            sample_rate_hz: 4800.0,
            nominal_voltage: 1.0,
            nominal_current: 1.0,
            noise_stddev: 0.01,
            rng_seed: 7,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.system_frequency_hz <= 0.0 || self.sample_rate_hz <= 0.0 {
            return Err(Error::Config("frequencies must be positive".to_string()));
        }
        let ratio = self.sample_rate_hz / self.system_frequency_hz;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "sample rate {} is not an integer multiple of system frequency {}",
                self.sample_rate_hz, self.system_frequency_hz
            )));
        }
        if self.noise_stddev < 0.0 {
            return Err(Error::Config("noise_stddev must be non-negative".to_string()));
        }
        Ok(())
    }

    /// Samples per fundamental cycle (80 at the 4.8 kHz / 60 Hz defaults).
    pub fn samples_per_cycle(&self) -> usize {
        (self.sample_rate_hz / self.system_frequency_hz).round() as usize
    }
}

/// A phase of the three-phase system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    /// Electrical angle of the phase: 0, -120, +120 degrees.
    fn angle(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * PI / 3.0,
            Phase::C => 2.0 * PI / 3.0,
        }
    }

    /// Channel offset within one merging unit (currents 0..3, voltages 4..6).
    fn current_channel(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }

    fn voltage_channel(self) -> usize {
        4 + self.current_channel()
    }
}

/// Which merging unit an attack targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mu {
    Mu23,
    Mu32,
}

impl Mu {
    fn channel_base(self) -> usize {
        match self {
            Mu::Mu23 => 0,
            Mu::Mu32 => CHANNELS_PER_MU,
        }
    }
}

/// The injection rule selected by a class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    Slg(Phase),
    LineToLine(Phase, Phase),
    Dlg(Phase, Phase),
    ThreePhase { grounded: bool },
    CtRatio(Mu),
    PtRatio(Mu),
    GpsSpoof(Mu),
    OutOfZone,
}

/// Maps a class id to its injection rule; `None` for unknown ids.
pub fn anomaly_kind(class_id: i8) -> Option<AnomalyKind> {
    use AnomalyKind::*;
    use Phase::*;
    Some(match class_id {
        -1 => OutOfZone,
        1 => Slg(A),
        2 => Slg(B),
        3 => Slg(C),
        4 => CtRatio(Mu::Mu23),
        5 => LineToLine(A, B),
        6 => LineToLine(A, C),
        7 => LineToLine(B, C),
        8 => CtRatio(Mu::Mu32),
        9 => Dlg(A, B),
        10 => Dlg(A, C),
        11 => Dlg(B, C),
        12 => PtRatio(Mu::Mu23),
        13 => PtRatio(Mu::Mu32),
        14 => ThreePhase { grounded: false },
        15 => ThreePhase { grounded: true },
        16 => GpsSpoof(Mu::Mu23),
        17 => GpsSpoof(Mu::Mu32),
        _ => return None,
    })
}

/// One anomaly to inject: the class, its interval, and magnitude knobs.
///
/// Construct with [`AnomalySpec::new`] to get class-appropriate magnitude
/// defaults, then override fields as needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    /// Class id in 1..=17, or -1 for an out-of-zone disturbance.
    pub class_id: i8,
    pub start_time: f64,
    pub end_time: f64,
    /// Fault current amplitude as a multiple of nominal current.
    pub surge_multiplier: f64,
    /// Faulted-phase voltage is multiplied by this (0.3 = sag to 0.3 pu).
    pub sag_fraction: f64,
    /// CT/PT attack scale applied to the targeted channels.
    pub ratio_scale: f64,
    /// GPS spoof phase shift in degrees.
    pub phase_shift_deg: f64,
    /// Time constant of the fault DC offset in seconds (default one cycle).
    pub dc_time_constant_s: f64,
    /// Rise/clear time of the fault envelope in seconds. Fault current and
    /// voltage sag develop over this span instead of stepping; ratio and
    /// GPS attacks switch instantaneously.
    pub fault_ramp_s: f64,
    /// Strength of the out-of-zone disturbance relative to a full fault.
    pub attenuation: f64,
}

impl AnomalySpec {
    pub fn new(class_id: i8, start_time: f64, end_time: f64) -> Result<AnomalySpec> {
        let kind = anomaly_kind(class_id)
            .ok_or_else(|| Error::Config(format!("unknown anomaly class id {}", class_id)))?;
        if !(start_time < end_time) {
            return Err(Error::Config(format!(
                "anomaly interval [{}, {}) is empty or reversed",
                start_time, end_time
            )));
        }
        let ratio_scale = match kind {
            AnomalyKind::PtRatio(_) => 1.5,
            _ => 0.5,
        };
        Ok(AnomalySpec {
            class_id,
            start_time,
            end_time,
            surge_multiplier: 6.0,
            sag_fraction: 0.3,
            ratio_scale,
            phase_shift_deg: 20.0,
            dc_time_constant_s: 1.0 / 60.0,
            fault_ramp_s: 0.006,
            attenuation: 0.25,
        })
    }

    pub fn kind(&self) -> Result<AnomalyKind> {
        anomaly_kind(self.class_id)
            .ok_or_else(|| Error::Config(format!("unknown anomaly class id {}", self.class_id)))
    }
}

/// An ordered set of anomalies over a fixed stream duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScript {
    pub duration_s: f64,
    pub events: Vec<AnomalySpec>,
}

impl EventScript {
    pub fn validate(&self) -> Result<()> {
        if self.duration_s <= 0.0 {
            return Err(Error::Config("script duration must be positive".to_string()));
        }
        let mut sorted: Vec<&AnomalySpec> = self.events.iter().collect();
        sorted.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        let mut prev_end = 0.0f64;
        for spec in sorted {
            spec.kind()?;
            if spec.start_time < 0.0 || spec.end_time > self.duration_s {
                return Err(Error::Config(format!(
                    "anomaly class {} interval [{}, {}) outside stream span [0, {})",
                    spec.class_id, spec.start_time, spec.end_time, self.duration_s
                )));
            }
            if spec.start_time < prev_end {
                return Err(Error::Config(format!(
                    "anomaly class {} at {} s overlaps the previous anomaly",
                    spec.class_id, spec.start_time
                )));
            }
            prev_end = spec.end_time;
        }
        Ok(())
    }

    pub fn to_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn from_json<P: AsRef<Path>>(path: P) -> Result<EventScript> {
        let text = std::fs::read_to_string(path)?;
        let script: EventScript = serde_json::from_str(&text)?;
        script.validate()?;
        Ok(script)
    }

    /// Onset metadata (class, start, end) for scoring, in time order.
    pub fn onsets(&self) -> Vec<(i8, f64, f64)> {
        let mut v: Vec<(i8, f64, f64)> = self
            .events
            .iter()
            .map(|e| (e.class_id, e.start_time, e.end_time))
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    }
}

/// First multi-anomaly prediction stream: SLG, LL, DLG faults then CT and PT
/// ratio attacks at one-second spacing.
pub fn event1_script() -> EventScript {
    let entries = [
        (1, 1.0, 1.2),
        (7, 2.0, 2.2),
        (10, 3.0, 3.2),
        (4, 4.0, 4.2),
        (13, 5.0, 5.2),
    ];
    EventScript {
        duration_s: 6.0,
        events: entries
            .iter()
            .map(|&(c, s, e)| AnomalySpec::new(c, s, e).expect("built-in script"))
            .collect(),
    }
}

/// Second prediction stream: three-phase faults, a GPS spoof, and an
/// out-of-zone disturbance that should be answered with abstention.
pub fn event2_script() -> EventScript {
    let entries = [(14, 1.0, 1.2), (15, 2.0, 2.2), (16, 4.0, 4.2), (-1, 5.0, 5.2)];
    EventScript {
        duration_s: 6.0,
        events: entries
            .iter()
            .map(|&(c, s, e)| AnomalySpec::new(c, s, e).expect("built-in script"))
            .collect(),
    }
}

/// The default 22-second training stream: every class 1..=17 occurs eight
/// times in round-robin order, separated by normal operation.
///
/// Occurrences span a wide magnitude range (0.6x to 1.4x of the nominal
/// anomaly strength) so the learned class regions reflect families of
/// events rather than single waveshapes; events outside that span should
/// lower the model's confidence instead of landing in a class. Two
/// occurrences per class are sustained (0.18 s) and six are brief
/// (0.06 s), so the stream is dense in regime boundaries and the model
/// learns to react to the newest samples rather than the window average.
pub fn training_script() -> EventScript {
    let mut events = Vec::new();
    let variants = [1.0, 1.2, 0.6, 0.85, 1.15, 1.4, 0.75, 1.3];
    let mut t = 0.2;
    let durations = [0.18, 0.18, 0.06, 0.06, 0.06, 0.06, 0.06, 0.06];
    let gaps = [0.14, 0.14, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04];
    for occurrence in 0..8usize {
        let duration = durations[occurrence];
        let gap = gaps[occurrence];
        let variant = variants[occurrence];
        for class_offset in 0..17usize {
            let class_id = class_offset as i8 + 1;
            let mut spec =
                AnomalySpec::new(class_id, t, t + duration).expect("built-in script");
            spec.surge_multiplier *= variant;
            spec.sag_fraction = (1.0 - (1.0 - spec.sag_fraction) * variant).max(0.05);
            spec.ratio_scale = 1.0 + (spec.ratio_scale - 1.0) * variant;
            spec.phase_shift_deg *= variant;
            events.push(spec);
            t += duration + gap;
        }
    }
    EventScript { duration_s: 22.0, events }
}

/// Looks up a built-in script by name.
pub fn builtin_script(name: &str) -> Option<EventScript> {
    match name {
        "event1" => Some(event1_script()),
        "event2" => Some(event2_script()),
        "train" => Some(training_script()),
        _ => None,
    }
}

/// First sample index at or after time `t` (robust to f64 representation of
/// decimal times).
fn sample_index(t: f64, sample_rate: f64) -> usize {
    ((t * sample_rate - 1e-9).ceil()).max(0.0) as usize
}

/// Generates balanced steady state: label 0 everywhere, phases at
/// 0/-120/+120 degrees, neutral current the sum of the clean phase
/// currents, independent Gaussian measurement noise per channel.
/// Deterministic for a given seed.
pub fn generate_steady_state(cfg: &GridConfig, duration_s: f64) -> Result<LabelledDataset> {
    cfg.validate()?;
    if duration_s <= 0.0 {
        return Err(Error::Config("duration must be positive".to_string()));
    }
    let n = (duration_s * cfg.sample_rate_hz + 1e-9).floor() as usize;
    let omega = 2.0 * PI * cfg.system_frequency_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let normal = Normal::new(0.0f64, 1.0).expect("unit normal");

    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / cfg.sample_rate_hz;
        let mut clean = [0f32; CHANNELS_PER_MU];
        for phase in [Phase::A, Phase::B, Phase::C] {
            let arg = omega * t + phase.angle();
            clean[phase.current_channel()] = (cfg.nominal_current * arg.cos()) as f32;
            clean[phase.voltage_channel()] = (cfg.nominal_voltage * arg.cos()) as f32;
        }
        // neutral channel measures the sum of the stored phase currents
        clean[3] = (clean[0] as f64 + clean[1] as f64 + clean[2] as f64) as f32;

        let mut channels = [0f32; NUM_CHANNELS];
        for mu in 0..2 {
            for c in 0..CHANNELS_PER_MU {
                let noise = if cfg.noise_stddev > 0.0 {
                    normal.sample(&mut rng) * cfg.noise_stddev
                } else {
                    0.0
                };
                channels[mu * CHANNELS_PER_MU + c] = (clean[c] as f64 + noise) as f32;
            }
        }
        frames.push(SampleFrame { index: i as u64, time: t, channels, label: 0 });
    }
    Ok(LabelledDataset { sample_rate: cfg.sample_rate_hz, frames })
}

/// Fault current with decaying DC offset, zero at fault inception:
/// `A (cos(wt + phi) - cos(w t0 + phi) exp(-(t - t0)/tau))`.
fn fault_current(t: f64, t0: f64, omega: f64, phi: f64, amplitude: f64, tau: f64) -> f64 {
    amplitude * ((omega * t + phi).cos() - (omega * t0 + phi).cos() * (-(t - t0) / tau).exp())
}

/// Returns a copy of the dataset with one anomaly injected.
///
/// Frames in `[start_time, end_time)` are relabelled to the spec's class and
/// modified per its injection rule; every other frame is untouched.
pub fn inject_anomaly(
    dataset: &LabelledDataset,
    cfg: &GridConfig,
    spec: &AnomalySpec,
) -> Result<LabelledDataset> {
    let kind = spec.kind()?;
    let rate = dataset.sample_rate;
    let start = sample_index(spec.start_time, rate);
    let end = sample_index(spec.end_time, rate).min(dataset.len());
    if spec.start_time < 0.0 || spec.end_time > dataset.duration() + 1e-9 || start >= end {
        return Err(Error::Config(format!(
            "anomaly interval [{}, {}) outside dataset span [0, {})",
            spec.start_time,
            spec.end_time,
            dataset.duration()
        )));
    }

    let mut out = dataset.clone();
    let omega = 2.0 * PI * cfg.system_frequency_hz;
    let t0 = spec.start_time;
    let amp = spec.surge_multiplier * cfg.nominal_current;
    let tau = spec.dc_time_constant_s;

    // GPS spoofing reads neighbouring samples, so keep the originals.
    let original: Option<Vec<[f32; NUM_CHANNELS]>> = match kind {
        AnomalyKind::GpsSpoof(_) => Some(dataset.frames.iter().map(|f| f.channels).collect()),
        _ => None,
    };

    for i in start..end {
        let frame = &mut out.frames[i];
        let t = frame.time;
        frame.label = spec.class_id;

        // faults develop and clear over the ramp; attacks switch instantly
        let env = if spec.fault_ramp_s > 0.0 {
            let up = (t - spec.start_time) / spec.fault_ramp_s;
            let down = (spec.end_time - t) / spec.fault_ramp_s;
            up.min(down).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let sag = (1.0 - env * (1.0 - spec.sag_fraction)) as f32;

        match kind {
            AnomalyKind::Slg(p) => {
                let delta = env * fault_current(t, t0, omega, p.angle(), amp, tau);
                for base in [0, CHANNELS_PER_MU] {
                    frame.channels[base + p.current_channel()] += delta as f32;
                    frame.channels[base + 3] += delta as f32;
                    frame.channels[base + p.voltage_channel()] *= sag;
                }
            }
            AnomalyKind::LineToLine(p, q) => {
                // one loop current enters phase p and returns through q
                let phi = (p.angle() + q.angle()) / 2.0;
                let delta = env * fault_current(t, t0, omega, phi, amp, tau);
                for base in [0, CHANNELS_PER_MU] {
                    frame.channels[base + p.current_channel()] += delta as f32;
                    frame.channels[base + q.current_channel()] -= delta as f32;
                    frame.channels[base + p.voltage_channel()] *= sag;
                    frame.channels[base + q.voltage_channel()] *= sag;
                }
            }
            AnomalyKind::Dlg(p, q) => {
                let dp = env * fault_current(t, t0, omega, p.angle(), amp, tau);
                let dq = env * fault_current(t, t0, omega, q.angle(), amp, tau);
                for base in [0, CHANNELS_PER_MU] {
                    frame.channels[base + p.current_channel()] += dp as f32;
                    frame.channels[base + q.current_channel()] += dq as f32;
                    frame.channels[base + 3] += (dp + dq) as f32;
                    frame.channels[base + p.voltage_channel()] *= sag;
                    frame.channels[base + q.voltage_channel()] *= sag;
                }
            }
            AnomalyKind::ThreePhase { grounded } => {
                let ground = if grounded {
                    GROUND_COMPONENT_FRACTION * amp * (omega * t).cos()
                } else {
                    0.0
                };
                for base in [0, CHANNELS_PER_MU] {
                    let mut neutral = 0.0;
                    for p in [Phase::A, Phase::B, Phase::C] {
                        let d = env * (fault_current(t, t0, omega, p.angle(), amp, tau) + ground);
                        frame.channels[base + p.current_channel()] += d as f32;
                        neutral += d;
                        frame.channels[base + p.voltage_channel()] *= sag;
                    }
                    frame.channels[base + 3] += neutral as f32;
                }
            }
            AnomalyKind::CtRatio(mu) => {
                let base = mu.channel_base();
                for c in 0..4 {
                    frame.channels[base + c] *= spec.ratio_scale as f32;
                }
            }
            AnomalyKind::PtRatio(mu) => {
                let base = mu.channel_base();
                for c in 4..CHANNELS_PER_MU {
                    frame.channels[base + c] *= spec.ratio_scale as f32;
                }
            }
            AnomalyKind::GpsSpoof(mu) => {
                let source = original.as_ref().expect("gps originals");
                let spc = cfg.samples_per_cycle() as f64;
                let shift = spec.phase_shift_deg / 360.0 * spc;
                let pos = i as f64 + shift;
                let lo = (pos.floor().max(0.0) as usize).min(source.len() - 1);
                let hi = (lo + 1).min(source.len() - 1);
                let frac = (pos - pos.floor()) as f32;
                let base = mu.channel_base();
                for c in 0..CHANNELS_PER_MU {
                    let a = source[lo][base + c];
                    let b = source[hi][base + c];
                    frame.channels[base + c] = a + (b - a) * frac;
                }
            }
            AnomalyKind::OutOfZone => {
                // attenuated SLG A-N signature on both merging units; the
                // fault sits outside the protected zone, so the relays see
                // reverse through-current (phase-opposed to an in-zone SLG)
                let delta = env
                    * spec.attenuation
                    * fault_current(t, t0, omega, Phase::A.angle() + PI, amp, tau);
                let oz_sag = 1.0 - env * spec.attenuation * (1.0 - spec.sag_fraction);
                for base in [0, CHANNELS_PER_MU] {
                    frame.channels[base] += delta as f32;
                    frame.channels[base + 3] += delta as f32;
                    frame.channels[base + Phase::A.voltage_channel()] *= oz_sag as f32;
                }
                frame.label = OUT_OF_ZONE_LABEL;
            }
        }
    }
    Ok(out)
}

/// Generates steady state for the script's duration and applies every
/// anomaly in time order.
pub fn build_event_stream(script: &EventScript, cfg: &GridConfig) -> Result<LabelledDataset> {
    script.validate()?;
    let mut dataset = generate_steady_state(cfg, script.duration_s)?;
    let mut ordered = script.events.clone();
    ordered.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    for spec in &ordered {
        dataset = inject_anomaly(&dataset, cfg, spec)?;
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_cfg() -> GridConfig {
        GridConfig { noise_stddev: 0.0, ..GridConfig::default() }
    }

    #[test]
    fn twenty_two_seconds_is_105600_frames() {
        let ds = generate_steady_state(&GridConfig::default(), 22.0).unwrap();
        assert_eq!(ds.len(), 105_600);
    }

    #[test]
    fn one_cycle_is_80_frames() {
        let ds = generate_steady_state(&GridConfig::default(), 1.0 / 60.0).unwrap();
        assert_eq!(ds.len(), 80);
    }

    #[test]
    fn van_at_zero_phase_is_exact_amplitude() {
        let ds = generate_steady_state(&quiet_cfg(), 0.01).unwrap();
        assert_eq!(ds.frames[0].channels[4], 1.0); // cos(0) * nominal
    }

    #[test]
    fn neutral_equals_phase_sum_without_noise() {
        let ds = generate_steady_state(&quiet_cfg(), 0.1).unwrap();
        for frame in &ds.frames {
            let sum =
                frame.channels[0] as f64 + frame.channels[1] as f64 + frame.channels[2] as f64;
            let residual = sum - frame.channels[3] as f64;
            assert!(residual.abs() < 1e-9, "residual {} at t={}", residual, frame.time);
            // balanced system: both the sum and the neutral sit near zero
            assert!(sum.abs() < 1e-6);
            assert!((frame.channels[3] as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_steady_state(&GridConfig::default(), 0.5).unwrap();
        let b = generate_steady_state(&GridConfig::default(), 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_positive_duration_is_rejected() {
        assert!(generate_steady_state(&GridConfig::default(), 0.0).is_err());
    }

    #[test]
    fn fractional_samples_per_cycle_is_rejected() {
        let cfg = GridConfig { sample_rate_hz: 4801.0, ..GridConfig::default() };
        assert!(generate_steady_state(&cfg, 1.0).is_err());
    }

    #[test]
    fn ct_attack_halves_only_the_designated_mu() {
        let cfg = quiet_cfg();
        let base = generate_steady_state(&cfg, 1.0).unwrap();
        let spec = AnomalySpec::new(8, 0.2, 0.4).unwrap(); // CT attack on MU32
        let attacked = inject_anomaly(&base, &cfg, &spec).unwrap();
        let i = sample_index(0.3, cfg.sample_rate_hz);
        assert_eq!(attacked.frames[i].channels[7], base.frames[i].channels[7] * 0.5);
        assert_eq!(attacked.frames[i].channels[0], base.frames[i].channels[0]);
        assert_eq!(attacked.frames[i].label, 8);
    }

    #[test]
    fn class4_interval_reproduces_event1_period4_labels() {
        let cfg = GridConfig::default();
        let base = generate_steady_state(&cfg, 6.0).unwrap();
        let spec = AnomalySpec::new(4, 4.0, 4.2).unwrap();
        let ds = inject_anomaly(&base, &cfg, &spec).unwrap();
        for f in ds.frame_range(4.0, 4.2) {
            assert_eq!(f.label, 4);
        }
        assert_eq!(ds.frame_range(4.0, 4.2).len(), 960);
        assert_eq!(ds.frames[sample_index(4.2, 4800.0)].label, 0);
    }

    #[test]
    fn zero_degree_gps_spoof_changes_labels_only() {
        let cfg = quiet_cfg();
        let base = generate_steady_state(&cfg, 1.0).unwrap();
        let mut spec = AnomalySpec::new(17, 0.5, 0.7).unwrap();
        spec.phase_shift_deg = 0.0;
        let spoofed = inject_anomaly(&base, &cfg, &spec).unwrap();
        for (a, b) in base.frames.iter().zip(spoofed.frames.iter()) {
            assert_eq!(a.channels, b.channels);
        }
        assert_eq!(spoofed.frames[sample_index(0.6, 4800.0)].label, 17);
    }

    #[test]
    fn injection_is_local_to_the_interval() {
        let cfg = GridConfig::default();
        let base = generate_steady_state(&cfg, 1.0).unwrap();
        for class_id in [1, 5, 9, 14, 15, 4, 13, 16, -1] {
            let spec = AnomalySpec::new(class_id, 0.3, 0.5).unwrap();
            let injected = inject_anomaly(&base, &cfg, &spec).unwrap();
            let lo = sample_index(0.3, cfg.sample_rate_hz);
            let hi = sample_index(0.5, cfg.sample_rate_hz);
            for i in (0..lo).chain(hi..base.len()) {
                assert_eq!(injected.frames[i], base.frames[i], "class {} frame {}", class_id, i);
            }
        }
    }

    #[test]
    fn ground_faults_energize_the_neutral_and_ll_does_not() {
        let cfg = quiet_cfg();
        let base = generate_steady_state(&cfg, 1.0).unwrap();
        let max_neutral = |ds: &LabelledDataset| {
            ds.frame_range(0.3, 0.5)
                .iter()
                .map(|f| f.channels[3].abs())
                .fold(0f32, f32::max)
        };
        let slg = inject_anomaly(&base, &cfg, &AnomalySpec::new(1, 0.3, 0.5).unwrap()).unwrap();
        let ll = inject_anomaly(&base, &cfg, &AnomalySpec::new(7, 0.3, 0.5).unwrap()).unwrap();
        let abc = inject_anomaly(&base, &cfg, &AnomalySpec::new(14, 0.3, 0.5).unwrap()).unwrap();
        let abcn = inject_anomaly(&base, &cfg, &AnomalySpec::new(15, 0.3, 0.5).unwrap()).unwrap();
        assert!(max_neutral(&slg) > 1.0);
        assert!(max_neutral(&ll) < 1e-5);
        assert!(max_neutral(&abc) < 1e-4);
        assert!(max_neutral(&abcn) > 1.0);
    }

    #[test]
    fn pt_attack_scales_voltages_only() {
        let cfg = quiet_cfg();
        let base = generate_steady_state(&cfg, 1.0).unwrap();
        let spec = AnomalySpec::new(13, 0.2, 0.4).unwrap(); // PT attack on MU32
        let ds = inject_anomaly(&base, &cfg, &spec).unwrap();
        let i = sample_index(0.25, cfg.sample_rate_hz);
        for c in 11..14 {
            assert_eq!(ds.frames[i].channels[c], base.frames[i].channels[c] * 1.5);
        }
        for c in 7..11 {
            assert_eq!(ds.frames[i].channels[c], base.frames[i].channels[c]);
        }
        for c in 0..7 {
            assert_eq!(ds.frames[i].channels[c], base.frames[i].channels[c]);
        }
    }

    #[test]
    fn unknown_class_and_bad_interval_are_rejected() {
        let cfg = GridConfig::default();
        let base = generate_steady_state(&cfg, 1.0).unwrap();
        assert!(AnomalySpec::new(18, 0.1, 0.2).is_err());
        assert!(AnomalySpec::new(0, 0.1, 0.2).is_err());
        let spec = AnomalySpec::new(1, 0.9, 1.5).unwrap();
        assert!(inject_anomaly(&base, &cfg, &spec).is_err());
    }

    #[test]
    fn event1_stream_matches_its_script_labels() {
        let ds = build_event_stream(&event1_script(), &GridConfig::default()).unwrap();
        assert_eq!(ds.len(), 28_800);
        for f in ds.frame_range(1.0, 1.2) {
            assert_eq!(f.label, 1);
        }
        for f in ds.frame_range(5.0, 5.2) {
            assert_eq!(f.label, 13);
        }
        for f in ds.frame_range(0.0, 1.0) {
            assert_eq!(f.label, 0);
        }
    }

    #[test]
    fn event2_out_of_zone_interval_is_labelled_minus_one() {
        let ds = build_event_stream(&event2_script(), &GridConfig::default()).unwrap();
        for f in ds.frame_range(5.0, 5.2) {
            assert_eq!(f.label, -1);
        }
        for f in ds.frame_range(4.0, 4.2) {
            assert_eq!(f.label, 16);
        }
    }

    #[test]
    fn empty_script_is_all_normal() {
        let script = EventScript { duration_s: 1.0, events: vec![] };
        let ds = build_event_stream(&script, &GridConfig::default()).unwrap();
        assert!(ds.frames.iter().all(|f| f.label == 0));
    }

    #[test]
    fn overlapping_anomalies_are_rejected() {
        let script = EventScript {
            duration_s: 2.0,
            events: vec![
                AnomalySpec::new(1, 0.5, 1.0).unwrap(),
                AnomalySpec::new(2, 0.9, 1.2).unwrap(),
            ],
        };
        assert!(build_event_stream(&script, &GridConfig::default()).is_err());
    }

    #[test]
    fn training_script_covers_every_class_eight_times() {
        let script = training_script();
        script.validate().unwrap();
        for class in 1..=17i8 {
            let n = script.events.iter().filter(|e| e.class_id == class).count();
            assert_eq!(n, 8, "class {}", class);
        }
        assert!(script.events.iter().all(|e| e.end_time <= 22.0));
    }

    #[test]
    fn script_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.json");
        let script = event2_script();
        script.to_json(&path).unwrap();
        let back = EventScript::from_json(&path).unwrap();
        assert_eq!(back, script);
    }
}
