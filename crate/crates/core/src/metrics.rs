//! Latency-aware scoring: streaming accuracy and coverage, per-event
//! classification time, offline classification reports, and the repeated-run
//! inference-latency benchmark with warm-up exclusion.

use serde::{Deserialize, Serialize};

use crate::dataset::LabelledDataset;
use crate::error::{Error, Result};
use crate::preprocess::Scaler;
use crate::streaming::{run_stream, DecisionTrace, ProbabilitySource, SmootherConfig};

/// Ground-truth onset of one scripted anomaly, for classification timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOnset {
    pub class_id: i8,
    pub onset_s: f64,
    pub end_s: f64,
}

/// Classification time of one event, or `None` when the event was never
/// correctly classified before its timeout (event end plus one cycle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScore {
    pub class_id: i8,
    pub onset_s: f64,
    pub end_s: f64,
    pub t_cls_ms: Option<f64>,
}

/// A run of consecutive abstentions in the decision sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstentionRun {
    pub start_center: u64,
    pub length: usize,
}

/// Streaming score card for one trace against per-sample ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamingReport {
    pub schema_version: u32,
    pub accuracy: f64,
    pub coverage: f64,
    pub events: Vec<EventScore>,
    pub flips_raw: usize,
    pub flips_smoothed: usize,
    pub abstention_runs: Vec<AbstentionRun>,
    pub decisions: usize,
    pub look_ahead_samples: usize,
    pub look_ahead_ms: f64,
}

/// Fraction of emitted decisions matching ground truth at their center
/// sample. Abstention counts as correct only where the truth itself is
/// out-of-zone (-1).
pub fn accuracy(trace: &DecisionTrace, truth: &[i8]) -> Result<f64> {
    if trace.decisions.is_empty() {
        return Err(Error::Data("cannot score an empty trace".to_string()));
    }
    let mut correct = 0usize;
    for d in &trace.decisions {
        let c = d.center_index as usize;
        if c >= truth.len() {
            return Err(Error::Data(format!(
                "decision center {} beyond truth length {}",
                c,
                truth.len()
            )));
        }
        if d.class_id == truth[c] {
            correct += 1;
        }
    }
    Ok(correct as f64 / trace.decisions.len() as f64)
}

/// Fraction of emitted decisions that committed to a class.
pub fn coverage(trace: &DecisionTrace) -> Result<f64> {
    if trace.decisions.is_empty() {
        return Err(Error::Data("cannot score an empty trace".to_string()));
    }
    let confident = trace.decisions.iter().filter(|d| d.class_id != -1).count();
    Ok(confident as f64 / trace.decisions.len() as f64)
}

/// Per-event classification time: first decision at or after onset whose
/// class matches the event, minus the onset, plus the pipeline's recorded
/// look-ahead. Events with no correct decision before `end + one cycle`
/// report `None`.
pub fn classification_times(
    trace: &DecisionTrace,
    onsets: &[EventOnset],
) -> Result<Vec<EventScore>> {
    if trace.decisions.is_empty() {
        return Err(Error::Data("cannot score an empty trace".to_string()));
    }
    let cycle_s = 2.0 * trace.look_ahead_samples as f64 / trace.sample_rate;
    let first = trace.center_time(&trace.decisions[0]);
    let last = trace.center_time(trace.decisions.last().unwrap());
    let mut scores = Vec::with_capacity(onsets.len());
    for ev in onsets {
        if ev.onset_s > last || ev.end_s + cycle_s < first {
            return Err(Error::Data(format!(
                "onset {} s outside trace span [{}, {}] s",
                ev.onset_s, first, last
            )));
        }
        let deadline = ev.end_s + cycle_s;
        let mut t_cls = None;
        for d in &trace.decisions {
            let t = trace.center_time(d);
            if t < ev.onset_s {
                continue;
            }
            if t > deadline {
                break;
            }
            if d.class_id == ev.class_id {
                t_cls = Some((t - ev.onset_s) * 1e3 + trace.look_ahead_ms());
                break;
            }
        }
        scores.push(EventScore {
            class_id: ev.class_id,
            onset_s: ev.onset_s,
            end_s: ev.end_s,
            t_cls_ms: t_cls,
        });
    }
    Ok(scores)
}

/// Number of adjacent unequal pairs in a decision sequence.
pub fn flip_count(seq: &[i8]) -> usize {
    seq.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Runs of consecutive abstentions, in order.
pub fn abstention_runs(trace: &DecisionTrace) -> Vec<AbstentionRun> {
    let mut runs = Vec::new();
    let mut current: Option<AbstentionRun> = None;
    for d in &trace.decisions {
        if d.class_id == -1 {
            match &mut current {
                Some(run) => run.length += 1,
                None => current = Some(AbstentionRun { start_center: d.center_index, length: 1 }),
            }
        } else if let Some(run) = current.take() {
            runs.push(run);
        }
    }
    if let Some(run) = current {
        runs.push(run);
    }
    runs
}

/// Composite streaming report for a trace against truth and script onsets.
pub fn streaming_report(
    trace: &DecisionTrace,
    truth: &[i8],
    onsets: &[EventOnset],
) -> Result<StreamingReport> {
    Ok(StreamingReport {
        schema_version: 1,
        accuracy: accuracy(trace, truth)?,
        coverage: coverage(trace)?,
        events: classification_times(trace, onsets)?,
        flips_raw: flip_count(&trace.raw_classes()),
        flips_smoothed: flip_count(&trace.decision_classes()),
        abstention_runs: abstention_runs(trace),
        decisions: trace.decisions.len(),
        look_ahead_samples: trace.look_ahead_samples,
        look_ahead_ms: trace.look_ahead_ms(),
    })
}

/// Offline (windowed test-set) classification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub accuracy: f64,
    /// Mean per-class recall over classes present in the truth.
    pub balanced_accuracy: f64,
    /// Unweighted mean per-class F1 over classes present in the truth.
    pub macro_f1: f64,
    /// `confusion[truth][predicted]`; row sums equal per-class support.
    pub confusion: Vec<Vec<u64>>,
    /// Classes absent from the truth, excluded from the averaged metrics.
    pub excluded_classes: Vec<i8>,
    pub parameter_count: usize,
}

pub fn offline_report(
    predictions: &[i8],
    truth: &[i8],
    num_classes: usize,
    parameter_count: usize,
) -> Result<OfflineReport> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Data("cannot report on empty predictions".to_string()));
    }
    let k = num_classes;
    let mut confusion = vec![vec![0u64; k]; k];
    let mut correct = 0u64;
    for (&p, &t) in predictions.iter().zip(truth) {
        if p < 0 || p as usize >= k {
            return Err(Error::Label(p as i64));
        }
        if t < 0 || t as usize >= k {
            return Err(Error::Label(t as i64));
        }
        confusion[t as usize][p as usize] += 1;
        if p == t {
            correct += 1;
        }
    }

    let mut recalls = Vec::new();
    let mut f1s = Vec::new();
    let mut excluded = Vec::new();
    for c in 0..k {
        let support: u64 = confusion[c].iter().sum();
        if support == 0 {
            excluded.push(c as i8);
            continue;
        }
        let tp = confusion[c][c];
        let predicted: u64 = (0..k).map(|t| confusion[t][c]).sum();
        let recall = tp as f64 / support as f64;
        let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        recalls.push(recall);
        f1s.push(f1);
    }
    Ok(OfflineReport {
        accuracy: correct as f64 / predictions.len() as f64,
        balanced_accuracy: recalls.iter().sum::<f64>() / recalls.len() as f64,
        macro_f1: f1s.iter().sum::<f64>() / f1s.len() as f64,
        confusion,
        excluded_classes: excluded,
        parameter_count,
    })
}

/// Execution environment recorded next to latency numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvDescriptor {
    pub os: String,
    pub arch: String,
    pub cpu_model: String,
    pub logical_cpus: usize,
    pub clock_source: String,
}

impl EnvDescriptor {
    pub fn capture() -> EnvDescriptor {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|text| {
                text.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|s| s.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".to_string());
        EnvDescriptor {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpu_model,
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            clock_source: "monotonic (std::time::Instant)".to_string(),
        }
    }
}

/// Pooled per-sample latency statistics of the measured (post-warm-up) runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub measured_runs: usize,
    pub samples: usize,
}

/// Full latency report of the repeated-run benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub schema_version: u32,
    #[serde(flatten)]
    pub stats: LatencyStats,
    /// Forward-pass-only mean, the narrow per-inference compute time.
    pub forward_mean_ms: f64,
    pub warmup_runs: usize,
    pub samples_per_run: usize,
    pub environment: EnvDescriptor,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Aggregates per-run per-sample durations (µs), discarding the first
/// `warmup` runs. Errors when nothing measurable remains or when more than
/// 10% of samples measured exactly zero (clock resolution too coarse).
pub fn summarize_latency_runs(per_run_us: &[Vec<f64>], warmup: usize) -> Result<LatencyStats> {
    if per_run_us.len() <= warmup {
        return Err(Error::Config(format!(
            "{} runs with {} warm-up runs leaves nothing to measure",
            per_run_us.len(),
            warmup
        )));
    }
    let measured = &per_run_us[warmup..];
    let mut pooled: Vec<f64> = measured.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::Data("no samples in measured runs".to_string()));
    }
    let zeros = pooled.iter().filter(|&&v| v == 0.0).count();
    let zero_fraction = zeros as f64 / pooled.len() as f64;
    if zero_fraction > 0.10 {
        return Err(Error::ClockResolution { zero_fraction: zero_fraction * 100.0 });
    }
    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let var = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    pooled.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        mean_ms: mean / 1e3,
        std_ms: var.sqrt() / 1e3,
        p50_ms: percentile(&pooled, 0.50) / 1e3,
        p95_ms: percentile(&pooled, 0.95) / 1e3,
        p99_ms: percentile(&pooled, 0.99) / 1e3,
        measured_runs: measured.len(),
        samples: pooled.len(),
    })
}

/// Runs the full per-sample decision path over the dataset `warmup + runs`
/// times and reports pooled per-sample latency of the measured runs.
///
/// Single-worker by design; concurrent benchmarks on one machine invalidate
/// the numbers.
pub fn inference_latency_benchmark<C: ProbabilitySource>(
    classifier: &C,
    scaler: &Scaler,
    dataset: &LabelledDataset,
    cfg: &SmootherConfig,
    runs: usize,
    warmup: usize,
) -> Result<LatencyReport> {
    if runs == 0 {
        return Err(Error::Config("need at least one measured run".to_string()));
    }
    let mut per_run = Vec::with_capacity(warmup + runs);
    let mut forward_sum = 0.0f64;
    let mut forward_n = 0usize;
    let mut samples_per_run = 0usize;
    for r in 0..warmup + runs {
        let trace = run_stream(classifier, scaler, dataset, cfg)?;
        samples_per_run = trace.per_sample_us.len();
        if r >= warmup {
            forward_sum += trace.forward_us.iter().sum::<f64>();
            forward_n += trace.forward_us.len();
        }
        per_run.push(trace.per_sample_us);
    }
    let stats = summarize_latency_runs(&per_run, warmup)?;
    Ok(LatencyReport {
        schema_version: 1,
        stats,
        forward_mean_ms: forward_sum / forward_n.max(1) as f64 / 1e3,
        warmup_runs: warmup,
        samples_per_run,
        environment: EnvDescriptor::capture(),
    })
}
