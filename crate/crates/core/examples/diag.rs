// Scratch diagnostic: full pipeline timings and scores (removed before release).

use std::time::Instant;

use svbench_core::metrics::{accuracy, coverage, flip_count, streaming_report, EventOnset};
use svbench_core::nn::{ModelSpec, TrainConfig};
use svbench_core::pipeline::train_on_dataset;
use svbench_core::preprocess::SplitSpec;
use svbench_core::streaming::{run_stream, SmootherConfig};
use svbench_core::waveform::{build_event_stream, event1_script, event2_script, training_script, GridConfig};

fn main() {
    let t0 = Instant::now();
    let mut cfg = GridConfig::default();
    if let Ok(v) = std::env::var("DIAG_NOISE") {
        cfg.noise_stddev = v.parse().unwrap();
    }
    let train_ds = build_event_stream(&training_script(), &cfg).unwrap();
    println!("generated training stream: {} frames in {:.1?}", train_ds.len(), t0.elapsed());

    let spec = ModelSpec::mlp();
    let mut tcfg = TrainConfig::default();
    if let Ok(v) = std::env::var("DIAG_LR") {
        tcfg.learning_rate = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("DIAG_BATCH") {
        tcfg.batch_size = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("DIAG_EPOCHS") {
        tcfg.epochs = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("DIAG_SEED") {
        tcfg.seed = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("DIAG_PATIENCE") {
        tcfg.early_stopping_patience = v.parse().unwrap();
    }
    if std::env::var("DIAG_WVAL").is_ok() {
        tcfg.weighted_validation = true;
    }
    if let Ok(v) = std::env::var("DIAG_AUG") {
        tcfg.augment_noise_std = v.parse().unwrap();
    }
    let t1 = Instant::now();
    let art = train_on_dataset(&train_ds, &spec, &SplitSpec::default(), &tcfg).unwrap();
    println!("trained in {:.1?}, epochs run {}, best epoch {}", t1.elapsed(), art.history.epochs.len(), art.history.best_epoch);
    for e in &art.history.epochs {
        println!("  epoch {:2} train_loss {:.4} acc {:.4} | val_loss {:.4} acc {:.4} lr {:.5}",
            e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.learning_rate);
    }
    println!("offline: acc {:.4} bal {:.4} macroF1 {:.4} params {}",
        art.offline.accuracy, art.offline.balanced_accuracy, art.offline.macro_f1, art.offline.parameter_count);

    // Event 1 (its own noise realization)
    let mut ev_cfg = cfg.clone();
    ev_cfg.rng_seed = cfg.rng_seed ^ 0x45_31;
    let e1 = build_event_stream(&event1_script(), &ev_cfg).unwrap();
    let sm = SmootherConfig::default();
    let t2 = Instant::now();
    let trace = run_stream(&art.network, &art.scaler, &e1, &sm).unwrap();
    println!("event1 stream run in {:.1?} ({} decisions)", t2.elapsed(), trace.decisions.len());
    let onsets: Vec<EventOnset> = event1_script().onsets().iter().map(|&(c, s, e)| EventOnset { class_id: c, onset_s: s, end_s: e }).collect();
    let rep = streaming_report(&trace, &e1.labels(), &onsets).unwrap();
    println!("event1: acc {:.4} cov {:.4} flips raw {} smoothed {} ratio {:.3}",
        rep.accuracy, rep.coverage, rep.flips_raw, rep.flips_smoothed,
        rep.flips_smoothed as f64 / rep.flips_raw.max(1) as f64);
    for ev in &rep.events {
        println!("  class {:2} onset {:.1}s -> t_cls {:?} ms", ev.class_id, ev.onset_s, ev.t_cls_ms);
    }
    let mean_us = trace.per_sample_us.iter().sum::<f64>() / trace.per_sample_us.len() as f64;
    let fwd_us = trace.forward_us.iter().sum::<f64>() / trace.forward_us.len() as f64;
    println!("per-sample compute mean {:.1} us (forward {:.1} us)", mean_us, fwd_us);
    let low_conf = trace.raw.iter().filter(|r| r.confidence < 0.9).count();
    let mid_conf = trace.raw.iter().filter(|r| r.confidence < 0.6).count();
    println!("raw low-confidence samples: {} (<0.9), {} (<0.6) of {}", low_conf, mid_conf, trace.raw.len());
    let flips: Vec<u64> = trace.raw.windows(2).filter(|w| w[0].class_id != w[1].class_id).map(|w| w[1].index).collect();
    println!("raw flip positions: {:?}", flips);

    // Event 2 abstention on the out-of-zone interval, across realizations
    for s in [1u64, 2, 3] {
        let mut c = cfg.clone();
        c.rng_seed = cfg.rng_seed ^ (0x4500 + s);
        let e2s = build_event_stream(&event2_script(), &c).unwrap();
        let tr = run_stream(&art.network, &art.scaler, &e2s, &sm).unwrap();
        let mut in_zone = Vec::new();
        for d in &tr.decisions {
            let t = tr.center_time(d);
            if (5.0..5.2).contains(&t) {
                in_zone.push(d.class_id);
            }
        }
        let n = in_zone.len() as f64;
        let abstain = in_zone.iter().filter(|&&c| c == -1).count() as f64 / n;
        let mut by_class = std::collections::BTreeMap::new();
        for &c in &in_zone {
            *by_class.entry(c).or_insert(0usize) += 1;
        }
        let worst = by_class.iter().filter(|&(&c, _)| c != -1).map(|(_, &k)| k as f64 / n)
            .fold(0.0f64, f64::max);
        println!("e2 seed {}: abstain {:.3}, worst wrong-class share {:.3}", s, abstain, worst);
    }
    let mut ev2_cfg = cfg.clone();
    ev2_cfg.rng_seed = cfg.rng_seed ^ 0x45_32;
    let e2 = build_event_stream(&event2_script(), &ev2_cfg).unwrap();
    let trace2 = run_stream(&art.network, &art.scaler, &e2, &sm).unwrap();
    let labels2 = e2.labels();
    println!("event2: acc {:.4} cov {:.4}",
        accuracy(&trace2, &labels2).unwrap(), coverage(&trace2).unwrap());
    let mut in_zone = Vec::new();
    for d in &trace2.decisions {
        let t = trace2.center_time(d);
        if (5.0..5.2).contains(&t) {
            in_zone.push(d.class_id);
        }
    }
    let n = in_zone.len() as f64;
    let abstain = in_zone.iter().filter(|&&c| c == -1).count() as f64 / n;
    println!("out-of-zone interval: {} decisions, abstain {:.3}", in_zone.len(), abstain);
    let mut by_class = std::collections::BTreeMap::new();
    for &c in &in_zone {
        *by_class.entry(c).or_insert(0usize) += 1;
    }
    for (c, k) in by_class {
        println!("  class {:3}: {:.3}", c, k as f64 / n);
    }
    let onsets2: Vec<EventOnset> = event2_script().onsets().iter().map(|&(c, s, e)| EventOnset { class_id: c, onset_s: s, end_s: e }).collect();
    let rep2 = streaming_report(&trace2, &labels2, &onsets2).unwrap();
    for ev in &rep2.events {
        println!("  class {:2} onset {:.1}s -> t_cls {:?} ms", ev.class_id, ev.onset_s, ev.t_cls_ms);
    }
    println!("raw flips e2 {} smoothed {}", flip_count(&trace2.raw_classes()), flip_count(&trace2.decision_classes()));
    println!("total {:.1?}", t0.elapsed());
}
