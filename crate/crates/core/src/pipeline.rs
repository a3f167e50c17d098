//! End-to-end orchestration: window a labelled stream, split it without
//! leakage, fit the scaler on the training split, train a model, and score
//! it offline. Shared by the CLI and the acceptance suite.

use crate::dataset::LabelledDataset;
use crate::error::Result;
use crate::metrics::{offline_report, OfflineReport};
use crate::nn::{train, ModelSpec, Network, TrainConfig, TrainingHistory};
use crate::preprocess::{
    compute_class_weights, make_windows, scale_window_sets, stratified_block_split, Scaler,
    SplitSpec, WindowSet, WINDOW_LEN,
};

/// Everything produced by one training run.
pub struct TrainedArtifacts {
    pub network: Network<f32>,
    pub scaler: Scaler,
    pub history: TrainingHistory,
    pub offline: OfflineReport,
}

/// Batched argmax predictions over a window set.
pub fn predict_classes(network: &Network<f32>, set: &WindowSet) -> Result<Vec<i8>> {
    let mut out = Vec::with_capacity(set.len());
    let idxs: Vec<usize> = (0..set.len()).collect();
    for chunk in idxs.chunks(512) {
        let x = set.gather(chunk);
        let probs = network.forward(x.view())?;
        for row in probs.rows() {
            let mut best = 0usize;
            let mut best_v = f32::NEG_INFINITY;
            for (k, &v) in row.iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            out.push(best as i8);
        }
    }
    Ok(out)
}

/// Windows the stream, splits it, fits the scaler on the training split
/// only, computes inverse-frequency class weights, trains, and scores the
/// held-out test split.
pub fn train_on_dataset(
    dataset: &LabelledDataset,
    spec: &ModelSpec,
    split: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<TrainedArtifacts> {
    let windows = make_windows(dataset, WINDOW_LEN, 1)?;
    let (train_w, val_w, test_w) = stratified_block_split(&windows, split, cfg.seed)?;
    let scaler = Scaler::fit(&train_w.covered_samples().view())?;
    let scaled = scale_window_sets(&scaler, &[&train_w, &val_w, &test_w]);
    let weights = compute_class_weights(&train_w.labels())?;

    let mut train_cfg = cfg.clone();
    if train_cfg.class_weights.is_none() {
        train_cfg.class_weights = Some(weights.as_vec(spec.num_classes));
    }
    let (network, history) = train(spec, &scaled[0], &scaled[1], &train_cfg)?;

    let predictions = predict_classes(&network, &scaled[2])?;
    let offline = offline_report(
        &predictions,
        &scaled[2].labels(),
        spec.num_classes,
        network.param_count(),
    )?;
    Ok(TrainedArtifacts { network, scaler, history, offline })
}
