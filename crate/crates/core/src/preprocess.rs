//! Preparation of frame streams for training: per-channel standardization
//! fitted on the training split only, sliding-window sequence construction,
//! stratified block-based splitting, and inverse-frequency class weights.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabelledDataset;
use crate::error::{Error, Result};

/// Window length in samples; windows slide with stride 1.
pub const WINDOW_LEN: usize = 50;

/// Per-channel standardization: `(x - mean) / (stddev + epsilon)`.
///
/// Fit on the training split only and reused verbatim everywhere else, so no
/// statistics leak from validation or test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f32>,
    pub stddevs: Vec<f32>,
    pub epsilon: f32,
}

impl Scaler {
    /// Fits per-channel mean and population standard deviation.
    pub fn fit(channels: &ArrayView2<f32>) -> Result<Scaler> {
        let n = channels.nrows();
        if n == 0 {
            return Err(Error::Data("cannot fit a scaler on an empty split".to_string()));
        }
        let cols = channels.ncols();
        let mut means = vec![0f64; cols];
        for row in channels.rows() {
            for (c, &v) in row.iter().enumerate() {
                means[c] += v as f64;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut vars = vec![0f64; cols];
        for row in channels.rows() {
            for (c, &v) in row.iter().enumerate() {
                let d = v as f64 - means[c];
                vars[c] += d * d;
            }
        }
        Ok(Scaler {
            means: means.iter().map(|&m| m as f32).collect(),
            stddevs: vars.iter().map(|&v| (v / n as f64).sqrt() as f32).collect(),
            epsilon: 1e-8,
        })
    }

    pub fn fit_frames(dataset: &LabelledDataset) -> Result<Scaler> {
        Scaler::fit(&dataset.channel_matrix().view())
    }

    #[inline]
    pub fn transform_value(&self, channel: usize, value: f32) -> f32 {
        (value - self.means[channel]) / (self.stddevs[channel] + self.epsilon)
    }

    /// Standardizes a whole channel matrix in place.
    pub fn transform_in_place(&self, channels: &mut Array2<f32>) {
        for mut row in channels.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[c]) / (self.stddevs[c] + self.epsilon);
            }
        }
    }

    pub fn to_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn from_json<P: AsRef<Path>>(path: P) -> Result<Scaler> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Sliding windows over a frame stream, stored as views into one shared
/// channel matrix. A window starting at `p` covers frames `p..p+50` and is
/// labelled by its last frame, so the label carries the decision timestamp.
#[derive(Debug, Clone)]
pub struct WindowSet {
    channels: Arc<Array2<f32>>,
    labels: Arc<Vec<i8>>,
    /// Start offsets of the windows belonging to this set.
    pub starts: Vec<usize>,
    pub window_len: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// The window at position `i` as a `(window_len, channels)` view.
    pub fn window(&self, i: usize) -> ArrayView2<'_, f32> {
        let start = self.starts[i];
        self.channels.slice(ndarray::s![start..start + self.window_len, ..])
    }

    /// Label of the window at position `i` (its last frame's label).
    pub fn label(&self, i: usize) -> i8 {
        self.labels[self.starts[i] + self.window_len - 1]
    }

    pub fn labels(&self) -> Vec<i8> {
        self.starts.iter().map(|&p| self.labels[p + self.window_len - 1]).collect()
    }

    /// Copies the selected windows into a dense `(batch, len, channels)`
    /// tensor ready for the network input.
    pub fn gather(&self, idxs: &[usize]) -> Array3<f32> {
        let (len, ch) = (self.window_len, self.channels.ncols());
        let mut out = Array3::zeros((idxs.len(), len, ch));
        for (row, &i) in idxs.iter().enumerate() {
            let w = self.window(i);
            out.slice_mut(ndarray::s![row, .., ..]).assign(&w);
        }
        out
    }

    /// Returns a new set standardized with `scaler` (shared matrix is
    /// transformed once; window geometry is preserved).
    pub fn scaled(&self, scaler: &Scaler) -> WindowSet {
        let mut m = (*self.channels).clone();
        scaler.transform_in_place(&mut m);
        WindowSet {
            channels: Arc::new(m),
            labels: Arc::clone(&self.labels),
            starts: self.starts.clone(),
            window_len: self.window_len,
        }
    }

    /// Restricts the set to the given start offsets.
    fn with_starts(&self, starts: Vec<usize>) -> WindowSet {
        WindowSet {
            channels: Arc::clone(&self.channels),
            labels: Arc::clone(&self.labels),
            starts,
            window_len: self.window_len,
        }
    }

    /// Raw sample rows covered by at least one window of this set, as a
    /// matrix. This is what the scaler fits on for a training split.
    pub fn covered_samples(&self) -> Array2<f32> {
        let mut mask = vec![false; self.channels.nrows()];
        for &p in &self.starts {
            for m in mask.iter_mut().skip(p).take(self.window_len) {
                *m = true;
            }
        }
        let rows: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        let mut out = Array2::zeros((rows.len(), self.channels.ncols()));
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(r).assign(&self.channels.row(i));
        }
        out
    }
}

/// Standardizes a family of window sets that share one channel matrix,
/// transforming the matrix once.
pub fn scale_window_sets(scaler: &Scaler, sets: &[&WindowSet]) -> Vec<WindowSet> {
    if sets.is_empty() {
        return Vec::new();
    }
    let mut m = (*sets[0].channels).clone();
    scaler.transform_in_place(&mut m);
    let shared = Arc::new(m);
    sets.iter()
        .map(|s| WindowSet {
            channels: Arc::clone(&shared),
            labels: Arc::clone(&s.labels),
            starts: s.starts.clone(),
            window_len: s.window_len,
        })
        .collect()
}

/// Builds the full stride-`stride` window set over a dataset.
pub fn make_windows(dataset: &LabelledDataset, length: usize, stride: usize) -> Result<WindowSet> {
    if length == 0 || stride == 0 {
        return Err(Error::Config("window length and stride must be positive".to_string()));
    }
    if dataset.len() < length {
        return Err(Error::Data(format!(
            "need at least {} frames to build one window, have {}",
            length,
            dataset.len()
        )));
    }
    let starts: Vec<usize> = (0..=dataset.len() - length).step_by(stride).collect();
    Ok(WindowSet {
        channels: Arc::new(dataset.channel_matrix()),
        labels: Arc::new(dataset.labels()),
        starts,
        window_len: length,
    })
}

/// Split ratios and the raw-sample block length used to keep temporally
/// adjacent (overlapping) windows inside one split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    /// Block length in raw samples; must be at least the window length.
    pub block_length: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.70, validation: 0.10, test: 0.20, block_length: 400 }
    }
}

impl SplitSpec {
    fn validate(&self, window_len: usize) -> Result<()> {
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {}, expected 1", sum)));
        }
        if self.train < 0.0 || self.validation < 0.0 || self.test < 0.0 {
            return Err(Error::Config("split ratios must be non-negative".to_string()));
        }
        if self.block_length < window_len {
            return Err(Error::Config(format!(
                "block_length {} is smaller than the window length {}",
                self.block_length, window_len
            )));
        }
        Ok(())
    }
}

/// Largest-remainder allocation of `n` blocks to the three splits; when a
/// class has at least three blocks every split receives at least one.
fn allocate(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut rema: Vec<(f64, usize)> = Vec::with_capacity(3);
    let mut assigned = 0;
    for (i, &r) in ratios.iter().enumerate() {
        let exact = r * n as f64;
        counts[i] = exact.floor() as usize;
        assigned += counts[i];
        rema.push((exact - exact.floor(), i));
    }
    rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = n - assigned;
    for &(_, i) in rema.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    if n >= 3 {
        // guarantee presence in all three splits
        loop {
            let empty = (0..3).find(|&i| counts[i] == 0 && ratios[i] > 0.0);
            match empty {
                None => break,
                Some(i) => {
                    let donor = (0..3).max_by_key(|&j| counts[j]).unwrap();
                    counts[donor] -= 1;
                    counts[i] += 1;
                }
            }
        }
    }
    counts
}

/// Majority-style class tag for a block of windows: the dominant non-normal
/// class if it covers at least a quarter of the block, else the dominant
/// label overall. Ties break toward the smaller label.
fn block_class(labels: &[i8]) -> i8 {
    let mut counts: BTreeMap<i8, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let dominant = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&l, _)| l)
        .unwrap_or(0);
    let dominant_nonzero = counts
        .iter()
        .filter(|&(&l, _)| l != 0)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&l, &n)| (l, n));
    match dominant_nonzero {
        Some((l, n)) if 4 * n >= labels.len() => l,
        _ => dominant,
    }
}

/// Splits windows into train/validation/test by whole blocks of raw samples.
///
/// The raw sample axis is cut into blocks of `spec.block_length`; windows
/// that straddle a block boundary are dropped, the rest follow their block.
/// Blocks are grouped by their dominant class and each group is allocated
/// 70/10/20 (seeded shuffle), which keeps per-class proportions in each
/// split close to the global proportions while guaranteeing that no raw
/// sample is shared between splits.
pub fn stratified_block_split(
    windows: &WindowSet,
    spec: &SplitSpec,
    seed: u64,
) -> Result<(WindowSet, WindowSet, WindowSet)> {
    spec.validate(windows.window_len)?;
    let block = spec.block_length;

    // bucket windows by containing block, dropping straddlers
    let mut per_block: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &start in &windows.starts {
        let end = start + windows.window_len - 1;
        if start / block == end / block {
            per_block.entry(start / block).or_default().push(start);
        }
    }

    // group blocks by class tag
    let mut groups: BTreeMap<i8, Vec<usize>> = BTreeMap::new();
    for (&b, starts) in &per_block {
        let labels: Vec<i8> = starts
            .iter()
            .map(|&p| windows.labels[p + windows.window_len - 1])
            .collect();
        groups.entry(block_class(&labels)).or_default().push(b);
    }

    let ratios = [spec.train, spec.validation, spec.test];
    let n_splits = ratios.iter().filter(|&&r| r > 0.0).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split_starts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for (&class, blocks) in &mut groups {
        if blocks.len() < n_splits {
            return Err(Error::Data(format!(
                "class {} spans only {} block(s); at least {} are needed to populate every split",
                class,
                blocks.len(),
                n_splits
            )));
        }
        let mut shuffled = blocks.clone();
        shuffled.shuffle(&mut rng);
        let counts = allocate(shuffled.len(), ratios);
        let mut cursor = 0;
        for (s, &count) in counts.iter().enumerate() {
            for &b in &shuffled[cursor..cursor + count] {
                split_starts[s].extend(per_block[&b].iter().copied());
            }
            cursor += count;
        }
    }

    for starts in &mut split_starts {
        starts.sort_unstable();
    }
    let [train, validation, test] = split_starts;
    Ok((
        windows.with_starts(train),
        windows.with_starts(validation),
        windows.with_starts(test),
    ))
}

/// Inverse-frequency class weights: `w_k = N / (K_present * n_k)`, so the
/// mean weight over samples is about one and rare classes count for more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: BTreeMap<i8, f64>,
}

impl ClassWeights {
    /// Weight for a class; classes unseen at fit time weigh 1.
    pub fn weight(&self, class: i8) -> f64 {
        self.weights.get(&class).copied().unwrap_or(1.0)
    }

    /// Dense weight vector for classes `0..k`.
    pub fn as_vec(&self, k: usize) -> Vec<f32> {
        (0..k as i8).map(|c| self.weight(c) as f32).collect()
    }
}

pub fn compute_class_weights(labels: &[i8]) -> Result<ClassWeights> {
    if labels.is_empty() {
        return Err(Error::Data("cannot compute class weights on empty labels".to_string()));
    }
    let mut counts: BTreeMap<i8, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    let weights = counts
        .into_iter()
        .map(|(class, count)| (class, n / (k * count as f64)))
        .collect();
    Ok(ClassWeights { weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{SampleFrame, NUM_CHANNELS};
    use crate::waveform::{build_event_stream, event1_script, generate_steady_state, GridConfig};

    fn toy_dataset(labels: &[i8]) -> LabelledDataset {
        let frames = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| SampleFrame {
                index: i as u64,
                time: i as f64 / 4800.0,
                channels: [i as f32; NUM_CHANNELS],
                label,
            })
            .collect();
        LabelledDataset { sample_rate: 4800.0, frames }
    }

    #[test]
    fn two_point_scaler_statistics() {
        let mut m = Array2::zeros((2, NUM_CHANNELS));
        m.row_mut(0).fill(0.0);
        m.row_mut(1).fill(2.0);
        let scaler = Scaler::fit(&m.view()).unwrap();
        assert_eq!(scaler.means[0], 1.0);
        assert_eq!(scaler.stddevs[0], 1.0);
        let t = scaler.transform_value(0, 3.0);
        assert!((t - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_channel_transforms_to_zero() {
        let mut m = Array2::zeros((10, NUM_CHANNELS));
        m.fill(5.0);
        let scaler = Scaler::fit(&m.view()).unwrap();
        assert_eq!(scaler.stddevs[0], 0.0);
        assert_eq!(scaler.transform_value(0, 5.0), 0.0);
    }

    #[test]
    fn scaler_depends_on_train_split_only() {
        let cfg = GridConfig::default();
        let ds = generate_steady_state(&cfg, 0.5).unwrap();
        let m = ds.channel_matrix();
        let train = m.slice(ndarray::s![..1200, ..]);
        let scaler = Scaler::fit(&train).unwrap();

        // perturb the "test" region; the stored scaler must not change
        let mut perturbed = m.clone();
        perturbed.slice_mut(ndarray::s![1200.., ..]).mapv_inplace(|v| v + 3.0);
        let scaler_again = Scaler::fit(&perturbed.slice(ndarray::s![..1200, ..])).unwrap();
        assert_eq!(scaler, scaler_again);

        // and a shifted test distribution stays shifted after the transform
        let mut test = perturbed.slice(ndarray::s![1200.., ..]).to_owned();
        scaler.transform_in_place(&mut test);
        let mean = test.column(0).iter().map(|&v| v as f64).sum::<f64>() / test.nrows() as f64;
        assert!(mean.abs() > 1.0, "leak check: transformed test mean {}", mean);
    }

    #[test]
    fn window_counts() {
        let ds = toy_dataset(&vec![0i8; 4800]);
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        assert_eq!(ws.len(), 4751);
        let ds50 = toy_dataset(&vec![0i8; 50]);
        assert_eq!(make_windows(&ds50, WINDOW_LEN, 1).unwrap().len(), 1);
        let ds49 = toy_dataset(&vec![0i8; 49]);
        assert!(make_windows(&ds49, WINDOW_LEN, 1).is_err());
    }

    #[test]
    fn window_label_is_last_frame_label() {
        let mut labels = vec![0i8; 100];
        for l in labels.iter_mut().skip(40) {
            *l = 3;
        }
        let ds = toy_dataset(&labels);
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        // window starting at 0 spans frames 0..49: boundary at its 40th sample
        assert_eq!(ws.label(0), 3);
        assert_eq!(ws.labels()[0], 3);
    }

    #[test]
    fn window_reconstruction_matches_frames() {
        let cfg = GridConfig::default();
        let ds = generate_steady_state(&cfg, 0.1).unwrap();
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        let w = ws.window(7);
        for t in 0..WINDOW_LEN {
            for c in 0..NUM_CHANNELS {
                assert_eq!(w[[t, c]], ds.frames[7 + t].channels[c]);
            }
        }
    }

    #[test]
    fn single_class_split_sizes_near_ratios() {
        let ds = toy_dataset(&vec![0i8; 40 * 400]);
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        let (train, val, test) = stratified_block_split(&ws, &SplitSpec::default(), 1).unwrap();
        let total = (train.len() + val.len() + test.len()) as f64;
        let per_block = 400 - WINDOW_LEN + 1; // windows fully inside one block
        for (set, ratio) in [(&train, 0.7), (&val, 0.1), (&test, 0.2)] {
            let got = set.len() as f64 / total;
            assert!(
                (got - ratio).abs() <= per_block as f64 / total,
                "split fraction {} vs ratio {}",
                got,
                ratio
            );
        }
    }

    #[test]
    fn split_partition_is_exact() {
        let ds = toy_dataset(&vec![0i8; 10 * 400]);
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        let spec = SplitSpec::default();
        let (train, val, test) = stratified_block_split(&ws, &spec, 9).unwrap();
        let mut seen: Vec<usize> = Vec::new();
        seen.extend(&train.starts);
        seen.extend(&val.starts);
        seen.extend(&test.starts);
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), train.len() + val.len() + test.len(), "splits overlap");
        let dropped: Vec<usize> = ws
            .starts
            .iter()
            .copied()
            .filter(|&p| p / spec.block_length != (p + WINDOW_LEN - 1) / spec.block_length)
            .collect();
        assert_eq!(seen.len() + dropped.len(), ws.len());
        // dropped windows are exactly the straddlers, so no raw sample crosses splits
        for &p in &dropped {
            assert!(!seen.contains(&p));
        }
    }

    #[test]
    fn event1_windows_split_has_every_class_everywhere() {
        let ds = build_event_stream(&event1_script(), &GridConfig::default()).unwrap();
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        let (train, val, test) = stratified_block_split(&ws, &SplitSpec::default(), 3).unwrap();
        for set in [&train, &val, &test] {
            let labels = set.labels();
            for class in [0i8, 1, 7, 10, 4, 13] {
                assert!(labels.contains(&class), "class {} missing from a split", class);
            }
        }
    }

    #[test]
    fn block_smaller_than_window_is_rejected() {
        let ds = toy_dataset(&vec![0i8; 4000]);
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        let spec = SplitSpec { block_length: 49, ..SplitSpec::default() };
        assert!(stratified_block_split(&ws, &spec, 0).is_err());
    }

    #[test]
    fn class_with_too_few_blocks_is_rejected() {
        // one lone anomalous block cannot feed three splits
        let mut labels = vec![0i8; 10 * 400];
        for l in labels.iter_mut().take(400) {
            *l = 5;
        }
        let ds = toy_dataset(&labels);
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        assert!(stratified_block_split(&ws, &SplitSpec::default(), 0).is_err());
    }

    #[test]
    fn class_weight_formula() {
        let mut labels = vec![0i8; 90];
        labels.extend(vec![1i8; 10]);
        let w = compute_class_weights(&labels).unwrap();
        assert!((w.weight(0) - 100.0 / (2.0 * 90.0)).abs() < 1e-12);
        assert!((w.weight(1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_classes_weigh_one() {
        let mut labels = vec![2i8; 40];
        labels.extend(vec![5i8; 40]);
        let w = compute_class_weights(&labels).unwrap();
        assert_eq!(w.weight(2), 1.0);
        assert_eq!(w.weight(5), 1.0);
        assert!(compute_class_weights(&[]).is_err());
    }

    #[test]
    fn event1_training_weights_favor_faults() {
        let ds = build_event_stream(&event1_script(), &GridConfig::default()).unwrap();
        let ws = make_windows(&ds, WINDOW_LEN, 1).unwrap();
        let w = compute_class_weights(&ws.labels()).unwrap();
        assert!(w.weight(0) < 1.0);
        for class in [1i8, 7, 10, 4, 13] {
            assert!(w.weight(class) > 1.0, "class {} weight {}", class, w.weight(class));
        }
    }
}
