//! Labelled sample streams and their on-disk CSV form.
//!
//! A stream is a sequence of time-synchronized frames, each carrying the 14
//! channel values of two merging units (MU23 and MU32, seven CT/PT signals
//! apiece) plus a per-sample ground-truth class label. Label 0 is normal
//! operation, 1..=17 are the anomaly classes, and -1 marks an out-of-zone
//! disturbance that is outside the trained taxonomy.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Channels per merging unit.
pub const CHANNELS_PER_MU: usize = 7;
/// Total synchronized channels (two merging units).
pub const NUM_CHANNELS: usize = 2 * CHANNELS_PER_MU;
/// Number of trained classes (normal + 17 anomalies).
pub const NUM_CLASSES: usize = 18;
/// Label used for out-of-zone / unknown events.
pub const OUT_OF_ZONE_LABEL: i8 = -1;

/// Fixed CSV column names for the 14 channels, in wire order.
pub const CHANNEL_NAMES: [&str; NUM_CHANNELS] = [
    "mu23_ia", "mu23_ib", "mu23_ic", "mu23_in", "mu23_van", "mu23_vbn", "mu23_vcn",
    "mu32_ia", "mu32_ib", "mu32_ic", "mu32_in", "mu32_van", "mu32_vbn", "mu32_vcn",
];

/// One time step of the synchronized stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFrame {
    pub index: u64,
    /// Seconds since stream start; equals `index / sample_rate`.
    pub time: f64,
    pub channels: [f32; NUM_CHANNELS],
    /// Class id in 0..=17, or -1 for out-of-zone.
    pub label: i8,
}

/// A contiguous labelled stream of frames at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledDataset {
    pub sample_rate: f64,
    pub frames: Vec<SampleFrame>,
}

impl LabelledDataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Duration covered by the stream in seconds.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.sample_rate
    }

    pub fn labels(&self) -> Vec<i8> {
        self.frames.iter().map(|f| f.label).collect()
    }

    /// Channel values as an `(n_frames, 14)` matrix in frame order.
    pub fn channel_matrix(&self) -> Array2<f32> {
        let mut m = Array2::zeros((self.frames.len(), NUM_CHANNELS));
        for (i, frame) in self.frames.iter().enumerate() {
            for (c, &v) in frame.channels.iter().enumerate() {
                m[[i, c]] = v;
            }
        }
        m
    }

    /// Frames whose time lies in `[start, end)`.
    pub fn frame_range(&self, start: f64, end: f64) -> &[SampleFrame] {
        let lo = (start * self.sample_rate).ceil() as usize;
        let hi = ((end * self.sample_rate).ceil() as usize).min(self.frames.len());
        &self.frames[lo.min(self.frames.len())..hi]
    }

    /// A new dataset holding the first `n` frames.
    pub fn truncated(&self, n: usize) -> LabelledDataset {
        LabelledDataset {
            sample_rate: self.sample_rate,
            frames: self.frames[..n.min(self.frames.len())].to_vec(),
        }
    }

    /// Writes the stream as CSV: `index,time,<14 channel columns>,label`.
    ///
    /// Floats are written in shortest round-trip form, so a read of the
    /// written file reproduces the channel values bit for bit.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = Vec::with_capacity(NUM_CHANNELS + 3);
        header.push("index");
        header.push("time");
        header.extend_from_slice(&CHANNEL_NAMES);
        header.push("label");
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(NUM_CHANNELS + 3);
        for frame in &self.frames {
            record.clear();
            record.push(frame.index.to_string());
            record.push(frame.time.to_string());
            for v in &frame.channels {
                record.push(v.to_string());
            }
            record.push(frame.label.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a stream from CSV written by [`write_csv`](Self::write_csv).
    ///
    /// The sample rate is recovered from the time column of the first two
    /// rows and rounded to the nearest hertz.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<LabelledDataset> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)?;
        {
            let header = r.headers()?;
            let expected = 3 + NUM_CHANNELS;
            if header.len() != expected {
                return Err(Error::CsvFormat {
                    line: 1,
                    message: format!("expected {} columns, found {}", expected, header.len()),
                });
            }
            if &header[0] != "index" || &header[1] != "time" || &header[header.len() - 1] != "label"
            {
                return Err(Error::CsvFormat {
                    line: 1,
                    message: "header must be index,time,<channels>,label".to_string(),
                });
            }
            for (i, name) in CHANNEL_NAMES.iter().enumerate() {
                if &header[i + 2] != *name {
                    return Err(Error::CsvFormat {
                        line: 1,
                        message: format!("channel column {} must be named {}", i + 2, name),
                    });
                }
            }
        }

        let mut frames = Vec::new();
        for (row_idx, record) in r.records().enumerate() {
            let record = record?;
            let line = row_idx as u64 + 2;
            if record.len() != 3 + NUM_CHANNELS {
                return Err(Error::CsvFormat {
                    line,
                    message: format!(
                        "expected {} fields, found {}",
                        3 + NUM_CHANNELS,
                        record.len()
                    ),
                });
            }
            let parse_err = |field: &str, what: &str| Error::CsvFormat {
                line,
                message: format!("non-numeric {} value {:?}", what, field),
            };
            let index: u64 = record[0].parse().map_err(|_| parse_err(&record[0], "index"))?;
            let time: f64 = record[1].parse().map_err(|_| parse_err(&record[1], "time"))?;
            let mut channels = [0f32; NUM_CHANNELS];
            for (c, slot) in channels.iter_mut().enumerate() {
                let field = &record[c + 2];
                *slot = field.parse().map_err(|_| parse_err(field, "channel"))?;
            }
            let label_field = &record[2 + NUM_CHANNELS];
            let label: i8 = label_field
                .parse()
                .map_err(|_| parse_err(label_field, "label"))?;
            frames.push(SampleFrame { index, time, channels, label });
        }

        if frames.len() < 2 {
            return Err(Error::Data(
                "dataset must contain at least two rows to recover the sample rate".to_string(),
            ));
        }
        let dt = frames[1].time - frames[0].time;
        if dt <= 0.0 {
            return Err(Error::Data("time column must be strictly increasing".to_string()));
        }
        let sample_rate = (1.0 / dt).round();
        Ok(LabelledDataset { sample_rate, frames })
    }
}
