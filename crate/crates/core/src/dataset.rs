//! Frozen epoch datasets.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes   "SGDADS\0\x01"
//! hlen      u64       length of the JSON header in bytes
//! header    hlen      UTF-8 JSON (DatasetHeader)
//! features  rows*bins f32, row-major
//! labels    rows      u32, index into header.classes
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::augment::{LabeledSpectrum, Provenance};
use crate::error::{Error, Result};
use crate::label::Label;

pub const MAGIC: &[u8; 8] = b"SGDADS\0\x01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub rows: usize,
    pub bins: usize,
    pub epoch: u64,
    pub classes: Vec<Label>,
    pub class_counts: BTreeMap<Label, usize>,
    pub freq_axis_hz: Vec<f64>,
    pub provenance: Vec<Provenance>,
    /// Echo of the configuration that produced the data.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenDataset {
    pub header: DatasetHeader,
    pub features: Vec<f32>,
    pub labels: Vec<u32>,
}

impl FrozenDataset {
    pub fn from_samples(
        samples: &[LabeledSpectrum],
        classes: &[Label],
        epoch: u64,
        config: serde_json::Value,
    ) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("dataset", "no samples"))?;
        let bins = first.spectrum.bin_count();
        let mut features = Vec::with_capacity(samples.len() * bins);
        let mut labels = Vec::with_capacity(samples.len());
        let mut class_counts = BTreeMap::new();
        for s in samples {
            if s.spectrum.channel_count() != 1 || s.spectrum.bin_count() != bins {
                return Err(Error::DimensionMismatch {
                    expected: bins,
                    found: s.spectrum.bin_count(),
                });
            }
            let idx = classes
                .iter()
                .position(|c| *c == s.label)
                .ok_or_else(|| Error::UnknownLabel(s.label.to_string()))?;
            features.extend(s.spectrum.channels[0].iter().map(|&v| v as f32));
            labels.push(idx as u32);
            *class_counts.entry(s.label).or_insert(0) += 1;
        }
        Ok(FrozenDataset {
            header: DatasetHeader {
                rows: samples.len(),
                bins,
                epoch,
                classes: classes.to_vec(),
                class_counts,
                freq_axis_hz: first.spectrum.freq_axis_hz.clone(),
                provenance: samples.iter().map(|s| s.provenance).collect(),
                config,
            },
            features,
            labels,
        })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.header.bins..(i + 1) * self.header.bins]
    }

    pub fn label(&self, i: usize) -> Label {
        self.header.classes[self.labels[i] as usize]
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<dataset>", e);
        let header = serde_json::to_vec(&self.header)?;
        out.write_all(MAGIC).map_err(io)?;
        out.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
        out.write_all(&header).map_err(io)?;
        let mut body = Vec::with_capacity(4 * (self.features.len() + self.labels.len()));
        for v in &self.features {
            body.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.labels {
            body.extend_from_slice(&l.to_le_bytes());
        }
        out.write_all(&body).map_err(io)?;
        out.flush().map_err(io)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io("<dataset>", e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Container("missing magic".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let header_end = 16usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Container("header length exceeds file".into()))?;
        let header: DatasetHeader = serde_json::from_slice(&bytes[16..header_end])?;
        let n_features = header
            .rows
            .checked_mul(header.bins)
            .ok_or_else(|| Error::Container("rows * bins overflows".into()))?;
        let expected = header_end + 4 * (n_features + header.rows);
        if bytes.len() != expected {
            return Err(Error::Container(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let words = bytes[header_end..]
            .chunks_exact(4)
            .map(|c| <[u8; 4]>::try_from(c).expect("4 bytes"));
        let mut features = Vec::with_capacity(n_features);
        let mut labels = Vec::with_capacity(header.rows);
        for (i, w) in words.enumerate() {
            if i < n_features {
                features.push(f32::from_le_bytes(w));
            } else {
                labels.push(u32::from_le_bytes(w));
            }
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= header.classes.len()) {
            return Err(Error::Container(format!("label index {l} out of range")));
        }
        Ok(FrozenDataset {
            header,
            features,
            labels,
        })
    }
}
