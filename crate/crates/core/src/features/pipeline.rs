use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract, ChannelInputs, FeatureError, FeatureSpec, Vocabulary};
use crate::corpus::{ChannelClass, LabelSet};

pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    /// Column indices that survive, ascending.
    pub keep: Vec<usize>,
    pub dropped: Vec<DroppedFeature>,
}

/// Drop columns whose population variance is below `floor`.
pub fn preprocess(
    names: &[String],
    rows: &[Vec<f64>],
    floor: f64,
) -> Result<Preprocessed, FeatureError> {
    if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
        return Err(FeatureError::Shape(format!(
            "row has {} values for {} names",
            r.len(),
            names.len()
        )));
    }
    let n = rows.len() as f64;
    let mut out = Preprocessed {
        keep: Vec::new(),
        dropped: Vec::new(),
    };
    for (j, name) in names.iter().enumerate() {
        let variance = if rows.is_empty() {
            0.0
        } else {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n
        };
        if !variance.is_finite() {
            return Err(FeatureError::NonFinite(name.clone()));
        }
        if variance < floor {
            out.dropped.push(DroppedFeature {
                name: name.clone(),
                variance,
            });
        } else {
            out.keep.push(j);
        }
    }
    if out.keep.is_empty() {
        return Err(FeatureError::AllDropped);
    }
    Ok(out)
}

/// Fitted extraction: spec, vocabularies and the surviving columns. The same
/// pipeline is persisted next to matrices and inside models so inference
/// reproduces training-time vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub version: u32,
    pub spec: FeatureSpec,
    pub vocab: Vocabulary,
    /// Names before variance filtering.
    pub raw_names: Vec<String>,
    /// Names of the emitted columns.
    pub names: Vec<String>,
    keep: Vec<usize>,
    pub dropped: Vec<DroppedFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub channel_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub label: Option<ChannelClass>,
}

impl FeaturePipeline {
    /// Build vocabularies from `inputs`, then fit.
    pub fn fit(spec: FeatureSpec, inputs: &[ChannelInputs]) -> Result<Self, FeatureError> {
        spec.validate()?;
        let vocab = Vocabulary::build(inputs, &spec);
        Self::fit_with_vocab(spec, vocab, inputs)
    }

    pub fn fit_with_vocab(
        spec: FeatureSpec,
        vocab: Vocabulary,
        inputs: &[ChannelInputs],
    ) -> Result<Self, FeatureError> {
        spec.validate()?;
        let raw_names = spec.feature_names(&vocab);
        let rows: Vec<Vec<f64>> = inputs.par_iter().map(|i| extract(i, &spec, &vocab)).collect();
        let pre = preprocess(&raw_names, &rows, spec.variance_floor)?;
        for d in &pre.dropped {
            log::info!("dropped {} (variance {:.3e})", d.name, d.variance);
        }
        Ok(FeaturePipeline {
            version: PIPELINE_VERSION,
            names: pre.keep.iter().map(|&j| raw_names[j].clone()).collect(),
            keep: pre.keep,
            dropped: pre.dropped,
            raw_names,
            spec,
            vocab,
        })
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn transform(&self, input: &ChannelInputs) -> Vec<f64> {
        let raw = extract(input, &self.spec, &self.vocab);
        self.keep.iter().map(|&j| raw[j]).collect()
    }

    pub fn vector(&self, input: &ChannelInputs, label: Option<ChannelClass>) -> FeatureVector {
        FeatureVector {
            channel_id: input.record.channel_id.clone(),
            names: self.names.clone(),
            values: self.transform(input),
            label,
        }
    }

    /// Matrix over `inputs`, labeled from `labels` where known.
    pub fn matrix(&self, inputs: &[ChannelInputs], labels: &LabelSet) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            channel_ids: inputs.iter().map(|i| i.record.channel_id.clone()).collect(),
            labels: inputs
                .iter()
                .map(|i| labels.get(&i.record.channel_id).map(|l| l.value))
                .collect(),
            rows: inputs.par_iter().map(|i| self.transform(i)).collect(),
        }
    }

    /// Check internal consistency after deserialization.
    pub fn check(&self) -> Result<(), FeatureError> {
        if self.version != PIPELINE_VERSION {
            return Err(FeatureError::Version {
                found: self.version,
                expected: PIPELINE_VERSION,
            });
        }
        self.spec.validate()?;
        if self.raw_names != self.spec.feature_names(&self.vocab) {
            return Err(FeatureError::Format("raw names disagree with spec and vocabulary".into()));
        }
        let consistent = self.keep.len() == self.names.len()
            && self
                .keep
                .iter()
                .zip(&self.names)
                .all(|(&j, n)| self.raw_names.get(j) == Some(n));
        if !consistent {
            return Err(FeatureError::Format("kept columns disagree with names".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        // Read the version first so an old file gets a version error rather
        // than a field mismatch.
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.version != PIPELINE_VERSION {
            return Err(FeatureError::Version {
                found: probe.version,
                expected: PIPELINE_VERSION,
            });
        }
        let p: FeaturePipeline = serde_json::from_str(text)?;
        p.check()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        std::fs::write(path, self.to_json()).map_err(|e| FeatureError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|e| FeatureError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// JSON sidecar that accompanies an exported matrix.
pub fn sidecar_path(matrix: &Path) -> PathBuf {
    matrix.with_extension("json")
}

/// Rows of feature values with channel ids and optional labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub channel_ids: Vec<String>,
    pub labels: Vec<Option<ChannelClass>>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            channel_id: self.channel_ids[i].clone(),
            names: self.names.clone(),
            values: self.rows[i].clone(),
            label: self.labels[i],
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// The labeled rows only.
    pub fn labeled(&self) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i].is_some()).collect();
        self.select(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            channel_ids: idx.iter().map(|&i| self.channel_ids[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Labels of a fully labeled matrix.
    pub fn classes(&self) -> Result<Vec<ChannelClass>, FeatureError> {
        self.labels
            .iter()
            .zip(&self.channel_ids)
            .map(|(l, id)| l.ok_or_else(|| FeatureError::Format(format!("{id} has no label"))))
            .collect()
    }

    /// CSV with columns `channel_id,label,<features...>`; label is 0, 1 or
    /// empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["channel_id".to_string(), "label".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.channel_ids[i].clone(),
                self.labels[i].map(|l| l.index().to_string()).unwrap_or_default(),
            ];
            rec.extend(self.rows[i].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "channel_id" || &header[1] != "label" {
            return Err(FeatureError::Format(
                "header must start with channel_id,label".into(),
            ));
        }
        let mut m = FeatureMatrix {
            names: header.iter().skip(2).map(String::from).collect(),
            ..Default::default()
        };
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let label = match rec[1].trim() {
                "" => None,
                s => Some(s.parse::<ChannelClass>().map_err(|e| {
                    FeatureError::Format(format!("row {}: {e}", line + 2))
                })?),
            };
            let row = rec
                .iter()
                .skip(2)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| FeatureError::Format(format!("row {}: bad value {v:?}", line + 2)))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            m.channel_ids.push(rec[0].to_string());
            m.labels.push(label);
            m.rows.push(row);
        }
        Ok(m)
    }

    /// Write the CSV and, when given, the pipeline sidecar.
    pub fn save(&self, path: &Path, pipeline: Option<&FeaturePipeline>) -> Result<(), FeatureError> {
        let f = std::fs::File::create(path).map_err(|e| FeatureError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        if let Some(p) = pipeline {
            p.save(&sidecar_path(path))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let f = std::fs::File::open(path).map_err(|e| FeatureError::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
