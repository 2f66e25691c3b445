use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use audit_core::corpus::{
    load_corpus, propagate_labels, read_label_file, save_corpus, write_label_file, ChannelClass,
    Corpus, Format, LabelSet,
};
use audit_core::features::{prepare_inputs, FeaturePipeline, FeatureSpec};
use audit_core::synth::{generate, SignalPlacement, SynthConfig};
use audit_core::textlytics::TextAnalyzer;

use crate::{CorpusFormat, Placement};

/// A directory is a CSV bundle, anything else JSONL.
pub fn open_corpus(path: &Path) -> Result<Corpus> {
    let format = if path.is_dir() {
        Format::CsvBundle
    } else {
        Format::Jsonl
    };
    load_corpus(path, format).with_context(|| format!("loading {}", path.display()))
}

/// Propagated labels, optionally overridden from a label file.
pub fn labels_for(corpus: &Corpus, overrides: Option<&Path>) -> Result<LabelSet> {
    let labels = propagate_labels(corpus);
    Ok(match overrides {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            labels.with_overrides(&read_label_file(f)?)
        }
        None => labels,
    })
}

pub fn ingest(input: &Path, format: CorpusFormat, out: &Path, labels_out: Option<&Path>) -> Result<()> {
    let format = match format {
        CorpusFormat::Jsonl => Format::Jsonl,
        CorpusFormat::Csv => Format::CsvBundle,
    };
    let corpus = load_corpus(input, format).with_context(|| format!("loading {}", input.display()))?;
    save_corpus(&corpus, out)?;
    let labels = propagate_labels(&corpus);
    println!(
        "{} channels, {} videos; labels: {} suitable, {} disturbing, {} excluded",
        corpus.len(),
        corpus.videos().len(),
        labels.count(ChannelClass::Suitable),
        labels.count(ChannelClass::Disturbing),
        labels.excluded.len()
    );
    if let Some(p) = labels_out {
        let map = labels.labels.iter().map(|(id, l)| (id.clone(), l.value)).collect();
        write_label_file(&map, File::create(p)?)?;
    }
    Ok(())
}

pub fn sentiment(corpus: &Path, out: &Path) -> Result<()> {
    let corpus = open_corpus(corpus)?;
    let analyzer = TextAnalyzer::bundled();
    let mut w = BufWriter::new(File::create(out)?);
    for ch in corpus.channels() {
        let s = analyzer.analyze(ch)?;
        serde_json::to_writer(&mut w, &s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    println!("{} channels analyzed", corpus.len());
    Ok(())
}

pub fn features(
    corpus: &Path,
    spec: Option<&Path>,
    creation_time: bool,
    labels: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let corpus = open_corpus(corpus)?;
    let mut spec = match spec {
        Some(p) => FeatureSpec::load(p)?,
        None => FeatureSpec::default(),
    };
    spec.creation_time_only |= creation_time;
    let labels = labels_for(&corpus, labels)?;
    let inputs = prepare_inputs(&corpus, &TextAnalyzer::bundled())?;
    let pipeline = FeaturePipeline::fit(spec, &inputs)?;
    let matrix = pipeline.matrix(&inputs, &labels);
    matrix.save(out, Some(&pipeline))?;
    println!(
        "{} rows x {} features ({} dropped by the variance filter)",
        matrix.len(),
        pipeline.dimension(),
        pipeline.dropped.len()
    );
    Ok(())
}

pub fn synth(channels: usize, seed: u64, placement: Placement, out: &Path) -> Result<()> {
    let cfg = SynthConfig {
        channels,
        seed,
        placement: match placement {
            Placement::Everywhere => SignalPlacement::Everywhere,
            Placement::CreationTime => SignalPlacement::CreationTime,
        },
        ..Default::default()
    };
    let corpus = generate(&cfg);
    save_corpus(&corpus, out)?;
    println!("{} channels, {} videos", corpus.len(), corpus.videos().len());
    Ok(())
}
