//! Versioned JSON checkpoints: hyperparameters, variant, vocabulary,
//! skeleton cache and every named parameter array.
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so a loaded model evaluates bit-identically to the saved one.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::model::{Hyper, Model, VariantSpec};
use crate::params::Param;
use crate::question::SkeletonCache;

pub const FORMAT: &str = "antnet-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Run manifest this checkpoint belongs to, when written by a CLI run.
    #[serde(default)]
    pub manifest_id: Option<String>,
    pub hyper: Hyper,
    pub variant: VariantSpec,
    pub vocab: Vocab,
    pub skeleton_cache: SkeletonCache,
    pub params: Vec<Param>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, manifest_id: Option<String>) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            manifest_id,
            hyper: model.hyper().clone(),
            variant: model.variant(),
            vocab: model.vocab.clone(),
            skeleton_cache: model.cache.clone(),
            params: model.store.as_slice().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        let mut model = Model::new(self.hyper, self.variant, self.vocab, 0)?;
        model.store.load_values(&self.params)?;
        for (id, p) in model.store.ids().zip(&self.params).collect::<Vec<_>>() {
            model.store.set_trainable(id, p.trainable);
        }
        model.cache = self.skeleton_cache;
        Ok(model)
    }
}

pub fn write_checkpoint(model: &Model, manifest_id: Option<String>, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer(&mut w, &Checkpoint::from_model(model, manifest_id))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint, rejecting unknown formats and versions.
pub fn read_checkpoint(r: impl Read) -> Result<Checkpoint> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(r))?;
    let format = value.get("format").and_then(|v| v.as_str());
    if format != Some(FORMAT) {
        return Err(Error::Checkpoint(format!("not an {FORMAT} file")));
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == VERSION as u64 => {}
        Some(v) => return Err(Error::Checkpoint(format!("unsupported checkpoint version {v}"))),
        None => return Err(Error::Checkpoint("checkpoint has no version".into())),
    }
    Ok(serde_json::from_value(value)?)
}

pub fn save_checkpoint(model: &Model, manifest_id: Option<String>, path: &Path) -> Result<()> {
    write_checkpoint(model, manifest_id, File::create(path)?)
}

/// Loads a model and the manifest id it was saved with.
pub fn load_checkpoint(path: &Path) -> Result<(Model, Option<String>)> {
    let ck = read_checkpoint(File::open(path)?)?;
    let id = ck.manifest_id.clone();
    Ok((ck.into_model()?, id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::toy;
    use crate::train::{evaluate, predict_all};

    fn trained() -> (Model, Vec<crate::corpus::IndexedSample>) {
        let samples = toy::samples(2, 10);
        let mut m = Model::new(toy::hyper(), VariantSpec::FULL, toy::vocab(), 4).unwrap();
        toy::randomize(&mut m.store, 8, 0.7);
        m.cache = SkeletonCache::build(&samples);
        (m, samples)
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let (m, samples) = trained();
        let mut buf = Vec::new();
        write_checkpoint(&m, Some("abc".into()), &mut buf).unwrap();
        let ck = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(ck.manifest_id.as_deref(), Some("abc"));
        let loaded = ck.into_model().unwrap();
        assert_eq!(loaded.store, m.store);
        assert_eq!(loaded.cache, m.cache);
        let (a, b) = (predict_all(&m, &samples).unwrap(), predict_all(&loaded, &samples).unwrap());
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(evaluate(&m, &samples).unwrap(), evaluate(&loaded, &samples).unwrap());

        let mut again = Vec::new();
        write_checkpoint(&loaded, Some("abc".into()), &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn unknown_versions_rejected() {
        let (m, _) = trained();
        let mut buf = Vec::new();
        write_checkpoint(&m, None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":7");
        let err = read_checkpoint(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("version 7"), "{err}");
        assert!(read_checkpoint(&b"{\"format\":\"other\"}"[..]).is_err());
    }
}
