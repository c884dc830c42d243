//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "MVHG" | version: u8
//! n_meta: u32 | n_meta × (key_len: u32, key, value_len: u32, value)   UTF-8
//! n_params: u64 | n_params × f64
//! checksum: u64   FNV-1a over every byte between the header and the checksum
//! ```
//!
//! Parameters follow the model's `Parameterized` order: dense weights then
//! bias, batch-norm gamma then beta, in layer order; for the recurrent model
//! the nine GRU tensors then the head weights and bias; for Hull-White the
//! coefficients `a, b, c`.

use std::collections::BTreeMap;
use std::hash::Hasher;
use std::io::Write;
use std::path::Path;

use fnv::FnvHasher;

use crate::data::{feature_names, FeatureStats};
use crate::error::{Error, Result};
use crate::market_math::{HwCoefficients, OptionKind};
use crate::nn::{Activation, BatchNormLayer, DenseLayer, GruCell, Layer, Matrix, Network, Parameterized};

use super::{BsBaseline, FnnHedgeModel, GruHedgeModel, HedgeModel, HedgeRatioModel, HwModel, ModelVariant, OutputActivation};

pub const MAGIC: &[u8; 4] = b"MVHG";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 5;

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn split_floats(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|v| v.parse().ok()).collect()
}

fn metadata(model: &HedgeModel) -> Vec<(String, String)> {
    let mut meta: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| meta.push((k.to_string(), v));
    let kind = model.kind();
    put("kind", kind.to_string());
    put("variant", model.variant().name().to_string());
    put("features", feature_names(model.variant(), kind).join(","));
    match model {
        HedgeModel::Fnn(m) => {
            put("model", "fnn".into());
            put("output", m.output().name().into());
            let mut layers = Vec::new();
            for (i, layer) in m.network().layers().iter().enumerate() {
                match layer {
                    Layer::Dense(d) => layers.push(format!("dense:{}x{}:{}", d.fan_out(), d.fan_in(), d.activation.name())),
                    Layer::BatchNorm(bn) => {
                        layers.push(format!("batchnorm:{}", bn.dim()));
                        put(&format!("bn.{i}.running_mean"), join(&bn.running_mean));
                        put(&format!("bn.{i}.running_var"), join(&bn.running_var));
                        put(&format!("bn.{i}.momentum"), bn.momentum.to_string());
                        put(&format!("bn.{i}.epsilon"), bn.epsilon.to_string());
                    }
                    Layer::Activation(f) => layers.push(format!("activation:{}", f.name())),
                }
            }
            put("layers", layers.join(";"));
            put("stats.mean", join(&m.stats().mean));
            put("stats.std", join(&m.stats().std));
        }
        HedgeModel::Gru(m) => {
            put("model", "gru".into());
            put("output", m.output().name().into());
            put("hidden", m.cell().hidden().to_string());
            put("seq_len", m.seq_len().to_string());
            put("seq_stats.mean", join(&m.seq_stats().mean));
            put("seq_stats.std", join(&m.seq_stats().std));
            put("stats.mean", join(&m.contract_stats().mean));
            put("stats.std", join(&m.contract_stats().std));
        }
        HedgeModel::Hw(_) => put("model", "hw".into()),
        HedgeModel::Bs(_) => put("model", "bs".into()),
    }
    meta
}

fn params_of(model: &HedgeModel) -> Vec<f64> {
    match model {
        HedgeModel::Fnn(m) => m.params().concat(),
        HedgeModel::Gru(m) => m.params().concat(),
        HedgeModel::Hw(m) => vec![m.coef.a, m.coef.b, m.coef.c],
        HedgeModel::Bs(_) => Vec::new(),
    }
}

/// Serializes `model` into `w`.
pub fn write_checkpoint(w: &mut impl Write, model: &HedgeModel) -> std::io::Result<()> {
    let mut payload = Vec::new();
    let meta = metadata(model);
    payload.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    for (k, v) in &meta {
        for s in [k, v] {
            payload.extend_from_slice(&(s.len() as u32).to_le_bytes());
            payload.extend_from_slice(s.as_bytes());
        }
    }
    let params = params_of(model);
    payload.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        payload.extend_from_slice(&p.to_le_bytes());
    }
    let mut h = FnvHasher::default();
    h.write(&payload);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&payload)?;
    w.write_all(&h.finish().to_le_bytes())
}

pub fn save_checkpoint(model: &HedgeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, model).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<HedgeModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

/// Loads a checkpoint and checks that it was trained for `kind`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, kind: OptionKind) -> Result<HedgeModel> {
    let model = load_checkpoint(path)?;
    if model.kind() != kind {
        return Err(Error::KindMismatch {
            expected: kind,
            found: model.kind(),
        });
    }
    Ok(model)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                reason: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format {
            offset: at,
            reason: format!("{what} is not valid UTF-8"),
        })
    }
}

struct Meta {
    map: BTreeMap<String, String>,
    offset: usize,
}

impl Meta {
    fn err(&self, reason: String) -> Error {
        Error::Format {
            offset: self.offset,
            reason,
        }
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| self.err(format!("missing metadata key `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse().map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.get(key)?;
        split_floats(v).ok_or_else(|| self.err(format!("bad float list for `{key}`")))
    }

    fn stats(&self, prefix: &str) -> Result<FeatureStats> {
        Ok(FeatureStats {
            mean: self.floats(&format!("{prefix}.mean"))?,
            std: self.floats(&format!("{prefix}.std"))?,
        })
    }

    fn output(&self) -> Result<OutputActivation> {
        let v = self.get("output")?;
        OutputActivation::from_name(v).ok_or_else(|| self.err(format!("unknown output activation `{v}`")))
    }
}

/// Parses a checkpoint image.
pub fn read_checkpoint(bytes: &[u8]) -> Result<HedgeModel> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "bad magic bytes".into(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: 4,
            reason: "truncated header".into(),
        });
    }
    if bytes[4] != VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported version {}", bytes[4]),
        });
    }
    let mut cur = Cursor {
        bytes,
        pos: HEADER_LEN,
    };
    let meta_offset = cur.pos;
    let n_meta = cur.u32("metadata count")?;
    let mut map = BTreeMap::new();
    for _ in 0..n_meta {
        let k = cur.string("metadata key")?;
        let v = cur.string("metadata value")?;
        map.insert(k, v);
    }
    let meta = Meta {
        map,
        offset: meta_offset,
    };
    let params_offset = cur.pos;
    let n_params = cur.u64("parameter count")? as usize;
    if n_params > (bytes.len() - cur.pos) / 8 {
        return Err(Error::Format {
            offset: cur.pos,
            reason: format!("truncated: {n_params} parameters declared"),
        });
    }
    let raw = cur.take(n_params * 8, "parameters")?;
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let payload_end = cur.pos;
    let stored = cur.u64("checksum")?;
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            offset: cur.pos,
            reason: "trailing bytes after checksum".into(),
        });
    }
    let mut h = FnvHasher::default();
    h.write(&bytes[HEADER_LEN..payload_end]);
    if h.finish() != stored {
        return Err(Error::Format {
            offset: payload_end,
            reason: "checksum mismatch".into(),
        });
    }

    let kind: OptionKind = meta.parse("kind")?;
    let variant: ModelVariant = meta.parse("variant")?;
    let expected_features = feature_names(variant, kind).join(",");
    if meta.get("features")? != expected_features {
        return Err(meta.err(format!("feature layout `{}` does not match {variant}", meta.get("features")?)));
    }
    let model = match meta.get("model")? {
        "fnn" => HedgeModel::Fnn(Box::new(build_fnn(&meta, kind, variant)?)),
        "gru" => HedgeModel::Gru(Box::new(build_gru(&meta, kind)?)),
        "hw" => HedgeModel::Hw(HwModel::new(kind, HwCoefficients::default())),
        "bs" => HedgeModel::Bs(BsBaseline { kind }),
        other => return Err(meta.err(format!("unknown model type `{other}`"))),
    };
    fill_params(model, &params, params_offset)
}

fn build_fnn(meta: &Meta, kind: OptionKind, variant: ModelVariant) -> Result<FnnHedgeModel> {
    let mut layers = Vec::new();
    for (i, spec) in meta.get("layers")?.split(';').enumerate() {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || meta.err(format!("bad layer spec `{spec}`"));
        let layer = match parts.as_slice() {
            ["dense", shape, act] => {
                let (o, n) = shape.split_once('x').ok_or_else(bad)?;
                let (o, n): (usize, usize) = (o.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
                Layer::Dense(DenseLayer {
                    weights: Matrix::zeros(o, n),
                    bias: vec![0.0; o],
                    activation: Activation::from_name(act).ok_or_else(bad)?,
                })
            }
            ["batchnorm", dim] => {
                let dim: usize = dim.parse().map_err(|_| bad())?;
                let mut bn = BatchNormLayer::new(dim);
                bn.running_mean = meta.floats(&format!("bn.{i}.running_mean"))?;
                bn.running_var = meta.floats(&format!("bn.{i}.running_var"))?;
                bn.momentum = meta.parse(&format!("bn.{i}.momentum"))?;
                bn.epsilon = meta.parse(&format!("bn.{i}.epsilon"))?;
                if bn.running_mean.len() != dim || bn.running_var.len() != dim {
                    return Err(bad());
                }
                Layer::BatchNorm(bn)
            }
            ["activation", name] => Layer::Activation(Activation::from_name(name).ok_or_else(bad)?),
            _ => return Err(bad()),
        };
        layers.push(layer);
    }
    FnnHedgeModel::from_parts(kind, variant, meta.output()?, Network::new(layers), meta.stats("stats")?)
        .map_err(|e| meta.err(e.to_string()))
}

fn build_gru(meta: &Meta, kind: OptionKind) -> Result<GruHedgeModel> {
    let hidden: usize = meta.parse("hidden")?;
    let seq_len: usize = meta.parse("seq_len")?;
    let contract = meta.stats("stats")?;
    let head = DenseLayer {
        weights: Matrix::zeros(1, hidden + contract.dim()),
        bias: vec![0.0],
        activation: Activation::Identity,
    };
    GruHedgeModel::from_parts(
        kind,
        meta.output()?,
        seq_len,
        GruCell::zeros(1, hidden),
        head,
        meta.stats("seq_stats")?,
        contract,
    )
    .map_err(|e| meta.err(e.to_string()))
}

fn copy_into(targets: Vec<&mut [f64]>, params: &[f64], offset: usize) -> Result<()> {
    let needed: usize = targets.iter().map(|t| t.len()).sum();
    if needed != params.len() {
        return Err(Error::Format {
            offset,
            reason: format!("model needs {needed} parameters, checkpoint has {}", params.len()),
        });
    }
    let mut at = 0;
    for t in targets {
        let n = t.len();
        t.copy_from_slice(&params[at..at + n]);
        at += n;
    }
    Ok(())
}

fn fill_params(mut model: HedgeModel, params: &[f64], offset: usize) -> Result<HedgeModel> {
    match &mut model {
        HedgeModel::Fnn(m) => copy_into(m.params_mut(), params, offset)?,
        HedgeModel::Gru(m) => copy_into(m.params_mut(), params, offset)?,
        HedgeModel::Hw(m) => {
            let mut c = [0.0; 3];
            copy_into(vec![&mut c[..]], params, offset)?;
            m.coef = HwCoefficients::new(c[0], c[1], c[2])?;
        }
        HedgeModel::Bs(_) => copy_into(Vec::new(), params, offset)?,
    }
    Ok(model)
}
