//! Checkpoint persistence: `manifest.json` describing names, shapes and
//! metadata, plus `params.bin` holding raw little-endian `f32` values in
//! manifest order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Network, NetworkSpec, ParamSet, Tensor};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct NetworkEntry {
    name: String,
    spec: NetworkSpec,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Manifest {
    format_version: u32,
    step: u64,
    config_hash: String,
    compat_hash: String,
    scalars: BTreeMap<String, f64>,
    networks: Vec<NetworkEntry>,
}

/// A set of named networks plus training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub config_hash: String,
    /// Hash over the settings that determine the model's input and shape.
    pub compat_hash: String,
    pub scalars: BTreeMap<String, f64>,
    pub networks: Vec<(String, Network<f32>)>,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Option<&Network<f32>> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
    }

    /// Raw parameter bytes in manifest order.
    pub fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (_, net) in &self.networks {
            for t in net.params().tensors() {
                for v in t.values() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            step: self.step,
            config_hash: self.config_hash.clone(),
            compat_hash: self.compat_hash.clone(),
            scalars: self.scalars.clone(),
            networks: self
                .networks
                .iter()
                .map(|(name, net)| NetworkEntry {
                    name: name.clone(),
                    spec: net.spec().clone(),
                    tensors: net
                        .params()
                        .iter()
                        .map(|(n, t)| TensorEntry {
                            name: n.to_string(),
                            shape: t.shape().to_vec(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let mpath = dir.join(MANIFEST_FILE);
        fs::write(&mpath, text).map_err(|e| Error::file(&mpath, e))?;
        let ppath = dir.join(PARAMS_FILE);
        fs::write(&ppath, self.param_bytes()).map_err(|e| Error::file(&ppath, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(|e| Error::file(&mpath, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::format(
                &mpath,
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        let ppath = dir.join(PARAMS_FILE);
        let bytes = fs::read(&ppath).map_err(|e| Error::file(&ppath, e))?;
        let mut cursor = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        let mut networks = Vec::new();
        for entry in manifest.networks {
            let mut params = ParamSet::new();
            for te in &entry.tensors {
                let n: usize = te.shape.iter().product();
                let values: Vec<f32> = cursor.by_ref().take(n).collect();
                if values.len() != n {
                    return Err(Error::format(&ppath, "parameter file shorter than manifest"));
                }
                params.push(te.name.clone(), Tensor::new(te.shape.clone(), values)?);
            }
            let net = Network::from_params(entry.spec, params)
                .map_err(|e| Error::format(&mpath, format!("network `{}`: {e}", entry.name)))?;
            networks.push((entry.name, net));
        }
        if cursor.next().is_some() || bytes.len() % 4 != 0 {
            return Err(Error::format(&ppath, "parameter file longer than manifest"));
        }
        Ok(Self {
            step: manifest.step,
            config_hash: manifest.config_hash,
            compat_hash: manifest.compat_hash,
            scalars: manifest.scalars,
            networks,
        })
    }
}
