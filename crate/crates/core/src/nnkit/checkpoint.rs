//! Trained-weight files.
//!
//! Layout: one UTF-8 JSON header line terminated by `\n`, then the raw
//! little-endian `f32` data of every parameter in header order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Network, NetworkConfig};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub params: Vec<(String, Tensor)>,
    pub rng_seed: u64,
    pub format_version: u32,
    /// Free-form provenance (label source, channel map, ...).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: NetworkConfig,
    seed: u64,
    params: Vec<ParamEntry>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    /// Snapshot of a network; parameters are rounded to `f32` storage precision.
    pub fn from_network(net: &Network, rng_seed: u64) -> Self {
        let params = net
            .param_names()
            .into_iter()
            .zip(net.params())
            .map(|(name, t)| (name, t.map(|v| v as f32 as f64)))
            .collect();
        Self {
            config: net.config().clone(),
            params,
            rng_seed,
            format_version: FORMAT_VERSION,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn network(&self) -> Result<Network> {
        let expected = self.config.param_shapes();
        for ((name, _), (ename, _)) in self.params.iter().zip(&expected) {
            if name != ename {
                return Err(Error::Checkpoint(format!(
                    "parameter order mismatch: expected {ename}, found {name}"
                )));
            }
        }
        Network::from_params(
            self.config.clone(),
            self.params.iter().map(|(_, t)| t.clone()).collect(),
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: self.format_version,
            config: self.config.clone(),
            seed: self.rng_seed,
            params: self
                .params
                .iter()
                .map(|(name, t)| ParamEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let mut out = serde_json::to_vec(&header)
            .map_err(|e| Error::Checkpoint(format!("header encode: {e}")))?;
        out.push(b'\n');
        for (_, t) in &self.params {
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header terminator".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| Error::Checkpoint(format!("header decode: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let mut blob = &bytes[nl + 1..];
        let mut params = Vec::with_capacity(header.params.len());
        for entry in header.params {
            let n: usize = entry.shape.iter().product();
            if blob.len() < 4 * n {
                return Err(Error::Checkpoint(format!(
                    "truncated data for {}",
                    entry.name
                )));
            }
            let (head, rest) = blob.split_at(4 * n);
            let data = head
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            params.push((entry.name, Tensor::new(&entry.shape, data)?));
            blob = rest;
        }
        if !blob.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", blob.len())));
        }
        let ckpt = Self {
            config: header.config,
            params,
            rng_seed: header.seed,
            format_version: header.format_version,
            metadata: header.metadata,
        };
        ckpt.network()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = Network::init(NetworkConfig::tiny(), 42).unwrap();
        let ck = Checkpoint::from_network(&net, 42).with_metadata("label", "camera_pos");
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn header_is_one_json_line() {
        let net = Network::init(NetworkConfig::tiny().with_input_channels(2), 1).unwrap();
        let bytes = Checkpoint::from_network(&net, 1).to_bytes().unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(header["format_version"], 1);
        assert_eq!(header["params"][0]["name"], "conv1.weight");
        assert_eq!(
            header["params"][0]["shape"],
            serde_json::json!([3, 3, 2, 8])
        );
        assert_eq!(bytes.len() - nl - 1, 4 * net.num_params());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let net = Network::init(NetworkConfig::tiny(), 1).unwrap();
        let bytes = Checkpoint::from_network(&net, 1).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
