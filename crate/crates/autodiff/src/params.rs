use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Subject to decoupled weight decay. Off for biases and norm gains.
    pub decay: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
const FORMAT: &str = "skyjo-params";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported parameter format {0} v{1}")]
    Format(String, u32),
    #[error("parameter '{name}': expected {expected} values, file has {found}")]
    Length { name: String, expected: usize, found: u64 },
    #[error("parameter file has trailing bytes")]
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub decay: bool,
}

/// JSON side of a saved store. `meta` carries whatever the owner needs
/// (network config, schema versions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub params: Vec<ManifestEntry>,
    /// Hex sha256 of the binary parameter file.
    pub sha256: String,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, decay: bool) -> ParamId {
        let name = name.into();
        assert!(self.find(&name).is_none(), "duplicate parameter '{name}'");
        self.params.push(Param { name, value, decay });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Binary payload: per parameter a u64 LE value count then LE f32 values.
    pub fn write_values<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.params {
            w.write_all(&(p.value.len() as u64).to_le_bytes())?;
            let mut buf = Vec::with_capacity(p.value.len() * 4);
            for x in &p.value.data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn values_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.num_scalars() * 4 + self.len() * 8);
        self.write_values(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.values_bytes()))
    }

    pub fn manifest(&self, meta: serde_json::Value) -> Manifest {
        Manifest {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            params: self
                .params
                .iter()
                .map(|p| ManifestEntry { name: p.name.clone(), shape: p.value.shape(), decay: p.decay })
                .collect(),
            sha256: self.sha256(),
            meta,
        }
    }

    /// Write `manifest.json` and `params.bin` into `dir`.
    pub fn save(&self, dir: &Path, meta: serde_json::Value) -> Result<Manifest, StoreError> {
        fs::create_dir_all(dir)?;
        let manifest = self.manifest(meta);
        fs::write(dir.join(PARAMS_FILE), self.values_bytes())?;
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<(ParamStore, Manifest), StoreError> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        let bytes = fs::read(dir.join(PARAMS_FILE))?;
        let store = ParamStore::from_parts(&manifest, &bytes)?;
        Ok((store, manifest))
    }

    pub fn from_parts(manifest: &Manifest, mut bytes: &[u8]) -> Result<ParamStore, StoreError> {
        if manifest.format != FORMAT || manifest.version != FORMAT_VERSION {
            return Err(StoreError::Format(manifest.format.clone(), manifest.version));
        }
        let mut store = ParamStore::new();
        for e in &manifest.params {
            let mut len = [0u8; 8];
            bytes.read_exact(&mut len)?;
            let found = u64::from_le_bytes(len);
            let expected = e.shape[0] * e.shape[1];
            if found != expected as u64 {
                return Err(StoreError::Length { name: e.name.clone(), expected, found });
            }
            let mut raw = vec![0u8; expected * 4];
            bytes.read_exact(&mut raw)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            store.add(e.name.clone(), Tensor::from_vec(e.shape[0], e.shape[1], data), e.decay);
        }
        if !bytes.is_empty() {
            return Err(StoreError::Trailing);
        }
        Ok(store)
    }

    /// Copy values from another store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        assert_eq!(self.len(), other.len(), "parameter layout mismatch");
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            assert_eq!(a.value.shape(), b.value.shape(), "shape mismatch for '{}'", a.name);
            a.value.data.copy_from_slice(&b.value.data);
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-parameter gradients aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Gradients {
        Gradients { grads: store.params.iter().map(|p| Tensor::zeros(p.value.rows, p.value.cols)).collect() }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.grads.iter()
    }

    pub fn global_norm(&self) -> f32 {
        self.grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt() as f32
    }

    /// Scale so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f32) -> f32 {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn scale(&mut self, s: f32) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Sum gradients from another pass (data-parallel accumulation).
    pub fn accumulate(&mut self, other: &Gradients) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
        }
    }
}

/// Parameter initializers.
pub mod init {
    use crate::tensor::Tensor;
    use rand::Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    pub fn normal<R: Rng + ?Sized>(rows: usize, cols: usize, std: f32, rng: &mut R) -> Tensor {
        let d = Normal::new(0.0, std).expect("finite std");
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| d.sample(rng)).collect())
    }

    /// Glorot uniform for a `[fan_in, fan_out]` weight.
    pub fn xavier<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
        let a = (6.0 / (rows + cols) as f32).sqrt();
        let d = Uniform::new_inclusive(-a, a).expect("valid range");
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| d.sample(rng)).collect())
    }

    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f32, rng: &mut R) -> Tensor {
        let d = Uniform::new_inclusive(-bound, bound).expect("valid range");
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| d.sample(rng)).collect())
    }
}
