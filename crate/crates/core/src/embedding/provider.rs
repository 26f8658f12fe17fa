use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::provider::{self, sha256_hex, Endpoint, ProviderError};

/// An image handed to an embedding provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageRef {
    Path(PathBuf),
    Bytes(Vec<u8>),
}

/// A joint vision-language encoder. Outputs need not be normalized; callers
/// go through [`super::EmbeddingCache`], which renormalizes on ingress.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
    fn embed_image(&self, image: &ImageRef) -> Result<Vec<f64>, ProviderError>;
}

/// Deterministic offline encoder: a signed feature-hashed bag of words.
///
/// Texts sharing words get positive cosine similarity, which is enough to
/// make retrieval over fixture assets behave sensibly without any model.
/// An image path is embedded as the text of its file stem with `_` and `-`
/// read as spaces, so `fixtures/assets/thumbs/coral_throne.png` lands near
/// "coral throne"; raw bytes hash to a pseudo-random direction.
#[derive(Debug, Clone)]
pub struct HashEmbeddingProvider {
    dim: usize,
    id: String,
}

impl HashEmbeddingProvider {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            id: format!("hash-bow-{dim}"),
        }
    }

    fn bucket(&self, token: &str) -> (usize, f64) {
        let digest = sha2_digest(token.as_bytes());
        let idx = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) % self.dim as u64;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        (idx as usize, sign)
    }

    fn bag(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let (i, s) = self.bucket(token);
            v[i] += s;
            any = true;
        }
        if !any || v.iter().all(|c| *c == 0.0) {
            // Punctuation-only text, or tokens that cancelled out.
            let (i, s) = self.bucket(&format!("\u{0}{text}"));
            v[i] += s;
        }
        v
    }

    fn random_direction(&self, bytes: &[u8]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        let mut block = sha2_digest(bytes);
        let mut counter: u32 = 0;
        while out.len() < self.dim {
            for pair in block.chunks_exact(2) {
                if out.len() == self.dim {
                    break;
                }
                out.push(u16::from_le_bytes([pair[0], pair[1]]) as f64 / 32767.5 - 1.0);
            }
            counter += 1;
            let mut next = block.to_vec();
            next.extend_from_slice(&counter.to_le_bytes());
            block = sha2_digest(&next);
        }
        out
    }
}

impl Default for HashEmbeddingProvider {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

fn sha2_digest(bytes: &[u8]) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).into()
}

impl EmbeddingProvider for HashEmbeddingProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        Ok(self.bag(text))
    }

    fn embed_image(&self, image: &ImageRef) -> Result<Vec<f64>, ProviderError> {
        match image {
            ImageRef::Path(path) => {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().replace(['_', '-'], " "))
                    .unwrap_or_default();
                Ok(self.bag(&stem))
            }
            ImageRef::Bytes(bytes) => Ok(self.random_direction(bytes)),
        }
    }
}

/// Client for a remote encoder speaking the JSON embedding protocol:
/// `POST /embed_text {text}` and `POST /embed_image {path}` (or a multipart
/// `image` upload for in-memory bytes), both answering `{vector: [..]}`.
pub struct HttpEmbeddingProvider {
    endpoint: Endpoint,
    dim: usize,
    id: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct TextRequest<'a> {
    text: &'a str,
}

#[derive(Serialize)]
struct PathRequest<'a> {
    path: &'a str,
}

#[derive(Deserialize)]
struct VectorResponse {
    vector: Vec<f64>,
}

impl HttpEmbeddingProvider {
    pub const URL_VAR: &'static str = "CURATOR_EMB_URL";
    pub const TOKEN_VAR: &'static str = "CURATOR_EMB_TOKEN";
    pub const DIM_VAR: &'static str = "CURATOR_EMB_DIM";
    pub const DEFAULT_DIM: usize = 512;

    pub fn new(endpoint: Endpoint, dim: usize) -> Self {
        let id = format!("http:{}:{dim}", endpoint.url);
        Self {
            endpoint,
            dim,
            id,
            agent: provider::agent(Duration::from_secs(60)),
        }
    }

    /// Configured from `CURATOR_EMB_URL`, `CURATOR_EMB_TOKEN` and
    /// `CURATOR_EMB_DIM`; `None` when no URL is set.
    pub fn from_env() -> Option<Self> {
        let endpoint = Endpoint::from_env(Self::URL_VAR, Self::TOKEN_VAR)?;
        let dim = std::env::var(Self::DIM_VAR)
            .ok()
            .and_then(|d| d.parse().ok())
            .unwrap_or(Self::DEFAULT_DIM);
        Some(Self::new(endpoint, dim))
    }

    fn checked(&self, resp: VectorResponse) -> Result<Vec<f64>, ProviderError> {
        if resp.vector.len() != self.dim {
            return Err(ProviderError::Protocol(format!(
                "expected a {}-dimensional vector, got {}",
                self.dim,
                resp.vector.len()
            )));
        }
        Ok(resp.vector)
    }

    fn post_multipart(&self, bytes: &[u8]) -> Result<VectorResponse, ProviderError> {
        let boundary = format!("curator-{}", &sha256_hex(bytes)[..24]);
        let mut body = Vec::with_capacity(bytes.len() + 256);
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        body.extend_from_slice(b"Content-Disposition: form-data; name=\"image\"; filename=\"image\"\r\n");
        body.extend_from_slice(b"Content-Type: application/octet-stream\r\n\r\n");
        body.extend_from_slice(bytes);
        body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        let mut req = self
            .agent
            .post(self.endpoint.join("embed_image"))
            .header("Content-Type", format!("multipart/form-data; boundary={boundary}"));
        if let Some(t) = &self.endpoint.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send(&body[..]).map_err(provider::map_err)?;
        resp.body_mut()
            .read_json::<VectorResponse>()
            .map_err(|e| ProviderError::Protocol(e.to_string()))
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let resp = provider::post_json(&self.agent, &self.endpoint, &self.endpoint.join("embed_text"), &TextRequest { text })?;
        self.checked(resp)
    }

    fn embed_image(&self, image: &ImageRef) -> Result<Vec<f64>, ProviderError> {
        let resp = match image {
            ImageRef::Path(path) => {
                let path = path.to_string_lossy();
                provider::post_json(&self.agent, &self.endpoint, &self.endpoint.join("embed_image"), &PathRequest { path: &path })?
            }
            ImageRef::Bytes(bytes) => self.post_multipart(bytes)?,
        };
        self.checked(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{cosine, UnitVector};

    fn unit(v: Vec<f64>) -> UnitVector {
        UnitVector::normalize(v).unwrap()
    }

    #[test]
    fn hash_embedder_is_deterministic_and_sized() {
        let p = HashEmbeddingProvider::default();
        assert_eq!(p.embed_text("coral throne").unwrap(), p.embed_text("Coral  throne!").unwrap());
        assert_eq!(p.embed_text("x").unwrap().len(), 64);
        assert!(p.embed_text("...").unwrap().iter().any(|c| *c != 0.0));
    }

    #[test]
    fn shared_words_raise_similarity() {
        let p = HashEmbeddingProvider::default();
        let q = unit(p.embed_text("throne, in a scene of Poseidon's living room").unwrap());
        let near = unit(p.embed_image(&ImageRef::Path("thumbs/coral_throne.png".into())).unwrap());
        let far = unit(p.embed_image(&ImageRef::Path("thumbs/office_stapler.png".into())).unwrap());
        assert!(cosine(&q, &near).unwrap() > cosine(&q, &far).unwrap());
    }

    #[test]
    fn image_bytes_hash_to_fixed_direction() {
        let p = HashEmbeddingProvider::new(10);
        let a = p.embed_image(&ImageRef::Bytes(b"png".to_vec())).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, p.embed_image(&ImageRef::Bytes(b"png".to_vec())).unwrap());
        assert_ne!(a, p.embed_image(&ImageRef::Bytes(b"jpg".to_vec())).unwrap());
    }
}
