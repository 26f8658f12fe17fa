use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use super::provider::{EmbeddingProvider, ImageRef};
use super::{check_dim, EmbeddingError, UnitVector};
use crate::provider::sha256_hex;

/// What to embed.
#[derive(Debug, Clone, Copy)]
pub enum EmbedContent<'a> {
    Text(&'a str),
    Image(&'a ImageRef),
}

impl EmbedContent<'_> {
    /// Hex SHA-256 over a kind tag and the content. Image paths hash the
    /// path together with the file bytes when the file is readable, so an
    /// edited thumbnail gets a fresh entry.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        match self {
            EmbedContent::Text(t) => {
                buf.extend_from_slice(b"text\0");
                buf.extend_from_slice(t.as_bytes());
            }
            EmbedContent::Image(ImageRef::Bytes(b)) => {
                buf.extend_from_slice(b"image-bytes\0");
                buf.extend_from_slice(b);
            }
            EmbedContent::Image(ImageRef::Path(p)) => {
                buf.extend_from_slice(b"image-path\0");
                buf.extend_from_slice(p.to_string_lossy().as_bytes());
                buf.push(0);
                if let Ok(bytes) = fs::read(p) {
                    buf.extend_from_slice(&bytes);
                }
            }
        }
        sha256_hex(buf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub provider_id: String,
    pub content_hash: String,
}

type Slot = Arc<Mutex<Option<UnitVector>>>;

/// Content-addressed store of embeddings, keyed by (provider, content hash).
///
/// Concurrent lookups of one key are single-flight: the first caller holds
/// the key's slot lock while the provider runs and later callers wait on it.
/// Vectors are kept at 32-bit precision, in memory and on disk, so a hit
/// returns exactly what a fresh process would read back from disk.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    slots: RwLock<HashMap<CacheKey, Slot>>,
    dir: Option<PathBuf>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// A cache that also persists entries under `dir`.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            slots: RwLock::default(),
            dir: Some(dir.into()),
        }
    }

    /// Number of in-memory entries holding a vector.
    pub fn len(&self) -> usize {
        let slots = self.slots.read().expect("cache lock poisoned");
        slots.values().filter(|s| s.lock().map(|v| v.is_some()).unwrap_or(false)).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<UnitVector> {
        let slot = self.slots.read().expect("cache lock poisoned").get(key).cloned()?;
        let guard = slot.lock().expect("slot lock poisoned");
        guard.clone()
    }

    fn slot(&self, key: &CacheKey) -> Slot {
        if let Some(slot) = self.slots.read().expect("cache lock poisoned").get(key) {
            return slot.clone();
        }
        let mut slots = self.slots.write().expect("cache lock poisoned");
        slots.entry(key.clone()).or_default().clone()
    }

    pub fn get_or_embed(&self, provider: &dyn EmbeddingProvider, content: EmbedContent<'_>) -> Result<UnitVector, EmbeddingError> {
        let key = CacheKey {
            provider_id: provider.provider_id().to_string(),
            content_hash: content.content_hash(),
        };
        let slot = self.slot(&key);
        let mut guard = slot.lock().expect("slot lock poisoned");
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        if let Some(v) = self.read_disk(&key)? {
            check_dim(provider.dimension(), v.dim())?;
            *guard = Some(v.clone());
            return Ok(v);
        }
        let raw = match content {
            EmbedContent::Text(t) => provider.embed_text(t)?,
            EmbedContent::Image(img) => provider.embed_image(img)?,
        };
        check_dim(provider.dimension(), raw.len())?;
        let v = UnitVector::normalize(raw)?.quantized();
        self.write_disk(&key, &v)?;
        *guard = Some(v.clone());
        Ok(v)
    }

    fn disk_path(&self, key: &CacheKey) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let provider_dir = &sha256_hex(key.provider_id.as_bytes())[..16];
        Some(dir.join(provider_dir).join(format!("{}.bin", key.content_hash)))
    }

    fn read_disk(&self, key: &CacheKey) -> Result<Option<UnitVector>, EmbeddingError> {
        let Some(path) = self.disk_path(key) else {
            return Ok(None);
        };
        match fs::read(&path) {
            Ok(bytes) => decode(&bytes).map(Some).map_err(|e| EmbeddingError::Cache(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(EmbeddingError::Cache(format!("{}: {e}", path.display()))),
        }
    }

    fn write_disk(&self, key: &CacheKey, v: &UnitVector) -> Result<(), EmbeddingError> {
        let Some(path) = self.disk_path(key) else {
            return Ok(());
        };
        let io = |e: std::io::Error| EmbeddingError::Cache(format!("{}: {e}", path.display()));
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent).map_err(io)?;
        let tmp = parent.join(format!(".{}.tmp{}", key.content_hash, std::process::id()));
        let mut file = fs::File::create(&tmp).map_err(io)?;
        file.write_all(&encode(v)).map_err(io)?;
        file.sync_all().map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)
    }
}

/// `u32` little-endian component count, then the components as `f32` LE.
pub(crate) fn encode(v: &UnitVector) -> Vec<u8> {
    let comps = v.to_f32();
    let mut out = Vec::with_capacity(4 + 4 * comps.len());
    out.extend_from_slice(&(comps.len() as u32).to_le_bytes());
    for c in comps {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Result<UnitVector, String> {
    let (len, rest) = bytes.split_at_checked(4).ok_or("truncated header")?;
    let n = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
    if rest.len() != 4 * n {
        return Err(format!("expected {n} components, found {} bytes", rest.len()));
    }
    let comps: Vec<f64> = rest
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    UnitVector::from_unit(comps).map_err(|e| e.to_string())
}

/// A provider paired with the cache in front of it.
#[derive(Clone)]
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    cache: Arc<EmbeddingCache>,
}

impl Embedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>, cache: Arc<EmbeddingCache>) -> Self {
        Self { provider, cache }
    }

    /// An embedder with a fresh in-memory cache.
    pub fn uncached(provider: Arc<dyn EmbeddingProvider>) -> Self {
        Self::new(provider, Arc::new(EmbeddingCache::new()))
    }

    pub fn provider_id(&self) -> &str {
        self.provider.provider_id()
    }

    pub fn dimension(&self) -> usize {
        self.provider.dimension()
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    pub fn embed_text(&self, text: &str) -> Result<UnitVector, EmbeddingError> {
        self.cache.get_or_embed(self.provider.as_ref(), EmbedContent::Text(text))
    }

    pub fn embed_image(&self, image: &ImageRef) -> Result<UnitVector, EmbeddingError> {
        self.cache.get_or_embed(self.provider.as_ref(), EmbedContent::Image(image))
    }

    pub fn embed_image_path(&self, path: &Path) -> Result<UnitVector, EmbeddingError> {
        self.embed_image(&ImageRef::Path(path.to_path_buf()))
    }
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedder").field("provider", &self.provider.provider_id()).finish()
    }
}
