//! Completion providers: the HTTP client, plus replay and record wrappers
//! that make runs reproducible offline.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::provider::{self, sha256_hex, Endpoint, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 512,
            stop: vec!["\n\n".to_string()],
        }
    }
}

impl SamplingParams {
    pub const MIN_MAX_TOKENS: u32 = 64;

    pub fn validate(&self) -> Result<(), String> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("temperature must be a finite value >= 0, got {}", self.temperature));
        }
        if self.max_tokens < Self::MIN_MAX_TOKENS {
            return Err(format!("max_tokens must be at least {}, got {}", Self::MIN_MAX_TOKENS, self.max_tokens));
        }
        Ok(())
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        Self {
            temperature,
            ..self.clone()
        }
    }
}

/// A text-completion model. Implementations must tolerate concurrent calls.
pub trait CompletionProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn complete(&self, prompt: &str, params: &SamplingParams) -> Result<String, ProviderError>;
}

/// Replay/record file key for a prompt.
pub fn prompt_key(prompt: &str) -> String {
    sha256_hex(prompt.as_bytes())
}

/// Serves completions from `<dir>/<sha256(prompt)>.txt`; a missing file is
/// an error, never a silent fallback.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    dir: PathBuf,
}

impl ReplayProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(ProviderError::Io(format!("replay directory {} does not exist", dir.display())));
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl CompletionProvider for ReplayProvider {
    fn provider_id(&self) -> &str {
        "replay"
    }

    fn complete(&self, prompt: &str, _params: &SamplingParams) -> Result<String, ProviderError> {
        let key = prompt_key(prompt);
        let path = self.dir.join(format!("{key}.txt"));
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == ErrorKind::NotFound => Err(ProviderError::ReplayMiss { key }),
            Err(e) => Err(ProviderError::Io(format!("{}: {e}", path.display()))),
        }
    }
}

/// Stores one exchange in the replay layout without calling any provider.
pub fn write_exchange(dir: &Path, prompt: &str, completion: &str) -> Result<(), ProviderError> {
    let key = prompt_key(prompt);
    let io = |e: std::io::Error| ProviderError::Io(format!("{}: {e}", dir.display()));
    fs::write(dir.join(format!("{key}.prompt")), prompt).map_err(io)?;
    fs::write(dir.join(format!("{key}.txt")), completion).map_err(io)
}

/// Writes `<key>.txt` (completion) and `<key>.prompt` (prompt) for every
/// call that passes through to the wrapped provider.
pub struct RecordingProvider<P> {
    inner: P,
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl<P: CompletionProvider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| ProviderError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            inner,
            dir,
            write_lock: Mutex::new(()),
        })
    }

}

impl<P: CompletionProvider> CompletionProvider for RecordingProvider<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn complete(&self, prompt: &str, params: &SamplingParams) -> Result<String, ProviderError> {
        let text = self.inner.complete(prompt, params)?;
        let _guard = self.write_lock.lock().expect("record lock poisoned");
        write_exchange(&self.dir, prompt, &text)?;
        Ok(text)
    }
}

/// Client for `POST <url> {prompt, temperature, max_tokens, stop} -> {text}`.
pub struct HttpCompletionProvider {
    endpoint: Endpoint,
    agent: ureq::Agent,
    id: String,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    stop: &'a [String],
}

#[derive(Deserialize)]
struct CompletionReply {
    text: String,
}

impl HttpCompletionProvider {
    pub const URL_VAR: &'static str = "CURATOR_LLM_URL";
    pub const TOKEN_VAR: &'static str = "CURATOR_LLM_TOKEN";

    pub fn new(endpoint: Endpoint) -> Self {
        let id = format!("http:{}", endpoint.url);
        Self {
            endpoint,
            agent: provider::agent(Duration::from_secs(120)),
            id,
        }
    }

    pub fn from_env() -> Option<Self> {
        Endpoint::from_env(Self::URL_VAR, Self::TOKEN_VAR).map(Self::new)
    }
}

impl CompletionProvider for HttpCompletionProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, params: &SamplingParams) -> Result<String, ProviderError> {
        let body = CompletionRequest {
            prompt,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            stop: &params.stop,
        };
        let reply: CompletionReply = provider::post_json(&self.agent, &self.endpoint, &self.endpoint.url, &body)?;
        Ok(reply.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;

    impl CompletionProvider for Echo {
        fn provider_id(&self) -> &str {
            "echo"
        }
        fn complete(&self, prompt: &str, _: &SamplingParams) -> Result<String, ProviderError> {
            Ok(format!("* {} : 1", prompt.len()))
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingProvider::new(Echo, dir.path()).unwrap();
        let params = SamplingParams::default();
        let live = rec.complete("hello", &params).unwrap();
        let replay = ReplayProvider::new(dir.path()).unwrap();
        assert_eq!(replay.complete("hello", &params.with_temperature(1.3)).unwrap(), live);
        assert_eq!(
            fs::read_to_string(dir.path().join(format!("{}.prompt", prompt_key("hello")))).unwrap(),
            "hello"
        );
    }

    #[test]
    fn replay_miss_is_loud() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayProvider::new(dir.path()).unwrap();
        match replay.complete("unseen", &SamplingParams::default()) {
            Err(ProviderError::ReplayMiss { key }) => assert_eq!(key, prompt_key("unseen")),
            other => panic!("{other:?}"),
        }
        assert!(ReplayProvider::new(dir.path().join("nope")).is_err());
    }

    #[test]
    fn sampling_params_bounds() {
        assert!(SamplingParams::default().validate().is_ok());
        assert!(SamplingParams { max_tokens: 63, ..Default::default() }.validate().is_err());
        assert!(SamplingParams::default().with_temperature(-0.1).validate().is_err());
    }
}
