//! Texturing prompts and the texturing provider boundary.
//!
//! The texturing model itself is external. Jobs are submitted and then
//! polled until they finish; a failed job is recorded on its own and never
//! stops the rest of the batch.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::par::map_bounded;
use crate::provider::{self, sha256_hex, Endpoint, ProviderError};
use crate::shoplist::{build_query_string, QueryString, SceneDescription, ShoppingItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextureJob {
    pub asset_id: String,
    pub mesh_ref: String,
    pub prompt: QueryString,
    pub status: JobStatus,
    /// Present exactly when `status` is `done`.
    pub output_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TextureJob {
    fn failed(req: &TextureRequest, error: impl Into<String>) -> Self {
        Self {
            asset_id: req.asset_id.clone(),
            mesh_ref: req.mesh_ref.clone(),
            prompt: req.prompt.clone(),
            status: JobStatus::Failed,
            output_ref: None,
            job_id: None,
            error: Some(error.into()),
        }
    }
}

/// One asset to texture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextureRequest {
    pub asset_id: String,
    pub mesh_ref: String,
    pub prompt: QueryString,
}

pub trait TextureProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn submit(&self, request: &TextureRequest) -> Result<TextureJob, ProviderError>;
    fn poll(&self, job: &TextureJob) -> Result<TextureJob, ProviderError>;
}

/// Texturing prompt for a shopping-list item (same text as its retrieval query).
pub fn make_texture_prompt(item: &ShoppingItem, scene: &SceneDescription) -> QueryString {
    build_query_string(item, scene)
}

/// Texturing prompt when there is no shopping list: the scene itself.
pub fn baseline_texture_prompt(scene: &SceneDescription) -> QueryString {
    QueryString::bare(scene)
}

/// Completes every job immediately, returning the input mesh untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubTextureProvider;

impl TextureProvider for StubTextureProvider {
    fn provider_id(&self) -> &str {
        "stub"
    }

    fn submit(&self, request: &TextureRequest) -> Result<TextureJob, ProviderError> {
        let job_id = sha256_hex(format!("{}\0{}", request.mesh_ref, request.prompt))[..16].to_string();
        Ok(TextureJob {
            asset_id: request.asset_id.clone(),
            mesh_ref: request.mesh_ref.clone(),
            prompt: request.prompt.clone(),
            status: JobStatus::Done,
            output_ref: Some(request.mesh_ref.clone()),
            job_id: Some(job_id),
            error: None,
        })
    }

    fn poll(&self, job: &TextureJob) -> Result<TextureJob, ProviderError> {
        Ok(job.clone())
    }
}

/// Client for `POST /texture {mesh_path, prompt} -> {job_id}` and
/// `GET /texture/{job_id} -> {status, output_path}`.
pub struct HttpTextureProvider {
    endpoint: Endpoint,
    agent: ureq::Agent,
    id: String,
}

#[derive(Serialize)]
struct SubmitBody<'a> {
    mesh_path: &'a str,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct SubmitReply {
    job_id: String,
}

#[derive(Deserialize)]
struct PollReply {
    status: JobStatus,
    #[serde(default)]
    output_path: Option<String>,
}

impl HttpTextureProvider {
    pub const URL_VAR: &'static str = "CURATOR_TEX_URL";
    pub const TOKEN_VAR: &'static str = "CURATOR_TEX_TOKEN";

    pub fn new(endpoint: Endpoint) -> Self {
        let id = format!("http:{}", endpoint.url);
        Self {
            endpoint,
            agent: provider::agent(Duration::from_secs(60)),
            id,
        }
    }

    pub fn from_env() -> Option<Self> {
        Endpoint::from_env(Self::URL_VAR, Self::TOKEN_VAR).map(Self::new)
    }
}

impl TextureProvider for HttpTextureProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn submit(&self, request: &TextureRequest) -> Result<TextureJob, ProviderError> {
        let body = SubmitBody {
            mesh_path: &request.mesh_ref,
            prompt: request.prompt.as_str(),
        };
        let reply: SubmitReply = provider::post_json(&self.agent, &self.endpoint, &self.endpoint.join("texture"), &body)?;
        Ok(TextureJob {
            asset_id: request.asset_id.clone(),
            mesh_ref: request.mesh_ref.clone(),
            prompt: request.prompt.clone(),
            status: JobStatus::Pending,
            output_ref: None,
            job_id: Some(reply.job_id),
            error: None,
        })
    }

    fn poll(&self, job: &TextureJob) -> Result<TextureJob, ProviderError> {
        let id = job
            .job_id
            .as_deref()
            .ok_or_else(|| ProviderError::Protocol("job has no id".into()))?;
        let reply: PollReply = provider::get_json(&self.agent, &self.endpoint, &self.endpoint.join(&format!("texture/{id}")))?;
        let mut next = job.clone();
        next.status = reply.status;
        next.output_ref = reply.output_path;
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureOptions {
    pub concurrency: usize,
    pub poll_interval: Duration,
    pub max_polls: u32,
}

impl Default for TextureOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            poll_interval: Duration::from_millis(500),
            max_polls: 600,
        }
    }
}

fn settle(mut job: TextureJob) -> TextureJob {
    match (job.status, &job.output_ref) {
        (JobStatus::Done, None) => {
            job.status = JobStatus::Failed;
            job.error = Some("provider reported done without an output".into());
        }
        (JobStatus::Failed, _) => {
            job.output_ref = None;
            job.error.get_or_insert_with(|| "provider reported failure".into());
        }
        _ => {}
    }
    job
}

fn finish(provider: &dyn TextureProvider, req: &TextureRequest, first: Result<TextureJob, ProviderError>, opts: &TextureOptions) -> TextureJob {
    let mut job = match first {
        Ok(job) => job,
        Err(e) => return TextureJob::failed(req, e.to_string()),
    };
    let mut polls = 0;
    while job.status == JobStatus::Pending {
        if polls == opts.max_polls {
            return TextureJob::failed(req, format!("still pending after {polls} polls"));
        }
        std::thread::sleep(opts.poll_interval);
        polls += 1;
        job = match provider.poll(&job) {
            Ok(j) => j,
            Err(e) => return TextureJob::failed(req, e.to_string()),
        };
    }
    settle(job)
}

/// Submits one job per request and waits for all of them.
///
/// Fails as a whole only when the very first submission cannot reach the
/// provider; after that, errors are recorded on the affected job.
pub fn texture_all(
    requests: &[TextureRequest],
    provider: &dyn TextureProvider,
    opts: &TextureOptions,
) -> Result<Vec<TextureJob>, ProviderError> {
    let Some((head, rest)) = requests.split_first() else {
        return Ok(Vec::new());
    };
    let first = provider.submit(head);
    if let Err(e) = &first {
        if e.is_unavailable() {
            return Err(e.clone());
        }
    }
    let mut jobs = vec![finish(provider, head, first, opts)];
    jobs.extend(map_bounded(rest, opts.concurrency, |_, req| finish(provider, req, provider.submit(req), opts)));
    Ok(jobs)
}
