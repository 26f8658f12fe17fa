use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "curator", version, about = "Turn a scene description into a curated asset collection")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    /// Deterministic bag-of-words hashing, no network.
    Hash,
    /// HTTP service at CURATOR_EMB_URL.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextureKind {
    /// Returns every mesh untouched.
    Stub,
    /// HTTP service at CURATOR_TEX_URL.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeModeArg {
    Union,
    Intersection,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML file with run settings.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Serve completions from recorded exchanges in this directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub replay_dir: Option<PathBuf>,
    /// Call the live completion service and record every exchange into --replay-dir.
    #[arg(long, global = true, requires = "replay_dir")]
    pub record: bool,
    /// Image-vs-text weight for retrieval scores.
    #[arg(long, global = true)]
    pub w: Option<f64>,
    /// Candidates kept per item (for `baseline`: number of assets).
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Levels of peripheral objects below the anchors.
    #[arg(long, global = true)]
    pub max_depth: Option<usize>,
    /// Asset manifest (JSON Lines).
    #[arg(long, global = true, env = "CURATOR_ASSETS", value_name = "PATH")]
    pub assets: Option<PathBuf>,
    /// Directory that receives run manifests.
    #[arg(long, global = true, default_value = "runs", value_name = "DIR")]
    pub runs_dir: PathBuf,
    /// Persist embeddings here between invocations.
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = EmbedderKind::Hash)]
    pub embedder: EmbedderKind,
    /// Dimension of the hashing embedder.
    #[arg(long, global = true, default_value_t = 64)]
    pub hash_dim: usize,
    #[arg(long, global = true, value_enum, default_value_t = TextureKind::Stub)]
    pub texture: TextureKind,
    /// Log more (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand a scene description into a shopping list.
    Upsample {
        scene: String,
        /// Write the list here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the list with full provenance as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Rank assets for every item of a shopping-list file.
    Retrieve {
        list: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Full pipeline: upsample, retrieve, select, texture, score.
    Run {
        scene: String,
        /// Leave every item unselected.
        #[arg(long)]
        no_auto_select: bool,
    },
    /// No-upsampling comparison: top-K assets for the bare scene (K from --k or a reference run).
    Baseline {
        scene: String,
        /// Use the item count of this run manifest as K.
        #[arg(long, value_name = "MANIFEST")]
        reference_run: Option<PathBuf>,
    },
    /// Tabulate the metrics stored in run manifests.
    Metrics {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Also classify every selected asset among the manifests' scenes.
        #[arg(long)]
        classify: bool,
    },
    /// HTTP session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Union or intersection of two shopping-list files.
    MergeLists {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = MergeModeArg::Union)]
        mode: MergeModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write replay files under which upsampling reproduces a given list.
    SynthReplay {
        list: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Embed whatever an asset manifest lacks and write it back with inline embeddings.
    Index {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}
