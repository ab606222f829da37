use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use winprob::models::ModelType;

#[derive(Debug, Parser)]
#[command(name = "winprob", version, about = "In-game win probability: train, evaluate, rate teams, serve")]
pub struct Cli {
    /// TOML file with defaults for any of the flags below.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on the training split of a play log.
    Train(TrainArgs),
    /// Score a saved model on a play log.
    Eval(EvalArgs),
    /// Fit, blend or rank team strengths.
    #[command(subcommand)]
    Ratings(RatingsCommand),
    /// Per-play home win probability through one game.
    Timeline(TimelineArgs),
    /// Win probability for one game state given as JSON.
    Predict(PredictArgs),
    /// Run the HTTP prediction service.
    Serve(ServeArgs),
    /// Run the built-in oracle checks.
    Selftest(SelftestArgs),
    /// Write a synthetic league (plays, ratings, results, win totals).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// glm, nb or fnn.
    #[arg(long)]
    pub model: Option<ModelType>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of games used for training.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training epochs for the network.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// With a seed, only the held-out games of that split are scored.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split: Option<f64>,
    /// Score every game even if a seed is configured.
    #[arg(long)]
    pub all: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Add per-interval reports with this bucket size in seconds.
    #[arg(long)]
    pub buckets: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum RatingsCommand {
    /// Least-squares home edge and ratings from game results.
    FitSeason {
        #[arg(long, alias = "data")]
        matchups: PathBuf,
        /// Use only this season's games; required when the file spans several.
        #[arg(long)]
        season: Option<i32>,
        /// Week the ratings apply to; defaults to the week after the last game.
        #[arg(long)]
        week: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preseason ratings from win-total lines.
    FitPreseason {
        #[arg(long)]
        lines: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Week-by-week table mixing preseason and in-season ratings.
    Blend {
        /// Ratings file from `fit-preseason`.
        #[arg(long)]
        preseason: PathBuf,
        #[arg(long, alias = "data")]
        matchups: PathBuf,
        /// Use only this season's games; required when the file spans several.
        #[arg(long)]
        season: Option<i32>,
        #[arg(long, default_value_t = 17)]
        last_week: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PageRank scores over the loser-to-winner graph.
    Pagerank {
        #[arg(long, alias = "data")]
        matchups: PathBuf,
        /// Use only this season's games; required when the file spans several.
        #[arg(long)]
        season: Option<i32>,
        #[arg(long, default_value_t = 0.85)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TimelineArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub game: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// GameState JSON; read from stdin when absent.
    #[arg(long)]
    pub state: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Double round robins to play.
    #[arg(long, default_value_t = 2)]
    pub rounds: usize,
}
