use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gk", version, about = "Knockoff variant selection from GWAS summary statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the knockoff diagonal for an LD block.
    SolveD(SolveDArgs),
    /// Select variants from summary statistics and LD blocks.
    KnockoffFilter(FilterArgs),
    /// Per-variant Z-scores from individual-level data.
    Assoc(AssocArgs),
    /// Combine several studies' summary statistics.
    Meta(MetaArgs),
    /// Replicated FDR and power experiment from a scenario file.
    Simulate(SimulateArgs),
    /// Association (or meta-analysis) followed by the knockoff filter.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LdFileFormat {
    /// Binary if the file starts with the binary magic, text otherwise.
    Auto,
    Text,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagChoice {
    Sdp,
    Equi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// Score test under the mixed model with the supplied kinship.
    Mixed,
    /// Score test ignoring relatedness.
    Naive,
    Wald,
    Lrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Trait {
    Gaussian,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Combine {
    /// Overlap-aware weighted Z.
    Weighted,
    Fisher,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveDArgs {
    #[arg(long)]
    pub ld: PathBuf,
    #[arg(long, value_enum, default_value_t = LdFileFormat::Auto)]
    pub format: LdFileFormat,
    #[arg(long, value_enum, default_value_t = DiagChoice::Sdp)]
    pub method: DiagChoice,
    /// Number of knockoff copies.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct KnockoffOpts {
    /// LD block file; repeat for several blocks.
    #[arg(long, required = true)]
    pub ld: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = LdFileFormat::Auto)]
    pub format: LdFileFormat,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub fdr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DiagChoice::Sdp)]
    pub method: DiagChoice,
    /// Shrinkage of the representatives' LD toward the identity.
    #[arg(long, default_value_t = 0.05)]
    pub regularization: f64,
    /// Absolute correlation that joins variants into one cluster.
    #[arg(long, default_value_t = 0.75)]
    pub cluster_cutoff: f64,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub sumstats: PathBuf,
    #[command(flatten)]
    pub knockoff: KnockoffOpts,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CohortOpts {
    /// Tab-separated cohort table: iid, y, covariates and genotype columns.
    #[arg(long)]
    pub cohort: PathBuf,
    /// Pairwise relatedness (iid1, iid2, phi); unrelated when omitted.
    #[arg(long)]
    pub kinship: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Model::Mixed)]
    pub model: Model,
    #[arg(long = "trait", value_enum, default_value_t = Trait::Gaussian)]
    pub trait_: Trait,
}

#[derive(Debug, Args)]
pub struct AssocArgs {
    #[command(flatten)]
    pub cohort: CohortOpts,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StudyOpts {
    /// Tab-separated list of studies: name, n, path.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = Combine::Weighted)]
    pub combine: Combine,
    /// Treat the studies as sample-disjoint instead of estimating overlap.
    #[arg(long)]
    pub independent: bool,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    #[command(flatten)]
    pub studies: StudyOpts,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario's replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["cohort", "studies"])]
pub struct PipelineArgs {
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long)]
    pub kinship: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Model::Mixed)]
    pub model: Model,
    #[arg(long = "trait", value_enum, default_value_t = Trait::Gaussian)]
    pub trait_: Trait,
    /// Study list for a meta-analysis input instead of a cohort.
    #[arg(long)]
    pub studies: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Combine::Weighted)]
    pub combine: Combine,
    #[arg(long)]
    pub independent: bool,
    #[command(flatten)]
    pub knockoff: KnockoffOpts,
    #[command(flatten)]
    pub common: Common,
}
