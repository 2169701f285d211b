use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "scottbench", version, about = "Finite model theory workbench")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Base seed for anything randomized.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,
    /// Wall-clock limit for the search, in milliseconds.
    #[arg(long, global = true)]
    pub limit_ms: Option<u64>,
    /// Approximate memory limit for the search, in MiB.
    #[arg(long, global = true)]
    pub limit_mem_mb: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scott analysis of a finite structure.
    Scott {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the printed Scott sentence here.
        #[arg(long)]
        emit_sentence: Option<PathBuf>,
        /// Include the isomorphism invariant.
        #[arg(long)]
        invariant: bool,
    },
    /// Decide isomorphism of two structures.
    Iso {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Oracle::Both)]
        oracle: Oracle,
    },
    /// Compile a sentence into a first-order theory with omitted types.
    Compile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sig: PathBuf,
        /// Where to write compiled.json; the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the compiled transform to a structure, or invert it.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        compiled: PathBuf,
        #[arg(long)]
        inverse: bool,
    },
    /// Run the completion to a fixpoint over bounded models.
    Complete {
        #[arg(long)]
        compiled: PathBuf,
        /// Largest model size consulted.
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        max_steps: usize,
        #[command(flatten)]
        pool: PoolArgs,
    },
    /// Isolation verdicts for the tuples of a structure.
    Atomic {
        #[arg(long = "in")]
        input: PathBuf,
        /// `self` for the complete theory of the structure, or a theory file.
        #[arg(long, default_value = "self")]
        theory: String,
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long, default_value_t = 2)]
        tuple_len: usize,
    },
    /// Greedy construction of an atomic set closed under pool witnesses.
    BuildAtomic {
        #[arg(long = "in")]
        input: PathBuf,
        /// Most elements the construction may add.
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value = "self")]
        theory: String,
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long, default_value_t = 2)]
        tuple_len: usize,
    },
    /// Refine an equivalence on edge colors to its fixpoint.
    Refine {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = BaseArg::E1)]
        base: BaseArg,
        /// Vertex colors collapsed by `--base es`, e.g. `0,2`.
        #[arg(long)]
        s: Option<String>,
        /// Emit a defining formula for every class.
        #[arg(long)]
        emit_formulas: bool,
        /// Stage of the emitted formulas (default: the fixpoint).
        #[arg(long)]
        stage: Option<usize>,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Validate a colored order and give its fixpoint verdicts.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Order terms: encode a colored order, or recover one.
    Order {
        #[command(subcommand)]
        op: OrderOp,
    },
    /// Generators.
    Gen {
        #[command(subcommand)]
        what: GenWhat,
    },
    /// Run a generator under many seeds and compare the outputs up to
    /// isomorphism.
    Probe {
        #[command(subcommand)]
        what: GenWhat,
        #[arg(long, global = true, default_value_t = 8)]
        trials: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Oracle {
    Brute,
    Scott,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseArg {
    E0,
    E1,
    Es,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairsArg {
    All,
    Some,
}

#[derive(Args, Debug, Clone)]
pub struct ModeArgs {
    #[arg(long, value_enum, default_value_t = PairsArg::All)]
    pub pairs: PairsArg,
    /// Only middle points strictly between the pair.
    #[arg(long)]
    pub interval: bool,
    /// Matched middle points must share their vertex color.
    #[arg(long)]
    pub vertex_strict: bool,
    /// Skip the additive closure after each step.
    #[arg(long)]
    pub literal: bool,
}

#[derive(Args, Debug, Clone)]
pub struct PoolArgs {
    /// Largest formula size in the pool.
    #[arg(long, default_value_t = 10)]
    pub pool_size: u64,
    /// Most formulas in the pool.
    #[arg(long, default_value_t = 2000)]
    pub pool_max: usize,
    /// Quantifiers allowed in pool formulas.
    #[arg(long, value_enum, default_value_t = QuantArg::Single)]
    pub quantifiers: QuantArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantArg {
    None,
    Single,
    Any,
}

#[derive(Subcommand, Debug)]
pub enum OrderOp {
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
    },
    Recover {
        /// A JSON file holding the term (array or string).
        #[arg(long = "in", conflicts_with = "term")]
        input: Option<PathBuf>,
        /// The term inline, e.g. `Q + 2 + Q + 3`.
        #[arg(long)]
        term: Option<String>,
        /// Edge color definitions: `{"7": "<formula in x0, x1>", ...}`.
        #[arg(long)]
        formulas: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug, Clone)]
pub enum GenWhat {
    /// Fragment of the eventually-zero sequence order.
    Example53 {
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        grid: u32,
        #[arg(long, default_value_t = 2)]
        vertex_colors: u32,
    },
    /// Model of the nested-equivalence theory.
    Superstable {
        #[arg(long = "N", default_value_t = 2)]
        levels: usize,
        #[arg(long, default_value_t = 10)]
        max_size: usize,
    },
    /// Random structure; uses `--seed`.
    RandomStructure {
        /// Relations as `R:2,P:1`.
        #[arg(long, default_value = "R:2")]
        rels: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
    },
    /// Random valid colored order; uses `--seed`.
    RandomOrder {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        vertex_colors: u32,
        #[arg(long, default_value_t = 5)]
        edge_colors: usize,
    },
}
