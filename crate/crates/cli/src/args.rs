use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "bellman",
    version,
    about = "Sharp constants and Bellman surfaces for perturbed martingale transforms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Exponent p in (1, 2). `sweep` accepts a list: `1.2,1.5` or `start:stop:n`.
    #[arg(long, global = true, default_value = "1.5")]
    pub p: String,

    /// Perturbation tau. List syntax as for `--p` in `sweep`.
    #[arg(long, global = true, default_value = "3")]
    pub tau: String,

    /// Bound beta >= 0 on |EG|/|EF| (`inf` allowed). List syntax as for `--p` in `sweep`.
    #[arg(long, global = true, default_value = "0")]
    pub beta: String,

    #[arg(long = "grid-y2", global = true)]
    pub grid_y2: Option<usize>,

    #[arg(long = "grid-y3", global = true)]
    pub grid_y3: Option<usize>,

    #[arg(long = "y3-max", global = true)]
    pub y3_max: Option<f64>,

    /// Truncation parameter of the extremizers.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub eps: f64,

    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, global = true)]
    pub trials: Option<u64>,

    #[arg(long, global = true, default_value_t = 12)]
    pub depth: usize,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sharp constant for one (p, tau, beta).
    Constant,
    /// Dump `y2,y3,region,s,B,t1,t2` on a grid.
    Surface,
    /// Residual suite on the surface plus a random adversary run.
    Verify {
        /// Shrinks grids, interface samples and trials to this size.
        #[arg(long)]
        samples: Option<usize>,
        /// Flips the sign of the vertical slope before checking.
        #[arg(long, hide = true)]
        inject_t2_flip: bool,
    },
    /// Constants over the product of the `--p`, `--tau` and `--beta` lists.
    Sweep,
    /// Builds the finite extremal pair at `B(-1, y3)`.
    Extremizer {
        #[arg(long, default_value_t = 10.0)]
        y3: f64,
    },
    /// Random search for pairs that beat the constant.
    Adversary,
}
