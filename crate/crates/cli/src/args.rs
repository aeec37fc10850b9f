use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "annulab", version, about = "Numerical experiments with annulus homeomorphisms")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Map spec, e.g. `RIGID:alpha=0.25` or `variant=PT,gamma=0.1`.
    #[arg(long, global = true)]
    pub map: Option<String>,
    /// Grid depth d (boxes of side 2^-d).
    #[arg(long, global = true)]
    pub resolution: Option<u32>,
    /// Iteration horizon.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Residual tolerance for root finding.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomly sampled choices.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Rotation number estimate along one orbit.
    Rotation {
        #[arg(long, value_parser = pair, allow_hyphen_values = true, default_value = "0,0.5")]
        point: (f64, f64),
        /// Same as --horizon.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Verify a band window, or grow one from a seed box.
    Window {
        #[arg(long, value_parser = pair, default_value = "0.05,0.95")]
        band: (f64, f64),
        /// Band checked when not growing.
        #[arg(long, value_parser = pair, default_value = "0.25,0.75")]
        window: (f64, f64),
        #[arg(long)]
        grow: bool,
        /// Seed point for --grow.
        #[arg(long, value_parser = pair, allow_hyphen_values = true, default_value = "0.5,0.5")]
        start: (f64, f64),
        /// Also build an invariant annulus from the seed.
        #[arg(long)]
        annulus: bool,
        #[arg(long, default_value_t = 100)]
        iters: usize,
    },
    /// Box cover of the global attractor inside a band window.
    Attractor {
        #[arg(long, value_parser = pair, default_value = "0,1")]
        band: (f64, f64),
        #[arg(long, value_parser = pair, default_value = "0.25,0.75")]
        window: (f64, f64),
        #[arg(long, default_value_t = 60)]
        iters: usize,
    },
    /// Chain-recurrent boxes of the transition graph.
    Recurrence {
        #[arg(long, value_parser = pair, default_value = "0.05,0.95")]
        band: (f64, f64),
    },
    /// Search for returning disks.
    Returning {
        #[arg(long, value_parser = pair, default_value = "0.05,0.95")]
        band: (f64, f64),
        /// `+`, `-` or `both`.
        #[arg(long, default_value = "both", allow_hyphen_values = true)]
        sign: String,
        /// Depth of a chain-recurrent set recorded next to the witnesses.
        #[arg(long)]
        recurrence: Option<u32>,
        #[arg(long, value_parser = pair)]
        recurrence_band: Option<(f64, f64)>,
    },
    /// Fixed points with indices.
    Fixed {
        #[arg(long, value_parser = pair, default_value = "0.05,0.95")]
        band: (f64, f64),
    },
    /// Periodic orbits of rotation number p/q.
    Periodic {
        #[arg(long, allow_hyphen_values = true)]
        p: i64,
        #[arg(long)]
        q: u32,
        #[arg(long, value_parser = pair, default_value = "0.05,0.95")]
        band: (f64, f64),
    },
    /// Drift classification of sample orbits.
    Drift {
        #[arg(long, value_parser = pair, default_value = "0.05,0.95")]
        band: (f64, f64),
        #[arg(long, default_value_t = 5)]
        nx: usize,
        #[arg(long, default_value_t = 10)]
        ny: usize,
        /// Random sample size instead of the grid (uses --seed).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Billiard trajectories and bumper avoidance.
    Billiard {
        /// `circle[:r]` or `ellipse:a,b`.
        #[arg(long, default_value = "circle:1")]
        table: String,
        #[arg(long, default_value_t = 0.05)]
        theta0: f64,
        #[arg(long, default_value_t = 0.0)]
        s0: f64,
        /// Same as --horizon.
        #[arg(long)]
        steps: Option<usize>,
        /// JSON file `{"bumpers": [{"center": [x, y], "radius": r}]}`.
        #[arg(long)]
        bumpers: Option<PathBuf>,
        /// Bumper `x,y,r`; repeatable.
        #[arg(long, allow_hyphen_values = true)]
        bumper: Vec<String>,
    },
    /// Triple horseshoe: shift conjugacy and the returning-disk claims.
    Horseshoe {
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Itinerary `past.future` whose cylinder is printed.
        #[arg(long)]
        word: Option<String>,
    },
    /// Replay the checks recorded in a certificate.
    Reverify { file: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rotation { .. } => "rotation",
            Command::Window { .. } => "window",
            Command::Attractor { .. } => "attractor",
            Command::Recurrence { .. } => "recurrence",
            Command::Returning { .. } => "returning",
            Command::Fixed { .. } => "fixed",
            Command::Periodic { .. } => "periodic",
            Command::Drift { .. } => "drift",
            Command::Billiard { .. } => "billiard",
            Command::Horseshoe { .. } => "horseshoe",
            Command::Reverify { .. } => "reverify",
        }
    }
}

pub fn pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: `{t}`"));
    Ok((num(a)?, num(b)?))
}
