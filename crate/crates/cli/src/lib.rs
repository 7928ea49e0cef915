//! Command-line entry points. Every command reads a [`RunConfig`] and writes
//! its outputs under `out`; the same config and seed give identical bytes.

pub mod config;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use shadowgame_client::api::{CreateSession, Start};
use shadowgame_client::Client;
use shadowgame_core::engine::{
    default_start, leaf_depth_histogram, run_game, run_match_statistics, Controller, DepthHistogram, GameRecord,
    MatchStatistics, SweepLayout,
};
use shadowgame_core::geometry::{signed_distance, Grid2D};
use shadowgame_core::hji::{play_hji_trajectory, solve_with_progress, HjiProblem, Trajectory, ValueFunction4D};
use shadowgame_core::io::{read_value_dump, write_field, write_pgm, write_value_dump};
use shadowgame_core::mcts::{mcts_search, PursuitGame};
use shadowgame_core::strategies::{GameState, GameWorld};
use shadowgame_core::visibility::{vantage_fields_at, AuxSource};

pub use config::RunConfig;
use config::{parse_cell, parse_cells, parse_point};

#[derive(Debug, Parser)]
#[command(name = "shadowgame", version, about = "Surveillance-evasion games on occluded grids")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each overrides the matching key of `--config`.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scene JSON file
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    /// Grid cells per side [default: 16]
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Pursuer speed [default: from the scene]
    #[arg(long = "fp", global = true)]
    pub f_p: Option<f64>,
    /// Evader speed [default: from the scene]
    #[arg(long = "fe", global = true)]
    pub f_e: Option<f64>,
    /// stationary, distance, shadow, blend or mcts:<evaluator>[:<M>] [default: blend]
    #[arg(long, global = true)]
    pub controller: Option<String>,
    /// Search iterations M [default: 1000]
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// Dirichlet noise weight [default: 0.25]
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    /// Dirichlet concentration [default: 0.3]
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Visit-count temperature [default: 1]
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Turn limit K_max [default: 100]
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Value-function horizon [default: 10]
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    /// Time step [default: h/(16 max(f_P, f_E)) for solves]
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Stop when the per-step L1 change falls below this [default: 1e-5]
    #[arg(long, global = true)]
    pub stop_tol: Option<f64>,
    /// Obstacle treatment in the value solve [default: regularized]
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Largest grid accepted by the value solve [default: 32]
    #[arg(long, global = true)]
    pub max_m: Option<usize>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Regularized,
    Walled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AuxArg {
    Visibility,
    Occluder,
}

impl From<AuxArg> for AuxSource {
    fn from(a: AuxArg) -> Self {
        match a {
            AuxArg::Visibility => AuxSource::Visibility,
            AuxArg::Occluder => AuxSource::Occluder,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Level-set fields for one vantage point as PGM images and raw dumps
    Fields {
        /// Vantage point x,y
        #[arg(long, default_value = "0.125,0.5")]
        vantage: String,
        /// First argument of the auxiliary function
        #[arg(long, value_enum, default_value = "visibility")]
        aux: AuxArg,
    },
    /// Solve the value function and dump it with a convergence log
    Solve,
    /// Cut a 2-D slice out of a value dump
    Slice {
        /// Value dump sidecar [default: <out>/value.json]
        #[arg(long)]
        value: Option<PathBuf>,
        /// Fix the pursuer at cell i,j
        #[arg(long, conflicts_with = "fix_evader")]
        fix_pursuer: Option<String>,
        /// Fix the evader at cell i,j
        #[arg(long)]
        fix_evader: Option<String>,
    },
    /// Play optimal feedback controls from a value dump
    Trajectory {
        /// Value dump sidecar [default: <out>/value.json]
        #[arg(long)]
        value: Option<PathBuf>,
        /// Pursuer start x,y
        #[arg(long, default_value = "0.125,0.5")]
        start_p: String,
        /// Evader start x,y
        #[arg(long, default_value = "0.875,0.5")]
        start_e: String,
    },
    /// Play one discrete game and write its record
    Play(StartArgs),
    /// Play one game per free evader start
    Sweep {
        /// Pursuer cells i,j;... [default: the default start]
        #[arg(long)]
        pursuers: Option<String>,
        /// Fixed evader cells i,j;... [default: the default start minus the swept evader]
        #[arg(long)]
        other_evaders: Option<String>,
        /// Team position of the swept evader
        #[arg(long, default_value_t = 0)]
        swept: usize,
    },
    /// Leaf depths of one search, binned by iteration
    Histogram {
        #[command(flatten)]
        start: StartArgs,
        /// Iterations per bin
        #[arg(long, default_value_t = 100)]
        bin_width: usize,
    },
    /// Run the session service
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Talk to a running session service
    Session {
        #[arg(long, env = "SEG_SERVER", default_value = "http://127.0.0.1:8080")]
        server: String,
        #[command(subcommand)]
        action: SessionCommand,
    },
}

#[derive(Debug, Default, Args)]
pub struct StartArgs {
    /// Pursuer cells i,j;... [default: near (1/2, 1/4)]
    #[arg(long)]
    pub pursuers: Option<String>,
    /// Evader cells i,j;... [default: near (1/8, 1/2)]
    #[arg(long)]
    pub evaders: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Create a session for the configured scene
    New(StartArgs),
    /// Print the current view
    Show { id: String },
    /// Move the evaders to cells i,j;...
    Move { id: String, to: String },
    /// Print the move log
    Log { id: String },
}

impl CommonArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(m, controller, noise, alpha, tau, k_max, seed, out, horizon, stop_tol, max_m);
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    c.$field = self.$field.clone();
                }
            )*};
        }
        set_opt!(scene, f_p, f_e, iterations, dt, workers);
        if let Some(mode) = self.mode {
            c.mode = match mode {
                ModeArg::Regularized => shadowgame_core::hji::ObstacleMode::Regularized,
                ModeArg::Walled => shadowgame_core::hji::ObstacleMode::Walled,
            };
        }
        Ok(c)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn world(cfg: &RunConfig) -> Result<Arc<GameWorld>> {
    Ok(Arc::new(GameWorld::new(cfg.scene()?, Grid2D::new(cfg.m)?)?))
}

fn start_state(world: &GameWorld, args: &StartArgs) -> Result<GameState> {
    let default = default_start(world);
    let pursuers = match &args.pursuers {
        Some(s) => parse_cells(s)?,
        None => default.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?.pursuers.clone(),
    };
    let evaders = match &args.evaders {
        Some(s) => parse_cells(s)?,
        None => default.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?.evaders.clone(),
    };
    let s = GameState::new(pursuers, evaders);
    world.validate_state(&s)?;
    Ok(s)
}

pub const FIELD_NAMES: [&str; 6] = ["phi", "psi", "grazing", "aux", "aux_visibility", "xi"];

/// Six level-set panels for `vantage`, as PGM images plus raw dumps.
pub fn cmd_fields(cfg: &RunConfig, vantage: [f64; 2], aux: AuxSource) -> Result<Vec<PathBuf>> {
    let scene = cfg.scene()?;
    let phi = signed_distance(&scene, Grid2D::new(cfg.m)?);
    let f = vantage_fields_at(&phi, vantage, aux).with_context(|| format!("vantage {vantage:?}"))?;
    let mut written = Vec::new();
    for (name, field) in FIELD_NAMES
        .iter()
        .zip([&phi, &f.psi, &f.grazing, &f.aux, &f.aux_visibility, &f.xi])
    {
        let pgm = cfg.out.join(format!("{name}.pgm"));
        fs::create_dir_all(&cfg.out)?;
        write_pgm(&pgm, field)?;
        let (json, bin) = write_field(&cfg.out, name, field)?;
        written.extend([pgm, json, bin]);
    }
    Ok(written)
}

/// Value dump plus `convergence.csv` with one `iteration,l1_change` row per step.
pub fn cmd_solve(cfg: &RunConfig) -> Result<(ValueFunction4D, Vec<PathBuf>)> {
    let scene = cfg.scene()?;
    let mut log = String::from("iteration,l1_change\n");
    let v = solve_with_progress(&scene, Grid2D::new(cfg.m)?, &cfg.solve_options(), |n, change| {
        log.push_str(&format!("{n},{change:e}\n"));
        if n % 100 == 0 {
            tracing::info!(iteration = n, change, "solving");
        }
    })?;
    let (json, bin) = write_value_dump(&cfg.out, "value", &v)?;
    let csv = cfg.out.join("convergence.csv");
    fs::write(&csv, log)?;
    Ok((v, vec![json, bin, csv]))
}

/// Rebuilds a solved value function from its dump and the scene it came from.
pub fn load_value(cfg: &RunConfig, sidecar: &Path) -> Result<ValueFunction4D> {
    let (header, values) = read_value_dump(sidecar)?;
    let mut scene = cfg.scene()?;
    scene.f_p = header.f_p;
    scene.f_e = header.f_e;
    ensure!(
        scene.hash() == header.scene_hash,
        "{} was solved for a different scene",
        sidecar.display()
    );
    let mut opts = cfg.solve_options();
    opts.max_m = opts.max_m.max(header.m);
    let problem = Arc::new(HjiProblem::new(&scene, Grid2D::new(header.m)?, &opts)?);
    Ok(ValueFunction4D::from_values(
        problem,
        values,
        header.horizon,
        header.dt,
        header.iterations,
    )?)
}

fn value_path(cfg: &RunConfig, value: &Option<PathBuf>) -> PathBuf {
    value.clone().unwrap_or_else(|| cfg.out.join("value.json"))
}

#[derive(Clone, Copy, Debug)]
pub enum Fix {
    Pursuer(shadowgame_core::geometry::Cell),
    Evader(shadowgame_core::geometry::Cell),
}

pub fn cmd_slice(cfg: &RunConfig, sidecar: &Path, fix: Fix) -> Result<Vec<PathBuf>> {
    let v = load_value(cfg, sidecar)?;
    let (name, field) = match fix {
        Fix::Pursuer(c) => {
            v.grid().check(c)?;
            (format!("slice_p_{}_{}", c.i, c.j), v.slice_fixed_pursuer(c))
        }
        Fix::Evader(c) => {
            v.grid().check(c)?;
            (format!("slice_e_{}_{}", c.i, c.j), v.slice_fixed_evader(c))
        }
    };
    let pgm = cfg.out.join(format!("{name}.pgm"));
    fs::create_dir_all(&cfg.out)?;
    write_pgm(&pgm, &field)?;
    let (json, bin) = write_field(&cfg.out, &name, &field)?;
    Ok(vec![pgm, json, bin])
}

pub fn cmd_trajectory(
    cfg: &RunConfig,
    sidecar: &Path,
    start_p: [f64; 2],
    start_e: [f64; 2],
) -> Result<(Trajectory, PathBuf)> {
    let v = load_value(cfg, sidecar)?;
    let dt = cfg.dt.unwrap_or(v.dt);
    ensure!(dt > 0.0, "dt must be positive");
    let steps = (v.horizon / dt).ceil() as usize;
    let t = play_hji_trajectory(&v, start_p, start_e, dt, steps)?;
    let path = cfg.out.join("trajectory.json");
    write_json(&path, &t)?;
    Ok((t, path))
}

/// One game from `start` (the default start when `None`), written to `game.json`.
pub fn cmd_play(cfg: &RunConfig, start: Option<GameState>) -> Result<(GameRecord, PathBuf)> {
    let world = world(cfg)?;
    let start = match start {
        Some(s) => s,
        None => default_start(&world)?,
    };
    let record = run_game(&world, &start, &cfg.controller()?, cfg.k_max, cfg.seed)?;
    let path = cfg.out.join("game.json");
    write_json(&path, &record)?;
    Ok((record, path))
}

/// Sweep outputs: `sweep.csv`, `summary.json`, and the time slice as
/// `sweep_slice.pgm` plus a raw dump.
pub fn cmd_sweep(cfg: &RunConfig, layout: Option<SweepLayout>) -> Result<(MatchStatistics, Vec<PathBuf>)> {
    let world = world(cfg)?;
    let layout = match layout {
        Some(l) => l,
        None => {
            let s = default_start(&world)?;
            let mut other = s.evaders;
            other.remove(0);
            SweepLayout {
                pursuers: s.pursuers,
                other_evaders: other,
                swept: 0,
            }
        }
    };
    let stats = run_match_statistics(&world, &cfg.controller()?, &layout, cfg.k_max, cfg.seed)?;
    fs::create_dir_all(&cfg.out)?;
    let csv = cfg.out.join("sweep.csv");
    fs::write(&csv, stats.to_csv()?)?;
    let summary = cfg.out.join("summary.json");
    write_json(&summary, &stats.summary)?;
    let pgm = cfg.out.join("sweep_slice.pgm");
    write_pgm(&pgm, &stats.slice)?;
    let (json, bin) = write_field(&cfg.out, "sweep_slice", &stats.slice)?;
    Ok((stats, vec![csv, summary, pgm, json, bin]))
}

pub fn cmd_histogram(cfg: &RunConfig, start: Option<GameState>, bin_width: usize) -> Result<(DepthHistogram, PathBuf)> {
    let Controller::Mcts { evaluator, mut params } = cfg.controller()? else {
        bail!("the histogram needs an mcts controller, got {:?}", cfg.controller);
    };
    let world = world(cfg)?;
    let start = match start {
        Some(s) => s,
        None => default_start(&world)?,
    };
    params.trace = true;
    let game = PursuitGame::new(Arc::clone(&world), cfg.k_max);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let result = mcts_search(&game, &evaluator, &start, &params, &mut rng)?;
    let hist = leaf_depth_histogram(&result.trace, bin_width, world.dt())?;
    let path = cfg.out.join("histogram.json");
    write_json(&path, &hist)?;
    Ok((hist, path))
}

pub async fn cmd_serve(addr: SocketAddr) -> Result<()> {
    shadowgame_server::serve(addr, shadowgame_server::AppState::new()).await?;
    Ok(())
}

pub async fn cmd_session(cfg: &RunConfig, server: &str, action: &SessionCommand) -> Result<serde_json::Value> {
    let client = Client::new(server);
    let out = match action {
        SessionCommand::New(start) => {
            let to_start = |p: &Option<String>, e: &Option<String>| -> Result<Option<Start>> {
                Ok(match (p, e) {
                    (None, None) => None,
                    (Some(p), Some(e)) => Some(Start {
                        pursuers: parse_cells(p)?,
                        evaders: parse_cells(e)?,
                    }),
                    _ => bail!("give both --pursuers and --evaders, or neither"),
                })
            };
            let req = CreateSession {
                scene: cfg.scene()?,
                m: cfg.m,
                controller: cfg.controller.clone(),
                start: to_start(&start.pursuers, &start.evaders)?,
                k_max: cfg.k_max,
                seed: cfg.seed,
            };
            serde_json::to_value(client.create_session(&req).await?)?
        }
        SessionCommand::Show { id } => serde_json::to_value(client.get_session(id).await?)?,
        SessionCommand::Move { id, to } => serde_json::to_value(client.submit_move(id, parse_cells(to)?).await?)?,
        SessionCommand::Log { id } => serde_json::to_value(client.move_log(id).await?)?,
    };
    Ok(out)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.common.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        ensure!(n > 0, "--workers must be positive");
        pool = pool.num_threads(n);
    }
    // the global pool can only be set once per process
    let _ = pool.build_global();
    match &cli.command {
        Command::Fields { vantage, aux } => print_paths(&cmd_fields(&cfg, parse_point(vantage)?, (*aux).into())?),
        Command::Solve => {
            let (v, paths) = cmd_solve(&cfg)?;
            eprintln!("{} iterations, last L1 change {:e}", v.iterations, v.last_change);
            print_paths(&paths);
        }
        Command::Slice {
            value,
            fix_pursuer,
            fix_evader,
        } => {
            let fix = match (fix_pursuer, fix_evader) {
                (Some(p), None) => Fix::Pursuer(parse_cell(p)?),
                (None, Some(e)) => Fix::Evader(parse_cell(e)?),
                _ => bail!("give exactly one of --fix-pursuer and --fix-evader"),
            };
            print_paths(&cmd_slice(&cfg, &value_path(&cfg, value), fix)?);
        }
        Command::Trajectory {
            value,
            start_p,
            start_e,
        } => {
            let (t, path) = cmd_trajectory(
                &cfg,
                &value_path(&cfg, value),
                parse_point(start_p)?,
                parse_point(start_e)?,
            )?;
            eprintln!("{:?} after {} steps", t.outcome, t.times.len() - 1);
            print_paths(&[path]);
        }
        Command::Play(args) => {
            let w = world(&cfg)?;
            let (record, path) = cmd_play(&cfg, Some(start_state(&w, args)?))?;
            eprintln!("{:?} after {} turns", record.outcome, record.length);
            print_paths(&[path]);
        }
        Command::Sweep {
            pursuers,
            other_evaders,
            swept,
        } => {
            let layout = match (pursuers, other_evaders) {
                (None, None) if *swept == 0 => None,
                _ => {
                    let w = world(&cfg)?;
                    let d = default_start(&w).ok();
                    let pursuers = match pursuers {
                        Some(p) => parse_cells(p)?,
                        None => d
                            .as_ref()
                            .context("no default start; pass --pursuers")?
                            .pursuers
                            .clone(),
                    };
                    let other_evaders = match other_evaders {
                        Some(e) => parse_cells(e)?,
                        None => {
                            let mut e = d
                                .as_ref()
                                .context("no default start; pass --other-evaders")?
                                .evaders
                                .clone();
                            ensure!(*swept < e.len(), "--swept {swept} is outside the evader team");
                            e.remove(*swept);
                            e
                        }
                    };
                    Some(SweepLayout {
                        pursuers,
                        other_evaders,
                        swept: *swept,
                    })
                }
            };
            let (stats, paths) = cmd_sweep(&cfg, layout)?;
            let s = &stats.summary;
            eprintln!(
                "{}: {:.1}% pursuer wins over {} games",
                s.controller, s.win_pct, s.n_games
            );
            print_paths(&paths);
        }
        Command::Histogram { start, bin_width } => {
            let w = world(&cfg)?;
            let (h, path) = cmd_histogram(&cfg, Some(start_state(&w, start)?), *bin_width)?;
            eprintln!("{} leaves in {} bins", h.total(), h.bins.len());
            print_paths(&[path]);
        }
        Command::Serve { addr } => tokio::runtime::Runtime::new()?.block_on(cmd_serve(*addr))?,
        Command::Session { server, action } => {
            let v = tokio::runtime::Runtime::new()?.block_on(cmd_session(&cfg, server, action))?;
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}
