//! Command-line front end. Every command writes only to the paths it is
//! given; status lines go to the supplied writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_list, RunConfig};
use crate::conflict::{self, Dyad, NormParams, SynthConfig, N_FEATURES};
use crate::control::{
    self, AvoidanceReport, ControlRun, ControlStrategy, Controllable, MultiStartAnnealing, AVOIDANCE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::expectations::{init_model, split_indices, train, ExpectationModel, TrainConfig};
use crate::optimizers::{AnnealingSchedule, GoldenConfig};
use crate::utility::{self, inverse_cost, rank_alternatives};

pub const DEFAULT_HIDDEN: &[usize] = &[10];
pub const DEFAULT_LEARNING_RATE: f64 = 1.0;
pub const DEFAULT_EPOCHS: usize = 3000;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Parser)]
#[command(name = "ratchoice", version, about = "Utility ranking, risk-model training and feedback control of dyadic conflict risk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank alternatives by inverse-cost utility.
    Rank(RankArgs),
    /// Generate a synthetic dyad CSV.
    GenData(GenDataArgs),
    /// Train a risk model on a dyad CSV.
    Train(TrainArgs),
    /// Tune controllable variables of conflict dyads and report avoidance.
    Control(ControlArgs),
    /// Turn a control summary into plot-ready rows.
    Report(ReportArgs),
    /// Run gen-data, train, control --all and report into one directory.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// CSV with `id,label,cost` columns.
    pub input: PathBuf,
    /// Ranking CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of dyads.
    #[arg(long)]
    pub n: Option<usize>,
    /// Measurement noise on continuous features, in generator-scale units.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dyad CSV (flat or keyed panel).
    pub data: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Share of rows used for fitting; the rest is held out.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, alias = "out")]
    pub model_out: PathBuf,
    #[arg(long)]
    pub norm_out: PathBuf,
    /// Optional `epoch,loss` CSV.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ControlArgs {
    /// Dyad CSV; panels are lagged the same way as for training.
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub norm: PathBuf,
    /// `single:<var>` or `multiple:<var>+<var>...` (`multiple:all`). Repeatable.
    #[arg(long, conflicts_with = "all")]
    pub strategy: Vec<String>,
    /// The four single strategies followed by multiple:all.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Summary CSV, one row per strategy.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-dyad before/after CSV.
    #[arg(long)]
    pub detail_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary CSV written by `control`.
    pub summary: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Directory receiving data.csv, model.txt, norm.txt, loss.csv,
    /// summary.csv, detail.csv and plot.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Status output of a command: `out` for results, `err` for warnings.
pub struct Console<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Console<'_> {
    fn say(&mut self, line: impl AsRef<str>) -> Result<()> {
        writeln!(self.out, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
    }

    fn warn(&mut self, line: impl AsRef<str>) -> Result<()> {
        writeln!(self.err, "warning: {}", line.as_ref()).map_err(|e| Error::io("<stderr>", e))
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn run(cli: Cli, console: &mut Console<'_>) -> Result<()> {
    match cli.command {
        Command::Rank(a) => cmd_rank(&a, console),
        Command::GenData(a) => cmd_gen_data(&a, console),
        Command::Train(a) => cmd_train(&a, console),
        Command::Control(a) => cmd_control(&a, console),
        Command::Report(a) => cmd_report(&a, console),
        Command::Demo(a) => cmd_demo(&a, console),
    }
}

pub fn cmd_rank(args: &RankArgs, console: &mut Console<'_>) -> Result<()> {
    let alts = utility::load_alternatives(&args.input)?;
    if alts.is_empty() {
        write_file(&args.out, |w| utility::write_ranking(w, &[]))?;
        return console.warn(format!("{}: no alternatives to rank", args.input.display()));
    }
    let ranked = rank_alternatives(&alts, inverse_cost)?;
    write_file(&args.out, |w| utility::write_ranking(w, &ranked))?;
    let (best, u) = ranked[0];
    console.say(format!("chosen: {} ({}) utility {:.8}", best.id, best.label, u.value()))?;
    match ranked.get(1) {
        Some((_, forgone)) => {
            console.say(format!("opportunity cost: {:.8}", forgone.value()))?;
            if utility::has_multiple_optima(&alts, inverse_cost, utility::DEFAULT_EPSILON)? {
                console.say("note: several alternatives tie for the best utility")?;
            }
            Ok(())
        }
        None => console.say("opportunity cost: none (single alternative)"),
    }
}

fn synth_config(cfg: &RunConfig, seed: u64, n: Option<usize>, noise_sd: Option<f64>) -> Result<SynthConfig> {
    let mut synth = SynthConfig {
        n: cfg.resolve(n, "n", SynthConfig::default().n)?,
        seed,
        noise_sd: cfg.resolve(noise_sd, "noise_sd", 0.0)?,
        ..SynthConfig::default()
    };
    if let Some(c) = cfg.get_list::<f64>("coefficients")? {
        synth.coefficients = c
            .try_into()
            .map_err(|c: Vec<f64>| Error::Config(format!("coefficients: expected {} values, got {}", N_FEATURES + 1, c.len())))?;
    }
    synth.validate()?;
    Ok(synth)
}

pub fn cmd_gen_data(args: &GenDataArgs, console: &mut Console<'_>) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let seed = cfg.require_seed(args.seed, "gen-data")?;
    let synth = synth_config(&cfg, seed, args.n, args.noise_sd)?;
    let dyads = conflict::synth_generate(&synth)?;
    write_file(&args.out, |w| conflict::write_dyads(w, &dyads))?;
    let conflicts = dyads.iter().filter(|d| d.conflict).count();
    console.say(format!(
        "wrote {} dyads, {conflicts} with conflict ({:.1}%)",
        dyads.len(),
        100.0 * conflicts as f64 / dyads.len() as f64
    ))
}

struct TrainSettings {
    layers: Vec<usize>,
    train: TrainConfig,
}

fn train_settings(cfg: &RunConfig, args: &TrainArgs, seed: u64) -> Result<TrainSettings> {
    let hidden = match &args.hidden {
        Some(h) => parse_list::<usize>("hidden", h)?,
        None => cfg.get_list::<usize>("hidden")?.unwrap_or_else(|| DEFAULT_HIDDEN.to_vec()),
    };
    let mut layers = vec![N_FEATURES];
    layers.extend(hidden);
    layers.push(1);
    let train = TrainConfig {
        learning_rate: cfg.resolve(args.learning_rate, "learning_rate", DEFAULT_LEARNING_RATE)?,
        epochs: cfg.resolve(args.epochs, "epochs", DEFAULT_EPOCHS)?,
        seed,
        train_fraction: cfg.resolve(args.train_fraction, "train_fraction", DEFAULT_TRAIN_FRACTION)?,
    };
    train.validate()?;
    Ok(TrainSettings { layers, train })
}

fn training_dyads(path: &Path, console: &mut Console<'_>) -> Result<Vec<Dyad>> {
    let lagged = conflict::load_csv(path)?.training_rows();
    if lagged.dropped > 0 {
        console.warn(format!("{} panel row(s) without a previous year were dropped", lagged.dropped))?;
    }
    if lagged.rows.is_empty() {
        return Err(Error::EmptyInput("dyad data"));
    }
    Ok(lagged.rows)
}

pub fn cmd_train(args: &TrainArgs, console: &mut Console<'_>) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let seed = cfg.require_seed(args.seed, "train")?;
    let settings = train_settings(&cfg, args, seed)?;
    let dyads = training_dyads(&args.data, console)?;

    // scaling is fitted on the training rows only
    let (fit_idx, _) = split_indices(dyads.len(), settings.train.train_fraction, seed);
    let fit_rows: Vec<Dyad> = fit_idx.iter().map(|&i| dyads[i]).collect();
    let norm = NormParams::fit(&fit_rows)?;
    let data = conflict::to_dataset(&dyads, &norm)?;

    let init = init_model(&settings.layers, seed)?;
    let (model, curve) = train(&init, &data, &settings.train)?;

    model.save(&args.model_out)?;
    norm.save(&args.norm_out)?;
    if let Some(path) = &args.loss_out {
        write_file(path, |w| {
            writeln!(w, "epoch,loss").map_err(|e| Error::io(path, e))?;
            for (e, l) in curve.iter().enumerate() {
                writeln!(w, "{e},{l}").map_err(|e| Error::io(path, e))?;
            }
            Ok(())
        })?;
    }

    let (fit, holdout) = data.split(settings.train.train_fraction, seed);
    console.say(format!("train accuracy: {:.4} ({} rows)", model.accuracy(&fit, AVOIDANCE_THRESHOLD)?, fit.len()))?;
    if holdout.is_empty() {
        console.say("holdout accuracy: n/a (no held-out rows)")
    } else {
        console.say(format!(
            "holdout accuracy: {:.4} ({} rows)",
            model.accuracy(&holdout, AVOIDANCE_THRESHOLD)?,
            holdout.len()
        ))
    }
}

fn control_tuning(cfg: &RunConfig) -> Result<(GoldenConfig, MultiStartAnnealing)> {
    let gd = GoldenConfig::default();
    let gss = GoldenConfig {
        tol: cfg.get("gss_tol")?.unwrap_or(gd.tol),
        max_iter: cfg.get("gss_max_iter")?.unwrap_or(gd.max_iter),
    };
    let sd = MultiStartAnnealing::default();
    let schedule = AnnealingSchedule {
        t0: cfg.get("sa_t0")?.or(sd.schedule.t0),
        alpha: cfg.get("sa_alpha")?.unwrap_or(sd.schedule.alpha),
        steps_per_temp: cfg.get("sa_steps_per_temp")?.unwrap_or(sd.schedule.steps_per_temp),
        t_min: cfg.get("sa_t_min")?.unwrap_or(sd.schedule.t_min),
    };
    schedule.validate()?;
    let restarts = cfg.get("sa_restarts")?.unwrap_or(sd.restarts);
    if restarts == 0 {
        return Err(Error::Config("sa_restarts must be at least 1".into()));
    }
    Ok((gss, MultiStartAnnealing { schedule, restarts, seed: 0 }))
}

/// The `--all` set: each controllable variable alone, then all four.
pub fn all_strategies(gss: GoldenConfig, sa: MultiStartAnnealing) -> Vec<ControlStrategy> {
    let mut v: Vec<ControlStrategy> = Controllable::FIGURE_ORDER
        .into_iter()
        .map(|variable| ControlStrategy::Single { variable, gss })
        .collect();
    v.push(ControlStrategy::Multiple { variables: Controllable::ALL.to_vec(), sa });
    v
}

fn resolve_strategies(args: &ControlArgs, cfg: &RunConfig) -> Result<Vec<ControlStrategy>> {
    let (gss, mut sa) = control_tuning(cfg)?;
    let specs: Vec<String> = if args.all {
        Vec::new()
    } else if !args.strategy.is_empty() {
        args.strategy.clone()
    } else if let Some(s) = cfg.raw("strategy") {
        s.split(',').map(|p| p.trim().to_string()).collect()
    } else {
        return Err(Error::Config("control needs --strategy or --all".into()));
    };
    let needs_seed = args.all || specs.iter().any(|s| s.trim_start().starts_with("multiple"));
    if needs_seed {
        sa.seed = cfg.require_seed(args.seed, "control with a multiple strategy")?;
    }
    if args.all {
        return Ok(all_strategies(gss, sa));
    }
    specs.iter().map(|s| ControlStrategy::parse(s, gss, sa)).collect()
}

fn summary_line(r: &AvoidanceReport) -> String {
    format!(
        "{} {}: {}/{} conflicts avoided ({:.1}%), risk threshold {}",
        r.strategy.kind(),
        r.strategy.variable_set(),
        r.n_avoided,
        r.n_conflicts,
        r.percent_avoided,
        AVOIDANCE_THRESHOLD
    )
}

pub fn cmd_control(args: &ControlArgs, console: &mut Console<'_>) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let strategies = resolve_strategies(args, &cfg)?;
    let model = ExpectationModel::load(&args.model)?;
    let norm = NormParams::load(&args.norm)?;
    let dyads = training_dyads(&args.data, console)?;
    let runs = strategies
        .iter()
        .map(|s| control::avoidance_report(&model, &norm, &dyads, s))
        .collect::<Result<Vec<ControlRun>>>()?;
    let reports: Vec<AvoidanceReport> = runs.iter().map(|r| r.report.clone()).collect();
    write_file(&args.out, |w| control::write_summary(w, &reports))?;
    if let Some(path) = &args.detail_out {
        write_file(path, |w| control::write_details(w, &runs))?;
    }
    for r in &reports {
        console.say(summary_line(r))?;
    }
    Ok(())
}

pub fn cmd_report(args: &ReportArgs, console: &mut Console<'_>) -> Result<()> {
    let file = File::open(&args.summary).map_err(|e| Error::io(&args.summary, e))?;
    let rows = control::read_summary(file)?;
    let plot = control::plot_rows(&rows)?;
    write_file(&args.out, |w| control::write_plot(w, &plot))?;
    console.say(format!("wrote {} plot rows", plot.len()))
}

pub fn cmd_demo(args: &DemoArgs, console: &mut Console<'_>) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let seed = cfg.require_seed(args.seed, "demo")?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| dir.join(name);

    cmd_gen_data(
        &GenDataArgs { seed: Some(seed), config: args.config.clone(), n: args.n, noise_sd: None, out: path("data.csv") },
        console,
    )?;
    cmd_train(
        &TrainArgs {
            data: path("data.csv"),
            seed: Some(seed),
            config: args.config.clone(),
            hidden: None,
            learning_rate: None,
            epochs: None,
            train_fraction: None,
            model_out: path("model.txt"),
            norm_out: path("norm.txt"),
            loss_out: Some(path("loss.csv")),
        },
        console,
    )?;
    cmd_control(
        &ControlArgs {
            data: path("data.csv"),
            model: path("model.txt"),
            norm: path("norm.txt"),
            strategy: Vec::new(),
            all: true,
            seed: Some(seed),
            config: args.config.clone(),
            out: path("summary.csv"),
            detail_out: Some(path("detail.csv")),
        },
        console,
    )?;
    cmd_report(&ReportArgs { summary: path("summary.csv"), out: path("plot.csv") }, console)
}

/// Parses `args` and runs the command, returning the process exit code.
/// Usage errors exit with 1 like any other input problem.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{rendered}") } else { write!(out, "{rendered}") };
            return code;
        }
    };
    let mut console = Console { out, err };
    match run(cli, &mut console) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(console.err, "error: {e}");
            e.exit_code()
        }
    }
}
