//! The `minsurf` command line.
//!
//! Every failure prints one line `error[CODE]: message` to stderr. Exit
//! status is 0 on success, 1 for invalid input (bad flags, configs, files)
//! and 2 for numerical or runtime failures.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{evaluate_network_slice, evaluate_slice, export_slice_csv, export_slice_svg, SliceGrid, SliceSpec};
use crate::autodiff::{check_derivatives, check_param_gradient, DerivativeBundle, DerivativeReport, KinkSite, OnGraph, ScalarField};
use crate::boundary::{lookup_builtin, AnalyticField, BoundaryFn, Builtin, SourceTerm};
use crate::error::{Error, Result};
use crate::network::{canonical_spec, init_network, Activation, NetworkParams};
use crate::oracle_fdm::{compare_model_to_grid, max_error_vs, solve_fdm, FdmOptions};
use crate::pde_loss::{network_loss, residuals};
use crate::sampling::{check_corner_consistency, sample_interior, BoundaryMode, BoxDomain, SampleSet};
use crate::trainer::{load_checkpoint, save_checkpoint, ExperimentConfig, Trainer, PRESETS};

/// Environment variable naming the default output directory of `train`.
pub const OUT_DIR_ENV: &str = "MINSURF_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "minsurf", version, about = "Physics-informed neural networks for minimal surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network from a preset or a config file.
    Train(TrainArgs),
    /// Evaluate a model on a 2-D slice and write CSV (and optionally SVG).
    Slice(SliceArgs),
    /// Residual statistics of a model on fresh interior points.
    ResidualCheck(ResidualArgs),
    /// Compare exact derivatives with central finite differences.
    GradCheck(GradCheckArgs),
    /// Compare a 2-D model with the finite-difference solution.
    OracleCompare(OracleArgs),
    /// Report whether boundary pieces agree at the corners of the box.
    Corners(CornersArgs),
    /// List builtin boundaries and presets.
    ListBoundaries,
    /// Print g at a point.
    EvalG(EvalGArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Shipped preset name (see list-boundaries).
    #[arg(long, conflicts_with_all = ["config", "resume"])]
    preset: Option<String>,
    /// TOML config file.
    #[arg(long, conflicts_with = "resume")]
    config: Option<PathBuf>,
    /// Continue a run from its checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Output directory (default: $MINSURF_OUT_DIR/<name>, else runs/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Record wall-clock seconds in the history.
    #[arg(long)]
    timings: bool,
    /// Only print the final record.
    #[arg(long, short)]
    quiet: bool,
}

/// Where a model comes from.
#[derive(Args, Debug)]
struct ModelArgs {
    /// Trained network checkpoint.
    #[arg(long, conflicts_with_all = ["analytic", "expr"])]
    checkpoint: Option<PathBuf>,
    /// Closed-form builtin boundary used as the model itself.
    #[arg(long, conflicts_with = "expr")]
    analytic: Option<String>,
    /// Closed-form expression used as the model (needs --dim).
    #[arg(long, requires = "dim")]
    expr: Option<String>,
    /// Dimension for --expr.
    #[arg(long)]
    dim: Option<usize>,
    /// Box as `lo,hi` (same on every axis); defaults to the model's own box.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
}

#[derive(Args, Debug)]
struct SliceArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Pinned coordinate `xK=value`; repeat for several.
    #[arg(long = "fix", allow_hyphen_values = true)]
    fix: Vec<String>,
    /// Free axes `xA,xB` (default: the first two axes not fixed).
    #[arg(long)]
    free: Option<String>,
    #[arg(long, default_value_t = SliceSpec::DEFAULT_RESOLUTION)]
    resolution: usize,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG heatmap.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ResidualArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of uniform interior points.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Constant source term.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    f: f64,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    /// Check this network instead of a freshly initialized one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Input dimension of the fresh network.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Seed for the network and the points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "tanh")]
    activation: Activation,
    /// Number of random interior points.
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Boundary for the loss (default: a builtin of matching dimension).
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    w_pde: f64,
    #[arg(long, default_value_t = 3.0)]
    w_bdry: f64,
    /// Skip the (slow) full parameter-gradient check.
    #[arg(long)]
    skip_params: bool,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Boundary data for the grid (default: the model's own).
    #[arg(long)]
    boundary: Option<String>,
    /// Nodes per side.
    #[arg(long, default_value_t = 65)]
    n: usize,
    /// Write the grid as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct CornersArgs {
    /// Builtin boundary name.
    #[arg(long, conflicts_with = "config")]
    boundary: Option<String>,
    /// Config file whose boundary to check.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Box as `lo,hi` (default: the boundary's own box).
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
}

#[derive(Args, Debug)]
struct EvalGArgs {
    /// Builtin boundary name.
    #[arg(long, conflicts_with = "expr")]
    boundary: Option<String>,
    /// Expression in x1..x4.
    #[arg(long)]
    expr: Option<String>,
    /// Point as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    at: String,
}

/// A model the CLI can evaluate.
enum Model {
    Network(Box<NetworkParams>),
    Analytic(OnGraph<AnalyticField>),
}

impl ScalarField for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Network(p) => p.input_dim(),
            Model::Analytic(a) => a.dim(),
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Network(p) => p.value(x),
            Model::Analytic(a) => a.value(x),
        }
    }

    fn bundle(&self, x: &[f64]) -> Result<DerivativeBundle> {
        match self {
            Model::Network(p) => p.bundle(x),
            Model::Analytic(a) => a.bundle(x),
        }
    }

    fn kink_sites(&self, x: &[f64], h: f64) -> Result<Vec<KinkSite>> {
        match self {
            Model::Network(p) => p.kink_sites(x, h),
            Model::Analytic(a) => a.kink_sites(x, h),
        }
    }
}

struct LoadedModel {
    model: Model,
    domain: BoxDomain,
    /// Boundary the model was trained for or is made of.
    boundary: Option<BoundaryFn>,
    config: Option<ExperimentConfig>,
    epoch: Option<usize>,
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("{what} `{text}` is not a comma-separated list of numbers")))
        })
        .collect()
}

fn parse_cube(text: &str, d: usize) -> Result<BoxDomain> {
    match parse_list(text, "domain")?[..] {
        [lo, hi] => BoxDomain::cube(d, lo, hi),
        _ => Err(Error::config(format!("domain `{text}` must be `lo,hi`"))),
    }
}

fn parse_axis(text: &str) -> Result<usize> {
    text.trim()
        .strip_prefix('x')
        .and_then(|s| s.parse::<usize>().ok())
        .and_then(|k| k.checked_sub(1))
        .ok_or_else(|| Error::config(format!("`{text}` is not an axis name like x1")))
}

/// The box residual checks use by default: Scherk's closed form is only
/// evaluated well inside its cell.
fn residual_domain(b: Builtin) -> BoxDomain {
    match b {
        Builtin::Scherk => BoxDomain::cube(2, -1.3, 1.3).expect("valid box"),
        other => other.canonical_domain(),
    }
}

fn load_model(args: &ModelArgs) -> Result<LoadedModel> {
    let mut loaded = if let Some(path) = &args.checkpoint {
        let ckpt = load_checkpoint(path)?;
        LoadedModel {
            domain: ckpt.config.resolved_domain()?,
            boundary: Some(ckpt.config.boundary.resolve(ckpt.config.d)?),
            epoch: Some(ckpt.epoch),
            config: Some(ckpt.config),
            model: Model::Network(Box::new(ckpt.params)),
        }
    } else if let Some(name) = &args.analytic {
        let g = lookup_builtin(name)?;
        let field = g
            .analytic()
            .ok_or_else(|| Error::config(format!("boundary `{name}` is piecewise and has no closed form")))?;
        let b = g.as_builtin().expect("looked up by name");
        LoadedModel {
            domain: residual_domain(b),
            boundary: Some(g),
            model: Model::Analytic(field.field()),
            config: None,
            epoch: None,
        }
    } else if let Some(text) = &args.expr {
        let d = args.dim.ok_or_else(|| Error::config("--expr needs --dim"))?;
        LoadedModel {
            model: Model::Analytic(AnalyticField::parse(text, d)?.field()),
            domain: BoxDomain::unit(d)?,
            boundary: Some(BoundaryFn::expression(text, d)?),
            config: None,
            epoch: None,
        }
    } else {
        return Err(Error::config("give one of --checkpoint, --analytic or --expr"));
    };
    if let Some(text) = &args.domain {
        loaded.domain = parse_cube(text, loaded.model.dim())?;
    }
    Ok(loaded)
}

fn default_out_dir(name: &str) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(name),
        _ => PathBuf::from("runs").join(name),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn cmd_train(args: TrainArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let (mut trainer, name) = if let Some(path) = &args.resume {
        let ckpt = load_checkpoint(path)?;
        let name = path
            .parent()
            .and_then(Path::file_name)
            .map_or_else(|| "resumed".to_string(), |s| s.to_string_lossy().into_owned());
        let mut t = Trainer::from_checkpoint(ckpt)?;
        if args.seed.is_some() {
            return Err(Error::config("--seed cannot change a resumed run"));
        }
        if let Some(e) = args.epochs {
            let mut ckpt = t.checkpoint();
            ckpt.config.epochs = e;
            t = Trainer::from_checkpoint(ckpt)?;
        }
        (t, name)
    } else {
        let (mut config, name) = match (&args.preset, &args.config) {
            (Some(p), None) => (ExperimentConfig::preset(p)?, p.clone()),
            (None, Some(path)) => (
                ExperimentConfig::load(path)?,
                path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned()),
            ),
            _ => return Err(Error::config("give exactly one of --preset, --config or --resume")),
        };
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        if let Some(e) = args.epochs {
            config.epochs = e;
        }
        (Trainer::new(config)?, name)
    };
    trainer.record_time(args.timings);
    let dir = args.out.clone().unwrap_or_else(|| default_out_dir(&name));
    create_dir(&dir)?;
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, trainer.config().to_toml()).map_err(|e| Error::io(&config_path, e))?;

    let ckpt_path = dir.join("checkpoint.json");
    let hist_path = dir.join("history.json");
    let mut printed = trainer.history().records.len();
    let result = loop {
        if trainer.is_finished() {
            break Ok(());
        }
        if let Err(e) = trainer.step() {
            break Err(e);
        }
        if !args.quiet {
            for r in &trainer.history().records[printed..] {
                let _ = writeln!(
                    out,
                    "epoch {:>6}  interior {:.6e}  boundary {:.6e}  total {:.6e}",
                    r.epoch, r.interior, r.boundary, r.total
                );
            }
        }
        printed = trainer.history().records.len();
    };
    // On failure the trainer still holds the last good epoch.
    save_checkpoint(&ckpt_path, &trainer.checkpoint())?;
    if !trainer.history().records.is_empty() {
        trainer.history().save(&hist_path)?;
    }
    result?;
    if let Some(r) = trainer.history().last() {
        let _ = writeln!(
            out,
            "final epoch {}: interior {:e} boundary {:e} total {:e}",
            r.epoch, r.interior, r.boundary, r.total
        );
    }
    let _ = writeln!(out, "wrote {} and {}", ckpt_path.display(), hist_path.display());
    Ok(())
}

fn cmd_slice(args: SliceArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let loaded = load_model(&args.model)?;
    let d = loaded.model.dim();
    let mut spec = SliceSpec::new((0, 1)).with_resolution(args.resolution);
    for item in &args.fix {
        let (axis, value) = item
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--fix `{item}` must look like x1=0")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("--fix `{item}` has a non-numeric value")))?;
        spec.fixed.insert(parse_axis(axis)?, value);
    }
    spec.free = match &args.free {
        Some(text) => match text.split(',').map(parse_axis).collect::<Result<Vec<_>>>()?[..] {
            [a, b] => (a, b),
            _ => return Err(Error::config("--free needs exactly two axes, like x2,x3")),
        },
        None => {
            let open: Vec<usize> = (0..d).filter(|k| !spec.fixed.contains_key(k)).collect();
            match open[..] {
                [a, b, ..] => (a, b),
                _ => return Err(Error::config("fewer than two axes left free")),
            }
        }
    };
    let mut grid = match &loaded.model {
        Model::Network(p) => evaluate_network_slice(p, &loaded.domain, &spec)?,
        m => evaluate_slice(m, &loaded.domain, &spec)?,
    };
    grid.provenance.config_hash = loaded.config.as_ref().map(ExperimentConfig::hash);
    grid.provenance.epoch = loaded.epoch;
    match &args.out {
        Some(path) => {
            export_slice_csv(&grid, path)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
        None => {
            let _ = out.write_all(grid.to_csv().as_bytes());
        }
    }
    if let Some(path) = &args.svg {
        export_slice_svg(&grid, path)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(())
}

fn cmd_residual(args: ResidualArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let loaded = load_model(&args.model)?;
    let f = SourceTerm::new(args.f)?;
    let points = sample_interior(&loaded.domain, args.n, args.seed)?;
    let r = residuals(&points, &loaded.model, f)?;
    let max = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mean = r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64;
    let rms = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
    let _ = writeln!(out, "domain {}", loaded.domain);
    let _ = writeln!(out, "points {}", r.len());
    let _ = writeln!(out, "max |residual| {max:e}");
    let _ = writeln!(out, "mean |residual| {mean:e}");
    let _ = writeln!(out, "rms residual {rms:e}");
    Ok(())
}

fn default_boundary(d: usize) -> &'static str {
    match d {
        2 => "radial_sine_2d",
        3 => "trig_sum_3d",
        _ => "radial_sine_4d",
    }
}

fn cmd_grad_check(args: GradCheckArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let params = match &args.checkpoint {
        Some(path) => load_checkpoint(path)?.params,
        None => init_network(args.dim, &canonical_spec(args.activation), args.seed)?,
    };
    let d = params.input_dim();
    let domain = BoxDomain::unit(d)?;
    let points = sample_interior(&domain, args.points, args.seed)?;
    let mut report = DerivativeReport::default();
    for x in points.chunks(d) {
        report = report.merge(check_derivatives(&params, x, args.h)?);
    }
    let _ = writeln!(out, "points {}", args.points);
    let _ = writeln!(
        out,
        "input gradient  relative {:e}  absolute {:e}",
        report.gradient.relative, report.gradient.absolute
    );
    let _ = writeln!(
        out,
        "input Hessian   relative {:e}  absolute {:e}",
        report.hessian.relative, report.hessian.absolute
    );
    if !args.skip_params {
        let name = args.boundary.as_deref().unwrap_or(default_boundary(d));
        let g = lookup_builtin(name)?;
        // About as many boundary points as interior points, spread over every edge.
        let per_edge = args.points.div_ceil(domain.edges().len()).max(1);
        let mut samples = SampleSet::draw(&domain, &g, BoundaryMode::Wireframe, args.points, per_edge, args.seed)?;
        samples.interior = points.clone();
        let f = SourceTerm::default();
        let (_, grad) = network_loss(&params, &samples, f, args.w_pde, args.w_bdry, true)?;
        let stat = check_param_gradient(
            |theta| Ok(network_loss(&params.with_values(theta.to_vec())?, &samples, f, args.w_pde, args.w_bdry, false)?.0.total),
            params.as_slice(),
            &grad.expect("gradient requested"),
            args.h,
        )?;
        let _ = writeln!(
            out,
            "loss parameter gradient ({} parameters, boundary {name}, {} boundary points)  relative {:e}  absolute {:e}",
            params.num_params(),
            samples.n_boundary(),
            stat.relative,
            stat.absolute
        );
        report.param_gradient = Some(stat);
    }
    for k in &report.kinks {
        let _ = writeln!(out, "non-differentiable: {} (argument {:e})", k.location, k.argument);
    }
    let worst = report.max_relative();
    if worst < args.tol {
        let _ = writeln!(out, "PASS: worst relative error {worst:e} < {:e}", args.tol);
        Ok(())
    } else {
        Err(Error::eval(format!("worst relative error {worst:e} exceeds {:e}", args.tol)))
    }
}

fn cmd_oracle(args: OracleArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let loaded = load_model(&args.model)?;
    if loaded.model.dim() != 2 {
        return Err(Error::config("oracle-compare is two-dimensional only"));
    }
    let g = match &args.boundary {
        Some(name) => lookup_builtin(name)?,
        None => loaded
            .boundary
            .clone()
            .ok_or_else(|| Error::config("--boundary is required for this model"))?,
    };
    let grid_domain = match (&args.model.domain, g.as_builtin()) {
        (None, Some(b)) => residual_domain(b),
        _ => loaded.domain.clone(),
    };
    let model_domain = match &loaded.config {
        Some(c) => c.resolved_domain()?,
        None => grid_domain.clone(),
    };
    let opts = FdmOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        damping: args.damping,
        f: SourceTerm::default(),
    };
    let grid = solve_fdm(&g, &grid_domain, args.n, opts)?;
    let _ = writeln!(
        out,
        "grid {}x{} on {}: {} Picard steps, last update {:e}, {}",
        args.n,
        args.n,
        grid_domain,
        grid.iterations,
        grid.final_update,
        if grid.converged { "converged" } else { "NOT converged" }
    );
    if let Some(field) = g.analytic().filter(|_| g.as_builtin() == Some(Builtin::Scherk)) {
        let exact = field.field();
        let err = max_error_vs(&grid, |x| exact.value(x).unwrap_or(f64::NAN));
        let _ = writeln!(out, "grid vs closed form: max abs {err:e}");
    }
    let stats = compare_model_to_grid(&loaded.model, &model_domain, &grid)?;
    let _ = writeln!(
        out,
        "model vs grid over {} interior nodes: max abs {:e}  mean abs {:e}  rms {:e}",
        stats.nodes, stats.max_abs, stats.mean_abs, stats.rms
    );
    if let Some(path) = &args.csv {
        export_slice_csv(&SliceGrid::from_fdm(&grid), path)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(())
}

fn cmd_corners(args: CornersArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let (g, domain) = match (&args.boundary, &args.config) {
        (Some(name), None) => {
            let g = lookup_builtin(name)?;
            let dom = g.as_builtin().expect("builtin").canonical_domain();
            (g, dom)
        }
        (None, Some(path)) => {
            let c = ExperimentConfig::load(path)?;
            (c.boundary.resolve(c.d)?, c.resolved_domain()?)
        }
        _ => return Err(Error::config("give exactly one of --boundary or --config")),
    };
    let domain = match &args.domain {
        Some(text) => parse_cube(text, g.dim())?,
        None => domain,
    };
    let report = check_corner_consistency(&g, &domain, args.tol)?;
    let _ = writeln!(out, "{report}");
    Ok(())
}

fn cmd_list(out: &mut dyn std::io::Write) -> Result<()> {
    let _ = writeln!(out, "boundaries:");
    for b in Builtin::ALL {
        let formula = b.formula().unwrap_or("piecewise, one formula per side");
        let _ = writeln!(out, "  {:<15} d={}  {}  g = {formula}", b.name(), b.dim(), b.canonical_domain());
    }
    let _ = writeln!(out, "presets:");
    for (name, _) in PRESETS {
        let c = ExperimentConfig::preset(name)?;
        let _ = writeln!(
            out,
            "  {:<9} {:<15} lr={} w_pde={} w_bdry={} epochs={}",
            name,
            c.boundary.builtin.as_deref().unwrap_or("custom"),
            c.learning_rate,
            c.w_pde,
            c.w_bdry,
            c.epochs
        );
    }
    Ok(())
}

fn cmd_eval_g(args: EvalGArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let x = parse_list(&args.at, "point")?;
    let g = match (&args.boundary, &args.expr) {
        (Some(name), None) => lookup_builtin(name)?,
        (None, Some(text)) => BoundaryFn::expression(text, x.len())?,
        _ => return Err(Error::config("give exactly one of --boundary or --expr")),
    };
    let _ = writeln!(out, "{}", g.eval(&x)?);
    Ok(())
}

fn dispatch(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Slice(a) => cmd_slice(a, out),
        Command::ResidualCheck(a) => cmd_residual(a, out),
        Command::GradCheck(a) => cmd_grad_check(a, out),
        Command::OracleCompare(a) => cmd_oracle(a, out),
        Command::Corners(a) => cmd_corners(a, out),
        Command::ListBoundaries => cmd_list(out),
        Command::EvalG(a) => cmd_eval_g(a, out),
    }
}

/// Parses `argv` (including the program name), runs the command, and
/// returns the process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.code());
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
