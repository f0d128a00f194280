use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcz_core::demo::{run_demo, DemoConfig};
use pcz_core::depca::{
    bounded_solution, builtin_coefficient, lasota_wazewska, solve_ivp, DepcaSystem, LwConfig, Regularity,
};
use pcz_core::diagnostics::diagnose;
use pcz_core::extension::{extend, ExtensionKind};
use pcz_core::fixtures::DEFAULT_SEED;
use pcz_core::io::{read_grid, read_sequence, write_grid, FULL_PRECISION};
use pcz_core::transforms::{conv_causal, conv_full_line, conv_halfline_asymptotic, heat_solve, Kernel};
use pcz_core::{Error, GridFunction, Window};

#[derive(Parser, Debug)]
#[command(name = "pcz", version, about = "Piecewise-continuous almost automorphic functions on integer-aligned grids")]
struct Cli {
    /// Directory for every artifact written by the subcommand.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Significant digits of floating-point CSV values.
    #[arg(long, global = true, default_value_t = FULL_PRECISION, value_parser = clap::value_parser!(usize))]
    precision: usize,
    /// Seed for stochastic fixtures (decimal or 0x-prefixed hex).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED, value_parser = parse_seed)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extend a sequence CSV (`n,v1,...,vp`) to a grid function.
    Extend(ExtendArgs),
    /// Recurrence, uniform-continuity and decomposition report as JSON.
    Diagnose(DiagnoseArgs),
    /// Convolve a grid function with an integrable kernel.
    Conv(ConvArgs),
    /// Solve the heat equation from grid-function initial data.
    Heat(HeatArgs),
    /// Solve y' = A y + B y([t]) + f.
    Depca(DepcaArgs),
    /// Reproduce every reference example and write a summary table.
    Demo,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Step,
    Linear,
    TwoSegment,
}

#[derive(Args, Debug)]
struct ExtendArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 64)]
    samples_per_unit: usize,
    /// Grid window `LO:HI`; defaults to the largest the sequence supports.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<Window>,
    /// Sequence CSV of midpoint values `m(n)` for `two-segment` (default: chord midpoints).
    #[arg(long)]
    midpoints: Option<PathBuf>,
    #[arg(long, default_value = "extend.csv")]
    out: String,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Decaying component on the non-negative half line for the decomposition check.
    #[arg(long)]
    h: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = 16)]
    max_shift: i64,
    #[arg(long, default_value = "diagnose.json")]
    out: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ConvMode {
    /// Full line for gauss, causal for exp.
    Auto,
    /// Half-line integral from 0 (asymptotic variant).
    Halfline,
}

#[derive(Args, Debug)]
struct ConvArgs {
    /// `gauss:t` (heat kernel at time t) or `exp` (e^{-s} on s >= 0).
    #[arg(long)]
    kernel: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    trunc_eps: f64,
    #[arg(long, value_enum, default_value_t = ConvMode::Auto)]
    mode: ConvMode,
    #[arg(long, default_value = "conv.csv")]
    out: String,
}

#[derive(Args, Debug)]
struct HeatArgs {
    /// `gauss:t`, the diffusion time.
    #[arg(long)]
    kernel: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    trunc_eps: f64,
    #[arg(long, default_value = "heat.csv")]
    out: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Ivp,
    Bounded,
    Lw,
}

#[derive(Args, Debug)]
struct DepcaArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Coefficient of y(t); for `lw` this is the decay rate delta.
    #[arg(long, default_value = "-1", allow_hyphen_values = true)]
    a: String,
    /// Coefficient of y([t]); ignored by `lw`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    b: String,
    /// Forcing; for `lw` this is the production rate p.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    f: String,
    #[arg(long, default_value_t = 256)]
    steps: usize,
    #[arg(long, default_value = "0:10", value_parser = parse_window, allow_hyphen_values = true)]
    window: Window,
    /// Initial value y(lo) for `ivp`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y0: f64,
    #[arg(long, default_value_t = 1e-13)]
    trunc_eps: f64,
    /// Nonlinearity strength of `lw`.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("bad LO in {s:?}: {e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("bad HI in {s:?}: {e}"))?;
    if hi <= lo {
        return Err(format!("window {s:?} is empty"));
    }
    Ok(Window::new(lo, hi))
}

fn parse_gauss_time(kernel: &str) -> pcz_core::Result<f64> {
    let t = kernel
        .strip_prefix("gauss:")
        .ok_or_else(|| Error::Config(format!("expected gauss:t, got {kernel:?}")))?;
    t.parse()
        .map_err(|_| Error::Config(format!("bad diffusion time in {kernel:?}")))
}

struct Ctx {
    out_dir: PathBuf,
    precision: usize,
    seed: u64,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_grid(&self, name: &str, f: &GridFunction) -> pcz_core::Result<PathBuf> {
        let path = self.path(name);
        let mut out = BufWriter::new(File::create(&path)?);
        write_grid(f, &mut out, self.precision)?;
        out.flush()?;
        Ok(path)
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> pcz_core::Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn read_grid_file(path: &Path) -> pcz_core::Result<GridFunction> {
    read_grid(BufReader::new(File::open(path)?))
}

fn cmd_extend(ctx: &Ctx, args: &ExtendArgs) -> pcz_core::Result<()> {
    let seq = read_sequence(BufReader::new(File::open(&args.input)?))?;
    let mids = match &args.midpoints {
        Some(p) => Some(read_sequence(BufReader::new(File::open(p)?))?),
        None => None,
    };
    let chord = |n: i64| -> Vec<f64> {
        if let Some(m) = &mids {
            if let Ok(v) = m.get(n) {
                return v.to_vec();
            }
            return vec![f64::NAN; seq.dim()];
        }
        match (seq.get(n), seq.get(n + 1)) {
            (Ok(a), Ok(b)) => a.iter().zip(b).map(|(a, b)| a + 0.5 * (b - a)).collect(),
            _ => vec![f64::NAN; seq.dim()],
        }
    };
    let kind = match args.kind {
        Kind::Step => ExtensionKind::Step,
        Kind::Linear => ExtensionKind::Linear,
        Kind::TwoSegment => ExtensionKind::TwoSegment(&chord),
    };
    let window = args
        .window
        .unwrap_or_else(|| pcz_core::extension::natural_window(&kind, &seq));
    let f = extend(&kind, &seq, args.samples_per_unit, window)?;
    let path = ctx.write_grid(&args.out, &f)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_diagnose(ctx: &Ctx, args: &DiagnoseArgs) -> pcz_core::Result<()> {
    let f = read_grid_file(&args.input)?;
    let h = args.h.as_deref().map(read_grid_file).transpose()?;
    let report = diagnose(&f, args.eps, args.max_shift, h.as_ref())?;
    let path = ctx.write_json(&args.out, &report)?;
    println!("{} (best shift {}); wrote {}", report.verdict, report.best_shift, path.display());
    Ok(())
}

fn cmd_conv(ctx: &Ctx, args: &ConvArgs) -> pcz_core::Result<()> {
    let f = read_grid_file(&args.input)?;
    let kernel = if args.kernel == "exp" {
        Kernel::exponential(1.0)?
    } else {
        Kernel::heat(parse_gauss_time(&args.kernel)?)?
    };
    let out = match (args.mode, args.kernel.as_str()) {
        (ConvMode::Halfline, _) => conv_halfline_asymptotic(&kernel, &f, args.trunc_eps)?,
        (ConvMode::Auto, "exp") => conv_causal(&kernel, &f, args.trunc_eps)?,
        (ConvMode::Auto, _) => conv_full_line(&kernel, &f, args.trunc_eps)?,
    };
    let path = ctx.write_grid(&args.out, &out)?;
    println!("wrote {} on {}", path.display(), out.window());
    Ok(())
}

fn cmd_heat(ctx: &Ctx, args: &HeatArgs) -> pcz_core::Result<()> {
    let t = parse_gauss_time(&args.kernel)?;
    let u0 = read_grid_file(&args.input)?;
    let u = heat_solve(&u0, t, args.trunc_eps)?;
    let path = ctx.write_grid(&args.out, &u)?;
    println!("wrote {} on {}", path.display(), u.window());
    Ok(())
}

fn cmd_depca(ctx: &Ctx, args: &DepcaArgs) -> pcz_core::Result<()> {
    let (a, ra) = builtin_coefficient(&args.a)?;
    let (b, rb) = builtin_coefficient(&args.b)?;
    let (f, rf) = builtin_coefficient(&args.f)?;
    let regularity = if [ra, rb, rf].contains(&Regularity::PiecewiseContinuousAtIntegers) {
        Regularity::PiecewiseContinuousAtIntegers
    } else {
        Regularity::Continuous
    };
    let (name, trajectory, report) = match args.mode {
        Mode::Ivp => {
            let sys = DepcaSystem::scalar(a, b, f, regularity);
            let sol = solve_ivp(&sys, &[args.y0], args.window, args.steps)?;
            ("depca_ivp", sol.trajectory.clone(), serde_json::to_value(sol.summary())?)
        }
        Mode::Bounded => {
            let sys = DepcaSystem::scalar(a, b, f, regularity);
            let sol = bounded_solution(&sys, args.window, args.steps, args.trunc_eps)?;
            ("depca_bounded", sol.trajectory.clone(), serde_json::to_value(sol.summary())?)
        }
        Mode::Lw => {
            let cfg = LwConfig {
                window: args.window,
                steps: args.steps,
                max_iter: args.max_iter,
                tol: args.tol,
                trunc_eps: args.trunc_eps,
            };
            let sol = lasota_wazewska(&a, &f, args.gamma, &cfg)?;
            ("depca_lw", sol.solution.trajectory.clone(), serde_json::to_value(sol.summary())?)
        }
    };
    let csv = ctx.write_grid(&format!("{name}.csv"), &trajectory)?;
    let json = ctx.write_json(&format!("{name}_report.json"), &report)?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn cmd_demo(ctx: &Ctx) -> pcz_core::Result<()> {
    let cfg = DemoConfig {
        seed: ctx.seed,
        precision: ctx.precision,
        ..DemoConfig::default()
    };
    let report = run_demo(&ctx.out_dir, &cfg)?;
    for row in &report.rows {
        println!(
            "{:>2}  {:<4}  {:<58}  {:>12.4e}  (threshold {:.1e})",
            row.criterion,
            if row.pass { "PASS" } else { "FAIL" },
            row.check,
            row.value,
            row.threshold
        );
    }
    println!("wrote {} artifacts to {}", report.artifacts.len(), ctx.out_dir.display());
    Ok(())
}

fn run(cli: Cli) -> pcz_core::Result<()> {
    if cli.precision == 0 || cli.precision > FULL_PRECISION {
        return Err(Error::Config(format!(
            "--precision must lie in 1..={FULL_PRECISION}, got {}",
            cli.precision
        )));
    }
    fs::create_dir_all(&cli.out_dir)?;
    let ctx = Ctx {
        out_dir: cli.out_dir,
        precision: cli.precision,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Extend(a) => cmd_extend(&ctx, a),
        Command::Diagnose(a) => cmd_diagnose(&ctx, a),
        Command::Conv(a) => cmd_conv(&ctx, a),
        Command::Heat(a) => cmd_heat(&ctx, a),
        Command::Depca(a) => cmd_depca(&ctx, a),
        Command::Demo => cmd_demo(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
