use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use log::{error, info, warn};

use pursuit_density::certificate::Certificate;
use pursuit_density::config::EnvironmentConfig;
use pursuit_density::conic::{compile, sdpa::export_sdpa};
use pursuit_density::manifest::RunManifest;
use pursuit_density::plot::render_svg;
use pursuit_density::sim::{self, Outcome, SimConfig, SimError, StrategyRegistry};
use pursuit_density::synth::{build_program, check_limits, synthesize, SynthError, SynthOptions};
use pursuit_density::verify::{check_certificate, check_trace};

/// Exit codes. Stable: scripts depend on them.
mod code {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const INFEASIBLE: u8 = 2;
    pub const TOO_LARGE: u8 = 3;
    pub const VERIFY_FAILED: u8 = 4;
    pub const CAPTURED: u8 = 5;
    pub const TIMEOUT: u8 = 6;
    pub const SOLVER: u8 = 7;
}

#[derive(Parser, Debug)]
#[command(name = "pursuit-density", version, about = "Density-function evader controllers for pursuit-evasion games")]
#[command(after_help = "Exit codes: 0 ok, 1 config/io error, 2 infeasible, 3 too large for the internal solver, \
4 verification failed, 5 captured, 6 timeout or left arena, 7 solver failure")]
struct Cli {
    /// Seed for all sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (defaults depend on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and solve the SOS program, then audit the certificate.
    Synthesize { config: PathBuf },
    /// Re-run the sampling audit on a certificate.
    Verify {
        certificate: PathBuf,
        /// Samples per condition (default from the embedded config).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Simulate the closed loop and write a CSV trace.
    Simulate {
        certificate: PathBuf,
        #[arg(long, default_value = "tail-chasing")]
        strategy: String,
        /// Initial state x1,x2,x3,x4 (default: the initial-ball centers).
        #[arg(long, value_delimiter = ',', num_args = 4, allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Write the SOS program in SDPA sparse format.
    Export { config: PathBuf },
    /// Render traces to SVG.
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Geometry to draw (default: the numerical-example arena).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Error carrying its exit code.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(code::CONFIG, e.into())
    }
}

type Outcome_ = std::result::Result<u8, Failure>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    quiet: bool,
    manifest: RunManifest,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn finish(&mut self, outputs: &[&Path]) -> Result<()> {
        self.manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        if let Some(first) = outputs.first() {
            write(&sidecar(first, ".manifest.json"), &self.manifest.to_json())?;
        }
        Ok(())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        self.manifest.timings.push((stage.to_string(), t.elapsed().as_secs_f64()));
        r
    }
}

fn load_config(ctx: &mut Ctx, path: &Path) -> Result<EnvironmentConfig> {
    let text = read(path)?;
    let cfg = EnvironmentConfig::from_toml_str(&text).with_context(|| format!("in {}", path.display()))?;
    ctx.manifest.config_path = Some(path.display().to_string());
    ctx.manifest.config_content = text;
    Ok(cfg)
}

fn load_cert(ctx: &mut Ctx, path: &Path) -> Result<Certificate> {
    let text = read(path)?;
    let (cert, _) = Certificate::from_text(&text).with_context(|| format!("in {}", path.display()))?;
    ctx.manifest.config_path = Some(path.display().to_string());
    ctx.manifest.config_content = text;
    Ok(cert)
}

fn cmd_synthesize(ctx: &mut Ctx, config: &Path) -> Outcome_ {
    let cfg = load_config(ctx, config)?;
    let opts = SynthOptions {
        seed: ctx.seed,
        ..Default::default()
    };
    let result = ctx.time("synthesize", || synthesize(&cfg, &opts));
    let (cert, report) = match result {
        Ok(v) => v,
        Err(e @ SynthError::Infeasible(_)) => return Err(Failure(code::INFEASIBLE, e.into())),
        Err(e @ SynthError::TooLarge(_)) => {
            return Err(Failure(
                code::TOO_LARGE,
                anyhow!("{e}\nhint: pursuit-density export {} --out program.dat-s", config.display()),
            ))
        }
        Err(e @ SynthError::Solver(_)) => return Err(Failure(code::SOLVER, e.into())),
        Err(e) => return Err(Failure(code::CONFIG, e.into())),
    };
    let out = ctx.out_or("certificate.txt");
    let report_path = sidecar(&out, ".report.txt");
    let hash = ctx.manifest.hash();
    cert.save(&out, &hash)?;
    write(&report_path, &format!("manifest = {hash}\n{}", report.to_text()))?;
    ctx.finish(&[&out, &report_path])?;
    ctx.say(report.to_text());
    ctx.say(format!("certificate written to {}", out.display()));
    if report.overall {
        Ok(code::OK)
    } else {
        Err(Failure(code::VERIFY_FAILED, anyhow!("certificate failed verification")))
    }
}

fn cmd_verify(ctx: &mut Ctx, path: &Path, samples: Option<usize>) -> Outcome_ {
    let cert = load_cert(ctx, path)?;
    let n = samples.unwrap_or(cert.cfg.verify_samples);
    let seed = ctx.seed;
    let report = ctx.time("verify", || check_certificate(&cert, n, seed));
    let text = format!("manifest = {}\n{}", ctx.manifest.hash(), report.to_text());
    if let Some(out) = ctx.out.clone() {
        write(&out, &text)?;
        ctx.finish(&[&out])?;
    }
    ctx.say(text);
    if report.overall {
        Ok(code::OK)
    } else {
        Err(Failure(code::VERIFY_FAILED, anyhow!("certificate failed verification")))
    }
}

fn cmd_simulate(
    ctx: &mut Ctx,
    path: &Path,
    strategy: &str,
    x0: Option<Vec<f64>>,
    dt: Option<f64>,
    tmax: Option<f64>,
) -> Outcome_ {
    let cert = load_cert(ctx, path)?;
    let registry = StrategyRegistry::default();
    let strat = registry
        .get(strategy)
        .ok_or_else(|| anyhow!("unknown strategy {strategy:?}; known: {}", registry.names().join(", ")))?;
    let c = &cert.cfg;
    let x0 = match x0 {
        Some(v) => [v[0], v[1], v[2], v[3]],
        None => [c.x_ie[0], c.x_ie[1], c.x_ip[0], c.x_ip[1]],
    };
    let mut simcfg = SimConfig::new(&cert, strat, x0);
    if let Some(dt) = dt {
        simcfg.dt = dt;
    }
    if let Some(t) = tmax {
        simcfg.t_max = t;
    }
    let trace = match ctx.time("simulate", || sim::run(&cert, &simcfg)) {
        Ok(t) => t,
        Err(e @ (SimError::Config(_) | SimError::InitialState(_))) => return Err(Failure(code::CONFIG, e.into())),
    };
    let out = ctx.out_or("trace.csv");
    write(&out, &sim::to_csv(&trace, &ctx.manifest.hash()))?;
    ctx.finish(&[&out])?;
    let audit = check_trace(&trace, c);
    if !audit.passed {
        warn!("trace audit:\n{}", audit.to_text());
    }
    ctx.say(format!(
        "outcome={} steps={} min_dist={:.6} max_abs_u={:.3e} trace={}",
        trace.outcome,
        trace.rows.len(),
        trace.min_dist(),
        audit.max_abs_u,
        out.display()
    ));
    match trace.outcome {
        Outcome::ReachedTarget => Ok(code::OK),
        Outcome::Captured => Ok(code::CAPTURED),
        Outcome::Timeout | Outcome::LeftArena => Ok(code::TIMEOUT),
    }
}

fn cmd_export(ctx: &mut Ctx, config: &Path) -> Outcome_ {
    let cfg = load_config(ctx, config)?;
    let built = ctx.time("build", || build_program(&cfg)).map_err(|e| Failure(code::CONFIG, e.into()))?;
    let stats = built.stats();
    let compiled = ctx.time("compile", || compile(&built.program));
    let hash = ctx.manifest.hash();
    let text = ctx.time("format", || export_sdpa(&compiled.program, Some(&format!("manifest={hash}"))));
    let out = ctx.out_or("program.dat-s");
    write(&out, &text)?;
    ctx.finish(&[&out])?;
    let mut sides: Vec<(usize, usize)> = Vec::new();
    for &s in &stats.block_sides {
        match sides.iter_mut().find(|(n, _)| *n == s) {
            Some((_, k)) => *k += 1,
            None => sides.push((s, 1)),
        }
    }
    sides.sort();
    let hist: Vec<String> = sides.iter().map(|(n, k)| format!("{k}x{n}")).collect();
    ctx.say(format!(
        "rows={} psd_blocks={} max_block_side={} free_variables={} block_sides=[{}] sdpa_blocks={} file={}",
        compiled.program.rows.len(),
        stats.blocks,
        stats.max_block_side,
        stats.free_variables,
        hist.join(" "),
        stats.blocks + usize::from(stats.free_variables > 0),
        out.display()
    ));
    if let Err(e) = check_limits(&stats, &Default::default()) {
        info!("internal solver would refuse this program: {e}");
    }
    Ok(code::OK)
}

fn cmd_plot(ctx: &mut Ctx, traces: &[PathBuf], config: Option<&Path>) -> Outcome_ {
    let cfg = match config {
        Some(p) => load_config(ctx, p)?,
        None => EnvironmentConfig::paper_tail_chasing(),
    };
    let mut loaded = Vec::new();
    for p in traces {
        let text = read(p)?;
        let (t, _) = sim::from_csv(&text).with_context(|| format!("in {}", p.display()))?;
        ctx.manifest.args.push(text);
        let label = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
        loaded.push((label, t));
    }
    let out = ctx.out_or("plot.svg");
    let svg = render_svg(&loaded, &cfg);
    let svg = svg.replacen('\n', &format!("\n<!-- manifest={} -->\n", ctx.manifest.hash()), 1);
    write(&out, &svg)?;
    ctx.finish(&[&out])?;
    ctx.say(format!("{} panel(s) written to {}", loaded.len(), out.display()));
    Ok(code::OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::CONFIG } else { code::OK });
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let name = match &cli.command {
        Command::Synthesize { .. } => "synthesize",
        Command::Verify { .. } => "verify",
        Command::Simulate { .. } => "simulate",
        Command::Export { .. } => "export",
        Command::Plot { .. } => "plot",
    };
    let mut manifest = RunManifest::new(name, cli.seed);
    manifest.args = std::env::args().skip(1).collect();
    let mut ctx = Ctx {
        seed: cli.seed,
        out: cli.out.clone(),
        quiet: cli.quiet,
        manifest,
    };
    let result = match &cli.command {
        Command::Synthesize { config } => cmd_synthesize(&mut ctx, config),
        Command::Verify { certificate, samples } => cmd_verify(&mut ctx, certificate, *samples),
        Command::Simulate {
            certificate,
            strategy,
            x0,
            dt,
            tmax,
        } => cmd_simulate(&mut ctx, certificate, strategy, x0.clone(), *dt, *tmax),
        Command::Export { config } => cmd_export(&mut ctx, config),
        Command::Plot { traces, config } => cmd_plot(&mut ctx, traces, config.as_deref()),
    };
    match result {
        Ok(c) => ExitCode::from(c),
        Err(Failure(c, e)) => {
            error!("{e:#}");
            if cli.quiet {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(c)
        }
    }
}
