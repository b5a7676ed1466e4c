//! `harmzero`: build constructions, certify zeros, trace zero sets and run
//! coarse-count sweeps.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 for
//! usage, configuration or input errors.

mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rug::Float;
use serde_json::json;

use harmzero::blocks::{Block, Polyline, Rect};
use harmzero::certify::{check_mu_bound, count_zeros_ball, verify_restriction};
use harmzero::coarse::{self, log_spaced};
use harmzero::{build_construction, Construction, Error};

use config::{parse_decimal, RunConfig};

const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Parser, Debug)]
#[command(name = "harmzero", version, about = "Certified zeros of a fast-growing harmonic map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the level induction and write the construction with its audit.
    Build(BuildArgs),
    /// Certify zeros of h inside a ball.
    Count(CountArgs),
    /// Emit zero-set polylines of g or of a single block as CSV.
    Trace(TraceArgs),
    /// Sweep coarse zero counts over thresholds.
    Coarse(CoarseArgs),
    /// Re-run every invariant audit on a construction.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct Source {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Construction JSON; defaults to the path named in the config.
    #[arg(long)]
    construction: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args, Debug)]
struct CountArgs {
    #[command(flatten)]
    source: Source,
    /// Ball radius (decimal); defaults to 2^N.
    #[arg(long, allow_hyphen_values = true)]
    radius: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    source: Source,
    /// Trace the block u_k instead of g (needs --c).
    #[arg(long, requires = "c")]
    level: Option<u32>,
    #[arg(long)]
    c: Option<u32>,
    /// Bounding box `x0,x1,y0,y1`.
    #[arg(long, allow_hyphen_values = true)]
    bbox: String,
    #[arg(long, default_value_t = 256)]
    resolution: usize,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoarseArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    radius: Option<String>,
    /// Grid half-resolution R: nodes at spacing r/R.
    #[arg(long)]
    resolution: Option<usize>,
    /// Threshold sweep `min:max:count`, log-spaced.
    #[arg(long)]
    deltas: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump the mask at this threshold as PGM.
    #[arg(long, requires = "pgm_delta")]
    pgm: Option<PathBuf>,
    #[arg(long)]
    pgm_delta: Option<f64>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    /// Random real points for the restriction identity.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Why a command did not succeed.
enum Failure {
    /// Exit 1: the computation ran and a check failed.
    Check(String),
    /// Exit 2: bad usage, configuration or input.
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Precision { .. }) | Some(Error::Overflow { .. }) => {
                Failure::Check(format!("{e:#}; retry with a higher --precision"))
            }
            _ => Failure::Usage(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Count(a) => cmd_count(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Coarse(a) => cmd_coarse(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_output(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, content).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Option<RunConfig>> {
    path.map(RunConfig::load).transpose()
}

fn load_construction(source: &Source) -> anyhow::Result<(Construction, Option<RunConfig>)> {
    let cfg = load_config(source.config.as_deref())?;
    let path = source
        .construction
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.paths.construction.clone()))
        .ok_or_else(|| anyhow!("no construction given: pass --construction or a config with paths.construction"))?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let constr = Construction::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
    Ok((constr, cfg))
}

fn sci(x: &Float) -> String {
    x.to_string_radix(10, Some(12))
}

fn cmd_build(args: BuildArgs) -> CmdResult {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(p) = args.precision {
        cfg.precision = p;
    }
    if let Some(d) = args.depth {
        cfg.depth = d;
    }
    cfg.validate()?;
    let eps = cfg.epsilon_float()?;
    let constr = build_construction(&cfg.n, &eps, cfg.depth, cfg.precision)?;
    let hash = constr.hash_hex();
    let out = args.out.or_else(|| cfg.paths.construction.clone());
    write_output(out.as_deref(), &(constr.to_json_pretty() + "\n"))?;

    let audit = constr.audit();
    let mut text = format!("# construction sha256={hash}\n");
    let _ = writeln!(
        text,
        "# n={:?} epsilon={} depth={} precision={}",
        constr.n(),
        cfg.epsilon,
        constr.depth(),
        constr.precision()
    );
    text.push_str("k c cap amplitude margin tail explicit unbuilt status\n");
    for (l, a) in constr.levels().iter().zip(&audit) {
        let t = constr.tail_bound(l.k).expect("built level");
        let _ = writeln!(
            text,
            "{} {} {} {} {} {} {} {} {}",
            l.k,
            l.c,
            sci(&l.cap),
            sci(&l.amplitude),
            sci(&l.margin),
            sci(&t.value),
            sci(&t.explicit),
            sci(&t.unbuilt),
            if a.passed() { "pass" } else { "FAIL" }
        );
    }
    let audit_path = cfg.paths.audit.clone().or_else(|| out.as_ref().map(|p| p.with_extension("audit.txt")));
    match audit_path {
        Some(p) => write_output(Some(&p), &text)?,
        None => eprint!("{text}"),
    }
    if audit.iter().all(|a| a.passed()) {
        Ok(())
    } else {
        Err(Failure::Check("construction audit failed".into()))
    }
}

fn cmd_count(args: CountArgs) -> CmdResult {
    let (constr, cfg) = load_construction(&args.source)?;
    let prec = constr.precision();
    let radius = args
        .radius
        .or_else(|| cfg.as_ref().and_then(|c| c.count.radius.clone()))
        .map(|s| parse_decimal(&s, prec))
        .transpose()?
        .unwrap_or_else(|| Float::with_val(prec, Float::i_exp(1, constr.depth() as i32)));
    let report = count_zeros_ball(&constr, &radius)?;
    let json = serde_json::to_string_pretty(&report.to_json(&constr.hash_hex())).map_err(anyhow::Error::from)?;
    let out = args.out.or_else(|| cfg.as_ref().and_then(|c| c.paths.count.clone()));
    write_output(out.as_deref(), &(json + "\n"))?;
    eprintln!(
        "r={} total={} target={}",
        radius.to_f64(),
        report.total,
        report.target.map_or("-".into(), |t| t.to_string())
    );
    if report.meets_target() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "certified {} zeros, expected at least {}",
            report.total,
            report.target.unwrap_or(0)
        )))
    }
}

fn parse_bbox(s: &str) -> anyhow::Result<Rect> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad bbox entry {p:?}")))
        .collect::<anyhow::Result<_>>()?;
    if parts.len() != 4 {
        bail!("bbox needs four values x0,x1,y0,y1");
    }
    Ok(Rect::new(parts[0], parts[1], parts[2], parts[3])?)
}

fn polylines_csv(header: &str, lines: &[Polyline]) -> String {
    let mut s = String::from(header);
    s.push_str("polyline,x,y\n");
    for (id, line) in lines.iter().enumerate() {
        for p in line {
            let _ = writeln!(s, "{id},{},{}", p[0], p[1]);
        }
    }
    s
}

fn cmd_trace(args: TraceArgs) -> CmdResult {
    let bbox = parse_bbox(&args.bbox)?;
    let (lines, header, out) = match (args.level, args.c) {
        (Some(k), Some(c)) => {
            let prec = args.precision.unwrap_or(256);
            let block = Block::for_level(k, c)?;
            let lines = block.trace_zero_set(&bbox, args.resolution, prec)?;
            let header = format!("# block k={k} c={c}\n");
            let cfg = load_config(args.source.config.as_deref())?;
            (lines, header, args.out.or_else(|| cfg.and_then(|c| c.paths.trace)))
        }
        _ => {
            let (constr, cfg) = load_construction(&args.source)?;
            let lines = constr.trace_zero_set(&bbox, args.resolution)?;
            let header = format!("# construction sha256={}\n", constr.hash_hex());
            (lines, header, args.out.or_else(|| cfg.and_then(|c| c.paths.trace)))
        }
    };
    let header = format!(
        "{header}# bbox={},{},{},{} resolution={}\n",
        bbox.x0, bbox.x1, bbox.y0, bbox.y1, args.resolution
    );
    write_output(out.as_deref(), &polylines_csv(&header, &lines))?;
    Ok(())
}

fn parse_deltas(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("deltas must look like min:max:count");
    }
    let lo: f64 = parts[0].parse().context("delta min")?;
    let hi: f64 = parts[1].parse().context("delta max")?;
    let n: usize = parts[2].parse().context("delta count")?;
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        bail!("need 0 < min <= max and count >= 1");
    }
    Ok(log_spaced(lo, hi, n))
}

fn cmd_coarse(args: CoarseArgs) -> CmdResult {
    let (constr, cfg) = load_construction(&args.source)?;
    let section = cfg.as_ref().map(|c| c.coarse.clone()).unwrap_or_default();
    let prec = constr.precision();
    let r_str = args
        .radius
        .or(section.radius.clone())
        .unwrap_or_else(|| (1u64 << constr.depth().saturating_sub(1)).to_string());
    let r = parse_decimal(&r_str, prec)?;
    let resolution = args.resolution.or(section.resolution).unwrap_or(coarse::DEFAULT_RESOLUTION);
    let deltas = match args.deltas {
        Some(s) => parse_deltas(&s)?,
        None => {
            let lo = section.delta_min.as_deref().unwrap_or("1e-12");
            let hi = section.delta_max.as_deref().unwrap_or("1e-1");
            let n = section.delta_count.unwrap_or(12);
            parse_deltas(&format!("{lo}:{hi}:{n}"))?
        }
    };
    let certs = count_zeros_ball(&constr, &r)?.certificates;
    let rf = r.to_f64();
    let raster = coarse::raster(&constr, rf, resolution, &certs)?;
    let (_, mu) = harmzero::certify::sampled_modulus(
        &constr,
        &Float::with_val(prec, &r * 2u32),
        harmzero::certify::BOUNDARY_SAMPLES,
    )?;
    let sweep = coarse::sweep_raster(&raster, &deltas, mu.to_f64())?;
    let hash = constr.hash_hex();
    let out = args.out.or_else(|| cfg.as_ref().and_then(|c| c.paths.coarse.clone()));
    write_output(out.as_deref(), &sweep.to_csv(&hash))?;
    if let (Some(path), Some(d)) = (args.pgm, args.pgm_delta) {
        if d.is_nan() || d < 0.0 {
            return Err(Failure::Usage(anyhow!("pgm delta must be non-negative")));
        }
        let mut buf = Vec::new();
        coarse::write_pgm(&raster, &raster.mask(d), &mut buf).map_err(anyhow::Error::from)?;
        std::fs::write(&path, buf)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Usage)?;
    }
    if sweep.monotone() && sweep.refinement_ok {
        Ok(())
    } else {
        Err(Failure::Check("coarse counts are not monotone in delta".into()))
    }
}

fn cmd_check(args: CheckArgs) -> CmdResult {
    let (constr, cfg) = load_construction(&args.source)?;
    let section = cfg.as_ref().map(|c| c.check.clone()).unwrap_or_default();
    let seed = args.seed.or(section.seed).unwrap_or(DEFAULT_SEED);
    let samples = args.samples.or(section.samples).unwrap_or(100);
    let prec = constr.precision();
    let hash = constr.hash_hex();

    let audit = constr.audit();
    let audit_ok = audit.iter().all(|a| a.passed());
    let radii: Vec<Float> = std::iter::once(Float::new(prec))
        .chain((-1..=constr.depth() as i32).map(|e| Float::with_val(prec, Float::i_exp(1, e))))
        .collect();
    let mu = check_mu_bound(&constr, &radii)?;
    let restriction = verify_restriction(&constr, samples, seed, &[])?;

    let passed = audit_ok && mu.passed() && restriction.passed();
    let report = json!({
        "construction_hash": hash,
        "seed": seed,
        "audit": audit.iter().map(|a| json!({
            "k": a.k,
            "amplitude_within_cap": a.amplitude_within_cap,
            "perturbation_condition": a.perturbation_condition,
            "tail_below_margin": a.tail_below_margin,
            "margin_positive": a.margin_positive,
            "margin_reproduced": a.margin_reproduced,
        })).collect::<Vec<_>>(),
        "mu_bound": mu.to_json(&hash),
        "restriction": {
            "samples": restriction.samples,
            "max_deviation": restriction.max_deviation.to_string_radix(10, Some(12)),
            "max_ratio": restriction.max_ratio,
            "within_bound": restriction.within_bound,
        },
        "passed": passed,
    });
    let out = args.out.or_else(|| cfg.as_ref().and_then(|c| c.paths.check.clone()));
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    write_output(out.as_deref(), &(text + "\n"))?;
    eprintln!("induction audit: {}", if audit_ok { "pass" } else { "FAIL" });
    eprintln!("modulus bound: {}", if mu.passed() { "pass" } else { "FAIL" });
    eprintln!("restriction identity: {}", if restriction.passed() { "pass" } else { "FAIL" });
    if passed {
        Ok(())
    } else {
        Err(Failure::Check("one or more invariant checks failed".into()))
    }
}
