//! `noma-farey`: command-line experiments for two-user QAM uplink NOMA.
//!
//! Every subcommand writes CSV (to stdout, or to `--out`) and can emit a
//! JSON run summary with `--summary`. Relative output paths are resolved
//! against `--out-dir`, which defaults to `$NOMA_FAREY_OUT_DIR`.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 when an internal
//! consistency check fails.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noma_farey::design::{
    design_weights, distance_sweep, log_grid, min_distance_bruteforce, min_distance_farey, normalize,
    sum_constellation, Channel, ConstellationPair, DesignRow, PowerBudget,
};
use noma_farey::farey::{FareyError, PunchedFarey};
use noma_farey::rate::{
    asymptotic_rate_allocation, enumerate_rate_allocations, optimal_rate_allocation, RateProblem, RateRow,
};
use noma_farey::sim::{curves_to_csv, simulate_ber, Scheme, SimConfig};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "noma-farey", version, about = "Power control and BER experiments for two-user QAM uplink NOMA")]
struct Cli {
    /// Directory for relative --out and --summary paths.
    #[arg(long, global = true, env = "NOMA_FAREY_OUT_DIR")]
    out_dir: Option<PathBuf>,

    /// Write a JSON summary of the run to this path.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the punched Farey sequence with denominators <= K and numerators <= L.
    Farey(FareyArgs),
    /// Optimal weights and minimum distance for one channel realization.
    Design(DesignArgs),
    /// NOMA and TDMA minimum distance against |h2| on a log grid.
    DistanceSweep(SweepArgs),
    /// Optimal and high-rate splits of a sum constellation size M = M1*M2.
    Rate(RateArgs),
    /// Monte Carlo BER of NOMA against TDMA, FDMA and CR-NOMA.
    Ber(BerArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Output CSV file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FareyFormat {
    Compact,
    Csv,
}

#[derive(Args, Debug)]
struct FareyArgs {
    /// Largest denominator K.
    k: u64,
    /// Largest numerator L.
    l: u64,
    /// Check the neighbour identities and report the counts on stderr.
    #[arg(long)]
    verify: bool,
    #[arg(long, value_enum, default_value = "compact")]
    format: FareyFormat,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct LinkArgs {
    /// Channel gain magnitude |h1|.
    #[arg(long, default_value_t = 1.0)]
    h1: f64,
    /// Channel gain magnitude |h2|.
    #[arg(long, default_value_t = 1.0)]
    h2: f64,
    /// Power budget of user 1.
    #[arg(long, default_value_t = 1.0)]
    p1: f64,
    /// Power budget of user 2.
    #[arg(long, default_value_t = 1.0)]
    p2: f64,
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[command(flatten)]
    link: LinkArgs,
    /// PAM size of user 1 (1 = silent).
    #[arg(long, default_value_t = 4)]
    m1: u32,
    /// PAM size of user 2 (1 = silent).
    #[arg(long, default_value_t = 4)]
    m2: u32,
    /// Also grid-search the weights and cross-check the Farey distance.
    #[arg(long)]
    oracle: bool,
    /// Grid points per weight axis for --oracle.
    #[arg(long, default_value_t = 400)]
    grid: u32,
    /// Print the noise-free received points of one branch on stderr.
    #[arg(long)]
    points: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sum PAM size M = M1*M2.
    #[arg(long, default_value_t = 64)]
    m: u32,
    /// PAM size of user 1; must divide M.
    #[arg(long, default_value_t = 8)]
    m1: u32,
    #[arg(long, default_value_t = 1.0)]
    h1: f64,
    #[arg(long, default_value_t = 0.1)]
    h2_min: f64,
    #[arg(long, default_value_t = 100.0)]
    h2_max: f64,
    /// Number of log-spaced |h2| samples.
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 1.0)]
    p1: f64,
    #[arg(long, default_value_t = 1.0)]
    p2: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct RateArgs {
    /// Sum PAM size M (power of two).
    #[arg(long, default_value_t = 8)]
    m: u64,
    /// Disparity P2|h2|^2 / (P1|h1|^2); overrides the channel flags.
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    link: LinkArgs,
    /// List the objective at every split instead of the two chosen ones.
    #[arg(long)]
    all: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// Both users with unit fading variance.
    EqualGain,
    /// User 2 sixteen times weaker on average (64 times with --full-scale).
    NearFar,
}

#[derive(Args, Debug)]
struct BerArgs {
    /// TOML or JSON file with simulation keys; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a predefined scenario; flags override it.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Comma-separated SNR points in dB [default: 10,15,...,50].
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    /// Channel uses per SNR point [default: 100000].
    #[arg(long)]
    symbols: Option<u64>,
    /// RNG seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of noma,tdma,fdma,cr_noma [default: all].
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// PAM size of user 1 [default: 4].
    #[arg(long)]
    m1: Option<u32>,
    /// PAM size of user 2 [default: 4].
    #[arg(long)]
    m2: Option<u32>,
    /// Per-component fading variance of user 1 [default: 1].
    #[arg(long)]
    var1: Option<f64>,
    /// Per-component fading variance of user 2 [default: 1].
    #[arg(long)]
    var2: Option<f64>,
    /// Power budget of user 1 [default: 1].
    #[arg(long)]
    p1: Option<f64>,
    /// Power budget of user 2 [default: 1].
    #[arg(long)]
    p2: Option<f64>,
    /// Channel uses per fading draw [default: 1].
    #[arg(long)]
    block_len: Option<u32>,
    /// Run on one thread (results are identical either way).
    #[arg(long)]
    serial: bool,
    /// Allow 64-QAM-per-user and other long runs.
    #[arg(long)]
    full_scale: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Invariant(String),
}

impl Failure {
    fn invalid(e: impl std::fmt::Display) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<Value, Failure>;

/// Channel uses times SNR points times schemes above which `--full-scale`
/// is required.
const DESK_WORK_LIMIT: u64 = 400_000_000;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let ctx = Context { out_dir: cli.out_dir.clone() };
    let result = match &cli.command {
        Command::Farey(a) => cmd_farey(&ctx, a),
        Command::Design(a) => cmd_design(&ctx, a),
        Command::DistanceSweep(a) => cmd_sweep(&ctx, a),
        Command::Rate(a) => cmd_rate(&ctx, a),
        Command::Ber(a) => cmd_ber(&ctx, a),
    };
    match result {
        Ok(mut summary) => {
            if let Some(path) = &cli.summary {
                summary["elapsed_s"] = json!(start.elapsed().as_secs_f64());
                let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
                if let Err(e) = ctx.write(path, &(text + "\n")) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("internal check failed: {msg}");
            ExitCode::from(3)
        }
    }
}

struct Context {
    out_dir: Option<PathBuf>,
}

impl Context {
    fn resolve(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    fn write(&self, path: &Path, text: &str) -> Result<PathBuf, String> {
        let full = self.resolve(path);
        if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
        }
        fs::write(&full, text).map_err(|e| format!("{}: {e}", full.display()))?;
        Ok(full)
    }

    /// Sends `text` to `--out` if given, else stdout. Returns where it went.
    fn emit(&self, out: &Output, text: &str) -> Result<String, Failure> {
        match &out.out {
            Some(path) => self.write(path, text).map(|p| p.display().to_string()).map_err(Failure::Invalid),
            None => {
                let mut stdout = std::io::stdout().lock();
                // a closed pipe is not worth a failure exit
                let _ = stdout.write_all(text.as_bytes());
                Ok("-".into())
            }
        }
    }
}

fn cmd_farey(ctx: &Context, a: &FareyArgs) -> Outcome {
    let seq = PunchedFarey::new(a.k, a.l).map_err(Failure::invalid)?;
    let text = match a.format {
        FareyFormat::Compact => seq.to_compact() + "\n",
        FareyFormat::Csv => seq.to_csv(),
    };
    let output = ctx.emit(&a.output, &text)?;
    let mut summary = json!({
        "command": "farey",
        "K": a.k,
        "L": a.l,
        "terms": seq.len(),
        "output": output,
    });
    if a.verify {
        let report = seq.verify().map_err(|e| match e {
            FareyError::PropertyViolation(msg) => Failure::Invariant(msg),
            other => Failure::invalid(other),
        })?;
        eprintln!(
            "verified: {} adjacent pairs, {} triples, {} quadruples",
            report.pairs, report.triples, report.quadruples
        );
        summary["verified"] = json!(report);
    }
    Ok(summary)
}

fn link(l: &LinkArgs) -> Result<(Channel, PowerBudget), Failure> {
    let ch = Channel::from_magnitudes(l.h1, l.h2).map_err(Failure::invalid)?;
    let p = PowerBudget::new(l.p1, l.p2).map_err(Failure::invalid)?;
    Ok((ch, p))
}

fn cmd_design(ctx: &Context, a: &DesignArgs) -> Outcome {
    let (ch, power) = link(&a.link)?;
    let sizes = ConstellationPair::new(a.m1, a.m2).map_err(Failure::invalid)?;
    let design = design_weights(&ch, &power, &sizes);
    let row = DesignRow::new(&ch, &power, &sizes);
    let output = ctx.emit(&a.output, &format!("{}\n{}\n", DesignRow::HEADER, row.to_csv_line()))?;
    if a.points {
        let pts: Vec<String> = sum_constellation(&design, &ch, &sizes).iter().map(|p| format!("{p:.6}")).collect();
        eprintln!("received points: {}", pts.join(" "));
    }
    let mut summary = json!({
        "command": "design",
        "row": row,
        "gain_ratio": design.gain_ratio,
        "output": output,
    });
    if row.d_noma <= row.d_oma {
        return Err(Failure::Invariant(format!("d_noma {} <= d_oma {}", row.d_noma, row.d_oma)));
    }
    if a.oracle {
        summary["oracle"] = design_oracle(a, &ch, &power, &sizes, design.d_noma, design.w1_tilde, design.w2_tilde)?;
    }
    Ok(summary)
}

fn design_oracle(
    a: &DesignArgs,
    ch: &Channel,
    power: &PowerBudget,
    sizes: &ConstellationPair,
    d_noma: f64,
    w1_tilde: f64,
    w2_tilde: f64,
) -> Outcome {
    if !sizes.both_active() {
        eprintln!("oracle: a silent user leaves nothing to search");
        return Ok(json!(null));
    }
    if a.grid < 2 {
        return Err(Failure::Invalid("--grid must be at least 2".into()));
    }
    let nc = normalize(ch, power, sizes).map_err(Failure::invalid)?;
    let farey = min_distance_farey(w1_tilde, w2_tilde, &nc, sizes).map_err(Failure::invalid)?;
    let brute = min_distance_bruteforce(w1_tilde, w2_tilde, &nc, sizes);
    let n = f64::from(a.grid);
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 1..=a.grid {
        for j in 1..=a.grid {
            let (u, v) = (f64::from(i) / n, f64::from(j) / n);
            let d = min_distance_bruteforce(u, v, &nc, sizes).d;
            if d > best.2 {
                best = (u, v, d);
            }
        }
    }
    eprintln!(
        "oracle: closed form {d_noma:.9}, farey {:.9}, brute {:.9}, best of {}x{} grid {:.9} at ({:.4}, {:.4})",
        farey.d, brute.d, a.grid, a.grid, best.2, best.0, best.1
    );
    let slack = 2.0 * (nc.h1_tilde + nc.h2_tilde) / n;
    if best.2 > d_noma + slack {
        return Err(Failure::Invariant(format!("grid point beats closed form: {} > {d_noma}", best.2)));
    }
    if (farey.d - brute.d).abs() > 1e-12 * brute.d.max(f64::MIN_POSITIVE) {
        return Err(Failure::Invariant(format!("farey {} != brute {}", farey.d, brute.d)));
    }
    Ok(json!({
        "farey": farey.d,
        "bruteforce": brute.d,
        "grid": a.grid,
        "grid_best": best.2,
        "grid_w1_tilde": best.0,
        "grid_w2_tilde": best.1,
    }))
}

fn cmd_sweep(ctx: &Context, a: &SweepArgs) -> Outcome {
    if a.m1 == 0 || !a.m.is_multiple_of(a.m1) {
        return Err(Failure::Invalid(format!("M1 = {} does not divide M = {}", a.m1, a.m)));
    }
    if !(a.h2_min > 0.0 && a.h2_max >= a.h2_min) || a.points == 0 {
        return Err(Failure::Invalid("need 0 < h2-min <= h2-max and points >= 1".into()));
    }
    let sizes = ConstellationPair::new(a.m1, a.m / a.m1).map_err(Failure::invalid)?;
    let power = PowerBudget::new(a.p1, a.p2).map_err(Failure::invalid)?;
    let grid = log_grid(a.h2_min, a.h2_max, a.points);
    let rows = distance_sweep(a.h1, &grid, &power, &sizes).map_err(Failure::invalid)?;
    let mut text = String::from(DesignRow::HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.to_csv_line());
        text.push('\n');
    }
    let output = ctx.emit(&a.output, &text)?;
    if let Some(r) = rows.iter().find(|r| r.d_noma < r.d_oma) {
        return Err(Failure::Invariant(format!("d_noma < d_oma at |h2| = {}", r.h2_abs)));
    }
    let min_gain = rows.iter().map(|r| r.d_noma / r.d_oma).fold(f64::INFINITY, f64::min);
    Ok(json!({
        "command": "distance-sweep",
        "M": a.m,
        "M1": a.m1,
        "M2": a.m / a.m1,
        "points": rows.len(),
        "min_distance_ratio": min_gain,
        "output": output,
    }))
}

fn cmd_rate(ctx: &Context, a: &RateArgs) -> Outcome {
    let prob = match a.lambda {
        Some(l) => RateProblem::new(a.m, l),
        None => RateProblem::from_channel(a.m, a.link.h1, a.link.h2, a.link.p1, a.link.p2),
    }
    .map_err(Failure::invalid)?;
    let opt = optimal_rate_allocation(&prob);
    let asym = asymptotic_rate_allocation(&prob);
    let text = if a.all {
        let mut t = String::from("M1,M2,beta\n");
        for (m1, b) in enumerate_rate_allocations(&prob) {
            t.push_str(&format!("{m1},{},{b}\n", prob.m() / m1));
        }
        t
    } else {
        format!("{}\n{}\n", RateRow::HEADER, RateRow::new(&prob).to_csv_line())
    };
    let output = ctx.emit(&a.output, &text)?;
    let best = enumerate_rate_allocations(&prob).into_iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    if opt.beta != best {
        return Err(Failure::Invariant(format!("optimum {} misses enumeration minimum {best}", opt.beta)));
    }
    Ok(json!({
        "command": "rate",
        "M": prob.m(),
        "lambda": prob.lambda(),
        "optimal": opt,
        "asymptotic": asym,
        "output": output,
    }))
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
    }
}

fn preset_config(preset: Preset, full_scale: bool) -> SimConfig {
    let mut cfg = SimConfig::default();
    let step = |lo: f64, hi: f64, by: f64| {
        let n = ((hi - lo) / by).round() as usize;
        (0..=n).map(|i| lo + by * i as f64).collect::<Vec<_>>()
    };
    if full_scale {
        cfg.m1 = 8;
        cfg.m2 = 8;
        cfg.snr_db = step(20.0, 55.0, 2.5);
        cfg.symbols_per_point = 1_000_000;
    } else {
        cfg.snr_db = step(10.0, 50.0, 2.5);
    }
    if let Preset::NearFar = preset {
        cfg.fading_var2 = if full_scale { 1.0 / 64.0 } else { 1.0 / 16.0 };
    }
    cfg
}

fn ber_config(a: &BerArgs) -> Result<SimConfig, Failure> {
    let mut cfg = match (a.preset, &a.config) {
        (Some(_), Some(_)) => return Err(Failure::Invalid("use either --preset or --config, not both".into())),
        (Some(p), None) => preset_config(p, a.full_scale),
        (None, Some(path)) => load_config(path)?,
        (None, None) => SimConfig::default(),
    };
    if let Some(v) = &a.snr_db {
        cfg.snr_db = v.clone();
    }
    if let Some(v) = &a.schemes {
        cfg.schemes =
            v.iter().map(|s| s.trim().parse::<Scheme>()).collect::<Result<_, _>>().map_err(Failure::invalid)?;
    }
    macro_rules! take {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { cfg.$field = v; })*
        };
    }
    take!(symbols => symbols_per_point, seed => seed, m1 => m1, m2 => m2,
          var1 => fading_var1, var2 => fading_var2, p1 => p1, p2 => p2, block_len => block_len);
    if a.serial {
        cfg.parallel = false;
    }
    cfg.validate().map_err(Failure::invalid)?;
    Ok(cfg)
}

fn cmd_ber(ctx: &Context, a: &BerArgs) -> Outcome {
    let cfg = ber_config(a)?;
    let work = cfg.symbols_per_point * cfg.snr_db.len() as u64 * cfg.schemes.len() as u64;
    let long = cfg.m1 * cfg.m2 >= 64 || work > DESK_WORK_LIMIT;
    if long && !a.full_scale {
        return Err(Failure::Invalid(format!(
            "this run ({}x{} PAM, {work} channel uses) is long; pass --full-scale to allow it",
            cfg.m1, cfg.m2
        )));
    }
    if long {
        eprintln!("warning: full-scale run, {work} channel uses; expect a long runtime");
    }
    let start = Instant::now();
    let curves = simulate_ber(&cfg).map_err(Failure::invalid)?;
    let elapsed = start.elapsed().as_secs_f64();
    let output = ctx.emit(&a.output, &curves_to_csv(&curves))?;
    for c in &curves {
        if let Some(p) = c.points.iter().find(|p| !(0.0..=1.0).contains(&p.ber)) {
            return Err(Failure::Invariant(format!("{} BER {} out of range", c.scheme, p.ber)));
        }
    }
    let at_1e2: Vec<Value> =
        curves.iter().map(|c| json!({"scheme": c.scheme, "snr_db_at_ber_1e-2": c.snr_at_ber(1e-2)})).collect();
    eprintln!("simulated {work} channel uses in {elapsed:.1} s");
    Ok(json!({
        "command": "ber",
        "config": cfg,
        "snr_at_ber": at_1e2,
        "simulation_s": elapsed,
        "output": output,
    }))
}
