mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slicecap::capacity::{self, BoxRegion, CapacityCurve, HeightAnalysis, PipelineOptions};
use slicecap::family::{build_example_family, CrossingSign, ExampleParams, GeneratingFamily};
use slicecap::io::{self, Report};
use slicecap::morse::{crossing_path, morse_index_maslov, DifferenceFunction};
use slicecap::slice::SliceOptions;
use slicecap::Error;

use config::{parse_heights, FileConfig, MethodChoice};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_SUITE: u8 = 4;
const OUT_ENV: &str = "SLICECAP_OUT";

#[derive(Parser)]
#[command(name = "slicecap", version, about = "Generating-family capacities of slices of planar Lagrangians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Slice, critical points, homology and capacities over a list of heights.
    Run(RunArgs),
    /// Cobordism obstruction between two figure-eight slices.
    CheckCobordism(CobordismArgs),
    /// Non-squeezing check of the disk above a height.
    CheckNonsqueezing(NonSqueezingArgs),
    /// Run a named property suite on the built-in corpus.
    Suite {
        /// One of monotonicity, conformality, invariance, nonvanishing,
        /// continuity, nonsqueezing, euler.
        name: String,
    },
}

#[derive(Args, Clone, Default)]
struct FamilyArgs {
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Dimension n of the Lagrangian (2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Crossing sign of the built-in family: neg or pos.
    #[arg(long)]
    sign: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Family builder: example21, fig8-neg or fig8-pos.
    family: Option<String>,
    #[command(flatten)]
    fam: FamilyArgs,
    /// Heights as a:b:step, a comma list, or one value.
    #[arg(long, allow_hyphen_values = true)]
    heights: Option<String>,
    /// Single-crossing rule only (default).
    #[arg(long, conflicts_with_all = ["sweep", "both"])]
    fast: bool,
    /// Homology rank sweep only.
    #[arg(long, conflicts_with = "both")]
    sweep: bool,
    /// Both methods, with an agreement check.
    #[arg(long)]
    both: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid samples per axis for the rank sweep.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Recorded in the report; the pipeline itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CobordismArgs {
    /// Bottom radius, as r=2 or 2.
    #[arg(long)]
    bottom: String,
    /// Top radius, as R=3 or 3.
    #[arg(long)]
    top: String,
    /// fig8-neg or fig8-pos.
    #[arg(long, default_value = "fig8-neg")]
    family: String,
    /// Euler characteristic of the putative cobordism.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    chi: i32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NonSqueezingArgs {
    #[command(flatten)]
    fam: FamilyArgs,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    height: f64,
    /// Box in the (x_n, y_n) plane as x0:x1,y0:y1; omitted means the
    /// measured bounding box of the disk.
    #[arg(long, allow_hyphen_values = true)]
    r#box: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG }, e.to_string())
    }
}

fn config_err(msg: impl Into<String>) -> Fail {
    Fail(EXIT_CONFIG, msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::CheckCobordism(a) => check_cobordism(a),
        Command::CheckNonsqueezing(a) => check_nonsqueezing(a),
        Command::Suite { name } => suite(&name),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn parse_sign(s: &str) -> Result<CrossingSign, Fail> {
    match s {
        "neg" | "negative" | "-" => Ok(CrossingSign::Negative),
        "pos" | "positive" | "+" => Ok(CrossingSign::Positive),
        _ => Err(config_err(format!("unknown sign '{s}'; expected neg or pos"))),
    }
}

fn sign_label(s: CrossingSign) -> &'static str {
    match s {
        CrossingSign::Negative => "neg",
        CrossingSign::Positive => "pos",
    }
}

/// Resolves the builder name and parameters, flags over file values.
fn resolve_family(
    name: Option<&str>,
    fam: &FamilyArgs,
    file: &FileConfig,
) -> Result<(String, ExampleParams, CrossingSign, GeneratingFamily), Fail> {
    let name = name.map(str::to_string).or_else(|| file.family.clone()).unwrap_or_else(|| "example21".into());
    let default_sign = match name.as_str() {
        "example21" | "fig8-neg" => CrossingSign::Negative,
        "fig8-pos" => CrossingSign::Positive,
        _ => return Err(config_err(format!("unknown family '{name}'; expected example21, fig8-neg or fig8-pos"))),
    };
    let sign = match fam.sign.as_deref().or(file.sign.as_deref()) {
        Some(s) if name == "example21" => parse_sign(s)?,
        Some(s) if parse_sign(s)? != default_sign => {
            return Err(config_err(format!("family '{name}' fixes the crossing sign; drop --sign {s}")))
        }
        _ => default_sign,
    };
    let p = ExampleParams::new(
        fam.k.or(file.k).unwrap_or(5.0),
        fam.eps.or(file.eps).unwrap_or(0.25),
        fam.beta.or(file.beta).unwrap_or(1.0),
        fam.tau.or(file.tau).unwrap_or(4.0),
        fam.dim.or(file.dim).unwrap_or(2),
    );
    if !(2..=3).contains(&p.dim) {
        return Err(config_err(format!("dimension must be 2 or 3, got {}", p.dim)));
    }
    let f = build_example_family(p, sign)?;
    Ok((name, p, sign, f))
}

fn out_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    flag.or(file)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("slicecap-out"))
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), Fail> {
    std::fs::create_dir_all(dir).map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))?;
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| config_err(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn maslov_column(f: &GeneratingFamily, h: &HeightAnalysis, opts: &SliceOptions) -> Vec<Option<i64>> {
    let delta = DifferenceFunction::new(f.sheared(h.height));
    h.critical
        .iter()
        .map(|c| {
            if !c.is_isolated() {
                return None;
            }
            crossing_path(&delta, c, opts).and_then(|p| morse_index_maslov(&p, f.fiber_dim())).ok()
        })
        .collect()
}

fn run(a: RunArgs) -> Result<u8, Fail> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p).map_err(config_err)?,
        None => FileConfig::default(),
    };
    let (name, params, sign, f) = resolve_family(a.family.as_deref(), &a.fam, &file)?;
    let heights_spec = a
        .heights
        .clone()
        .or_else(|| file.heights.clone())
        .ok_or_else(|| config_err("no heights given (use --heights or the config key 'heights')"))?;
    let heights = parse_heights(&heights_spec).map_err(config_err)?;
    let method = if a.both {
        MethodChoice::Both
    } else if a.sweep {
        MethodChoice::Sweep
    } else if a.fast {
        MethodChoice::Fast
    } else {
        match &file.method {
            Some(m) => MethodChoice::parse(m).map_err(config_err)?,
            None => MethodChoice::Fast,
        }
    };
    let resolution = a.resolution.or(file.resolution).unwrap_or(64);
    if resolution < 16 {
        return Err(config_err(format!("resolution must be >= 16, got {resolution}")));
    }
    let eta = a.eta.or(file.eta);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let dir = out_dir(a.out.clone(), file.out.clone());

    let opts = PipelineOptions {
        fast: method != MethodChoice::Sweep,
        sweep: method != MethodChoice::Fast,
        resolution,
        eta,
        ..Default::default()
    };
    let curve = capacity::monotonicity_scan(&f, &heights, &opts)?;
    let done: Vec<&HeightAnalysis> = curve.analyses().collect();

    let mut report = Report::default();
    report.push("command", "run");
    report.push("family", &name);
    report.push("sign", sign_label(sign));
    report.push("K", params.k);
    report.push("eps", params.eps);
    report.push("beta", params.beta);
    report.push("tau", params.tau);
    report.push("dim", params.dim);
    report.push("heights", &heights_spec);
    report.push("method", method.label());
    report.push("resolution", resolution);
    report.push("seed", seed);
    report.push("heights_done", done.len());
    report.push("heights_skipped", curve.skipped().count());
    for (h, why) in curve.skipped() {
        report.push(format!("skipped.{h}"), why);
    }
    fill_scan_report(&mut report, &curve, &f, method);

    let diagrams: Vec<_> = done.iter().map(|h| &h.diagram).collect();
    let svg_src = done.iter().find(|h| !h.diagram.is_empty()).or(done.first());
    let svg = match svg_src {
        Some(h) => io::diagram_svg(&h.diagram),
        None => String::from("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"1\" height=\"1\"/>\n"),
    };
    let critical_rows: Vec<io::CriticalRow> =
        done.iter().map(|h| (h.height, h.critical.as_slice(), maslov_column(&f, h, &opts.slice))).collect();
    let sweeps: Vec<_> = done.iter().filter_map(|h| h.sweep.as_ref()).collect();
    let mut tables = Vec::new();
    for h in &done {
        tables.extend(h.fast.iter());
        tables.extend(h.swept.iter());
    }
    write_outputs(
        &dir,
        &[
            ("diagram.svg", svg),
            ("slice.csv", io::slice_csv(&diagrams)),
            ("critical.csv", io::critical_csv(&critical_rows)),
            ("ranks.csv", io::ranks_csv(&sweeps)),
            ("capacities.csv", io::capacities_csv(&tables)),
            ("report.txt", report.render()),
        ],
    )?;
    print!("{}", report.render());
    println!("outputs={}", dir.display());
    if done.is_empty() {
        let why: Vec<String> = curve.skipped().map(|(h, r)| format!("{h}: {r}")).collect();
        return Err(Fail(EXIT_NUMERICAL, format!("no height could be processed ({})", why.join("; "))));
    }
    Ok(0)
}

fn fill_scan_report(report: &mut Report, curve: &CapacityCurve, f: &GeneratingFamily, method: MethodChoice) {
    let done: Vec<&HeightAnalysis> = curve.analyses().collect();
    for h in &done {
        let key = |k: &str| format!("h{}.{k}", h.height);
        report.push(key("components"), h.diagram.components.len());
        report.push(key("crossings"), h.diagram.double_points.len());
        if let Some(w) = h.diagram.writhe {
            report.push(key("writhe"), w);
        }
        if let Some(a) = h.diagram.lobe_area(0) {
            report.push(key("lobe_area"), a);
        }
        if let Some(t) = h.best() {
            for (k, kind, v) in t.entries().filter(|e| e.2 != 0.0) {
                report.push(key(&format!("{}.{k}", kind.label())), v);
            }
            if t.ambiguous {
                report.push(key("ambiguous"), true);
            }
        }
        if let (MethodChoice::Both, Some(a), Some(b)) = (method, &h.fast, &h.swept) {
            let bad = a.disagreements(b, h.cell_variation);
            report.push(key("cell_variation"), h.cell_variation);
            report.push(key("agreement"), if bad.is_empty() { "ok" } else { "differs" });
        }
    }
    let tables: Vec<_> = done.iter().filter_map(|h| h.best()).collect();
    let violations: usize = tables.windows(2).map(|w| capacity::monotonicity_violations(w[0], w[1]).len()).sum();
    report.push("monotonicity", if violations == 0 { "ok" } else { "violated" });
    report.push(
        "continuity",
        if capacity::continuity_violations(curve, f).is_empty() { "ok" } else { "violated" },
    );
    let nonvanishing = done.iter().filter(|h| !h.diagram.is_empty()).all(|h| h.best().map(|t| !t.is_zero()).unwrap_or(false));
    report.push("nonvanishing", if nonvanishing { "ok" } else { "violated" });
    let all_zero = tables.iter().all(|t| t.is_zero());
    report.push("all_zero", all_zero);
}

fn parse_radius(s: &str) -> Result<f64, Fail> {
    let v = s.rsplit_once('=').map(|(_, v)| v).unwrap_or(s);
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|r| *r > 0.0)
        .ok_or_else(|| config_err(format!("bad radius '{s}'; use r=2 or a positive number")))
}

fn check_cobordism(a: CobordismArgs) -> Result<u8, Fail> {
    let sign = match a.family.as_str() {
        "fig8-neg" => CrossingSign::Negative,
        "fig8-pos" => CrossingSign::Positive,
        other => return Err(config_err(format!("unknown family '{other}'; expected fig8-neg or fig8-pos"))),
    };
    let (rb, rt) = (parse_radius(&a.bottom)?, parse_radius(&a.top)?);
    let v = capacity::check_fig8_cobordism(sign, rb, rt, a.chi)?;
    let mut r = Report::default();
    r.push("command", "check-cobordism");
    r.push("family", &a.family);
    r.push("bottom_radius", rb);
    r.push("top_radius", rt);
    r.push("bottom_height", v.bottom.height);
    r.push("top_height", v.top.height);
    r.push("chi", v.chi);
    if let Some((wb, wt)) = v.writhe {
        r.push("writhe_bottom", wb);
        r.push("writhe_top", wt);
    }
    for (label, t) in [("bottom", &v.bottom), ("top", &v.top)] {
        for (k, kind, val) in t.entries().filter(|e| e.2 != 0.0) {
            r.push(format!("{label}.{}.{k}", kind.label()), val);
        }
    }
    r.push("verdict", v.label());
    for (i, why) in v.reasons.iter().enumerate() {
        r.push(format!("reason.{i}"), why);
    }
    if !v.obstructed {
        r.push("note", "no obstruction found; this does not assert that a cobordism exists");
    }
    print!("{}", r.render());
    if let Some(dir) = a.out {
        write_outputs(&dir, &[("report.txt", r.render())])?;
    }
    Ok(0)
}

fn parse_box(s: &str) -> Result<BoxRegion, Fail> {
    let bad = || config_err(format!("bad box '{s}'; use x0:x1,y0:y1"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    let pair = |t: &str| -> Result<(f64, f64), Fail> {
        let (a, b) = t.split_once(':').ok_or_else(bad)?;
        Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
    };
    Ok(BoxRegion { x: pair(x)?, y: pair(y)? })
}

fn check_nonsqueezing(a: NonSqueezingArgs) -> Result<u8, Fail> {
    let (name, _, _, f) = resolve_family(None, &a.fam, &FileConfig::default())?;
    let opts = SliceOptions::default();
    let (region, measured) = match &a.r#box {
        Some(b) => (parse_box(b)?, false),
        None => (capacity::measured_box(&f, a.height, 0.05, &opts)?, true),
    };
    let v = capacity::nonsqueezing_check(&f, a.height, region, &opts)?;
    let mut r = Report::default();
    r.push("command", "check-nonsqueezing");
    r.push("family", name);
    r.push("height", a.height);
    r.push("box_measured", measured);
    r.push("box_x", format!("{}:{}", region.x.0, region.x.1));
    r.push("box_y", format!("{}:{}", region.y.0, region.y.1));
    r.push("length", region.length());
    r.push("width", region.width());
    r.push("product", v.product);
    r.push("capacity", v.capacity);
    r.push("verdict", v.label());
    print!("{}", r.render());
    if let Some(dir) = a.out {
        write_outputs(&dir, &[("report.txt", r.render())])?;
    }
    Ok(0)
}

fn suite(name: &str) -> Result<u8, Fail> {
    if !capacity::SUITES.contains(&name) {
        return Err(config_err(format!("unknown suite '{name}'; expected one of {}", capacity::SUITES.join(", "))));
    }
    let rep = capacity::run_suite(name)?;
    for l in &rep.lines {
        println!("{l}");
    }
    println!("suite={} result={}", rep.name, if rep.passed { "PASS" } else { "FAIL" });
    Ok(if rep.passed { 0 } else { EXIT_SUITE })
}
