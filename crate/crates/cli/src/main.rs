use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use torus_nodal::balls::{default_centers, sse_scan, ScaleFunction};
use torus_nodal::cover::build_cover;
use torus_nodal::doubling::{classify_doubling, lower_bound_assembly, DEFAULT_A1, DEFAULT_A2};
use torus_nodal::eigen::{enumerate_modes, random_eigenfunction, sample_grid, EigenfunctionSpec};
use torus_nodal::harness::{grid_rule, growth_report, run_plan, ExperimentPlan};
use torus_nodal::nodal::{extract_nodal, NodalSegment};
use torus_nodal::svg::{render, BallOverlay};

#[derive(Parser, Debug)]
#[command(
    name = "torus-nodal",
    version,
    about = "Nodal sets of Laplacian eigenfunctions on the flat torus"
)]
struct Cli {
    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the lattice modes with |xi|^2 = E.
    Modes {
        #[arg(long)]
        energy: u64,
    },
    /// Draw a random eigenfunction; write spec.json and field.bin.
    Gen(Source),
    /// Extract the nodal set; write nodal.csv.
    Nodal(Source),
    /// Ball masses at r = lambda^-rho; write balls.csv and ballstats.json.
    Ballstats {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
    },
    /// Maximal disjoint family of r/2-balls; write cover.csv.
    Cover {
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Classify wavelength-scale balls by the doubling condition; write doubling.csv.
    Doubling {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = DEFAULT_A1)]
        a1: f64,
        #[arg(long, default_value_t = DEFAULT_A2)]
        a2: f64,
    },
    /// Real and complexified growth exponents; write growth.json.
    Growth(Source),
    /// Run an experiment plan; write report.json and runs.csv.
    Verify {
        /// JSON experiment plan.
        plan: PathBuf,
    },
    /// Render a nodal CSV (and optional ball CSV) to plot.svg.
    Plot {
        #[arg(long)]
        nodal: PathBuf,
        #[arg(long)]
        balls: Option<PathBuf>,
    },
}

/// Eigenfunction source: a saved spec or an `(E, seed)` draw.
#[derive(Args, Debug)]
struct Source {
    #[arg(long, required_unless_present = "spec")]
    energy: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Spec JSON written by `gen`.
    #[arg(long, conflicts_with = "energy")]
    spec: Option<PathBuf>,
    /// Grid resolution (default: max(256, 16 ceil(sqrt E))).
    #[arg(long)]
    grid: Option<usize>,
}

impl Source {
    fn load(&self) -> Result<(EigenfunctionSpec, usize)> {
        let spec = match (&self.spec, self.energy) {
            (Some(path), _) => {
                let text = read(path)?;
                let json = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
                EigenfunctionSpec::from_json(json).with_context(|| format!("{}", path.display()))?
            }
            (None, Some(e)) => random_eigenfunction(e, self.seed)?,
            (None, None) => bail!("either --energy or --spec is required"),
        };
        let n = self.grid.unwrap_or_else(|| grid_rule(spec.energy()));
        if n < spec.min_resolution() {
            bail!(
                "--grid {n} is below the oversampling bound {} for E={}",
                spec.min_resolution(),
                spec.energy()
            );
        }
        Ok((spec, n))
    }
}

/// Input errors exit with 1, failed gates with 2.
enum Outcome {
    Pass,
    GateFailure,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn json_error(path: &Path, e: serde_json::Error) -> anyhow::Error {
    anyhow!(
        "{}: malformed JSON at line {}, column {}: {e}",
        path.display(),
        e.line(),
        e.column()
    )
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out.join(name);
    info!("writing {}", path.display());
    Ok(BufWriter::new(File::create(&path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn write_json(out: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(out.join(name), &text)?;
    println!("{text}");
    Ok(())
}

fn read_segments(path: &Path) -> Result<Vec<NodalSegment>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.with_context(|| format!("{}: line {line}", path.display()))?;
        let v =
            parse_fields(&rec, 4).with_context(|| format!("{}: line {line}", path.display()))?;
        out.push(NodalSegment::new([v[0], v[1]], [v[2], v[3]]));
    }
    Ok(out)
}

/// Ball CSVs from `cover` (`x,y,radius`) or `ballstats` (`center_x,center_y,radius,...`).
fn read_balls(path: &Path) -> Result<Vec<BallOverlay>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.contains(&h))
            .ok_or_else(|| anyhow!("{}: missing column {}", path.display(), names.join(" or ")))
    };
    let (cx, cy, cr) = (
        col(&["x", "center_x", "px"])?,
        col(&["y", "center_y", "py"])?,
        col(&["radius"])?,
    );
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.with_context(|| format!("{}: line {line}", path.display()))?;
        let get = |i: usize| -> Result<f64> {
            let s = rec
                .get(i)
                .ok_or_else(|| anyhow!("{}: line {line}: short record", path.display()))?;
            s.parse()
                .with_context(|| format!("{}: line {line}: bad number {s:?}", path.display()))
        };
        out.push(BallOverlay {
            center: [get(cx)?, get(cy)?],
            radius: get(cr)?,
        });
    }
    Ok(out)
}

fn parse_fields(rec: &csv::StringRecord, n: usize) -> Result<Vec<f64>> {
    if rec.len() < n {
        bail!("expected at least {n} fields, found {}", rec.len());
    }
    (0..n)
        .map(|i| {
            rec[i]
                .parse::<f64>()
                .with_context(|| format!("bad number {:?}", &rec[i]))
        })
        .collect()
}

fn run(cli: &Cli) -> Result<Outcome> {
    let out = &cli.out;
    if !matches!(cli.command, Command::Modes { .. }) {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    }
    match &cli.command {
        Command::Modes { energy } => {
            let modes = enumerate_modes(*energy);
            if modes.is_empty() {
                println!("empty spectrum at E={energy}: no lattice points on the circle");
                return Ok(Outcome::Pass);
            }
            for m in &modes {
                println!("{} {}", m.xi[0], m.xi[1]);
            }
            println!(
                "{} modes at E={energy}, lambda = {}",
                modes.len(),
                2.0 * std::f64::consts::PI * (*energy as f64).sqrt()
            );
        }
        Command::Gen(source) => {
            let (spec, n) = source.load()?;
            fs::write(out.join("spec.json"), spec.to_json_string())?;
            let field = sample_grid(&spec, n)?;
            field.write_binary(create(out, "field.bin")?)?;
            println!(
                "E={} modes={} lambda={} N={n}",
                spec.energy(),
                spec.modes().len(),
                spec.lambda()
            );
        }
        Command::Nodal(source) => {
            let (spec, n) = source.load()?;
            let nodal = extract_nodal(&sample_grid(&spec, n)?);
            nodal.write_csv(create(out, "nodal.csv")?)?;
            write_json(
                out,
                "nodal.json",
                &json!({
                    "E": spec.energy(),
                    "N": n,
                    "lambda": spec.lambda(),
                    "segments": nodal.segments().len(),
                    "total_length": nodal.total_length(),
                    "yau_ratio": nodal.yau_ratio(),
                }),
            )?;
        }
        Command::Ballstats { source, rho } => {
            let scale = ScaleFunction::for_torus(*rho)?;
            let (spec, n) = source.load()?;
            let field = sample_grid(&spec, n)?;
            let report = sse_scan(
                &field,
                scale,
                &default_centers(scale.radius(field.lambda()), source.seed),
            )?;
            report.write_csv(create(out, "balls.csv")?)?;
            write_json(
                out,
                "ballstats.json",
                &serde_json::to_value(report.summary())?,
            )?;
        }
        Command::Cover { radius, seed } => {
            let family = build_cover(*radius, *seed)?;
            family.write_csv(create(out, "cover.csv")?)?;
            write_json(out, "cover.json", &serde_json::to_value(family.summary())?)?;
        }
        Command::Doubling { source, a1, a2 } => {
            let (spec, n) = source.load()?;
            let field = sample_grid(&spec, n)?;
            let inner = 10.0 * a1 / field.lambda();
            if 2.0 * inner >= 0.25 {
                bail!(
                    "20 a1 / lambda = {} must be below 1/4; raise E or lower --a1",
                    2.0 * inner
                );
            }
            let centers = build_cover(inner, source.seed)?.centers;
            let report = classify_doubling(&field, *a1, *a2, &centers)?;
            let nodal = extract_nodal(&field);
            let bound = lower_bound_assembly(&report, &nodal)?;
            report.write_csv(&nodal, create(out, "doubling.csv")?)?;
            write_json(
                out,
                "doubling.json",
                &json!({
                    "E": spec.energy(),
                    "a1": a1,
                    "a2": a2,
                    "balls": report.balls.len(),
                    "good_fraction": report.good_fraction,
                    "good_with_nodal_point": report.good_with_nodal_point(),
                    "lower_bound": bound.bound,
                    "a3_hat": bound.a3_hat,
                    "total_length": nodal.total_length(),
                }),
            )?;
        }
        Command::Growth(source) => {
            let (spec, _) = source.load()?;
            let report = growth_report(&spec, source.seed)?;
            write_json(out, "growth.json", &serde_json::to_value(report)?)?;
        }
        Command::Verify { plan } => {
            let text = read(plan)?;
            let parsed: ExperimentPlan =
                serde_json::from_str(&text).map_err(|e| json_error(plan, e))?;
            parsed
                .validate()
                .with_context(|| format!("{}", plan.display()))?;
            let report = run_plan(&parsed, Some(out))?;
            for (name, v) in &report.verdicts {
                println!(
                    "{} {name}: {}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.detail
                );
            }
            if !report.passed {
                return Ok(Outcome::GateFailure);
            }
        }
        Command::Plot { nodal, balls } => {
            let segments = read_segments(nodal)?;
            let overlays = match balls {
                Some(p) => read_balls(p)?,
                None => Vec::new(),
            };
            fs::write(out.join("plot.svg"), render(&segments, &overlays))?;
            println!(
                "{} segments, {} balls -> {}",
                segments.len(),
                overlays.len(),
                out.join("plot.svg").display()
            );
        }
    }
    Ok(Outcome::Pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::GateFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
