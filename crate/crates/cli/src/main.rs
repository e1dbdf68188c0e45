use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hermtheta::isometry::{ideal_class_verdict, DVerdict};
use hermtheta::maass::{theorem3_verify_with, Checks, KriegForm, MaassReport, Status};
use hermtheta::modgroup::build_vd;
use hermtheta::qfield::{ideal_a_d, is_squarefree, rat_frac};
use hermtheta::theta::{CoefficientSource, CoefficientTable, ThetaEngine};
use hermtheta::{ExampleReading, FieldCtx, HermLattice};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bumped whenever a cached result format or algorithm changes.
const CACHE_SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "hermtheta", version, about = "Hermitian theta lattices over imaginary quadratic fields")]
struct Cli {
    /// Worker threads; defaults to HERM_THREADS, then the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Isometry of the example lattice with all its ideal multiples.
    Classify {
        #[arg(long, conflicts_with = "m")]
        max_m: Option<i64>,
        #[arg(long)]
        m: Option<i64>,
        /// JSON report; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-(m, d) CSV with columns m, d, isometric.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value = ".hermtheta-cache")]
        cache_dir: PathBuf,
        #[arg(long)]
        no_cache: bool,
        /// Largest m accepted for --max-m.
        #[arg(long, default_value_t = 100)]
        limit: i64,
    },
    /// Theta coefficients of the example lattice.
    Theta {
        #[arg(long)]
        m: i64,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        degree: u8,
        #[arg(long)]
        trace_bound: i64,
        /// Scale the lattice by the ideal A_d first.
        #[arg(long)]
        ideal_d: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sugano, Krieg, invariance and congruence checks on a table.
    Maass {
        #[arg(long)]
        table: PathBuf,
        /// Overrides the weight stored in the table.
        #[arg(long)]
        weight: Option<i64>,
        /// Comma-separated subset of sugano, krieg, invariance, lemma2iii.
        #[arg(long, default_value = "all")]
        checks: String,
        /// Compute missing coefficients from the example lattice for the table's m.
        #[arg(long)]
        theta_oracle: bool,
        /// Lattice scaling for --theta-oracle.
        #[arg(long, requires = "theta_oracle")]
        ideal_d: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Canonical Atkin-Lehner data V_d.
    Vd {
        #[arg(long)]
        m: i64,
        #[arg(long)]
        d: i64,
    },
    /// Isometry between the example lattice and its scaling by A_d.
    Isometry {
        #[arg(long)]
        m: i64,
        #[arg(long)]
        d: i64,
    },
    /// Table built from a Krieg-type alpha*.
    GenKrieg {
        #[arg(long)]
        m: i64,
        #[arg(long)]
        weight: i64,
        /// JSON object mapping detD to a rational string.
        #[arg(long, conflicts_with = "constant")]
        alpha_star: Option<PathBuf>,
        /// alpha* identically equal to this rational.
        #[arg(long)]
        constant: Option<String>,
        #[arg(long)]
        detd_bound: i64,
        #[arg(long)]
        trace_cap: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(cli.jobs) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads(jobs: Option<usize>) -> Result<()> {
    let env = std::env::var("HERM_THREADS").ok();
    let n = match (jobs, env) {
        (Some(n), _) => Some(n),
        (None, Some(s)) => Some(s.trim().parse().context("HERM_THREADS is not a number")?),
        (None, None) => None,
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Classify {
            max_m,
            m,
            out,
            csv,
            cache_dir,
            no_cache,
            limit,
        } => {
            let ms = match (m, max_m) {
                (Some(m), _) => {
                    if m < 1 || !is_squarefree(m) {
                        bail!("m = {m} is not a squarefree positive integer");
                    }
                    vec![m]
                }
                (None, max) => {
                    let max = max.unwrap_or(limit);
                    if max > limit {
                        bail!("--max-m {max} exceeds the limit {limit}");
                    }
                    (1..=max).filter(|&m| is_squarefree(m)).collect()
                }
            };
            let cache = (!no_cache).then_some(cache_dir.as_path());
            let report = classify(&ms, cache)?;
            if let Some(path) = csv {
                write_csv(&path, &report)?;
            }
            emit(&report, out.as_deref())?;
            Ok(0)
        }
        Cmd::Theta {
            m,
            degree,
            trace_bound,
            ideal_d,
            out,
        } => {
            let engine = ThetaEngine::new(&lattice(m, ideal_d)?)?;
            if degree == 1 {
                let counts = engine.degree1_counts(trace_bound)?;
                let doc = Degree1 {
                    m,
                    degree: 1,
                    trace_bound,
                    ideal_d,
                    counts,
                };
                emit(&doc, out.as_deref())?;
            } else {
                emit(&engine.table(trace_bound)?, out.as_deref())?;
            }
            Ok(0)
        }
        Cmd::Maass {
            table,
            weight,
            checks,
            theta_oracle,
            ideal_d,
            out,
        } => {
            let text = fs::read_to_string(&table).with_context(|| format!("reading {}", table.display()))?;
            let mut table: CoefficientTable =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", table.display()))?;
            if let Some(r) = weight {
                table.weight = r;
            }
            let checks = Checks::parse(&checks)?;
            let engine = if theta_oracle {
                Some(ThetaEngine::new(&lattice(table.ctx.m(), ideal_d)?)?)
            } else {
                None
            };
            let oracle = engine.as_ref().map(|e| e as &dyn CoefficientSource);
            let report = theorem3_verify_with(&table, oracle, checks)?;
            emit(&report, out.as_deref())?;
            Ok(maass_exit_code(&report, checks))
        }
        Cmd::Vd { m, d } => {
            let ctx = FieldCtx::new(m)?;
            let v = build_vd(&ctx, d)?;
            let doc = VdDoc {
                m,
                d,
                alpha: v.alpha,
                beta: v.beta,
                gamma: v.gamma,
                delta: v.delta,
                matrix: format!(
                    "(1/sqrt({d})) [[{}, {}*({m} + sqrt(-{m}))], [{}*({m} - sqrt(-{m})), {}]]",
                    v.alpha * d,
                    v.beta,
                    v.gamma,
                    v.delta * d
                ),
            };
            emit(&doc, None)?;
            Ok(0)
        }
        Cmd::Isometry { m, d } => {
            let lat = lattice(m, None)?;
            let verdict = ideal_class_verdict(&lat, d)?;
            let scaled = lat.scale_by_ideal(&ideal_a_d(lat.ctx(), d)?)?;
            let doc = IsometryDoc {
                m,
                d,
                isometric: verdict.isometric,
                witness: match &verdict.witness {
                    Some(u) => serde_json::to_value(u)?,
                    None => serde_json::Value::String("none".into()),
                },
                gram: lat.int_gram().context("non-integral trace Gram")?,
                gram_scaled: scaled.int_gram().context("non-integral trace Gram")?,
                nodes: verdict.nodes,
            };
            emit(&doc, None)?;
            Ok(0)
        }
        Cmd::GenKrieg {
            m,
            weight,
            alpha_star,
            constant,
            detd_bound,
            trace_cap,
            out,
        } => {
            let ctx = FieldCtx::new(m)?;
            let values: BTreeMap<i128, hermtheta::BigRational> = match (alpha_star, constant) {
                (Some(path), _) => {
                    let raw: BTreeMap<String, String> = serde_json::from_str(&fs::read_to_string(&path)?)?;
                    raw.iter()
                        .map(|(k, v)| Ok((k.trim().parse::<i128>()?, parse_rational(v)?)))
                        .collect::<Result<_>>()?
                }
                (None, Some(c)) => {
                    let c = parse_rational(&c)?;
                    (0..=i128::from(detd_bound)).map(|k| (k, c.clone())).collect()
                }
                (None, None) => bail!("one of --alpha-star or --constant is required"),
            };
            let form = KriegForm::new(ctx, weight, |k| values.get(&k).cloned());
            emit(&form.table(detd_bound, trace_cap)?, out.as_deref())?;
            Ok(0)
        }
    }
}

fn parse_rational(s: &str) -> Result<hermtheta::BigRational> {
    let s = s.trim();
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim().parse::<i64>()?, q.trim().parse::<i64>()?),
        None => (s.parse::<i64>()?, 1),
    };
    if q == 0 {
        bail!("zero denominator in {s}");
    }
    Ok(rat_frac(p, q))
}

fn maass_exit_code(report: &MaassReport, checks: Checks) -> u8 {
    let failed = (checks.sugano && report.sugano == Some(Status::Fails))
        || (checks.krieg && !report.krieg_ok)
        || !report.all_invariant()
        || report.lemma2iii.values().any(|&b| !b);
    if failed {
        2
    } else if checks.sugano && report.sugano == Some(Status::Undetermined) {
        3
    } else {
        0
    }
}

fn lattice(m: i64, ideal_d: Option<i64>) -> Result<HermLattice> {
    let ctx = FieldCtx::new(m)?;
    let (lat, _) = HermLattice::example(ctx, ExampleReading::SqrtM)?;
    Ok(match ideal_d {
        Some(d) => lat.scale_by_ideal(&ideal_a_d(lat.ctx(), d)?)?,
        None => lat,
    })
}

#[derive(Serialize)]
struct Degree1 {
    m: i64,
    degree: u8,
    trace_bound: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ideal_d: Option<i64>,
    counts: Vec<u64>,
}

#[derive(Serialize)]
struct VdDoc {
    m: i64,
    d: i64,
    alpha: i64,
    beta: i64,
    gamma: i64,
    delta: i64,
    matrix: String,
}

#[derive(Serialize)]
struct IsometryDoc {
    m: i64,
    d: i64,
    isometric: bool,
    witness: serde_json::Value,
    gram: Vec<Vec<i64>>,
    gram_scaled: Vec<Vec<i64>>,
    nodes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MReport {
    m: i64,
    d_k: i64,
    verdicts: Vec<DVerdict>,
    overall: bool,
}

#[derive(Debug, Clone, Serialize)]
struct MError {
    m: i64,
    error: String,
}

#[derive(Debug, Clone, Serialize)]
struct ClassificationReport {
    reports: Vec<MReport>,
    errors: Vec<MError>,
    good: Vec<i64>,
    bad: Vec<i64>,
}

fn cache_path(dir: &Path, m: i64, d: i64) -> PathBuf {
    dir.join(format!("v{CACHE_SCHEMA}-m{m}-d{d}-isometry-b0.json"))
}

fn verdict(lat: &HermLattice, d: i64, cache: Option<&Path>) -> Result<DVerdict> {
    let m = lat.ctx().m();
    if let Some(dir) = cache {
        if let Ok(text) = fs::read_to_string(cache_path(dir, m, d)) {
            if let Ok(v) = serde_json::from_str::<DVerdict>(&text) {
                return Ok(v);
            }
        }
    }
    let v = ideal_class_verdict(lat, d)?;
    if let Some(dir) = cache {
        fs::create_dir_all(dir)?;
        let path = cache_path(dir, m, d);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_string(&v)?)?;
        fs::rename(&tmp, &path)?;
    }
    Ok(v)
}

fn classify(ms: &[i64], cache: Option<&Path>) -> Result<ClassificationReport> {
    let mut lattices = Vec::new();
    let mut errors = Vec::new();
    for &m in ms {
        match FieldCtx::new(m)
            .and_then(|ctx| HermLattice::example(ctx, ExampleReading::SqrtM))
            .map(|(l, _)| l)
        {
            Ok(l) if l.is_theta_lattice() => lattices.push(l),
            Ok(l) => errors.push(MError {
                m,
                error: l.theta_report().failures().join(", "),
            }),
            Err(e) => errors.push(MError { m, error: e.to_string() }),
        }
    }
    let tasks: Vec<(usize, i64)> = lattices
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.ctx().squarefree_disc_divisors().into_iter().map(move |d| (i, d)))
        .collect();
    let results: Vec<(usize, Result<DVerdict>)> = tasks
        .par_iter()
        .map(|&(i, d)| (i, verdict(&lattices[i], d, cache)))
        .collect();
    let mut per_m: Vec<Vec<DVerdict>> = vec![Vec::new(); lattices.len()];
    let mut failed = vec![None; lattices.len()];
    for (i, r) in results {
        match r {
            Ok(v) => per_m[i].push(v),
            Err(e) => failed[i] = Some(e.to_string()),
        }
    }
    let mut reports = Vec::new();
    for (i, l) in lattices.iter().enumerate() {
        let m = l.ctx().m();
        if let Some(error) = failed[i].take() {
            errors.push(MError { m, error });
            continue;
        }
        let mut verdicts = std::mem::take(&mut per_m[i]);
        verdicts.sort_by_key(|v| v.d);
        let overall = verdicts.iter().all(|v| v.isometric);
        reports.push(MReport {
            m,
            d_k: l.ctx().disc(),
            verdicts,
            overall,
        });
    }
    errors.sort_by_key(|e| e.m);
    let good = reports.iter().filter(|r| r.overall).map(|r| r.m).collect();
    let bad = reports.iter().filter(|r| !r.overall).map(|r| r.m).collect();
    Ok(ClassificationReport {
        reports,
        errors,
        good,
        bad,
    })
}

fn write_csv(path: &Path, report: &ClassificationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["m", "d", "isometric"])?;
    for r in &report.reports {
        for v in &r.verdicts {
            w.write_record([r.m.to_string(), v.d.to_string(), v.isometric.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with sorted keys.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let v = serde_json::to_value(value)?;
    let text = serde_json::to_string_pretty(&v)? + "\n";
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
