mod demo;
mod engines;

use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use querysim_core::perfstats::{self, SloOptions};
use querysim_core::rewrite::{self, RewriteKind};
use querysim_core::signature::{signature_of_sql, SignatureOptions};
use querysim_core::simulator::{
    compare, render_report, run_simulation, ReportFormat, SimulationError, SimulationOptions, Thresholds,
};
use querysim_core::sql;
use querysim_core::workload::{
    self, ClusterKey, ClusterOptions, Clustering, Selection, TimeRange, Workload, DEFAULT_WINDOW_DAYS,
    SECONDS_PER_DAY,
};

use engines::EngineSpec;

/// Exit status when a run could not complete.
const EXIT_ABORTED: u8 = 2;

#[derive(Parser)]
#[command(name = "querysim", version, about = "Query signatures, workload benchmarks and control/test simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the signature of one SQL statement.
    Sig {
        /// SQL file; stdin when absent.
        file: Option<PathBuf>,
        #[arg(long)]
        tables: bool,
        #[arg(long)]
        mask_dates: bool,
        #[arg(long, default_value = "X")]
        placeholder: String,
    },
    /// Group a query log into signature clusters.
    Cluster {
        #[command(flatten)]
        log: LogArgs,
        /// Print the clustering as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Build a benchmark with one representative query per cluster.
    Bench {
        #[command(flatten)]
        log: LogArgs,
        #[arg(long = "select", default_value = "latest")]
        selection: Selection,
        /// Benchmark file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-cluster SLO ranges and violations of each cluster's latest run.
    Slo {
        #[command(flatten)]
        log: LogArgs,
        /// Factor applied to the MAD (1.4826 for normal consistency).
        #[arg(long, default_value_t = 1.0)]
        mad_scale: f64,
        #[arg(long, default_value_t = 5)]
        min_samples: usize,
    },
    /// Print the simulation rewrite and non-determinism labels of a statement.
    Rewrite {
        /// SQL file; stdin when absent.
        file: Option<PathBuf>,
        #[arg(long, default_value = "sim")]
        session: String,
    },
    /// Run a benchmark on control and test engines and report regressions.
    Simulate {
        #[arg(long)]
        bench: PathBuf,
        /// ref:<data-dir> or ref+faults:<config-file>
        #[arg(long)]
        control: EngineSpec,
        #[arg(long)]
        test: EngineSpec,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long, default_value = "sim")]
        session: String,
        #[arg(long, default_value_t = Thresholds::default().perf_ratio)]
        ratio_threshold: f64,
        #[arg(long, default_value_t = Thresholds::default().min_delta_ms)]
        min_delta_ms: f64,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include SQL text in Markdown reports.
        #[arg(long)]
        show_sql: bool,
    },
    /// Write demo tables, a benchmark, fault configs and a query log.
    Demo {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        queries: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

#[derive(Args)]
struct LogArgs {
    /// JSON-lines query log.
    #[arg(long)]
    log: PathBuf,
    /// Inclusive start: epoch seconds, YYYY-MM-DD or RFC 3339.
    #[arg(long, value_parser = parse_time)]
    from: Option<i64>,
    /// Exclusive end, same formats as --from.
    #[arg(long, value_parser = parse_time)]
    to: Option<i64>,
    /// Window length when neither --from nor --to is given, ending at the last record.
    #[arg(long, default_value_t = DEFAULT_WINDOW_DAYS)]
    days: i64,
    /// Use the whole log.
    #[arg(long, conflicts_with_all = ["from", "to"])]
    all: bool,
    #[arg(long)]
    mask_dates: bool,
    #[arg(long)]
    tables: bool,
    /// Cluster by extras.template_id when present.
    #[arg(long)]
    template_id: bool,
}

fn parse_time(s: &str) -> Result<i64, String> {
    if let Ok(n) = s.parse::<i64>() {
        return Ok(n);
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|t| t.timestamp())
        .map_err(|_| format!("'{s}' is not epoch seconds, YYYY-MM-DD or RFC 3339"))
}

fn read_sql(file: &Option<PathBuf>) -> Result<String> {
    let mut s = String::new();
    match file {
        Some(p) => s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            io::stdin().read_to_string(&mut s)?;
        }
    }
    Ok(s)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

impl LogArgs {
    fn load(&self) -> Result<(Workload, Clustering)> {
        let f = fs::File::open(&self.log).with_context(|| format!("opening {}", self.log.display()))?;
        let w = workload::ingest(BufReader::new(f))?;
        if w.stats.skipped > 0 {
            eprintln!("warning: skipped {} of {} log lines", w.stats.skipped, w.stats.lines);
        }
        let span = w.time_span().unwrap_or(TimeRange { from: 0, to: 1 });
        let range = if self.all {
            TimeRange::all()
        } else if self.from.is_none() && self.to.is_none() {
            if self.days <= 0 {
                bail!("--days must be positive");
            }
            // The last record's UTC day closes the window.
            let end = (workload::utc_day(span.to - 1) + 1) * SECONDS_PER_DAY;
            TimeRange::last_days(end, self.days)
        } else {
            let from = self.from.unwrap_or(span.from);
            let to = self.to.unwrap_or(span.to);
            TimeRange::new(from, to).with_context(|| format!("empty time range [{from}, {to})"))?
        };
        let opts = ClusterOptions {
            signature: SignatureOptions::default()
                .with_tables(self.tables)
                .with_mask_dates(self.mask_dates),
            key: if self.template_id {
                ClusterKey::TemplateId
            } else {
                ClusterKey::Signature
            },
        };
        let c = workload::cluster_with(&w, &opts, range);
        Ok((w, c))
    }
}

fn cmd_cluster(log: &LogArgs, json: bool) -> Result<()> {
    let (_, c) = log.load()?;
    if json {
        println!("{}", serde_json::to_string_pretty(&c)?);
        return Ok(());
    }
    println!("members\tdays\trecurrent\tsignature");
    for cl in &c.clusters {
        println!(
            "{}\t{}\t{}\t{}",
            cl.len(),
            cl.distinct_days,
            if cl.is_recurrent() { "yes" } else { "no" },
            cl.signature
        );
    }
    println!(
        "# {} clusters, {} queries, recurrence ratio {:.4}",
        c.clusters.len(),
        c.total_members(),
        workload::recurrence_ratio(&c.clusters)
    );
    Ok(())
}

fn cmd_slo(log: &LogArgs, mad_scale: f64, min_samples: usize) -> Result<()> {
    let (_, c) = log.load()?;
    let opts = SloOptions {
        mad_scale,
        min_samples,
        ..SloOptions::default()
    };
    println!("signature\tn\tmedian\tmad\tcov\tlower\tupper\ttrusted\tlatest_ms\tviolation");
    let mut violations = 0;
    for cl in &c.clusters {
        let durations: Vec<f64> = cl.durations().into_iter().map(|d| d as f64).collect();
        let Ok(r) = perfstats::slo_range_with(&durations, &opts) else {
            continue;
        };
        let latest = cl.members.iter().rev().find_map(|m| m.duration_ms);
        let violation = match (latest, r.trusted) {
            (Some(d), true) => {
                let v = perfstats::is_violation(&r, d as f64)?;
                violations += usize::from(v);
                if v {
                    "yes"
                } else {
                    "no"
                }
            }
            _ => "-",
        };
        println!(
            "{}\t{}\t{:.1}\t{:.1}\t{:.3}\t{:.1}\t{:.1}\t{}\t{}\t{}",
            cl.signature,
            r.sample_count,
            r.median,
            r.mad,
            r.cov,
            r.lower,
            r.upper,
            if r.trusted { "yes" } else { "no" },
            latest.map_or("-".to_string(), |d| d.to_string()),
            violation
        );
    }
    println!("# {violations} clusters whose latest run violates its SLO");
    Ok(())
}

fn cmd_rewrite(file: &Option<PathBuf>, session: &str) -> Result<()> {
    let text = read_sql(file)?;
    let stmt = sql::parse(&text)?;
    let outcome = if stmt.write_target().is_some() {
        rewrite::redirect_writes(&stmt, session)?
    } else {
        rewrite::wrap_checksum(&stmt)?
    };
    let kind = match outcome.kind {
        RewriteKind::ReadChecksum => "READ_CHECKSUM",
        RewriteKind::WriteRedirected => "WRITE_REDIRECTED",
    };
    println!("-- {kind}");
    for s in outcome.prelude.iter().chain(std::iter::once(&outcome.rewritten)) {
        println!("{};", sql::render(s));
    }
    for l in rewrite::label_nondeterminism(&stmt, None) {
        println!(
            "-- label {} {} at {}{}",
            l.category.name(),
            l.construct,
            l.location,
            if l.speculative { " (speculative)" } else { "" }
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    bench: &PathBuf,
    control: &EngineSpec,
    test: &EngineSpec,
    opts: SimulationOptions,
    thresholds: Thresholds,
    format: ReportFormat,
    out: &Option<PathBuf>,
    show_sql: bool,
) -> Result<u8> {
    let text = fs::read_to_string(bench).with_context(|| format!("reading {}", bench.display()))?;
    let b = workload::Benchmark::from_json_str(&text)?;
    let (c, t) = engines::build_pair(control, test)?;
    let raw = match run_simulation(&b, &c, &t, &opts) {
        Ok(raw) => raw,
        Err(e @ SimulationError::Unavailable { .. }) => bail!("run aborted: {e}"),
        Err(e) => return Err(e.into()),
    };
    let report = compare(&raw, &thresholds);
    emit(out, &render_report(&report, format, show_sql))?;
    let s = &report.summary;
    eprintln!(
        "{} queries: {} matched, {} mismatched, {} skipped_nondet, {} errored, {} slower, {} scan_regressed",
        s.total, s.matched, s.mismatched, s.skipped_nondet, s.errored, s.slower, s.scan_regressed
    );
    Ok(report.exit_code() as u8)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Sig {
            file,
            tables,
            mask_dates,
            placeholder,
        } => {
            if placeholder.is_empty() {
                bail!("--placeholder must not be empty");
            }
            let opts = SignatureOptions {
                date_placeholder: placeholder,
                ..SignatureOptions::default()
                    .with_tables(tables)
                    .with_mask_dates(mask_dates)
            };
            println!("{}", signature_of_sql(&read_sql(&file)?, &opts)?.render());
        }
        Command::Cluster { log, json } => cmd_cluster(&log, json)?,
        Command::Bench { log, selection, out } => {
            let (w, c) = log.load()?;
            let b = workload::build_benchmark(&w, &c, selection)?;
            emit(&out, &(b.to_json_string() + "\n"))?;
            eprintln!("{} entries from {} queries", b.entries.len(), c.total_members());
        }
        Command::Slo {
            log,
            mad_scale,
            min_samples,
        } => cmd_slo(&log, mad_scale, min_samples)?,
        Command::Rewrite { file, session } => cmd_rewrite(&file, &session)?,
        Command::Simulate {
            bench,
            control,
            test,
            parallelism,
            repeat,
            session,
            ratio_threshold,
            min_delta_ms,
            format,
            out,
            show_sql,
        } => {
            let opts = SimulationOptions {
                parallelism,
                session,
                repeat,
            };
            let thresholds = Thresholds {
                perf_ratio: ratio_threshold,
                min_delta_ms,
                ..Thresholds::default()
            };
            return cmd_simulate(&bench, &control, &test, opts, thresholds, format, &out, show_sql);
        }
        Command::Demo { dir, queries, seed } => {
            for p in demo::write_demo(&dir, queries, seed)? {
                println!("{p}");
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ABORTED)
        }
    }
}
