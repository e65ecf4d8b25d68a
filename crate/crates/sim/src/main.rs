use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pem_core::signals::{acf, fit_ar, pacf, variability_profile, Bucket};
use pem_sim::config::Scenario;
use pem_sim::{io, presets, report, run, sweep, Error};

#[derive(Parser)]
#[command(name = "pem", version, about = "Packetized energy management simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario or sweep file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario for each of its seeds.
    Run(Common),
    /// Run a sweep from a file or a named preset.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = presets::NAMES)]
        preset: Option<String>,
    },
    /// Score a recorded run (`t,r,...,y` CSV) or summarize a sweep table.
    Score {
        /// Run CSV written by `pem run`, or a sweep table.
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit an AR model to a signal file.
    FitAr {
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 2.0)]
        dt: f64,
    },
    /// ACF, PACF and variability statistics of a signal file.
    Stats {
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        lags: usize,
        #[arg(long, default_value_t = 2.0)]
        dt: f64,
    },
}

fn scenario(common: &Common) -> Result<Scenario, Error> {
    let mut sc = match &common.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = common.seed {
        sc.seeds = vec![seed];
    }
    Ok(sc)
}

fn cmd_run(common: &Common) -> Result<(), Error> {
    let sc = scenario(common)?;
    for &seed in &sc.seeds {
        let rec = run::run_scenario_with(&sc, seed, &run::RayonExecutor)?;
        let paths = io::persist_run(&common.out, &sc, &rec)?;
        let s = rec.score;
        println!(
            "seed {seed}: rmae {:.4} rrmse {:.4} precision {:.3} accuracy {:.3} delay {:.3} composite {:.3} -> {}",
            s.rmae,
            s.rrmse,
            s.precision,
            s.accuracy,
            s.delay,
            s.composite,
            paths[0].display()
        );
    }
    Ok(())
}

fn cmd_sweep(common: &Common, preset: Option<&str>) -> Result<(), Error> {
    let mut grid = match (preset, &common.config) {
        (Some(name), _) => presets::preset(name)?,
        (None, Some(p)) => presets::load_grid(p)?,
        (None, None) => return Err(Error::Config("sweep needs --preset or --config".into())),
    };
    if let Some(seed) = common.seed {
        grid.template.seeds = vec![seed];
    }
    std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    let cells = sweep::sweep(&grid)?;
    let table = sweep::table(&grid, &cells);
    let name = &grid.template.name;
    let table_path = common.out.join(format!("{name}.csv"));
    sweep::write_table(&table_path, &table)?;
    let rep = report::report(&table);
    report::write_summary(&common.out.join(format!("{name}.summary.csv")), &rep)?;
    let text = rep.summary_text();
    std::fs::write(common.out.join(format!("{name}.summary.txt")), &text).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    print!("{text}");
    println!("table: {}", table_path.display());
    Ok(())
}

fn cmd_score(input: &Path, config: Option<&Path>) -> Result<(), Error> {
    if let Ok(table) = sweep::read_table(input) {
        print!("{}", report::report(&table).summary_text());
        return Ok(());
    }
    let sc = match config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    let mut rdr = csv::Reader::from_path(input)?;
    let rows: Vec<run::StepRow> = rdr.deserialize().collect::<Result<_, _>>()?;
    let t0 = rows.first().map_or(0, |r| r.t);
    let s = run::score_rows(&sc, &rows, t0)?;
    println!(
        "precision {:.4}\naccuracy {:.4}\ndelay {:.4}\ncomposite {:.4}\nrmae {:.4}\nrrmse {:.4}",
        s.precision, s.accuracy, s.delay, s.composite, s.rmae, s.rrmse
    );
    Ok(())
}

fn cmd_fit_ar(input: &Path, order: usize, dt: f64) -> Result<(), Error> {
    let s = io::load_series(input, dt)?;
    let m = fit_ar(&s, order)?;
    println!("order {}", m.order());
    for (i, p) in m.phi.iter().enumerate() {
        println!("phi{} {p:.6}", i + 1);
    }
    println!(
        "mu {:.6}\nsigma2 {:.6e}\nstationary {}",
        m.mu,
        m.sigma2,
        m.is_stationary()
    );
    Ok(())
}

fn cmd_stats(input: &Path, lags: usize, dt: f64) -> Result<(), Error> {
    let s = io::load_series(input, dt)?;
    println!(
        "samples {}\ndt {}\nmean {:.6}\nmin {:.6}\nmax {:.6}",
        s.len(),
        s.dt(),
        s.mean(),
        s.min(),
        s.max()
    );
    let a = acf(&s, lags)?;
    let p = pacf(&s, lags)?;
    println!("lag,acf,pacf");
    for k in 0..=lags {
        println!("{k},{:.5},{:.5}", a[k], p[k]);
    }
    for bucket in [
        Bucket::MinuteOfHour,
        Bucket::HourOfDay,
        Bucket::DayOfWeek,
        Bucket::MonthOfYear,
    ] {
        if let Ok(v) = variability_profile(&s, bucket) {
            let cells: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
            println!("variance by {bucket:?}: {}", cells.join(" "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(c) => cmd_run(c),
        Cmd::Sweep { common, preset } => cmd_sweep(common, preset.as_deref()),
        Cmd::Score { input, config } => cmd_score(input, config.as_deref()),
        Cmd::FitAr { input, order, dt } => cmd_fit_ar(input, *order, *dt),
        Cmd::Stats { input, lags, dt } => cmd_stats(input, *lags, *dt),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
