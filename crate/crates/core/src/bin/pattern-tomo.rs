use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use pattern_tomo::bank::save_bank;
use pattern_tomo::experiment::{Experiment, RunStatus};
use pattern_tomo::posterior::SigmaMode;
use pattern_tomo::report::{export_report, export_tables, load_run, RunRecord};
use pattern_tomo::shearing::DeviationRule;
use pattern_tomo::{Error, Result, RunConfig};

#[derive(Parser)]
#[command(version, about = "Adaptive data-pattern state tomography simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe-bank operations.
    Bank {
        #[command(subcommand)]
        action: BankCommand,
    },
    /// Adaptive reconstruction of the configured signal.
    Run(RunArgs),
    /// Least-squares fit over every setting.
    Baseline(CommonArgs),
    /// Rebuild the CSV tables of a finished run and print its summary.
    Report {
        /// A run.json file or the directory holding it.
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BankCommand {
    /// Simulate a probe bank and write bank.json and bank.csv.
    Generate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides both the bank and the signal seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    continue_past_stop: bool,
    /// Use the count-ratio σ² formula, floored, instead of the Beta variance.
    #[arg(long)]
    strict_paper_sigma: bool,
    /// Pick the constraint with the largest |x0| when shearing.
    #[arg(long)]
    abs_deviation_shearing: bool,
}

impl CommonArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.seeded(seed);
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_summary(record: &RunRecord) {
    let r = &record.report;
    let status = match r.status {
        RunStatus::Stopped => "stopped",
        RunStatus::Exhausted => "exhausted",
        RunStatus::MaxSettings => "max settings",
    };
    println!("signal          {}", record.config.signal.name());
    println!("status          {status}");
    println!("settings used   {}", r.settings_used);
    if let Some(k) = record.trace.stopped_at {
        println!("stop fired at   {k}");
    }
    println!("total variance  {:.6e}", r.total_variance);
    println!("fidelity        {:.6}", r.fidelity);
    println!("min eigenvalue  {:.6}", r.min_eigenvalue);
    println!("HS distance     {:.6e}", r.hs_distance);
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bank {
            action: BankCommand::Generate(args),
        } => {
            let cfg = args.config()?;
            let lattice = cfg.lattice.build()?;
            let bank = cfg.bank(&lattice)?;
            let dir = out_dir(&cfg);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            save_bank(&bank, &dir.join("bank.json"))?;
            bank.write_csv(&dir.join("bank.csv"))?;
            println!("wrote {}x{} bank to {}", bank.settings(), bank.probes(), dir.display());
        }
        Command::Run(args) => {
            let mut cfg = args.common.config()?;
            cfg.continue_past_stop |= args.continue_past_stop;
            if args.strict_paper_sigma {
                cfg.sigma_mode = SigmaMode::StrictPaper;
            }
            if args.abs_deviation_shearing {
                cfg.shearing.deviation = DeviationRule::Absolute;
            }
            let outcome = Experiment::prepare(&cfg)?.run()?;
            let record = RunRecord::new(&cfg, &outcome);
            let dir = out_dir(&cfg);
            for path in export_report(&record, &dir)? {
                info!("wrote {}", path.display());
            }
            print_summary(&record);
        }
        Command::Baseline(args) => {
            let cfg = args.config()?;
            let report = Experiment::prepare(&cfg)?.baseline()?;
            let dir = out_dir(&cfg);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_json(&dir.join("baseline.json"), &report)?;
            println!("fidelity        {:.6}", report.fidelity);
            println!("min eigenvalue  {:.6}", report.min_eigenvalue);
            println!("HS distance     {:.6e}", report.hs_distance);
            println!("rank deficient  {}", report.fit.rank_deficient);
        }
        Command::Report { run, out } => {
            let path = if run.is_dir() { run.join("run.json") } else { run };
            let record = load_run(&path)?;
            let dir = out.unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
            export_tables(&record, &dir)?;
            print_summary(&record);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
