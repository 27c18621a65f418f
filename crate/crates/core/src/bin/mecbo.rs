use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use mecbo::harness::{
    read_records_csv, run_experiment, summarize, write_records_csv, write_summary_csv,
    ExperimentConfig, Method,
};
use mecbo::mec_env::{self, write_state_csv};
use mecbo::harness::streams::{stream_rng, Stream};
use mecbo::Result;

#[derive(Parser)]
#[command(name = "mecbo", version, about = "Dynamic MEC optimization experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured methods and write one CSV per method.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured method list.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        #[arg(long)]
        slots: Option<u32>,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Aggregate every CSV in a directory into one summary table.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one method over a list of values of one hyperparameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "tvbo")]
        method: Method,
        #[arg(long)]
        slots: Option<u32>,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Play the clairvoyant optimum and check that regret stays at zero.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Export the hidden state trajectory of one repetition.
    States {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        rep: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Rho,
    #[value(name = "l_s")]
    LS,
    Zeta,
    Gamma,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn write_run(out: &Path, name: &str, cfg: &ExperimentConfig, method: Method) -> Result<()> {
    let spec = cfg.spec(method).with_label(name);
    let records = run_experiment(&spec)?;
    let path = out.join(format!("{name}.csv"));
    write_records_csv(BufWriter::new(File::create(&path)?), &records)?;
    let rows = summarize(&records)?;
    if let Some(last) = mecbo::harness::summary::final_row(&rows, name) {
        println!(
            "{name}: slot {} mean avg regret {} (se {}), mean avg EDC {}",
            last.slot,
            mecbo::harness::fmt_num(last.mean_avg_regret),
            mecbo::harness::fmt_num(last.se_avg_regret),
            mecbo::harness::fmt_num(last.mean_avg_edc),
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run {
            config,
            method,
            slots,
            reps,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if !method.is_empty() {
                cfg.experiment.methods = method;
            }
            if let Some(v) = slots {
                cfg.experiment.slots = v;
            }
            if let Some(v) = reps {
                cfg.experiment.reps = v;
            }
            if let Some(v) = seed {
                cfg.experiment.seed = v;
            }
            fs::create_dir_all(&out)?;
            fs::write(out.join("config.toml"), cfg.to_toml()?)?;
            for m in cfg.experiment.methods.clone() {
                write_run(&out, m.as_str(), &cfg, m)?;
            }
        }
        Cmd::Summarize { input, out } => {
            let mut paths: Vec<PathBuf> = fs::read_dir(&input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            paths.sort();
            let mut records = Vec::new();
            for p in paths {
                records.extend(read_records_csv(File::open(&p)?)?);
            }
            let rows = summarize(&records)?;
            write_summary_csv(BufWriter::new(File::create(&out)?), &rows)?;
        }
        Cmd::Sweep {
            config,
            param,
            values,
            method,
            slots,
            reps,
            out,
        } => {
            let base = ExperimentConfig::load(&config)?;
            fs::create_dir_all(&out)?;
            for v in values {
                let mut cfg = base.clone();
                if let Some(s) = slots {
                    cfg.experiment.slots = s;
                }
                if let Some(r) = reps {
                    cfg.experiment.reps = r;
                }
                let key = match param {
                    SweepParam::Rho => {
                        cfg.tvbo.rho = v;
                        cfg.ctx_tvbo.rho = v;
                        "rho"
                    }
                    SweepParam::LS => {
                        cfg.ctx_tvbo.l_s = v;
                        "l_s"
                    }
                    SweepParam::Zeta => {
                        cfg.bo.acquisition.zeta = v;
                        "zeta"
                    }
                    SweepParam::Gamma => {
                        cfg.bo.gamma = v;
                        cfg.mab.gamma = v;
                        cfg.bco.gamma = v;
                        "gamma"
                    }
                };
                let name = format!("{method}_{key}={}", mecbo::harness::fmt_num(v));
                write_run(&out, &name, &cfg, method)?;
            }
        }
        Cmd::OracleCheck { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let records = run_experiment(&cfg.spec(Method::Oracle))?;
            let worst = records.iter().map(|r| r.regret.abs()).fold(0.0, f64::max);
            println!(
                "oracle-check: {} slots, max |regret| = {}",
                records.len(),
                mecbo::harness::fmt_num(worst)
            );
            if worst > 1e-6 {
                return Err(mecbo::Error::Infeasible(format!(
                    "oracle regret {worst} exceeds 1e-6"
                )));
            }
        }
        Cmd::States { config, rep, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let spec = cfg.spec(Method::Oracle);
            let mut rng = stream_rng(spec.rep_seed(rep), Stream::Environment);
            let mut states = vec![mec_env::init_state(&cfg.env, &mut rng)];
            for _ in 1..spec.slots {
                let next = mec_env::advance(&cfg.env, states.last().unwrap(), &mut rng);
                states.push(next);
            }
            write_state_csv(&cfg.env, &states, BufWriter::new(File::create(&out)?))?;
        }
    }
    Ok(())
}
