//! `dse`: run scenarios, synthesize observer gains, aggregate reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dse_core::harness::{self, adversarial_xhat0, runtime_ordering, HarnessError, TIMING_REPEATS};
use dse_core::observers::{self, ObserverError, ObserverGains};
use dse_core::scenario::{load_scenario, EstimatorKind};
use dse_core::smib::{decomposition, lipschitz_probe, OperatingBox};

#[derive(Parser)]
#[command(name = "dse", version, about = "SMIB dynamic state estimation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Scenario,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObserverArg {
    Uio,
    Lipschitz,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and run estimators on it.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated subset of ekf,ukf,ckf,uio,lipschitz.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<EstimatorKind>>,
        #[arg(long)]
        attack: Option<Switch>,
        #[arg(long = "unknown-inputs")]
        unknown_inputs: Option<Switch>,
        #[arg(long)]
        seed: Option<u64>,
        /// Estimator start: the scenario's xhat0, or (3, omega0, 0, 0).
        #[arg(long, default_value = "scenario")]
        init: Init,
        #[arg(long, default_value_t = TIMING_REPEATS)]
        repeats: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the observer LMI and write the gains file.
    Synthesize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        observer: ObserverArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the comparison table from a run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

enum Failure {
    Harness(HarnessError),
    Observer(ObserverError),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Harness(e) => e.exit_code() as u8,
            Failure::Observer(ObserverError::SynthesisInfeasible(_) | ObserverError::RankDeficient { .. }) => 2,
            Failure::Observer(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Harness(HarnessError::Synthesis { .. }) | Failure::Observer(_) => {
                format!("synthesis: {}", self.inner())
            }
            Failure::Harness(HarnessError::AllDiverged) => format!("estimation: {}", self.inner()),
            Failure::Harness(HarnessError::Scenario(_)) => self.inner(),
            Failure::Harness(_) => format!("io: {}", self.inner()),
        }
    }

    fn inner(&self) -> String {
        match self {
            Failure::Harness(e) => e.to_string(),
            Failure::Observer(e) => e.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Harness(e)
    }
}

fn on(s: Switch) -> bool {
    matches!(s, Switch::On)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { scenario, estimators, attack, unknown_inputs, seed, init, repeats, out } => {
            let mut s = load_scenario(&scenario).map_err(HarnessError::from)?;
            if let Some(e) = estimators {
                s.estimators = e;
            }
            if let Some(a) = attack {
                s = s.with_attack(on(a));
            }
            if let Some(u) = unknown_inputs {
                s = s.with_unknown_inputs(on(u));
            }
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            if let Init::Adversarial = init {
                s.xhat0 = adversarial_xhat0(&s);
            }
            let res = harness::run_scenario(&s, repeats)?;
            harness::write_run(&res, &out)?;
            print!("{}", res.report.to_text());
            if res.report.get(EstimatorKind::Lipschitz).is_some() {
                println!("\n{}", runtime_ordering(&res.report).diagnostic);
            }
            if res.report.all_diverged() {
                return Err(HarnessError::AllDiverged.into());
            }
            Ok(())
        }
        Command::Synthesize { scenario, observer, out } => {
            let s = load_scenario(&scenario).map_err(HarnessError::from)?;
            let kind = match observer {
                ObserverArg::Uio => EstimatorKind::Uio,
                ObserverArg::Lipschitz => EstimatorKind::Lipschitz,
            };
            let g = observers::synthesize(kind, &s).map_err(Failure::Observer)?;
            observers::save_gains(&g, &out).map_err(Failure::Observer)?;
            let (a, b) = decomposition(&s.params);
            let c = s.linear_output().c;
            match &g {
                ObserverGains::Uio(u) => {
                    let res = u.identity_residuals(&a, &b, &c);
                    println!("uio gains written to {}", out.display());
                    println!("  |M D|_inf            {:.3e}", u.decoupling_residual(&s.d_matrix));
                    println!("  identity residuals   {:.3e}", res.iter().fold(0.0_f64, |m, r| m.max(*r)));
                    println!("  LMI margin           {:.3e}", u.lmi_margin(&c).map_err(Failure::Observer)?);
                    println!("  unreduced margin     {:.3e}", u.original_margin(&c));
                    println!("  N spectral abscissa  {:.4}", u.n_abscissa());
                }
                ObserverGains::Lipschitz(l) => {
                    let probe = lipschitz_probe(&s.params, &OperatingBox::around(s.x0), 10_000, s.seed);
                    let k = &l.constants;
                    println!("lipschitz gains written to {}", out.display());
                    println!("  eps1 {:.6} eps2 {:.6} sigma {:.6}", l.eps1, l.eps2, l.sigma);
                    println!("  LMI margin           {:.3e}", l.lmi_margin(&a, &c).map_err(Failure::Observer)?);
                    println!("  constants            rho {} varphi {} mu {}", k.rho, k.varphi, k.mu);
                    println!("  probed Lipschitz     {probe:.4} (10000 pairs around x0)");
                }
            }
            Ok(())
        }
        Command::Report { input } => {
            let r = harness::runner::report_from_dir(&input)?;
            print!("{}", r.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dse: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
