mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spectral_clt::clt::{Kappa, MomentParams};
use spectral_clt::funcs::BuiltinFn;
use spectral_clt::montecarlo::{self, CounterexampleId, PopulationSpec};
use spectral_clt::mp::{self, SpectralModel};
use spectral_clt::testing::{self, SizeConvention};

/// Exit status used when a test rejects at the requested level, so pipelines
/// can branch on the outcome.
const EXIT_REJECTED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "spectral-clt",
    version,
    about = "Corrected likelihood-ratio tests for large covariance matrices, \
             Marčenko–Pastur functionals and simulation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConventionArg {
    Adjusted,
    Raw,
    Both,
}

#[derive(Args)]
struct MomentArgs {
    /// Real/complex indicator: 2 for real data, 1 for complex
    #[arg(long)]
    kappa: Option<u8>,
    /// |E X²|² of the standardized innovations (defaults to 1 for κ=2, 0 for κ=1)
    #[arg(long, value_name = "A")]
    alpha_x: Option<f64>,
    /// Fourth-moment excess β_x = E|X|⁴ − α_x − 2
    #[arg(long, value_name = "B")]
    beta_x: Option<f64>,
    /// β of the second sample (equality test only)
    #[arg(long, value_name = "B")]
    beta_y: Option<f64>,
}

impl MomentArgs {
    fn resolve(&self) -> Result<(MomentParams, f64, bool), String> {
        let defaulted = self.kappa.is_none() && self.beta_x.is_none();
        let kappa = match self.kappa {
            None | Some(2) => Kappa::Real,
            Some(1) => Kappa::Complex,
            Some(k) => return Err(format!("kappa must be 1 or 2, got {k}")),
        };
        let alpha = self.alpha_x.unwrap_or(match kappa {
            Kappa::Real => 1.0,
            Kappa::Complex => 0.0,
        });
        let beta_x = self.beta_x.unwrap_or(0.0);
        let params = MomentParams::new(kappa, alpha, beta_x).map_err(|e| e.to_string())?;
        Ok((params, self.beta_y.unwrap_or(0.0), defaulted))
    }
}

#[derive(Args)]
struct CommonOpts {
    /// Output file (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Command {
    /// One-sample corrected LRT of H0: Sigma = I on a CSV of observations
    TestIdentity {
        /// Input CSV (rows are observations unless --transpose)
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        transpose: bool,
        /// Centering convention
        #[arg(long, value_enum, default_value_t = ConventionArg::Adjusted)]
        convention: ConventionArg,
        /// Significance level for the one-sided rejection
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[command(flatten)]
        moments: MomentArgs,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Two-sample corrected LRT of H0: Sigma_x = Sigma_y on two CSVs
    TestEquality {
        /// Input CSVs; pass exactly two
        #[arg(short, long, required = true, num_args = 1)]
        input: Vec<PathBuf>,
        #[arg(long)]
        transpose: bool,
        #[arg(long, value_enum, default_value_t = ConventionArg::Adjusted)]
        convention: ConventionArg,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[command(flatten)]
        moments: MomentArgs,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Marčenko–Pastur law queries: support, atom mass, F^{y,H}(g)
    Mp {
        /// Aspect ratio y = lim p/n
        #[arg(long)]
        y: f64,
        /// Population spectrum H as "t:w,t:w,..." (defaults to the identity, 1:1)
        #[arg(long, default_value = "1:1")]
        atoms: String,
        /// Test function: x, x2, log or lrt
        #[arg(long, default_value = "x")]
        g: BuiltinFn,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Monte-Carlo studies: table presets or a single (p, n[, m]) cell
    Simulate {
        /// Preset: table1, table2, counterexample-a1/-a2/-a3
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Second sample size (equality cells); defaults to n
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Appendix counterexample: analytic vs empirical Var(A_n(f))
    Counterexample {
        /// Example id: a1, a2 or a3
        #[arg(long)]
        example: String,
        /// Half-dimension m (p = 2m)
        #[arg(long)]
        m_half: usize,
        #[arg(long)]
        n: usize,
        /// Rotation angle θ (θ_2m for a1)
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// θ_1m for a1
        #[arg(long, default_value_t = 0.0)]
        theta1: f64,
        /// Mixture weight τ (a1, a2)
        #[arg(long, default_value_t = 0.875)]
        tau: f64,
        #[arg(long, default_value_t = 5000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SPECTRAL_CLT_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: SPECTRAL_CLT_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn conventions(arg: ConventionArg) -> Vec<SizeConvention> {
    match arg {
        ConventionArg::Adjusted => vec![SizeConvention::Adjusted],
        ConventionArg::Raw => vec![SizeConvention::Raw],
        ConventionArg::Both => vec![SizeConvention::Adjusted, SizeConvention::Raw],
    }
}

fn check_level(level: f64) -> Result<(), String> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(format!("significance level must lie in (0,1), got {level}"))
    }
}

fn warn_if_defaulted(defaulted: bool) {
    if defaulted {
        eprintln!(
            "warning: moment parameters defaulted to the real-Gaussian case \
             (kappa=2, alpha_x=1, beta_x=0); pass --kappa/--beta-x for other populations"
        );
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::TestIdentity {
            input,
            transpose,
            convention,
            level,
            moments,
            common,
        } => {
            check_level(level)?;
            let (params, _, defaulted) = moments.resolve()?;
            warn_if_defaulted(defaulted);
            let data = io::read_csv(&input, transpose)?;
            let mut reports = Vec::new();
            for conv in conventions(convention) {
                let rep = testing::clrt_identity_test(&data, &params, conv)
                    .map_err(|e| e.to_string())?;
                reports.push(rep);
            }
            let rejected = reports[0].p_value < level;
            report::emit_test_reports(&reports, &common.output, format_of(common.format))?;
            Ok(if rejected { ExitCode::from(EXIT_REJECTED) } else { ExitCode::SUCCESS })
        }
        Command::TestEquality {
            input,
            transpose,
            convention,
            level,
            moments,
            common,
        } => {
            check_level(level)?;
            if input.len() != 2 {
                return Err(format!("test-equality needs exactly two --input files, got {}", input.len()));
            }
            let (params_x, beta_y, defaulted) = moments.resolve()?;
            warn_if_defaulted(defaulted);
            let params_y = MomentParams::new(params_x.kappa, params_x.alpha, beta_y)
                .map_err(|e| e.to_string())?;
            let x = io::read_csv(&input[0], transpose)?;
            let y = io::read_csv(&input[1], transpose)?;
            let mut reports = Vec::new();
            for conv in conventions(convention) {
                let rep = testing::clrt_equality_test(&x, &y, &params_x, &params_y, conv)
                    .map_err(|e| e.to_string())?;
                reports.push(rep);
            }
            let rejected = reports[0].p_value < level;
            report::emit_test_reports(&reports, &common.output, format_of(common.format))?;
            Ok(if rejected { ExitCode::from(EXIT_REJECTED) } else { ExitCode::SUCCESS })
        }
        Command::Mp { y, atoms, g, common } => {
            let atoms = io::parse_atoms(&atoms)?;
            let model = SpectralModel::new(y, &atoms).map_err(|e| e.to_string())?;
            let support = mp::mp_support(&model).map_err(|e| e.to_string())?;
            let value = mp::mp_linear_functional(&model, &g).map_err(|e| e.to_string())?;
            report::emit_mp(&model, &g, &support, value, &common.output, format_of(common.format))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            preset,
            p,
            n,
            m,
            reps,
            seed,
            common,
        } => {
            if reps < 2 {
                return Err("need at least 2 replications (variance undefined otherwise)".into());
            }
            match preset.as_deref() {
                Some("table1") => {
                    let cells = [(25, 50), (50, 100), (100, 200), (150, 300), (32, 40), (64, 80), (96, 120), (128, 160)];
                    let mut rows = Vec::new();
                    for (p, n) in cells {
                        let spec = PopulationSpec::standard_gaussian(p);
                        rows.push(
                            montecarlo::simulate_identity_table(p, n, reps, &spec, seed)
                                .map_err(|e| e.to_string())?,
                        );
                    }
                    report::emit_summaries(&rows, &common.output, format_of(common.format))?;
                }
                Some("table2") => {
                    let cells = [(20, 40), (50, 100), (80, 160), (20, 25), (60, 75), (100, 125)];
                    let mut rows = Vec::new();
                    for (p, n) in cells {
                        let spec = PopulationSpec::standard_gaussian(p);
                        rows.push(
                            montecarlo::simulate_equality_table(p, n, n, reps, &spec, &spec, seed)
                                .map_err(|e| e.to_string())?,
                        );
                    }
                    report::emit_summaries(&rows, &common.output, format_of(common.format))?;
                }
                Some(pre @ ("counterexample-a1" | "counterexample-a2" | "counterexample-a3")) => {
                    let example = match pre {
                        "counterexample-a1" => CounterexampleId::A1,
                        "counterexample-a2" => CounterexampleId::A2,
                        _ => CounterexampleId::A3,
                    };
                    let m_halves = [40, 50, 60, 70, 80, 90];
                    let points = montecarlo::oscillation_demo(
                        example,
                        &m_halves,
                        4,
                        0.875,
                        reps,
                        seed,
                    )
                    .map_err(|e| e.to_string())?;
                    report::emit_oscillation(example, &points, &common.output, format_of(common.format))?;
                }
                Some(other) => return Err(format!("unknown preset '{other}'")),
                None => {
                    let p = p.ok_or("either --preset or --p/--n is required")?;
                    let n = n.ok_or("either --preset or --p/--n is required")?;
                    let spec = PopulationSpec::standard_gaussian(p);
                    let row = match m {
                        Some(m) => montecarlo::simulate_equality_table(p, n, m, reps, &spec, &spec, seed)
                            .map_err(|e| e.to_string())?,
                        None => montecarlo::simulate_identity_table(p, n, reps, &spec, seed)
                            .map_err(|e| e.to_string())?,
                    };
                    report::emit_summaries(&[row], &common.output, format_of(common.format))?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Counterexample {
            example,
            m_half,
            n,
            theta,
            theta1,
            tau,
            reps,
            seed,
            common,
        } => {
            let id = match example.to_ascii_lowercase().as_str() {
                "a1" => CounterexampleId::A1,
                "a2" => CounterexampleId::A2,
                "a3" => CounterexampleId::A3,
                other => return Err(format!("unknown example '{other}' (expected a1, a2 or a3)")),
            };
            let run = montecarlo::counterexample_variance(id, m_half, n, theta, theta1, tau, reps, seed)
                .map_err(|e| e.to_string())?;
            report::emit_counterexample(&run, &common.output, format_of(common.format))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn format_of(arg: FormatArg) -> report::Format {
    match arg {
        FormatArg::Json => report::Format::Json,
        FormatArg::Csv => report::Format::Csv,
        FormatArg::Table => report::Format::Table,
    }
}
