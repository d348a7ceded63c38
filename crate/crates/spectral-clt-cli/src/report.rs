//! Machine-readable report emission (JSON / CSV / aligned table).

use std::io::Write;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use spectral_clt::funcs::SpectralFn;
use spectral_clt::montecarlo::{CounterexampleId, CounterexampleRun, OscillationPoint, SimulationSummary};
use spectral_clt::mp::{SpectralModel, SupportInterval};
use spectral_clt::testing::TestReport;

#[derive(Clone, Copy, Debug)]
pub enum Format {
    Json,
    Csv,
    Table,
}

fn write_out(output: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match output {
        Some(path) => std::fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| format!("stdout: {e}"))
        }
    }
}

fn kappa_num(report: &TestReport) -> u8 {
    match report.kappa {
        spectral_clt::clt::Kappa::Complex => 1,
        spectral_clt::clt::Kappa::Real => 2,
    }
}

fn test_report_object(r: &TestReport) -> Value {
    let mut map = Map::new();
    map.insert("statistic".into(), json!(r.statistic));
    map.insert("centering".into(), json!(r.centering));
    map.insert("mean_correction".into(), json!(r.mean_correction));
    map.insert("variance".into(), json!(r.variance));
    map.insert("z_score".into(), json!(r.z_score));
    map.insert("p_value".into(), json!(r.p_value));
    map.insert("convention".into(), json!(r.convention.label()));
    map.insert("p".into(), json!(r.p));
    map.insert("n".into(), json!(r.n));
    if let Some(m) = r.m {
        map.insert("m".into(), json!(m));
    }
    map.insert("kappa".into(), json!(kappa_num(r)));
    map.insert("beta_x".into(), json!(r.beta_x));
    if let Some(by) = r.beta_y {
        map.insert("beta_y".into(), json!(by));
    }
    Value::Object(map)
}

const TEST_FIELDS: [&str; 6] = [
    "statistic",
    "centering",
    "mean_correction",
    "variance",
    "z_score",
    "p_value",
];

fn test_field(r: &TestReport, name: &str) -> f64 {
    match name {
        "statistic" => r.statistic,
        "centering" => r.centering,
        "mean_correction" => r.mean_correction,
        "variance" => r.variance,
        "z_score" => r.z_score,
        "p_value" => r.p_value,
        _ => unreachable!(),
    }
}

pub fn emit_test_reports(
    reports: &[TestReport],
    output: &Option<PathBuf>,
    format: Format,
) -> Result<(), String> {
    let content = match format {
        Format::Json => {
            let value = if reports.len() == 1 {
                test_report_object(&reports[0])
            } else {
                let mut map = Map::new();
                for r in reports {
                    map.insert(r.convention.label().into(), test_report_object(r));
                }
                Value::Object(map)
            };
            format!("{value}\n")
        }
        Format::Csv => {
            let mut s = String::from("convention,statistic,centering,mean_correction,variance,z_score,p_value\n");
            for r in reports {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.convention.label(),
                    r.statistic,
                    r.centering,
                    r.mean_correction,
                    r.variance,
                    r.z_score,
                    r.p_value
                ));
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for r in reports {
                s.push_str(&format!("convention: {}\n", r.convention.label()));
                for name in TEST_FIELDS {
                    s.push_str(&format!("  {name:<16} {:>14.6}\n", test_field(r, name)));
                }
            }
            s
        }
    };
    write_out(output, &content)
}

pub fn emit_mp(
    model: &SpectralModel,
    g: &dyn SpectralFn,
    support: &SupportInterval,
    value: f64,
    output: &Option<PathBuf>,
    format: Format,
) -> Result<(), String> {
    let content = match format {
        Format::Json => {
            let v = json!({
                "y": model.y(),
                "atoms": model.atoms().iter().map(|&(t, w)| json!([t, w])).collect::<Vec<_>>(),
                "g": g.label(),
                "support": [support.lower, support.upper],
                "atom_at_zero": support.atom_at_zero,
                "functional": value,
            });
            format!("{v}\n")
        }
        Format::Csv => format!(
            "y,g,support_lower,support_upper,atom_at_zero,functional\n{},{},{},{},{},{}\n",
            model.y(),
            g.label(),
            support.lower,
            support.upper,
            support.atom_at_zero,
            value
        ),
        Format::Table => format!(
            "y            {:>14.6}\ng            {:>14}\nsupport      [{:.6}, {:.6}]\natom_at_zero {:>14.6}\nF^(y,H)(g)   {:>14.6}\n",
            model.y(),
            g.label(),
            support.lower,
            support.upper,
            support.atom_at_zero,
            value
        ),
    };
    write_out(output, &content)
}

fn summary_object(s: &SimulationSummary) -> Value {
    json!({
        "p": s.p,
        "n": s.n,
        "m": s.m,
        "replications": s.replications,
        "seed": s.seed,
        "empirical_mean": s.empirical_mean,
        "empirical_variance": s.empirical_variance,
        "adjusted_mean": s.adjusted.0,
        "adjusted_variance": s.adjusted.1,
        "raw_mean": s.raw.0,
        "raw_variance": s.raw.1,
    })
}

pub fn emit_summaries(
    rows: &[SimulationSummary],
    output: &Option<PathBuf>,
    format: Format,
) -> Result<(), String> {
    let content = match format {
        Format::Json => {
            let v = Value::Array(rows.iter().map(summary_object).collect());
            format!("{v}\n")
        }
        Format::Csv => {
            let mut s = String::from(
                "p,n,m,replications,seed,empirical_mean,empirical_variance,adjusted_mean,adjusted_variance,raw_mean,raw_variance\n",
            );
            for r in rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.p,
                    r.n,
                    r.m.map_or(String::new(), |m| m.to_string()),
                    r.replications,
                    r.seed,
                    r.empirical_mean,
                    r.empirical_variance,
                    r.adjusted.0,
                    r.adjusted.1,
                    r.raw.0,
                    r.raw.1
                ));
            }
            s
        }
        Format::Table => {
            let mut s = String::from(
                "    p     n     m   empirical(mean,var)      adjusted(mean,var)       raw(mean,var)\n",
            );
            for r in rows {
                s.push_str(&format!(
                    "{:>5} {:>5} {:>5}   ({:>9.3}, {:>7.3})   ({:>9.3}, {:>7.3})   ({:>9.3}, {:>7.3})\n",
                    r.p,
                    r.n,
                    r.m.map_or("-".to_string(), |m| m.to_string()),
                    r.empirical_mean,
                    r.empirical_variance,
                    r.adjusted.0,
                    r.adjusted.1,
                    r.raw.0,
                    r.raw.1
                ));
            }
            s
        }
    };
    write_out(output, &content)
}

pub fn emit_counterexample(
    run: &CounterexampleRun,
    output: &Option<PathBuf>,
    format: Format,
) -> Result<(), String> {
    let content = match format {
        Format::Json => {
            let v = json!({
                "example": run.example.label(),
                "m_half": run.m_half,
                "n": run.n,
                "theta": run.theta,
                "theta1": run.theta1,
                "tau": run.tau,
                "replications": run.replications,
                "seed": run.seed,
                "analytic": run.analytic,
                "analytic_exact": run.analytic_exact,
                "empirical": run.empirical,
            });
            format!("{v}\n")
        }
        Format::Csv => format!(
            "example,m_half,n,theta,theta1,tau,replications,seed,analytic,analytic_exact,empirical\n{},{},{},{},{},{},{},{},{},{},{}\n",
            run.example.label(),
            run.m_half,
            run.n,
            run.theta,
            run.theta1,
            run.tau,
            run.replications,
            run.seed,
            run.analytic,
            run.analytic_exact,
            run.empirical
        ),
        Format::Table => format!(
            "example        {:>12}\nm_half         {:>12}\nn              {:>12}\ntheta          {:>12.6}\nanalytic       {:>12.6}\nanalytic_exact {:>12.6}\nempirical      {:>12.6}\n",
            run.example.label(),
            run.m_half,
            run.n,
            run.theta,
            run.analytic,
            run.analytic_exact,
            run.empirical
        ),
    };
    write_out(output, &content)
}

pub fn emit_oscillation(
    example: CounterexampleId,
    points: &[OscillationPoint],
    output: &Option<PathBuf>,
    format: Format,
) -> Result<(), String> {
    let content = match format {
        Format::Json => {
            let v = json!({
                "example": example.label(),
                "points": points.iter().map(|p| json!({
                    "m_half": p.m_half,
                    "n": p.n,
                    "theta": p.theta,
                    "analytic": p.analytic,
                    "analytic_exact": p.analytic_exact,
                    "empirical": p.empirical,
                })).collect::<Vec<_>>(),
            });
            format!("{v}\n")
        }
        Format::Csv => {
            let mut s = String::from("example,m_half,n,theta,analytic,analytic_exact,empirical\n");
            for p in points {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    example.label(),
                    p.m_half,
                    p.n,
                    p.theta,
                    p.analytic,
                    p.analytic_exact,
                    p.empirical.map_or(String::new(), |e| e.to_string())
                ));
            }
            s
        }
        Format::Table => {
            let mut s = String::from("m_half      n   theta      analytic  analytic_exact  empirical\n");
            for p in points {
                s.push_str(&format!(
                    "{:>6} {:>6}  {:>6.4}  {:>10.4}  {:>14.4}  {}\n",
                    p.m_half,
                    p.n,
                    p.theta,
                    p.analytic,
                    p.analytic_exact,
                    p.empirical.map_or("-".to_string(), |e| format!("{e:.4}"))
                ));
            }
            s
        }
    };
    write_out(output, &content)
}
