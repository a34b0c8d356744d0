//! Command-line entry point: wires window/set specifications to the library
//! operations and emits machine-readable JSON/CSV results.
//!
//! Exit codes: 0 success, 1 failed verification (tolerance exceeded,
//! membership false, band violated), 2 invalid input or usage.

use clap::{Parser, Subcommand};
use gaborlab_core::framecheck::{
    frame_bounds_estimate, frame_bounds_estimate_periodic, family_for, gabor_sum_oracle,
    signal_norm2_sq, FrameConfig, GaborOracleCfg,
};
use gaborlab_core::lambda::{build_universal, Overrides, PeriodicSet, UniversalSet};
use gaborlab_core::numerics::{C64, QuadratureCfg};
use gaborlab_core::operator::{fd_window, vandermonde_det};
use gaborlab_core::symbols::{general_symbol_family, simple_symbol_family, trick_lhs, trick_rhs};
use gaborlab_core::windows::{class_test, eval_terms, parse_spec_json, RawPoleTerm, Window};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "gaborlab", version, about = "Numerical laboratory for Gabor frames with rational windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for randomized verifications (fixed default keeps runs reproducible)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the run manifest to this path instead of standard error
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the universal set Λ(ε, N) and emit it as JSON
    LambdaBuild {
        #[arg(long)]
        eps: f64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Test class membership of a window specification
    WindowCheck {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        t_max: f64,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Emit the symbol family of a window as JSON term tables
    SymbolsTable {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Randomized check of the determinant product formula, or replay of a
    /// dumped segment through the banded factorization
    DetVerify {
        #[arg(long = "N", default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Verify a segment dump (single object or array) instead of sweeping
        #[arg(long)]
        segment: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Randomized check of the derivative-trick identity
    TrickVerify {
        #[arg(long, default_value_t = 6)]
        kmax: u32,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Estimate frame bounds over a ξ grid; CSV per ξ plus a JSON summary
    FrameEstimate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = 64)]
        xi_steps: usize,
        #[arg(long, default_value_t = 8)]
        periods: usize,
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long)]
        summary: Option<String>,
    },
    /// Direct Gabor coefficient sum for a Gaussian bump, cross-checked
    /// against provided or computed frame-bound estimates
    FrameOracle {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        #[arg(long, default_value_t = 8.0)]
        support: f64,
        #[arg(long, default_value_t = 10.0)]
        lambda_radius: f64,
        #[arg(long, default_value_t = 6)]
        n_shift: i64,
        #[arg(long)]
        a_est: Option<f64>,
        #[arg(long)]
        b_est: Option<f64>,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Verify pole-coalescence convergence of the finite-difference window
    FdVerify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 5e-3, 2.5e-3])]
        eps1: Vec<f64>,
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    parameters: Vec<String>,
    seed: u64,
    version: &'a str,
    outputs: &'a [String],
    wall_time_ms: u128,
}

struct Ctx {
    outputs: Vec<String>,
}

impl Ctx {
    fn write(&mut self, target: &str, content: &str) -> Result<(), String> {
        if target == "-" {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            self.outputs.push("-".into());
        } else {
            fs::write(target, content).map_err(|e| format!("cannot write {target}: {e}"))?;
            self.outputs.push(target.to_string());
        }
        Ok(())
    }
}

fn read_window(path: &PathBuf) -> Result<Window, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    parse_spec_json(&text).map_err(|e| format!("invalid window spec: {e}"))
}

enum AnySet {
    Universal(UniversalSet),
    Periodic(PeriodicSet),
}

fn read_set(path: &PathBuf) -> Result<AnySet, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    if let Ok(u) = UniversalSet::from_json(&text) {
        return Ok(AnySet::Universal(u));
    }
    serde_json::from_str::<PeriodicSet>(&text)
        .map(AnySet::Periodic)
        .map_err(|e| format!("invalid set JSON: {e}"))
}

fn random_simple_window(rng: &mut ChaCha8Rng, n: usize) -> Option<gaborlab_core::SimpleWindow> {
    let spec: Vec<RawPoleTerm> = (0..n)
        .map(|i| {
            let mut re: f64 = rng.gen_range(-1.0..1.0);
            if re.abs() < 1e-3 {
                re = 0.05;
            }
            RawPoleTerm {
                a: [rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)],
                w: [re, rng.gen_range(-0.35..0.35) + i as f64 * 0.13],
                j: 1,
            }
        })
        .collect();
    match gaborlab_core::windows::validate(&spec) {
        Ok(Window::Simple(s)) => Some(s),
        _ => None,
    }
}

fn run(cli: &Cli, ctx: &mut Ctx) -> Result<i32, String> {
    match &cli.command {
        Command::LambdaBuild {
            eps,
            n,
            delta,
            eps1,
            out,
        } => {
            let overrides = if delta.is_some() || eps1.is_some() {
                Some(Overrides {
                    delta: *delta,
                    eps1: *eps1,
                })
            } else {
                None
            };
            let set = build_universal(*eps, *n, overrides).map_err(|e| e.to_string())?;
            ctx.write(out, &set.to_json())?;
            Ok(0)
        }

        Command::WindowCheck {
            spec,
            t_max,
            steps,
            out,
        } => {
            let window = read_window(spec)?;
            let report = class_test(&window, *t_max, *steps).map_err(|e| e.to_string())?;
            let text = serde_json::to_string_pretty(&report).unwrap();
            ctx.write(out, &text)?;
            Ok(if report.member { 0 } else { 1 })
        }

        Command::SymbolsTable { spec, out } => {
            let window = read_window(spec)?;
            let family = family_for(&window).map_err(|e| e.to_string())?;
            ctx.write(out, &family.to_json())?;
            Ok(0)
        }

        Command::DetVerify {
            n,
            trials,
            tol,
            segment,
            out,
        } => {
            if let Some(path) = segment {
                let text =
                    fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
                let value: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| format!("bad segment JSON: {e}"))?;
                let dumps: Vec<String> = match value {
                    serde_json::Value::Array(items) => {
                        items.iter().map(|v| v.to_string()).collect()
                    }
                    obj => vec![obj.to_string()],
                };
                let mut worst = 0.0_f64;
                for d in &dumps {
                    worst = worst.max(verify_segment_dump(d).map_err(|e| e.to_string())?);
                }
                #[derive(Serialize)]
                struct Report {
                    segments: usize,
                    max_rel_error: f64,
                    tol: f64,
                    pass: bool,
                }
                let pass = worst < *tol;
                let text = serde_json::to_string_pretty(&Report {
                    segments: dumps.len(),
                    max_rel_error: worst,
                    tol: *tol,
                    pass,
                })
                .unwrap();
                ctx.write(out, &text)?;
                return Ok(if pass { 0 } else { 1 });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut worst = 0.0_f64;
            let mut done = 0usize;
            let mut attempts = 0usize;
            while done < *trials && attempts < trials * 50 {
                attempts += 1;
                let Some(win) = random_simple_window(&mut rng, *n) else {
                    continue;
                };
                let alpha = *n as f64 + rng.gen_range(0.3..2.5);
                let lo = (*n as f64 - 1.0) / alpha;
                let xi = rng.gen_range((lo + 0.02).min(0.95)..1.0);
                match vandermonde_det(&win, xi, alpha) {
                    Ok((formula, direct)) => {
                        worst = worst.max((direct.norm() - formula).abs() / formula.max(1e-300));
                        done += 1;
                    }
                    Err(_) => continue,
                }
            }
            #[derive(Serialize)]
            struct Report {
                n: usize,
                trials: usize,
                max_rel_error: f64,
                tol: f64,
                pass: bool,
            }
            let pass = done == *trials && worst < *tol;
            let text = serde_json::to_string_pretty(&Report {
                n: *n,
                trials: done,
                max_rel_error: worst,
                tol: *tol,
                pass,
            })
            .unwrap();
            ctx.write(out, &text)?;
            Ok(if pass { 0 } else { 1 })
        }

        Command::TrickVerify {
            kmax,
            trials,
            tol,
            out,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut worst = 0.0_f64;
            for k in 1..=*kmax {
                for _ in 0..*trials {
                    let support: Vec<(i64, C64)> = (0..8)
                        .map(|i| {
                            (
                                i as i64 - 4,
                                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                            )
                        })
                        .collect();
                    let z = C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.2..2.0));
                    let lhs = trick_lhs(k, &support, z).map_err(|e| e.to_string())?;
                    let rhs = trick_rhs(k, &support, z).map_err(|e| e.to_string())?;
                    let denom = lhs.norm().max(rhs.norm()).max(1e-12);
                    worst = worst.max((lhs - rhs).norm() / denom);
                }
            }
            #[derive(Serialize)]
            struct Report {
                kmax: u32,
                trials_per_k: usize,
                max_rel_error: f64,
                tol: f64,
                pass: bool,
            }
            let pass = worst < *tol;
            let text = serde_json::to_string_pretty(&Report {
                kmax: *kmax,
                trials_per_k: *trials,
                max_rel_error: worst,
                tol: *tol,
                pass,
            })
            .unwrap();
            ctx.write(out, &text)?;
            Ok(if pass { 0 } else { 1 })
        }

        Command::FrameEstimate {
            spec,
            set,
            xi_steps,
            periods,
            eta,
            out,
            summary,
        } => {
            let window = read_window(spec)?;
            let cfg = FrameConfig {
                xi_steps: *xi_steps,
                periods: *periods,
                eta: *eta,
                ..FrameConfig::default()
            };
            let est = match read_set(set)? {
                AnySet::Universal(u) => {
                    frame_bounds_estimate(&window, &u, cfg).map_err(|e| e.to_string())?
                }
                AnySet::Periodic(p) => {
                    frame_bounds_estimate_periodic(&window, &p, cfg).map_err(|e| e.to_string())?
                }
            };
            ctx.write(out, &est.to_csv())?;
            if let Some(s) = summary {
                ctx.write(s, &est.summary_json())?;
            }
            Ok(0)
        }

        Command::FrameOracle {
            spec,
            set,
            width,
            support,
            lambda_radius,
            n_shift,
            a_est,
            b_est,
            out,
        } => {
            let window = read_window(spec)?;
            let periodic = match read_set(set)? {
                AnySet::Universal(u) => u.as_periodic(),
                AnySet::Periodic(p) => p,
            };
            let w = *width;
            let bump = move |t: f64| C64::new((-std::f64::consts::PI * (t / w) * (t / w)).exp(), 0.0);
            let cfg = GaborOracleCfg {
                lambda_radius: *lambda_radius,
                n_shift: *n_shift,
                quad: QuadratureCfg {
                    rel_tol: 1e-7,
                    max_nodes: 1 << 18,
                    ..QuadratureCfg::default()
                },
            };
            let sup = (-support.abs(), support.abs());
            let total = gabor_sum_oracle(&bump, sup, &window, &periodic, &cfg);
            let norm = signal_norm2_sq(&bump, sup, cfg.quad);
            let ratio = total / norm;
            let band = match (a_est, b_est) {
                (Some(a), Some(b)) => Some((0.5 * a, 2.0 * b)),
                _ => None,
            };
            let pass = band.map(|(lo, hi)| ratio >= lo && ratio <= hi);
            #[derive(Serialize)]
            struct Report {
                sum: f64,
                norm_sq: f64,
                ratio: f64,
                band: Option<(f64, f64)>,
                pass: Option<bool>,
            }
            let text = serde_json::to_string_pretty(&Report {
                sum: total,
                norm_sq: norm,
                ratio,
                band,
                pass,
            })
            .unwrap();
            ctx.write(out, &text)?;
            Ok(if pass == Some(false) { 1 } else { 0 })
        }

        Command::FdVerify { spec, eps1, out } => {
            let window = read_window(spec)?.as_general();
            if eps1.len() < 2 {
                return Err("need at least two eps1 values".into());
            }
            let sup_err = |eps: f64| -> Result<f64, String> {
                let fd = fd_window(&window, eps).map_err(|e| e.to_string())?;
                Ok((0..=2000)
                    .map(|i| -5.0 + 10.0 * i as f64 / 2000.0)
                    .map(|t| (eval_terms(fd.terms(), t) - eval_terms(window.terms(), t)).norm())
                    .fold(0.0, f64::max))
            };
            let errs: Result<Vec<f64>, String> = eps1.iter().map(|&e| sup_err(e)).collect();
            let errs = errs?;
            let exact = errs.iter().all(|&e| e < 1e-13);
            let ratios: Vec<f64> = errs.windows(2).map(|p| p[0] / p[1]).collect();

            let general = general_symbol_family(&window).map_err(|e| e.to_string())?;
            let fam_err = |eps: f64| -> Result<f64, String> {
                let fd = fd_window(&window, eps).map_err(|e| e.to_string())?;
                let fam = simple_symbol_family(&fd).map_err(|e| e.to_string())?;
                let mut worst = 0.0_f64;
                for s in 0..general.degree() {
                    for i in 1..20 {
                        let t = i as f64 / 20.0;
                        worst = worst.max((fam.eval(s, t) - general.eval(s, t)).norm());
                    }
                }
                Ok(worst)
            };
            let fam_errs: Result<Vec<f64>, String> = eps1.iter().map(|&e| fam_err(e)).collect();
            let fam_errs = fam_errs?;
            let orders: Vec<f64> = fam_errs.windows(2).map(|p| (p[0] / p[1]).log2()).collect();

            let pass = exact
                || (ratios.iter().all(|r| (1.7..=2.3).contains(r))
                    && orders.iter().all(|o| *o >= 0.8));
            #[derive(Serialize)]
            struct Report {
                eps1: Vec<f64>,
                sup_errors: Vec<f64>,
                sup_ratios: Vec<f64>,
                family_errors: Vec<f64>,
                family_orders: Vec<f64>,
                exact_match: bool,
                pass: bool,
            }
            let text = serde_json::to_string_pretty(&Report {
                eps1: eps1.clone(),
                sup_errors: errs,
                sup_ratios: ratios,
                family_errors: fam_errs,
                family_orders: orders,
                exact_match: exact,
                pass,
            })
            .unwrap();
            ctx.write(out, &text)?;
            Ok(if pass { 0 } else { 1 })
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::LambdaBuild { .. } => "lambda-build",
        Command::WindowCheck { .. } => "window-check",
        Command::SymbolsTable { .. } => "symbols-table",
        Command::DetVerify { .. } => "det-verify",
        Command::TrickVerify { .. } => "trick-verify",
        Command::FrameEstimate { .. } => "frame-estimate",
        Command::FrameOracle { .. } => "frame-oracle",
        Command::FdVerify { .. } => "fd-verify",
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = Cli::parse();
    let mut ctx = Ctx { outputs: Vec::new() };
    let result = run(&cli, &mut ctx);
    let manifest = RunManifest {
        command: command_name(&cli.command),
        parameters: std::env::args().skip(1).collect(),
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION"),
        outputs: &ctx.outputs,
        wall_time_ms: start.elapsed().as_millis(),
    };
    let manifest_text = serde_json::to_string(&manifest).unwrap();
    match &cli.manifest {
        Some(path) => {
            if fs::write(path, &manifest_text).is_err() {
                eprintln!("{manifest_text}");
            }
        }
        None => eprintln!("{manifest_text}"),
    }
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            let _ = writeln!(std::io::stderr(), "error: {msg}");
            ExitCode::from(2)
        }
    }
}
