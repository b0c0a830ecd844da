use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use pruw::audit::{audit_privacy, AuditOptions};
use pruw::hetero::{plan_single_code, Branch, ConstraintSet, HeteroOptions};
use pruw::homo::{curve_hull, plan_homo, sample_curve, CurveKind};
use pruw::ratio::{describe, parse_rational, to_f64, to_fraction_string, Rational};
use pruw::sim::{init_system, measure_vs_theory, minimal_l_u64, Scenario, Transcript};
use pruw::{plan_hetero_with, Error, StoragePlan};

const EXIT_INPUT: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_PRIVACY: u8 = 4;

#[derive(Parser)]
#[command(name = "pruw", version, about = "Storage planning and private read-update-write simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan storage for unequal per-database constraints.
    PlanHetero {
        /// Constraints as decimals or fractions; `0.37x5` repeats a value.
        #[arg(long, num_args = 1.., required_unless_present = "mu_file")]
        mu: Vec<String>,
        /// File of whitespace- or comma-separated constraints.
        #[arg(long, conflicts_with = "mu")]
        mu_file: Option<PathBuf>,
        /// Truncate k to one decimal before planning.
        #[arg(long)]
        paper_rounded: bool,
        /// Store everything with a single code of this replication instead.
        #[arg(long)]
        force_r: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan storage when every database has the same constraint.
    PlanHomo {
        #[arg(long)]
        n: usize,
        #[arg(long, required_unless_present = "curve")]
        mu: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write hybrid, divided-only and coded-only cost curves as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Interior samples between consecutive curve vertices.
        #[arg(long, default_value_t = 4)]
        steps: usize,
    },
    /// Run read/write rounds over a plan and compare costs with the closed forms.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Parameters per submodel, or `auto` for the smallest valid value.
        #[arg(long, default_value = "auto")]
        l: String,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for binary message frames and the round log.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Log the plain submodel index in the transcript.
        #[arg(long, requires = "transcript")]
        debug_theta: bool,
    },
    /// Exhaustive privacy and security audit over a small field.
    Audit {
        #[arg(long, default_value_t = 251)]
        q: u64,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop all noise, as a broken client would.
        #[arg(long)]
        omit_noise: bool,
    },
}

enum Failure {
    Input(String),
    Invariant(String),
    Privacy(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) | Error::SingularSystem | Error::DimensionMismatch(_) | Error::DivisionByZero(_) => {
                Failure::Invariant(e.to_string())
            }
            other => Failure::Input(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::PlanHetero { mu, mu_file, paper_rounded, force_r, out } => {
            cmd_plan_hetero(&mu, mu_file.as_deref(), paper_rounded, force_r, out.as_deref())
        }
        Command::PlanHomo { n, mu, out, curve, steps } => {
            cmd_plan_homo(n, mu.as_deref(), out.as_deref(), curve.as_deref(), steps)
        }
        Command::Simulate { plan, m, l, rounds, seed, transcript, debug_theta } => {
            cmd_simulate(&plan, m, &l, rounds, seed, transcript.as_deref(), debug_theta)
        }
        Command::Audit { q, m, seed, omit_noise } => cmd_audit(q, m, seed, omit_noise),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(Failure::Privacy(msg)) => {
            eprintln!("privacy audit failed: {msg}");
            ExitCode::from(EXIT_PRIVACY)
        }
    }
}

/// Expands `0.37x5` (or `0.37×5`, `0.37*5`) into five copies.
fn expand_mu(tokens: &[String]) -> Result<Vec<Rational>, Failure> {
    let mut out = Vec::new();
    for token in tokens.iter().flat_map(|t| t.split([',', ' ', '\t', '\n'])) {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let (value, count) = match token.split_once(['x', '×', '*']) {
            Some((v, c)) => {
                let c: usize =
                    c.trim().parse().map_err(|_| Failure::Input(format!("bad repeat count in {token:?}")))?;
                (v, c)
            }
            None => (token, 1),
        };
        let v = parse_rational(value)?;
        out.extend(std::iter::repeat_n(v, count));
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn cmd_plan_hetero(
    mu: &[String],
    mu_file: Option<&Path>,
    paper_rounded: bool,
    force_r: Option<usize>,
    out: Option<&Path>,
) -> CmdResult {
    let tokens = match mu_file {
        Some(path) => {
            vec![fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?]
        }
        None => mu.to_vec(),
    };
    let cs = ConstraintSet::new(expand_mu(&tokens)?)?;
    let plan = match force_r {
        Some(r) => {
            let plan = plan_single_code(&cs, r)?;
            let seg = &plan.segments[0];
            println!("single code {}", seg.code);
            plan
        }
        None => {
            let hp = plan_hetero_with(&cs, &HeteroOptions { paper_rounded })?;
            let d = &hp.params;
            println!("N = {}", cs.n());
            println!("k = {}", describe(&d.k));
            println!("p = {}", describe(&d.p));
            println!("r = {}", describe(&d.r));
            println!("s = {}", describe(&d.s));
            match &hp.c1 {
                Ok(c) => println!("C1 = {}", describe(c)),
                Err(e) => println!("C1 unavailable: {e}"),
            }
            match &hp.c2 {
                Ok(c) => println!("C2 = {}", describe(c)),
                Err(e) => println!("C2 unavailable: {e}"),
            }
            println!("branch = {}", if hp.branch == Branch::C1 { "C1" } else { "C2" });
            if let Some(mix) = &hp.mixture {
                println!("alpha = {}", describe(&mix.alpha));
                println!("beta = {}", describe(&mix.beta));
                println!("delta = {}", describe(&mix.delta));
            }
            let g = &hp.table.gammas;
            for (name, v) in [
                ("gamma_tilde", &g.gamma_tilde),
                ("gamma", &g.gamma),
                ("gamma_hat", &g.gamma_hat),
                ("gamma_bar", &g.gamma_bar),
            ] {
                if let Some(v) = v {
                    println!("{name} = {}", describe(v));
                }
            }
            hp.plan
        }
    };
    for seg in &plan.segments {
        println!("segment {} fraction {} in {} parts", seg.code, describe(&seg.fraction), seg.partition.parts.len());
    }
    println!("predicted cost = {}", describe(&plan.predicted_cost));
    if let Some(path) = out {
        write_file(path, &plan.to_json())?;
        println!("plan written to {}", path.display());
    }
    Ok(())
}

fn cmd_plan_homo(n: usize, mu: Option<&str>, out: Option<&Path>, curve: Option<&Path>, steps: usize) -> CmdResult {
    if n < 4 {
        return Err(Failure::Input(format!("need at least 4 databases, got {n}")));
    }
    if let Some(mu) = mu {
        let mu = parse_rational(mu)?;
        let hp = plan_homo(n, &mu)?;
        println!("N = {n}");
        println!("mu = {}", describe(&mu));
        println!("lower code (K={}, R={}) mu {} cost {}", hp.lo.k, hp.lo.r, describe(&hp.lo.mu), describe(&hp.lo.cost));
        if hp.lo != hp.hi {
            println!(
                "upper code (K={}, R={}) mu {} cost {}",
                hp.hi.k,
                hp.hi.r,
                describe(&hp.hi.mu),
                describe(&hp.hi.cost)
            );
        } else {
            println!("single code");
        }
        println!("gamma = {}", describe(&hp.gamma));
        println!("predicted cost = {}", describe(&hp.cost));
        if let Some(path) = out {
            write_file(path, &hp.plan.to_json())?;
            println!("plan written to {}", path.display());
        }
    }
    if let Some(path) = curve {
        write_curve(n, steps, path)?;
        let hull = curve_hull(n, CurveKind::Hybrid);
        let vertices: Vec<String> = hull.iter().map(|v| format!("({},{})", v.r, v.k)).collect();
        println!("hull vertices (R,K): {}", vertices.join(" "));
        println!("curve written to {}", path.display());
    }
    Ok(())
}

fn write_curve(n: usize, steps: usize, path: &Path) -> CmdResult {
    let io = |e: csv::Error| Failure::Input(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["curve", "mu", "cost", "R_lo", "K_lo", "R_hi", "K_hi", "gamma", "mu_decimal", "cost_decimal"])
        .map_err(io)?;
    for kind in CurveKind::ALL {
        for p in sample_curve(n, kind, steps) {
            w.write_record([
                kind.name().to_string(),
                to_fraction_string(&p.mu),
                to_fraction_string(&p.cost),
                p.lo.0.to_string(),
                p.lo.1.to_string(),
                p.hi.0.to_string(),
                p.hi.1.to_string(),
                to_fraction_string(&p.gamma),
                format!("{:.4}", to_f64(&p.mu)),
                format!("{:.4}", to_f64(&p.cost)),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn cmd_simulate(
    plan_path: &Path,
    m: usize,
    l: &str,
    rounds: usize,
    seed: u64,
    transcript: Option<&Path>,
    debug_theta: bool,
) -> CmdResult {
    let text = fs::read_to_string(plan_path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", plan_path.display())))?;
    let plan = StoragePlan::from_json(&text)?;
    let l = if l == "auto" {
        minimal_l_u64(&plan)?
    } else {
        l.parse().map_err(|_| Failure::Input(format!("L must be a positive integer or auto, got {l:?}")))?
    };
    let mut sys = init_system(&plan, m, l, seed)?;
    let occupancy_exact = sys.occupancy_exact();
    if let Some(dir) = transcript {
        sys.attach_transcript(Transcript::create(dir, seed, debug_theta)?);
    }
    let cmp = measure_vs_theory(&mut sys, rounds, &mut Scenario::new(seed))?;
    let final_check = sys.check_all()?;
    if let Some(t) = sys.take_transcript() {
        t.finish()?;
    }
    let passed = occupancy_exact && final_check && cmp.all_equal();
    let summary = json!({
        "plan_kind": plan.to_file().plan_kind,
        "N": plan.n(),
        "M": m,
        "L": l,
        "rounds": rounds,
        "seed": seed,
        "occupancy": sys.occupancy(),
        "occupancy_exact": occupancy_exact,
        "read_mismatches": cmp.read_mismatches,
        "final_check": final_check,
        "segments": cmp.segments,
        "blended": cmp.blended,
        "predicted_cost": to_fraction_string(&plan.predicted_cost),
        "passed": passed,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    if !passed {
        return Err(Failure::Invariant("measured behaviour differs from the plan".into()));
    }
    Ok(())
}

fn cmd_audit(q: u64, m: usize, seed: u64, omit_noise: bool) -> CmdResult {
    let report = audit_privacy(&AuditOptions { q, m, omit_noise, seed })?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if !report.passed {
        return Err(Failure::Privacy(format!(
            "max total variation {}, controls detected: {}",
            report.max_tv, report.controls_detected
        )));
    }
    Ok(())
}
