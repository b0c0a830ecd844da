//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pruw::audit::{audit_privacy, AuditOptions};
use pruw::code::admissible_codes;
use pruw::hetero::{plan_hetero, plan_hetero_with, plan_single_code, Branch, ConstraintSet, HeteroOptions};
use pruw::homo::{curve_hull, even_gap_sweep, plan_homo, CurveKind};
use pruw::ratio::{frac, in_unit_interval, int, to_f64, Rational};
use pruw::sim::{init_system, measure_vs_theory, minimal_l, Scenario};
use pruw::{Error, StoragePlan};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(v: &Rational, want: f64, tol: f64) -> bool {
    (to_f64(v) - want).abs() <= tol
}

fn e(err: Error) -> String {
    err.to_string()
}

fn worked_golden() -> Check {
    let mut mu = vec![frac(37, 100); 5];
    mu.extend(vec![frac(35, 100); 7]);
    let cs = ConstraintSet::new(mu).map_err(e)?;
    let hp = plan_hetero_with(&cs, &HeteroOptions { paper_rounded: true }).map_err(e)?;
    let c1 = hp.c1.clone().map_err(e)?;
    let c2 = hp.c2.clone().map_err(e)?;
    ensure(c1 == frac(33, 5), format!("C1 = {c1}"))?;
    ensure(to_f64(&c2) >= 5.985 && to_f64(&c2) <= 5.995, format!("C2 = {c2}"))?;
    ensure(hp.branch == Branch::C2, "branch is not C2")?;
    let mix = hp.mixture.as_ref().ok_or("no mixture")?;
    ensure(mix.alpha == frac(2, 9), format!("alpha = {}", mix.alpha))?;
    ensure(mix.beta == int(1), format!("beta = {}", mix.beta))?;
    ensure(mix.delta == frac(9, 70), format!("delta = {}", mix.delta))?;
    let t = &hp.table;
    let tol = 5e-4;
    for n in 0..12 {
        let (h1, b1) = if n < 5 { (0.1107, 0.033) } else { (0.0951, 0.029) };
        ensure(close(&t.mu_hat1[n], h1, tol), format!("mu_hat1({}) = {:.5}", n + 1, to_f64(&t.mu_hat1[n])))?;
        ensure(t.mu_hat2[n].is_zero(), format!("mu_hat2({}) nonzero", n + 1))?;
        ensure(close(&t.mu_bar1[n], b1, tol), format!("mu_bar1({}) = {:.5}", n + 1, to_f64(&t.mu_bar1[n])))?;
        ensure(close(&t.mu_bar2[n], 0.226, tol), format!("mu_bar2({}) = {:.5}", n + 1, to_f64(&t.mu_bar2[n])))?;
    }
    // part weights are relative to the (2,11) segment, whose fraction is α β
    let seg = hp.plan.segments.iter().find(|s| (s.code.k, s.code.r) == (2, 11)).ok_or("no (2,11) segment")?;
    let mut checked = 0;
    for part in &seg.partition.parts {
        let missing: Vec<usize> = (0..12).filter(|d| !part.subset.contains(d)).collect();
        if missing.len() == 1 && missing[0] >= 5 {
            let eta = &mix.alpha * &mix.beta * &part.eta;
            ensure(close(&eta, 0.0315, tol), format!("eta~{} = {:.5}", missing[0] + 1, to_f64(&eta)))?;
            checked += 1;
        }
    }
    ensure(checked == 7, format!("found {checked} of 7 parts for databases 6..12"))?;
    Ok(format!("C1 = 33/5, C2 = {c2} ({:.4}), alpha 2/9, beta 1, delta 9/70", to_f64(&c2)))
}

fn homogeneous_golden() -> Check {
    let hp = plan_homo(8, &frac(7, 10)).map_err(e)?;
    ensure(hp.gamma == frac(4, 25), format!("gamma = {}", hp.gamma))?;
    ensure((hp.lo.r, hp.lo.k, hp.hi.r, hp.hi.k) == (7, 2, 6, 1), "bracketing codes differ from (7,2), (6,1)")?;
    ensure(hp.lo.cost == int(7) && hp.hi.cost == int(6), "component costs differ from 7 and 6")?;
    ensure(hp.cost == frac(154, 25), format!("cost = {}", hp.cost))?;
    let l = minimal_l(&hp.plan).to_u64().ok_or("L overflow")?;
    let mut sys = init_system(&hp.plan, 2, l, 11).map_err(e)?;
    let cmp = measure_vs_theory(&mut sys, 10, &mut Scenario::new(11)).map_err(e)?;
    ensure(
        cmp.all_equal(),
        format!("measured {} vs predicted {}", cmp.blended.measured_total, cmp.blended.predicted_total),
    )?;
    ensure(cmp.blended.measured_total == "154/25", format!("measured C_T = {}", cmp.blended.measured_total))?;
    Ok(format!("gamma 4/25, cost 154/25, measured C_T 154/25 at L = {l} over 10 rounds"))
}

fn hull_membership() -> Check {
    let hull = curve_hull(10, CurveKind::Hybrid);
    for v in &hull {
        ensure((8..=10).contains(&v.r), format!("hull vertex (R={}, K={})", v.r, v.k))?;
        ensure((v.r - v.k) % 2 == 1, format!("even gap on hull (R={}, K={})", v.r, v.k))?;
    }
    let mut dominated = 0;
    for n in 4..=30 {
        for rep in even_gap_sweep(n).map_err(e)? {
            ensure(
                rep.hull_cost < rep.even_cost,
                format!("N = {n}: {} at cost {} is not above the hull ({})", rep.code, rep.even_cost, rep.hull_cost),
            )?;
            dominated += 1;
        }
    }
    Ok(format!("{} hull vertices for N = 10; {dominated} even-gap codes above the hull for N <= 30", hull.len()))
}

/// `R` databases at `μ = 1/K` hold the whole model with one `(K, R)` code.
fn single_code_plan(k: usize, r: usize) -> Result<StoragePlan, String> {
    let cs = ConstraintSet::new(vec![frac(1, k as i64); r]).map_err(e)?;
    plan_single_code(&cs, r).map_err(e)
}

fn cost_identities() -> Check {
    let codes = admissible_codes(9);
    for code in &codes {
        let plan = single_code_plan(code.k, code.r)?;
        let l = minimal_l(&plan).to_u64().ok_or("L overflow")?;
        let mut sys = init_system(&plan, 3, l, code.r as u64 * 31 + code.k as u64).map_err(e)?;
        let cmp = measure_vs_theory(&mut sys, 20, &mut Scenario::new(code.k as u64)).map_err(e)?;
        let row = &cmp.segments[0];
        let (cr, cw, ct) = code.costs();
        ensure(
            cmp.all_equal()
                && row.measured_read == pruw::ratio::to_fraction_string(&cr)
                && row.measured_write == pruw::ratio::to_fraction_string(&cw)
                && row.measured_total == pruw::ratio::to_fraction_string(&ct),
            format!(
                "{code}: measured ({}, {}, {}) vs ({cr}, {cw}, {ct})",
                row.measured_read, row.measured_write, row.measured_total
            ),
        )?;
    }
    Ok(format!("{} codes with 4 <= R <= 9, 20 rounds each, all exact", codes.len()))
}

fn correctness_suite() -> Check {
    let codes = [(1, 4), (2, 5), (1, 5), (2, 7), (3, 8), (4, 9)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut trials = 0;
    let mut mismatches = 0;
    for (i, &(k, r)) in codes.iter().enumerate() {
        let plan = single_code_plan(k, r)?;
        let unit = minimal_l(&plan).to_u64().ok_or("L overflow")?;
        let m = 2 + i % 3;
        let mut sys = init_system(&plan, m, unit * 2, i as u64).map_err(e)?;
        let field = *sys.field();
        for _ in 0..34 {
            let theta = rng.random_range(0..m);
            let delta: Vec<_> = (0..sys.params()).map(|_| field.random(&mut rng)).collect();
            let (read_ok, _) = sys.run_round(theta, &delta).map_err(e)?;
            let (after, _) = sys.run_read(theta).map_err(e)?;
            if !read_ok || after != sys.oracle(theta) {
                mismatches += 1;
            }
            trials += 1;
        }
        if !sys.check_all().map_err(e)? {
            mismatches += 1;
        }
    }
    ensure(trials >= 200, format!("only {trials} roundtrips"))?;
    ensure(mismatches == 0, format!("{mismatches} mismatches"))?;
    Ok(format!("{trials} read-after-write roundtrips over {} codes, 0 mismatches", codes.len()))
}

fn privacy_audit() -> Check {
    let report = audit_privacy(&AuditOptions::default()).map_err(e)?;
    ensure(report.max_tv == "0", format!("max TV {}", report.max_tv))?;
    ensure(report.controls_detected, "noise-free controls were not detected")?;
    ensure(report.passed, "audit did not pass")?;
    Ok(format!(
        "{} query/update/storage checks at q = 251, M = 2 with TV 0; noise-free controls leak",
        report.checks.len()
    ))
}

fn allocation_corpus() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut planned = 0;
    let mut rejected = 0;
    let mut sampled: Vec<StoragePlan> = Vec::new();
    let small = BigInt::from(20_000);
    while planned < 1000 {
        let n = rng.random_range(4..=20);
        let mu: Vec<Rational> = (0..n).map(|_| frac(rng.random_range(1..=100), 100)).collect();
        let cs = ConstraintSet::new(mu).map_err(e)?;
        if cs.is_homogeneous() {
            continue;
        }
        let hp = match plan_hetero(&cs) {
            Ok(hp) => hp,
            Err(Error::InfeasibleCode { .. }) => {
                rejected += 1;
                continue;
            }
            Err(other) => return Err(format!("instance {planned}: {other}")),
        };
        planned += 1;
        let t = &hp.table;
        for (db, m) in cs.mu().iter().enumerate() {
            let sum: Rational = t.columns().iter().map(|c| &c[db]).sum();
            ensure(&sum == m, format!("instance {planned}: database {} not filled", db + 1))?;
        }
        ensure(
            t.columns().iter().all(|c| c.iter().all(|v| v >= &Rational::zero())),
            format!("instance {planned}: negative share"),
        )?;
        ensure(t.gammas.values().all(in_unit_interval), format!("instance {planned}: gamma outside [0,1]"))?;
        hp.plan.verify().map_err(|err| format!("instance {planned}: {err}"))?;
        for seg in &hp.plan.segments {
            let normalized: Vec<Rational> = seg.allocation.iter().map(|a| a / &seg.fraction).collect();
            ensure(
                seg.partition.reconstruct(cs.n(), seg.code.k) == normalized,
                format!("instance {planned}: partition does not reconstruct {}", seg.code),
            )?;
        }
        if sampled.len() < 20 && minimal_l(&hp.plan) <= small {
            sampled.push(hp.plan);
        }
    }
    ensure(sampled.len() == 20, format!("only {} plans small enough to simulate", sampled.len()))?;
    for (i, plan) in sampled.iter().enumerate() {
        let l = minimal_l(plan).to_u64().ok_or("L overflow")?;
        let sys = init_system(plan, 2, l, i as u64).map_err(e)?;
        ensure(sys.occupancy_exact(), format!("sampled plan {i}: occupancy differs from mu M L"))?;
    }
    Ok(format!(
        "1000 plans verified ({rejected} draws rejected with too little storage for any code); occupancy exact on 20"
    ))
}

type Criterion = (&'static str, fn() -> Check, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 heterogeneous golden example", worked_golden, Duration::from_secs(1)),
        ("2 homogeneous golden example", homogeneous_golden, Duration::from_secs(5)),
        ("3 hull membership and even-gap dominance", hull_membership, Duration::from_secs(1)),
        ("4 cost-formula equivalence", cost_identities, Duration::from_secs(30)),
        ("5 read-after-write correctness", correctness_suite, Duration::from_secs(60)),
        ("6 privacy and security audit", privacy_audit, Duration::from_secs(60)),
        ("7 allocation feasibility corpus", allocation_corpus, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > budget => Err(format!("{msg}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  criterion {name} [{took:.2?}]: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name} [{took:.2?}]: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
