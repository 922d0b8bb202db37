//! Desk-scale acceptance run. One line per criterion; the process exits
//! nonzero if any of them fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use tmflow::noise::NoiseMode;
use tmflow::numerics::{default_precision, Real};
use tmflow::ode_sim::SolverSettings;
use tmflow::robust_map::Variant;
use tmflow::verify::*;

const SEED: u64 = 20_240_601;

struct Outcome {
    checks: Vec<Check>,
    extra: Option<String>,
}

impl From<Vec<Check>> for Outcome {
    fn from(checks: Vec<Check>) -> Self {
        Outcome { checks, extra: None }
    }
}

fn criterion(n: usize, title: &str, limit: Option<Duration>, body: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let out = body();
    let took = started.elapsed();
    let in_time = limit.is_none_or(|l| took < l);
    let pass = in_time && out.checks.iter().all(|c| c.pass);
    let budget = limit.map_or("no limit".to_string(), |l| format!("limit {}s", l.as_secs()));
    println!("[{}] {n:>2}. {title} ({:.1}s, {budget})", if pass { "PASS" } else { "FAIL" }, took.as_secs_f64());
    for c in &out.checks {
        println!("        {c}");
        if let Some(note) = &c.note {
            println!("          note: {note}");
        }
    }
    if let Some(extra) = out.extra {
        println!("        {extra}");
    }
    if !in_time {
        println!("        over the time limit");
    }
    pass
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn main() -> ExitCode {
    let p = default_precision();
    let settings = SolverSettings::default();
    let delta = Real::ratio(1, 10, p);
    let work = Workload::defaults();
    let mut ok = Vec::new();

    ok.push(criterion(1, "Psi contraction on 1e5 interval-certified samples", secs(30), || {
        vec![psi_contraction(p, 100_000, SEED)].into()
    }));
    ok.push(criterion(2, "sigma contraction on 1e4 samples", None, || vec![sigma_contraction(p, 10_000, SEED)].into()));
    ok.push(criterion(3, "pairing bijection below 50 and Upsilon_3 robustness", secs(60), || {
        vec![pairing_bijection(50), upsilon_robustness(p, 10_000, SEED, Variant::Analytic)].into()
    }));
    ok.push(criterion(4, "targeting, plain and perturbed, 200 instances", None, || targeting(p, 200, SEED, &settings).into()));
    ok.push(criterion(5, "iteration ODE on 2^x", secs(60), || {
        let s = SolverSettings { abs_tol: 1e-8, rel_tol: 1e-8, ..settings };
        vec![iteration_exp2(p, &s, 1e-7)].into()
    }));
    ok.push(criterion(6, "robust map simulation, 20 steps under every noise mode", secs(120), || {
        let offset = Real::ratio(19, 100, p);
        work.iter().map(|w| map_simulation(w, &delta, 20, &offset, &NoiseMode::ADVERSARIAL, SEED)).collect::<Vec<_>>().into()
    }));
    ok.push(criterion(7, "two-dimensional ODE simulation, 10 steps", secs(600), || {
        let mut v = Vec::new();
        for w in &work {
            for d in [Real::zero(p), delta.clone()] {
                v.push(ode_simulation(w, &d, 10, SEED, &settings));
            }
        }
        v.into()
    }));
    ok.push(criterion(8, "unpairing ODEs on 0..30", secs(300), || omega_odes(30, &settings).into()));
    ok.push(criterion(9, "transport to the sphere", secs(600), || {
        let w = &work[0];
        let mut v = vec![sphere_tangency(w, p, 10_000, SEED), sphere_decay(w, p)];
        v.extend(sphere_orbit(w, 5, &settings));
        v.into()
    }));
    ok.push(criterion(10, "growth probe of the smooth field (evidence, not proof)", None, || {
        let (c, probe) = growth_probe(&work[0], &[10.0, 100.0, 1000.0, 10000.0], 8);
        let pass = probe.exhibited.is_some_and(|d| d <= 8);
        let mut c = c;
        c.pass &= pass;
        Outcome { checks: vec![c], extra: Some(format!("outer-shell ratios by d: {:?}", probe.ratios.iter().map(|r| r[r.len() - 1]).collect::<Vec<_>>())) }
    }));

    let passed = ok.iter().filter(|b| **b).count();
    println!("acceptance: {passed}/{} criteria passed", ok.len());
    if passed == ok.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
