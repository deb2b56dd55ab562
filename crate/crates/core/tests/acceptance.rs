//! Acceptance criteria 1 to 7. Each test prints one PASS/FAIL line; run with
//! `cargo test -p hjb-core --test acceptance -- --nocapture` to see them.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use hjb_core::domain::Domain;
use hjb_core::expr::{parse, Expr, Var};
use hjb_core::par::Exec;
use hjb_core::registry::{self, Entry};
use hjb_core::sim::{
    cost_consistency, integrate, lyapunov_along, perturbation_optimality, ClosedLoop, SimConfig,
};
use hjb_core::synth::{synthesize_problem, HjbEvaluator, SynthesisResult};
use hjb_core::verify::{hessian_pd_region, initial_conditions, radial_unboundedness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, failures: &[String], detail: &str) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {verdict} {detail}");
    for f in failures {
        println!("    {f}");
    }
    assert!(failures.is_empty(), "criterion {n} failed: {failures:#?}");
}

fn synthesized() -> Vec<(Entry, SynthesisResult)> {
    registry::builtin()
        .into_iter()
        .map(|e| {
            let r = synthesize_problem(&e.problem, None)
                .unwrap_or_else(|err| panic!("{}: {err}", e.name));
            (e, r)
        })
        .collect()
}

fn entry(name: &str) -> (Entry, SynthesisResult) {
    let e = registry::get(name).unwrap();
    let r = synthesize_problem(&e.problem, None).unwrap();
    (e, r)
}

#[test]
fn criterion_1_example_reproduction() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let all = synthesized();
    for (e, r) in &all {
        let c = registry::compare(e, r, &e.problem.domain_or_default());
        if !c.is_match() {
            failures.push(format!("{}:\n{c}", e.name));
        }
    }
    let took = start.elapsed();
    if took >= Duration::from_secs(5) {
        failures.push(format!("runtime {took:?} exceeds 5 s"));
    }
    let detail = format!("({} entries, {:.2} s)", all.len(), took.as_secs_f64());
    report(1, "example reproduction", &failures, &detail);
}

#[test]
fn criterion_2_hjb_residual() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (e, r) in synthesized() {
        let sys = &e.problem.system;
        let n = sys.order();
        let domain = Domain::cube(n, if n == 3 { 1.0 } else { 2.0 });
        let hjb = HjbEvaluator::new(sys, &r);
        let pts = domain.grid(41);
        let scores = Exec::Parallel.map(&pts, |x| {
            let h = hjb.residual(x).unwrap();
            let l = hjb.state_cost(x).unwrap() + sys.r() * hjb.control(x).unwrap().powi(2);
            h.abs() / (1.0 + l.abs())
        });
        let (i, s) = scores
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, &s)| if s > acc.1 || s.is_nan() { (i, s) } else { acc });
        worst = worst.max(s);
        if s.is_nan() || s > 1e-8 {
            failures.push(format!("{}: relative residual {s:.3e} at {:?}", e.name, pts[i]));
        }
    }
    let took = start.elapsed();
    if took >= Duration::from_secs(10) {
        failures.push(format!("runtime {took:?} exceeds 10 s"));
    }
    let detail = format!("(worst {worst:.2e}, {:.2} s)", took.as_secs_f64());
    report(2, "HJB residual", &failures, &detail);
}

#[test]
fn criterion_3_lyapunov_decrease() {
    let cfg = SimConfig::default();
    let mut failures = Vec::new();
    let mut count = 0;
    let mut worst_rate: f64 = 0.0;
    for (e, r) in synthesized() {
        let sys = &e.problem.system;
        let cl = ClosedLoop::from_result(sys, &r);
        let v = r.value.compile();
        let starts = initial_conditions(&e.problem.domain_or_default(), 8, 0);
        assert_eq!(starts.len(), 16, "{}", e.name);
        let runs = Exec::Parallel.map(&starts, |x0| {
            let tr = integrate(&cl, x0, &cfg).unwrap();
            lyapunov_along(&tr, &cl, &v, cfg.dt, 10).unwrap()
        });
        for (x0, s) in starts.iter().zip(runs) {
            count += 1;
            worst_rate = worst_rate.max(s.max_rate_error);
            if s.max_rate_error > 1e-6 {
                failures.push(format!(
                    "{} from {x0:?}: |dV/dt + L| = {:.3e} at t = {}",
                    e.name, s.max_rate_error, s.worst_time
                ));
            }
            if s.max_increase > 1e-10 {
                failures.push(format!("{} from {x0:?}: V rose by {:.3e}", e.name, s.max_increase));
            }
            if let Some(l) = s.terminal_cost {
                if l > 1e-8 {
                    failures.push(format!("{} from {x0:?}: terminal L = {l:.3e}", e.name));
                }
            }
        }
    }
    let detail = format!("({count} trajectories, worst rate error {worst_rate:.2e})");
    report(3, "Lyapunov decrease", &failures, &detail);
}

#[test]
fn criterion_4_cost_consistency() {
    let cfg = SimConfig::default();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for name in ["mass_spring", "van_der_pol", "double_integrator", "cubic_spring", "strict_feedback"] {
        let (e, r) = entry(name);
        let sys = &e.problem.system;
        let starts = initial_conditions(&Domain::cube(sys.order(), 1.0), 8, 11);
        let starts = &starts[starts.len() - 8..];
        let runs = Exec::Parallel.map(starts, |x0| cost_consistency(sys, &r, x0, &cfg).unwrap());
        for (x0, c) in starts.iter().zip(runs) {
            worst = worst.max(c.gap);
            if c.gap > 1e-3 {
                failures.push(format!("{name} from {x0:?}: J = {}, V drop = {}", c.j, c.v0));
            }
        }
    }
    report(4, "cost consistency", &failures, &format!("(worst gap {worst:.2e})"));
}

#[test]
fn criterion_5_perturbation_optimality() {
    let cfg = SimConfig::default();
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for (e, r) in synthesized() {
        let sys = &e.problem.system;
        let x0 = vec![0.5; sys.order()];
        let rep = perturbation_optimality(sys, &r, &x0, 20, &cfg, 3).unwrap();
        assert_eq!(rep.trials.len(), 20);
        worst = worst.min(rep.worst_gap);
        if rep.worst_gap < -1e-3 {
            let t = rep.trials.iter().min_by(|a, b| a.gap.total_cmp(&b.gap)).unwrap();
            failures.push(format!("{}: eps = {} p = {} beats by {:.3e}", e.name, t.eps, t.p, -t.gap));
        }
    }
    report(5, "perturbation optimality", &failures, &format!("(worst gap {worst:.2e})"));
}

#[test]
fn criterion_6_negative_results() {
    let mut failures = Vec::new();
    let (e, r) = entry("unicycle");
    let sys = &e.problem.system;

    let radial = radial_unboundedness(&r.value.compile(), &e.problem.domain_or_default(), Exec::Parallel);
    let witness = radial.witness.clone().unwrap_or_default();
    let near = witness.len() == 2
        && (witness[0] + witness[1]).abs() < 0.1
        && (witness[0].abs() - 2.0 * PI).abs() < 0.1;
    if radial.increasing || !near {
        failures.push(format!("unicycle radial witness {witness:?}, increasing = {}", radial.increasing));
    }

    let cl = ClosedLoop::from_result(sys, &r);
    let tr = integrate(&cl, &[0.0, 3.0 * PI], &SimConfig::default()).unwrap();
    let end = tr.terminal().to_vec();
    let lattice = (end[1] / PI).round();
    let on_set = (end[0] + end[1]).abs() < 1e-3 && (end[1] - lattice * PI).abs() < 1e-3 && lattice != 0.0;
    if tr.converged_to.is_none() || !on_set {
        failures.push(format!("unicycle from (0, 3 pi) ended at {end:?}"));
    }

    let (_, r3) = entry("unicycle_3rd");
    let d3 = Domain::new(vec![(-1.0, 1.0), (-1.0, 1.0), (-15.0 / PI, 15.0 / PI)]).unwrap();
    let pd = hessian_pd_region(&r3.value, &d3, 41);
    let bound = pd.region.as_ref().map(|d| d.bounds()[1].1);
    match bound {
        Some(b) if (PI / 20.0..=PI / 5.0).contains(&b) => {}
        _ => failures.push(format!("third-order PD region x2 bound {bound:?}, want within 2x of pi/10")),
    }

    let detail = format!(
        "(witness ({:.3}, {:.3}), rest point ({:.3}, {:.3}), x2 bound {:.4})",
        witness.first().copied().unwrap_or(f64::NAN),
        witness.get(1).copied().unwrap_or(f64::NAN),
        end[0],
        end[1],
        bound.unwrap_or(f64::NAN)
    );
    report(6, "known negative results", &failures, &detail);
}

/// Random member of the closed antiderivative subclass: sums of monomials,
/// each optionally times one sine or cosine of an affine argument.
fn random_subclass(rng: &mut ChaCha8Rng) -> String {
    let terms = rng.gen_range(1..=4);
    (0..terms)
        .map(|_| {
            let c: f64 = rng.gen_range(0.25..3.0) * if rng.gen() { 1.0 } else { -1.0 };
            let mut t = format!("{c}");
            for i in 1..=3 {
                let p: u32 = rng.gen_range(0..4);
                if p > 0 {
                    t.push_str(&format!("*x{i}^{p}"));
                }
            }
            if rng.gen_bool(0.5) {
                let f = if rng.gen() { "sin" } else { "cos" };
                let alpha = [1.0, 2.0, -1.0, 0.5, 3.0][rng.gen_range(0..5)];
                let beta = [0.0, 0.5][rng.gen_range(0..2)];
                t.push_str(&format!("*{f}({alpha}*x{} + {beta})", rng.gen_range(1..=3)));
            }
            t
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn round_trips(e: &Expr) -> bool {
    parse(&e.to_string()).is_ok_and(|again| &again == e && again.to_string() == e.to_string())
}

#[test]
fn criterion_7_symbolic_engine() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let text = random_subclass(&mut rng);
        let e = parse(&text).unwrap();
        let v = Var::from_index(rng.gen_range(0..3));
        let (f, d) = (e.compile(), e.diff(v).compile());
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let (mut up, mut down) = (x.clone(), x.clone());
            up[v.index()] += 1e-5;
            down[v.index()] -= 1e-5;
            let fd = (f.eval(&up) - f.eval(&down)) / 2e-5;
            let exact = d.eval(&x);
            if (exact - fd).abs() > 1e-5 * (1.0 + exact.abs()) {
                failures.push(format!("d/d{v} {e} at {x:?}: {exact} vs {fd}"));
                break;
            }
        }
        match e.antiderivative(v).closed() {
            Some(big) if big.diff(v).approx_eq(&e, 1e-9) => {}
            Some(big) => failures.push(format!("d/d{v} of {big} is not {e}")),
            None => failures.push(format!("{e} has no closed antiderivative in {v}")),
        }
        if !round_trips(&e) {
            failures.push(format!("round trip of {e}"));
        }
    }
    let mut strings = 0;
    for (en, r) in synthesized() {
        let want = en.problem.expected.as_ref().unwrap();
        for s in [&want.u, &want.v, &want.l] {
            strings += 1;
            match parse(s) {
                Ok(e) if round_trips(&e) => {}
                _ => failures.push(format!("{}: expected string {s} does not round-trip", en.name)),
            }
        }
        let mut got = vec![r.u.clone(), r.l_state.clone()];
        got.extend(r.value.as_expr().cloned());
        for e in got {
            strings += 1;
            if !round_trips(&e) {
                failures.push(format!("{}: synthesized {e} does not round-trip", en.name));
            }
        }
    }
    let detail = format!("(100 random expressions, {strings} registry strings)");
    report(7, "symbolic engine", &failures, &detail);
}
