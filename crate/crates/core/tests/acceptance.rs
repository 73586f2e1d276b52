//! Acceptance run: one PASS/FAIL line per criterion, with the measured value
//! and the wall time. Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bellman_core::ProblemParams;
use bellman_core::adversary::random_adversary_with;
use bellman_core::boundary::Curves;
use bellman_core::constant::{
    ConstantSolver, case_threshold, low_beta_closed_form, sharp_constant, solve_s_star,
};
use bellman_core::cup::CupProfile;
use bellman_core::extremizer::{iterative_extremizer, vertical_extremizer};
use bellman_core::surface::{OmegaPoint, Region, Surface};
use bellman_core::verify::{Tolerances, VerifyOptions, verify_surface};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn pp(p: f64, tau: f64) -> ProblemParams {
    ProblemParams::new(p, tau).expect("valid parameters")
}

fn surface(p: f64, tau: f64) -> Result<Surface, String> {
    Surface::build(&pp(p, tau)).map_err(|e| e.to_string())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn unperturbed_limit() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in [1.2, 1.5, 1.8] {
        let r = sharp_constant(&pp(p, 0.0), 0.0).map_err(|e| e.to_string())?;
        worst = worst.max((r.c_norm - 1.0 / (p - 1.0)).abs());
    }
    check(
        worst <= 1e-12,
        format!("max |C_norm - 1/(p-1)| = {worst:.3e}"),
    )
}

fn case_threshold_grid() -> Outcome {
    let mut min = f64::INFINITY;
    let mut at = 0.0;
    for i in 0..50 {
        let p = 1.01 + 0.98 * i as f64 / 49.0;
        let t = case_threshold(p).map_err(|e| e.to_string())?;
        if t < min {
            min = t;
            at = p;
        }
    }
    check(
        (0.81..=0.84).contains(&min),
        format!("min tau* = {min:.6} at p = {at:.4}"),
    )
}

fn vertical_slope() -> Outcome {
    let mut worst: f64 = 0.0;
    for (p, tau) in [(1.5, 1.0), (1.3, 0.5)] {
        let s = surface(p, tau)?;
        let q = *s.params();
        let want = (q.tau2() + (1.0 / (p - 1.0)).powi(2)).powf(0.5 * p);
        for i in 0..=50 {
            let y2 = q.y_p() + (1.0 - q.y_p()) * i as f64 / 50.0;
            let g = (1.0 - y2).powf(p);
            for y3 in [g + 0.5, g + 3.0, 20.0, 1e3] {
                let e = s
                    .eval(OmegaPoint::new(&q, y2, y3).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                if e.region != Region::Vertical {
                    return Err(format!("({y2}, {y3}) classified as {}", e.region));
                }
                worst = worst.max((e.grad.1 - want).abs() / want);
            }
        }
    }
    check(
        worst <= 1e-10,
        format!("max relative t2 deviation = {worst:.3e}"),
    )
}

fn gluing_identity() -> Outcome {
    let s = surface(1.5, 0.5)?;
    let s0 = s.s0();
    if s0 >= s.params().y_p() {
        return Err(format!("s0 = {s0} not left of y_p"));
    }
    let chord = s.t_at_s0().1;
    let fan = s.fan_t2(s0);
    let d = (chord - fan).abs();
    check(
        d <= 1e-8,
        format!("|t2 chord - t2 fan| = {d:.3e} at s0 = {s0:.6}"),
    )
}

fn branch_seams() -> Outcome {
    let q = pp(1.5, 3.0);
    let solver = ConstantSolver::new(&q).map_err(|e| e.to_string())?;
    let profile = solver.profile().ok_or("no cup in the second case")?;
    let s_star = solve_s_star(&q, profile).map_err(|e| e.to_string())?;
    let beta_of = |bp: f64| (1.0 + bp) / (1.0 - bp);
    let c = |bp: f64| solver.c_power(beta_of(bp)).map_err(|e| e.to_string());

    let high = (q.tau2() + beta_of(s_star).powi(2)).powf(0.5 * q.p());
    let upper = (c(s_star - 1e-9)? - high).abs() / high;
    let low = low_beta_closed_form(&q, profile.s0);
    let lower = (c(q.y_p() + 1e-9)? - low).abs() / low;

    let mut prev = 0.0;
    let mut drops = 0;
    for i in 0..200 {
        let bp = -1.0 + 1.999 * i as f64 / 199.0;
        let v = c(bp)?;
        if v < prev * (1.0 - 1e-12) {
            drops += 1;
        }
        prev = v;
    }
    check(
        upper <= 1e-6 && lower <= 1e-6 && drops == 0,
        format!(
            "seam at s*: {upper:.3e}, seam at y_p: {lower:.3e}, monotonicity violations: {drops}"
        ),
    )
}

fn closed_form_vs_chord() -> Outcome {
    let q = pp(1.5, 3.0);
    let prof = CupProfile::build(&q).map_err(|e| e.to_string())?;
    let cv = Curves::new(&q);
    let s0 = prof.s0;
    let chord = (cv.f1(-1.0) - cv.f1(s0)) / (cv.g1(-1.0) - cv.g1(s0));
    let closed = low_beta_closed_form(&q, s0);
    let r = (closed - chord).abs() / chord;
    check(r <= 1e-9, format!("relative difference = {r:.3e}"))
}

fn pde_suite() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (p, tau) in [(1.5, 1.0), (1.5, 3.0)] {
        let s = surface(p, tau)?;
        let start = Instant::now();
        let r = verify_surface(&s, &VerifyOptions::default(), &Tolerances::default());
        let took = start.elapsed();
        ok &= r.passed && took < Duration::from_secs(30);
        let worst: Vec<String> = r
            .checks
            .iter()
            .map(|c| format!("{}={:.1e}", c.name, c.max_value))
            .collect();
        lines.push(format!(
            "({p},{tau}) {:.1}s {}",
            took.as_secs_f64(),
            worst.join(" ")
        ));
        if !r.passed {
            lines.push(format!("failed: {}", r.failed().join(", ")));
        }
    }
    check(ok, lines.join("; "))
}

fn force_nonpositive() -> Outcome {
    let mut max_force = f64::NEG_INFINITY;
    let mut max_res: f64 = 0.0;
    for (p, tau) in [(1.5, 1.0), (1.5, 3.0), (1.2, 0.822)] {
        let q = pp(p, tau);
        let prof = CupProfile::build(&q).map_err(|e| e.to_string())?;
        let cv = prof.solver().curves();
        let nodes = prof.nodes();
        let h = 1e-5 * (prof.s0 - prof.c);
        for (i, n) in nodes.iter().enumerate() {
            max_force = max_force.max(n.force);
            if i == 0 || i + 1 == nodes.len() || n.s - h < prof.tip || n.s + h > prof.s0 {
                continue;
            }
            let fp = prof.exact_at(n.s + h).map_err(|e| e.to_string())?.force;
            let fm = prof.exact_at(n.s - h).map_err(|e| e.to_string())?.force;
            let (theta, k) = prof.chord_angle(n.s, n.a);
            let res = (fp - fm) / (2.0 * h) + n.force * theta.cos() / k * cv.g2(n.s) - cv.r1(n.s);
            max_res = max_res.max(res.abs());
        }
    }
    check(
        max_force <= 1e-10 && max_res <= 1e-6,
        format!("max force = {max_force:.3e}, max ODE residual = {max_res:.3e}"),
    )
}

fn sharpness(kind: &str) -> Outcome {
    let (p, tau, heights) = if kind == "vertical" {
        (1.5, 1.0, [10.0, 20.0, 50.0])
    } else {
        (1.5, 3.0, [4.0, 10.0, 20.0])
    };
    let s = surface(p, tau)?;
    let mut lines = Vec::new();
    let mut ok = true;
    for y3 in heights {
        let b = s.b(-1.0, y3).map_err(|e| e.to_string())?;
        let mut gaps = Vec::new();
        for eps in [1e-2, 1e-3] {
            let start = Instant::now();
            let built = if kind == "vertical" {
                vertical_extremizer(&s, y3, eps)
            } else {
                iterative_extremizer(&s, y3, eps)
            };
            let (pair, _) = built.map_err(|e| e.to_string())?;
            let m = pair.psi(s.params());
            ok &= start.elapsed() < Duration::from_secs(10);
            ok &= m.psi >= b * (1.0 - 5.0 * eps) && m.psi <= b * (1.0 + 1e-12);
            gaps.push((b - m.psi) / b);
        }
        ok &= gaps[1] < gaps[0];
        lines.push(format!("y3={y3}: gap {:.2e} -> {:.2e}", gaps[0], gaps[1]));
    }
    check(ok, format!("({p},{tau}) {}", lines.join(", ")))
}

fn sharpness_certificates() -> Outcome {
    let v = sharpness("vertical");
    let i = sharpness("iterative");
    let detail = format!(
        "vertical {}; iterative {}",
        v.as_ref().unwrap_or_else(|e| e),
        i.as_ref().unwrap_or_else(|e| e)
    );
    check(v.is_ok() && i.is_ok(), detail)
}

fn validity_certificate() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (p, tau) in [(1.5, 1.0), (1.5, 3.0), (1.2, 0.822)] {
        let start = Instant::now();
        let s = surface(p, tau)?;
        let solver = ConstantSolver::new(s.params()).map_err(|e| e.to_string())?;
        let mut worst = f64::NEG_INFINITY;
        for seed in [1, 2, 3] {
            let r =
                random_adversary_with(&s, &solver, seed, 100_000, 12).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_ratio);
        }
        let took = start.elapsed();
        ok &= worst <= 1.0 + 1e-9 && took < Duration::from_secs(60);
        lines.push(format!(
            "({p},{tau}) max ratio {worst:.12} in {:.1}s",
            took.as_secs_f64()
        ));
    }
    check(ok, lines.join(", "))
}

fn boundary_reproduction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (p, tau) in [(1.5, 1.0), (1.5, 3.0), (1.2, 0.822), (1.8, 0.0)] {
        let s = surface(p, tau)?;
        for _ in 0..2500 {
            let x1: f64 = rng.random_range(-5.0..5.0);
            let x2: f64 = rng.random_range(-5.0..5.0);
            let h = s.h(x1, x2, x1.abs().powf(p)).map_err(|e| e.to_string())?;
            let want = (x2 * x2 + tau * tau * x1 * x1).powf(0.5 * p);
            worst = worst.max((h - want).abs() / want.max(1.0));
        }
    }
    check(
        worst <= 1e-10,
        format!("max relative deviation over 10^4 points = {worst:.3e}"),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "unperturbed limit",
            budget: Some(Duration::from_millis(1)),
            run: unperturbed_limit,
        },
        Criterion {
            id: 2,
            name: "case threshold",
            budget: Some(Duration::from_secs(1)),
            run: case_threshold_grid,
        },
        Criterion {
            id: 3,
            name: "vertical slope identity",
            budget: None,
            run: vertical_slope,
        },
        Criterion {
            id: 4,
            name: "gluing identity at s0",
            budget: None,
            run: gluing_identity,
        },
        Criterion {
            id: 5,
            name: "branch seams and monotonicity",
            budget: Some(Duration::from_secs(5)),
            run: branch_seams,
        },
        Criterion {
            id: 6,
            name: "closed form vs chord slope",
            budget: None,
            run: closed_form_vs_chord,
        },
        Criterion {
            id: 7,
            name: "surface residual suite",
            budget: Some(Duration::from_secs(60)),
            run: pde_suite,
        },
        Criterion {
            id: 8,
            name: "force sign and ODE",
            budget: None,
            run: force_nonpositive,
        },
        Criterion {
            id: 9,
            name: "sharpness certificates",
            budget: None,
            run: sharpness_certificates,
        },
        Criterion {
            id: 10,
            name: "validity certificate",
            budget: Some(Duration::from_secs(180)),
            run: validity_certificate,
        },
        Criterion {
            id: 11,
            name: "boundary reproduction",
            budget: None,
            run: boundary_reproduction,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let late = c.budget.is_some_and(|b| took > b);
        let (tag, detail) = match &outcome {
            Ok(d) if !late => ("PASS", d.clone()),
            Ok(d) => (
                "FAIL",
                format!("{d}; over time budget {:?}", c.budget.unwrap()),
            ),
            Err(d) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "{tag} [{:>2}] {} ({:.3}s): {detail}",
            c.id,
            c.name,
            took.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
