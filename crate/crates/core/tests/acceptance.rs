//! Acceptance suite. Prints one PASS/FAIL line per criterion (indented lines
//! are diagnostics) and exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sojourn_core::asymptotics::{spatial_moment, v_lrd, v_lrd_half};
use sojourn_core::chaos::{parseval_partial, parseval_target};
use sojourn_core::experiments::{self, ks_two_sample, moments, ExperimentConfig, Run, Study};
use sojourn_core::manifold::{jacobi_eval, Family, ManifoldSpec};
use sojourn_core::rosenblatt::{a2_exact, RosenblattParams, RosenblattSampler};
use sojourn_core::temporal::{k_single, TemporalCovariance};

struct Outcome {
    passed: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { passed: true, notes: Vec::new() }
    }

    /// Records a sub-check; all of them must hold for the criterion to pass.
    fn check(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes.push(format!("{} {note}", if ok { "ok  " } else { "MISS" }));
    }

    fn info(&mut self, note: String) {
        self.notes.push(format!("info {note}"));
    }
}

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn binom(a: f64, m: u32) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (a - i as f64) / (i + 1) as f64)
}

/// Explicit sum `Σ_s binom(n+α, n-s) binom(n+β, s) ((x-1)/2)^s ((x+1)/2)^{n-s}`.
fn jacobi_explicit(alpha: f64, beta: f64, n: u32, x: f64) -> f64 {
    (0..=n)
        .map(|s| {
            binom(n as f64 + alpha, n - s)
                * binom(n as f64 + beta, s)
                * ((x - 1.0) / 2.0).powi(s as i32)
                * ((x + 1.0) / 2.0).powi((n - s) as i32)
        })
        .sum()
}

fn spaces() -> Vec<ManifoldSpec> {
    [
        (Family::Sphere, 2),
        (Family::Sphere, 3),
        (Family::Sphere, 5),
        (Family::RealProjective, 2),
        (Family::RealProjective, 4),
        (Family::ComplexProjective, 4),
        (Family::ComplexProjective, 6),
        (Family::QuaternionicProjective, 8),
        (Family::QuaternionicProjective, 12),
        (Family::CayleyPlane, 16),
    ]
    .iter()
    .map(|&(f, d)| ManifoldSpec::new(f, d).unwrap())
    .collect()
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let mut worst_rec: f64 = 0.0;
    let mut params: Vec<(f64, f64)> = spaces().iter().map(|s| (s.alpha, s.beta_j)).collect();
    params.extend([(0.5, -0.3), (2.25, 4.0), (-0.5, -0.5)]);
    for &(a, b) in &params {
        for i in 0..=40 {
            let x = -1.0 + i as f64 / 20.0;
            let rec = jacobi_eval(a, b, 3, x).unwrap();
            for n in 0..=3u32 {
                let exact = jacobi_explicit(a, b, n, x);
                worst_rec = worst_rec.max((rec[n as usize] - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    o.check(worst_rec <= 1e-13, format!("recurrence vs explicit sum, degrees <= 3: worst {worst_rec:.2e} (tol 1e-13)"));
    let mut worst_orth: f64 = 0.0;
    let mut families = std::collections::HashSet::new();
    for space in spaces() {
        families.insert(space.family);
        let degrees: Vec<u32> = space.degrees(20).collect();
        for &l in &degrees {
            for &m in &degrees {
                let got = spatial_moment(&space, &[l, m]).unwrap();
                let want = if l == m {
                    space.jacobi_at_one(l).powi(2) / space.dim_eigenspace(l).unwrap() as f64
                } else {
                    0.0
                };
                worst_orth = worst_orth.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }
    o.check(
        worst_orth <= 1e-10 && families.len() == 5,
        format!("pair-quadrature orthogonality, {} families, degrees <= 20: worst {worst_orth:.2e} (tol 1e-10)", families.len()),
    );
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let cfg = config("coefficient_audit.json");
    let audit = experiments::coefficient_audit(&cfg).unwrap();
    let rows = |check: &'static str| audit.audit.iter().filter(move |r| r.check == check);
    let mc: Vec<_> = rows("closed_vs_mc").collect();
    let mc_bad = mc.iter().filter(|r| !r.passed).count();
    let worst = mc.iter().map(|r| (r.reference - r.estimate).abs() / r.se.unwrap()).fold(0.0, f64::max);
    o.check(
        mc_bad == 0 && mc.len() == 102,
        format!(
            "closed form vs Monte Carlo ({} samples): {}/{} cells within {}σ, worst {worst:.2}σ",
            cfg.replications,
            mc.len() - mc_bad,
            mc.len(),
            cfg.gates.audit_sigmas
        ),
    );
    let semi: Vec<_> = rows("closed_vs_semianalytic").collect();
    o.check(semi.iter().all(|r| r.passed), format!("closed form vs conditional Monte Carlo: {} cells", semi.len()));
    let red: Vec<_> = rows("single_component_reduction").collect();
    o.check(red.iter().all(|r| r.passed), format!("k=1 reduction identity to 1e-10: {} cases", red.len()));
    let pos: Vec<_> = rows("second_order_positivity").collect();
    o.check(
        pos.iter().all(|r| r.passed),
        format!(
            "α_(2,0,..)(u) > 0 on (0, 20]: min over grid {:.3e}",
            pos.iter().map(|r| r.estimate).fold(f64::INFINITY, f64::min)
        ),
    );
    let sign: Vec<_> = rows("uncorrected_sign_vs_mc").collect();
    o.info(format!(
        "uncorrected sign fails against Monte Carlo in {}/{} cells, as expected",
        sign.iter().filter(|r| r.passed).count(),
        sign.len()
    ));
    o
}

fn parseval_reach(o: &mut Outcome, k: u32, u: f64, q_max: u32, stated: f64, tol: f64) {
    let sums = parseval_partial(k, u, q_max).unwrap();
    let target = parseval_target(k, u).unwrap();
    let monotone = sums.windows(2).all(|w| w[1] >= w[0]);
    let bounded = sums.iter().all(|&s| s <= target * (1.0 + 1e-12));
    o.check(monotone && bounded, format!("k={k} u={u}: partial sums monotone and below P(1-P) = {target:.7}"));
    let first = sums.iter().position(|&s| (s / stated - 1.0).abs() <= tol);
    let gap = 1.0 - sums[q_max as usize - 1] / stated;
    o.check(
        first.is_some(),
        match first {
            Some(q) => format!("k={k} u={u}: within {}% of {stated} at Q = {}", tol * 100.0, q + 1),
            None => format!("k={k} u={u}: gap to {stated} still {:.2}% at Q = {q_max} (tol {}%)", gap * 100.0, tol * 100.0),
        },
    );
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    parseval_reach(&mut o, 1, 1.0, 5000, 0.216636, 0.01);
    parseval_reach(&mut o, 2, 2.0, 200, 0.232544, 0.03);
    let s = parseval_partial(2, 2.0, 20_000).unwrap();
    o.info(format!(
        "k=2 u=2 gap at Q = 2000: {:.2}%, Q = 20000: {:.2}% (slow algebraic convergence)",
        100.0 * (1.0 - s[1999] / 0.232544),
        100.0 * (1.0 - s[19_999] / 0.232544)
    ));
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    for beta in [0.2, 0.25, 0.4] {
        let cov = TemporalCovariance::new(1.0, beta).unwrap();
        let t: f64 = 1e4;
        let ratio = k_single(&cov, t) / t.powf(2.0 - 2.0 * beta);
        let stated = 1.0 / ((1.0 - 2.0 * beta) * (2.0 - 2.0 * beta));
        o.check(
            (ratio / stated - 1.0).abs() <= 0.02,
            format!("β={beta}: K(T)/T^(2-2β) = {ratio:.6} at T=1e4 vs {stated:.6} ({:+.2}%)", 100.0 * (ratio / stated - 1.0)),
        );
        let two_sided = 2.0 * stated;
        let far: f64 = 1e14;
        let far_ratio = k_single(&cov, far) / far.powf(2.0 - 2.0 * beta);
        o.info(format!(
            "β={beta}: against 2/((1-2β)(2-2β)) = {two_sided:.6}: {:+.2}% at T=1e4, {:+.3}% at T=1e14",
            100.0 * (ratio / two_sided - 1.0),
            100.0 * (far_ratio / two_sided - 1.0)
        ));
    }
    let c0 = 0.1;
    let cov = TemporalCovariance::new(c0, 1.0).unwrap();
    let ratio = k_single(&cov, 1e3) / 1e3;
    let want = 2.0 * c0 * c0 / 3.0;
    o.check(
        (ratio / want - 1.0).abs() <= 0.02,
        format!("β=1: K(T)/T = {ratio:.6e} at T=1e3 vs 2c0²/3 = {want:.6e} ({:+.3}%)", 100.0 * (ratio / want - 1.0)),
    );
    o
}

fn run_config(name: &str) -> Run {
    experiments::run(&config(name)).unwrap()
}

fn criterion_5(lrd: &Run, srd: &Run) -> Outcome {
    let mut o = Outcome::new();
    for (label, run) in [("LRD", lrd), ("SRD", srd)] {
        let s = &run.result.slopes[0];
        o.check(
            run.result.passed(),
            format!(
                "{label}: fitted slope {:.4} (95% CI {:.4}..{:.4}) vs {:.1} ± 0.15",
                s.fit.slope, s.fit.ci95[0], s.fit.ci95[1], s.predicted_exponent
            ),
        );
    }
    o
}

fn criterion_6(lrd: &Run) -> Outcome {
    let mut o = Outcome::new();
    let cfg = config("variance_lrd.json");
    let spectrum = cfg.power_spectrum().unwrap();
    let row = lrd.result.variance.iter().find(|r| r.horizon == 512.0).expect("T = 512 row");
    let ratio = row.chaos2_var_estimate / 512f64.powf(1.4);
    let ratio_se = row.chaos2_var_se / 512f64.powf(1.4);
    let stated = 0.02014;
    o.check(
        (ratio / stated - 1.0).abs() <= 0.10,
        format!(
            "Var(M[2])/T^1.4 = {ratio:.5} ± {ratio_se:.5} at T=512 vs {stated} ({:+.1}%, tol 10%)",
            100.0 * (ratio / stated - 1.0)
        ),
    );
    let half = v_lrd_half(&spectrum, cfg.k, 2.0).unwrap();
    let full = v_lrd(&spectrum, cfg.k, 2.0).unwrap();
    o.info(format!("formula as stated evaluates to {half:.6}; with the two-sided time integral {full:.6}"));
    o.info(format!(
        "simulation vs {full:.5}: {:+.1}%; whole functional Var(M)/T^1.4 = {:.5}; corr(M, M[2]) = {:.4}",
        100.0 * (ratio / full - 1.0),
        row.var_estimate / 512f64.powf(1.4),
        row.chaos2_correlation
    ));
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let srd = run_config("distribution_srd.json");
    let lrd = run_config("distribution_lrd.json");
    let describe = |run: &Run| {
        run.result
            .distribution
            .iter()
            .map(|d| format!("#{} {} p={:.4} skew={:.2}", d.attempt, d.test_kind.as_str(), d.p_value, d.skewness))
            .collect::<Vec<_>>()
    };
    o.check(srd.result.passed(), format!("SRD T=512: {}", srd.result.gates[0].detail));
    for d in describe(&srd) {
        o.info(d);
    }
    let two_ok = lrd.result.distribution.iter().filter(|d| d.test_kind.as_str() == "two_sample_limit_law" && d.passed).count();
    let rejects = lrd.result.distribution.iter().filter(|d| d.test_kind.as_str() == "one_sample_normal" && d.passed).count();
    o.check(
        lrd.result.passed(),
        format!(
            "LRD T=1024: {} (limit-law KS non-rejecting {two_ok}/3, normality rejected {rejects}/3)",
            lrd.result.gates[0].detail
        ),
    );
    for d in describe(&lrd) {
        o.info(d);
    }
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let worst = (1..=9)
        .map(|i| {
            let b = 0.05 * i as f64;
            let p = RosenblattParams::new(b).unwrap();
            (2.0 * p.sigma * p.sigma * a2_exact(b).unwrap() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    o.check(worst <= 1e-12, format!("2σ²a₂ = 1 for β = 0.05..0.45: worst {worst:.1e}"));
    let n = 10_000;
    let sampler = RosenblattSampler::with_defaults(0.25).unwrap();
    let draws = sampler.sample_seeded(n, 81);
    let m = moments(&draws).unwrap();
    let bound = 4.0 / (n as f64).sqrt();
    o.check(m.mean.abs() < bound, format!("β=0.25 mean {:.4} (bound {bound:.3})", m.mean));
    o.check(
        (m.variance - 1.0).abs() <= 0.05,
        format!("β=0.25 variance {:.4} ± {:.4} (tol 0.05)", m.variance, m.variance_se),
    );
    o.check(m.skewness > 0.0, format!("β=0.25 skewness {:.3}", m.skewness));
    let short = RosenblattSampler::new(0.25, 1024.0, 0.25).unwrap().sample_seeded(2000, 82);
    let long = RosenblattSampler::new(0.25, 4096.0, 0.25).unwrap().sample_seeded(2000, 83);
    let ks = ks_two_sample(&short, &long).unwrap();
    o.check(ks.p_value > 0.01, format!("T_R 1024 vs 4096 (2000 draws each): D = {:.4}, p = {:.3}", ks.statistic, ks.p_value));
    o
}

fn outputs(cfg: &ExperimentConfig, threads: usize, dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let run = pool.install(|| experiments::run(cfg)).unwrap();
    let mut files: Vec<_> = experiments::write_outputs(&run, dir, true)
        .unwrap()
        .into_iter()
        .map(|p| (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let mut variance = config("variance_lrd.json");
    variance.horizons = vec![16.0, 32.0, 64.0];
    variance.n_points = 60;
    variance.replications = 200;
    let mut distribution = config("distribution_lrd.json");
    distribution.horizons = vec![32.0];
    distribution.n_points = 40;
    distribution.replications = 100;
    distribution.rosenblatt.horizon = 128.0;
    distribution.rosenblatt.dt = 0.5;
    for cfg in [variance, distribution] {
        let tmp = tempfile::tempdir().unwrap();
        let runs: Vec<_> = [(1, "a"), (1, "b"), (3, "c")].iter().map(|&(t, d)| outputs(&cfg, t, &tmp.path().join(d))).collect();
        let same = runs.windows(2).all(|w| w[0] == w[1]);
        let names: Vec<String> = runs[0].iter().map(|f| f.0.display().to_string()).collect();
        o.check(same, format!("{:?}: {} identical across repeat and 1 vs 3 workers", cfg.study, names.join(", ")));
    }
    o
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome, budget: Option<Duration>| {
        let start = Instant::now();
        let mut out = f();
        let took = start.elapsed();
        if let Some(b) = budget {
            out.check(took <= b, format!("runtime {:.1} s (budget {} s)", took.as_secs_f64(), b.as_secs()));
        } else {
            out.info(format!("runtime {:.1} s", took.as_secs_f64()));
        }
        all &= out.passed;
        println!("criterion {id} {:<28} {}", name, if out.passed { "PASS" } else { "FAIL" });
        for n in &out.notes {
            println!("    {n}");
        }
    };
    report(1, "special functions", &mut criterion_1, Some(Duration::from_secs(10)));
    report(2, "coefficient audit", &mut criterion_2, Some(Duration::from_secs(300)));
    report(3, "Parseval partial sums", &mut criterion_3, Some(Duration::from_secs(120)));
    report(4, "K-integral asymptotics", &mut criterion_4, Some(Duration::from_secs(60)));
    let mut lrd = None;
    report(
        5,
        "variance scaling",
        &mut || {
            let l = run_config("variance_lrd.json");
            let s = run_config("variance_srd.json");
            assert_eq!(l.result.studies, vec![Study::VarianceScaling]);
            let out = criterion_5(&l, &s);
            lrd = Some(l);
            out
        },
        None,
    );
    let lrd = lrd.expect("criterion 5 ran");
    report(6, "long-memory constant", &mut || criterion_6(&lrd), None);
    report(7, "limit laws", &mut criterion_7, None);
    report(8, "Rosenblatt sampler", &mut criterion_8, None);
    report(9, "determinism", &mut criterion_9, None);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
