//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use tempfile::TempDir;
use yesrate::consensus::{
    log_evidence, posterior, predict, predictive_pmf, BetaBelief, PredictorConfig, VoteCount,
};
use yesrate::dataset::Dataset;
use yesrate::estimators::{
    AlienEncoding, Architecture, Estimator, EstimatorSpec, TrainConfig, TrainingExample,
};
use yesrate::evaluation::{
    calibration, evaluate, fpr_audit, mode_belief, EvalReport, Mode, PredictorKind,
};
use yesrate::numerics::{beta_cdf, log_gamma, RngStream};
use yesrate::world::{generate, simulate_gold, WorldConfig};

type Verdict = Result<String, String>;

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 1

/// Stirling series with the argument shifted above 30; independent of the
/// library's Lanczos route.
fn stirling_log_gamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < 30.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // B_{2k} / (2k (2k - 1)) for k = 1..6
    let coeffs = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
    ];
    let mut series = 0.0;
    let mut p = inv;
    for c in coeffs {
        series += c * p;
        p *= inv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn go(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        go(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + go(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    go(f, a, b, fa, fm, fb, whole, eps, 40)
}

/// Regularized incomplete beta by quadrature of the density, for `a, b ≥ 1`.
fn quadrature_beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    let ln_b = stirling_log_gamma(a) + stirling_log_gamma(b) - stirling_log_gamma(a + b);
    let density = move |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return if (t <= 0.0 && a == 1.0) || (t >= 1.0 && b == 1.0) {
                (-ln_b).exp()
            } else {
                0.0
            };
        }
        ((a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - ln_b).exp()
    };
    // Integrate the smaller tail to keep the absolute error small.
    let mode = if a + b > 2.0 {
        (a - 1.0) / (a + b - 2.0)
    } else {
        0.5
    };
    if x <= mode {
        adaptive_simpson(&density, 0.0, x, 1e-13)
    } else {
        1.0 - adaptive_simpson(&density, x, 1.0, 1e-13)
    }
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let fixture = common::check_numerics_oracle();
    let mut rng = RngStream::new(11, 0);
    let mut series_fail = 0;
    let mut quad_fail = 0;
    let (series_n, quad_n) = (2000, 2000);
    for _ in 0..series_n {
        let x = 10f64.powf(rng.uniform_range(-3.0, 6.0));
        let want = stirling_log_gamma(x);
        if (log_gamma(x).unwrap() - want).abs() > 1e-12 * want.abs().max(1.0) {
            series_fail += 1;
        }
    }
    for _ in 0..quad_n {
        let a = 10f64.powf(rng.uniform_range(0.0, 2.3));
        let b = 10f64.powf(rng.uniform_range(0.0, 2.3));
        let x = rng.uniform();
        if (beta_cdf(x, a, b).unwrap() - quadrature_beta_cdf(x, a, b)).abs() > 1e-9 {
            quad_fail += 1;
        }
    }
    let elapsed = started.elapsed();
    let points = fixture.points + series_n + quad_n;
    let worst: Vec<String> = fixture
        .worst
        .iter()
        .map(|(f, w)| format!("{f} {w:.1e}"))
        .collect();
    check(
        fixture.failures.is_empty() && series_fail == 0 && quad_fail == 0 && points >= 10_000 && elapsed < Duration::from_secs(30),
        format!(
            "{points} points; high-precision fixture failures {} (worst error/tolerance: {}); series failures {series_fail}; quadrature failures {quad_fail}; {elapsed:.1?}",
            fixture.failures.len(),
            worst.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn ln_choose(k: u32, y: u32) -> f64 {
    (0..y.min(k - y))
        .map(|i| ((k - i) as f64 / (i + 1) as f64).ln())
        .sum()
}

fn criterion_2() -> Verdict {
    let mut rng = RngStream::new(12, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mu = rng.uniform_range(0.01, 0.99);
        let tau = 10f64.powf(rng.uniform_range(-1.0, 3.0));
        let votes = VoteCount::new(rng.below(31) as u32, rng.below(31) as u32);
        let prior = BetaBelief::new(mu, tau).unwrap();
        let post = posterior(&prior, votes);
        let ev = log_evidence(&prior, votes);
        let (y, n) = (votes.yes as f64, votes.no as f64);
        for i in 0..1001 {
            let theta = (i as f64 + 0.5) / 1001.0;
            let lik = ln_choose(votes.total(), votes.yes) + y * theta.ln() + n * (-theta).ln_1p();
            let lhs = prior.ln_pdf(theta) + lik - ev;
            let rhs = post.ln_pdf(theta);
            // relative density error
            let rel = (lhs - rhs).exp_m1().abs();
            worst = worst.max(rel);
        }
    }
    check(
        worst <= 1e-9,
        format!("1000 draws x 1001 grid points, worst relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Verdict {
    let mut rng = RngStream::new(13, 0);
    let mut worst_sum = 0.0f64;
    for _ in 0..200 {
        let b = BetaBelief::new(
            rng.uniform_range(1e-3, 1.0 - 1e-3),
            10f64.powf(rng.uniform_range(-3.0, 4.0)),
        )
        .unwrap();
        for k in 0..=50u32 {
            let s: f64 = (0..=k).map(|y| predictive_pmf(&b, k, y).unwrap()).sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
        }
    }
    let mut worst_uniform = 0.0f64;
    for k in 0..=50u32 {
        for y in 0..=k {
            let p = predictive_pmf(&BetaBelief::uniform(), k, y).unwrap();
            worst_uniform = worst_uniform.max((p - 1.0 / (k + 1) as f64).abs());
        }
    }
    check(
        worst_sum <= 1e-10 && worst_uniform <= 1e-12,
        format!("normalization error {worst_sum:.2e}, uniform-prior error {worst_uniform:.2e}"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Verdict {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (arch, enc) in [
        (Architecture::Ml, AlienEncoding::None),
        (Architecture::Av, AlienEncoding::Raw),
        (Architecture::Av, AlienEncoding::Prob),
        (Architecture::Iav, AlienEncoding::Raw),
        (Architecture::Iav, AlienEncoding::Maj),
    ] {
        let r = common::gradcheck::check(arch, enc);
        ok &= r.failures.is_empty() && r.checked > 0;
        lines.push(format!(
            "{}-{} {} entries worst {:.1e}",
            arch.as_str(),
            enc.as_str(),
            r.checked,
            r.worst
        ));
    }
    let elapsed = started.elapsed();
    check(
        ok && elapsed < Duration::from_secs(120),
        format!(
            "{}; tolerance {:.0e}; {elapsed:.1?}",
            lines.join(", "),
            common::gradcheck::REL_TOL
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Verdict {
    let mut rng = RngStream::new(15, 0);
    let trials = 100_000;
    let zeros = (0..trials)
        .filter(|_| !simulate_gold(0.66, &mut rng).unwrap())
        .count();
    let rate = zeros as f64 / trials as f64;
    check(
        (rate - 0.268).abs() <= 0.01,
        format!("Pr(label 0 | θ=0.66) = {rate:.4} over {trials} trials"),
    )
}

// ---------------------------------------------------------------- criterion 6

fn large_world() -> Dataset {
    generate(&WorldConfig {
        locations: 5000,
        seed: 6,
        ..WorldConfig::default()
    })
    .unwrap()
    .data
}

fn criterion_6(data: &Dataset) -> Verdict {
    let prior = data.generating_prior().unwrap();
    let theta = data.true_theta_matrix().unwrap();
    let mut ok = data.num_pairs() >= 100_000;
    let mut parts = vec![format!("{} pairs", data.num_pairs())];
    for delta in [0.05, 0.01, 0.10] {
        let cfg = PredictorConfig::new(0.66, delta).unwrap();
        for mode in [Mode::Prior, Mode::Posterior] {
            let preds = prior
                .iter()
                .zip(data.vote_matrix())
                .map(|(b, v)| predict(&mode_belief(b, *v, mode), &cfg).unwrap());
            let audit = fpr_audit(preds.zip(theta.iter().copied()), cfg.mu_min());
            let bound = audit.bound(delta);
            ok &= !audit.empty && audit.rate <= bound;
            parts.push(format!(
                "δ={delta} {mode:?}: fpr {:.4} <= {bound:.4} over {} Yes",
                audit.rate, audit.yes_count
            ));
        }
    }
    check(ok, parts.join("; "))
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9(data: &Dataset) -> Verdict {
    let s = data.sparsity();
    let (v, single) = (s.voted_fraction(), s.single_vote_fraction());
    check(
        s.pairs >= 100_000 && (v - 0.13).abs() <= 0.01 && (single - 0.50).abs() <= 0.01,
        format!(
            "{} pairs: voted {v:.4} (target 0.13), single-vote {single:.4} (target 0.50)",
            s.pairs
        ),
    )
}

// ------------------------------------------------------------ criteria 7 and 8

struct Trained {
    name: String,
    beliefs: Vec<BetaBelief>,
}

fn train(data: &Dataset, arch: Architecture, enc: AlienEncoding) -> (Estimator, Vec<BetaBelief>) {
    let spec = EstimatorSpec::smoke(arch, enc, data.num_attributes());
    let mut est = Estimator::new(spec, data.attributes().to_vec(), 7).unwrap();
    let examples = TrainingExample::from_dataset(&spec, data).unwrap();
    est.train(&TrainConfig::default(), &examples, |_| {})
        .unwrap();
    let beliefs = est.dataset_beliefs(data).unwrap();
    (est, beliefs)
}

fn criterion_7(data: &Dataset, ml: &Trained, elapsed: Duration) -> Verdict {
    let mut ok = elapsed < Duration::from_secs(15 * 60);
    let mut parts = Vec::new();
    for (n, yes) in [(1, 1), (2, 2)] {
        let table = calibration(
            ml.beliefs
                .iter()
                .copied()
                .zip(data.vote_matrix().iter().copied()),
            n,
            yes,
            10,
        )
        .unwrap();
        let big: Vec<_> = table.bins.iter().filter(|b| b.count >= 500).collect();
        let worst = big
            .iter()
            .map(|b| (b.empirical - b.mean_predicted).abs())
            .fold(0.0, f64::max);
        ok &= !big.is_empty() && worst <= 0.07;
        parts.push(format!(
            "n={n} Y={yes}: {} bins with >=500 pairs, worst deviation {worst:.4}",
            big.len()
        ));
    }
    parts.push(format!("train+eval {elapsed:.1?}"));
    check(ok, parts.join("; "))
}

fn report(data: &Dataset, m: &Trained, mode: Mode, kind: PredictorKind) -> EvalReport {
    evaluate(
        &m.name,
        data,
        Some(&m.beliefs),
        mode,
        kind,
        &PredictorConfig::default(),
    )
    .unwrap()
}

fn criterion_8(data: &Dataset, models: &[Trained]) -> Verdict {
    let [ml, av, iav, zeroed] = models else {
        unreachable!()
    };
    let post = |m: &Trained, k| report(data, m, Mode::Posterior, k);
    let conf = |m: &Trained| post(m, PredictorKind::Confidence);
    let (ml_c, av_c, iav_c, z_c) = (conf(ml), conf(av), conf(iav), conf(zeroed));

    let a = av_c.prf.recall > ml_c.prf.recall && iav_c.prf.recall > ml_c.prf.recall;
    let mut parts = vec![format!(
        "(a) posterior recall ml {:.3} av {:.3} iav {:.3}",
        ml_c.prf.recall, av_c.prf.recall, iav_c.prf.recall
    )];

    let (tau_av, tau_z) = (av_c.mean_tau.unwrap(), z_c.mean_tau.unwrap());
    let b = tau_z < tau_av && z_c.prf.recall < av_c.prf.recall;
    parts.push(format!(
        "(b) mean τ zeroed {tau_z:.3} vs av {tau_av:.3}, recall zeroed {:.3} vs av {:.3}",
        z_c.prf.recall, av_c.prf.recall
    ));

    let mut c = true;
    let mut d = true;
    let mut c_parts = Vec::new();
    let mut d_parts = Vec::new();
    for m in models {
        let hr = post(m, PredictorKind::HighRecall);
        let cg = conf(m);
        c &= hr.prf.recall > cg.prf.recall && cg.prf.precision > hr.prf.precision;
        c_parts.push(format!(
            "{} r {:.3}>{:.3} p {:.3}>{:.3}",
            m.name, hr.prf.recall, cg.prf.recall, cg.prf.precision, hr.prf.precision
        ));
        for kind in [PredictorKind::Confidence, PredictorKind::HighRecall] {
            let prior_f1 = report(data, m, Mode::Prior, kind).prf.f1;
            let post_f1 = post(m, kind).prf.f1;
            d &= post_f1 >= prior_f1;
            d_parts.push(format!("{} {kind:?} {prior_f1:.3}->{post_f1:.3}", m.name));
        }
    }
    parts.push(format!("(c) {}", c_parts.join(", ")));
    parts.push(format!("(d) F1 prior->posterior {}", d_parts.join(", ")));
    check(a && b && c && d, parts.join("; "))
}

// --------------------------------------------------------------- criterion 10

fn cli(args: &[&str]) -> Result<(), String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = yesrate::cli::run(
        std::iter::once("yesrate").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    if code == 0 {
        Ok(())
    } else {
        Err(format!(
            "{args:?} exited {code}: {}",
            String::from_utf8_lossy(&err)
        ))
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn criterion_10() -> Verdict {
    let t = TempDir::new().unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let cfg = t.path().join("world.toml");
    std::fs::write(&cfg, "locations = 800\nseed = 10\n").unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    let dirs: Vec<_> = (0..2).map(|i| t.path().join(format!("data{i}"))).collect();
    for d in &dirs {
        cli(&[
            "generate",
            "--config",
            &s(&cfg),
            "--out",
            &s(d),
            "--with-prior",
        ])?;
    }
    let same = dir_bytes(&dirs[0]) == dir_bytes(&dirs[1]);
    ok &= same;
    parts.push(format!("generate identical: {same}"));
    for arch in ["ml", "av", "iav"] {
        let cks: Vec<_> = (0..2)
            .map(|i| t.path().join(format!("{arch}{i}.ck")))
            .collect();
        for ck in &cks {
            cli(&[
                "train",
                "--data",
                &s(&dirs[0]),
                "--arch",
                arch,
                "--preset",
                "smoke",
                "--epochs",
                "2",
                "--seed",
                "3",
                "--out",
                &s(ck),
            ])?;
        }
        let same = std::fs::read(&cks[0]).unwrap() == std::fs::read(&cks[1]).unwrap();
        ok &= same;
        parts.push(format!("train {arch} identical: {same}"));
    }
    check(ok, parts.join(", "))
}

// ------------------------------------------------------------------------ main

fn main() {
    let mut failed = 0;
    let mut emit = |n: u32, name: &str, v: Verdict| {
        let (tag, detail) = match v {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} {tag} {name}: {detail}");
    };

    emit(1, "numerics oracles", criterion_1());
    emit(2, "Bayes identity", criterion_2());
    emit(3, "predictive normalization", criterion_3());
    emit(4, "gradient correctness", criterion_4());
    emit(5, "gold-label ceiling", criterion_5());

    let large = large_world();
    emit(6, "tunable precision", criterion_6(&large));

    let started = Instant::now();
    let data = generate(&WorldConfig::default()).unwrap().data;
    let (_, ml) = train(&data, Architecture::Ml, AlienEncoding::None);
    let ml = Trained {
        name: "ml".into(),
        beliefs: ml,
    };
    emit(7, "calibration", criterion_7(&data, &ml, started.elapsed()));

    let (mut av_est, av) = train(&data, Architecture::Av, AlienEncoding::Raw);
    av_est.set_zero_alien(true).unwrap();
    let zeroed = av_est.dataset_beliefs(&data).unwrap();
    let (_, iav) = train(&data, Architecture::Iav, AlienEncoding::Raw);
    let models = [
        ml,
        Trained {
            name: "av-raw".into(),
            beliefs: av,
        },
        Trained {
            name: "iav-raw".into(),
            beliefs: iav,
        },
        Trained {
            name: "av-zeroed".into(),
            beliefs: zeroed,
        },
    ];
    emit(8, "trend reproduction", criterion_8(&data, &models));

    emit(9, "sparsity realism", criterion_9(&large));
    emit(10, "determinism", criterion_10());

    println!("{} of 10 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
