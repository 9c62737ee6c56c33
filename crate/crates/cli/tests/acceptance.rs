//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use sqkd_core::adversary::{
    eve_information, sample_no_error_attack, theorem1_check, BackwardTap, BasisPolicy, EntangleMeasure, FakeSource,
};
use sqkd_core::analysis::{
    capacity_compare, chi_square_uniform, estimate_detection, evasion_probability, exact_detection, EvasionFamily,
};
use sqkd_core::quantum::{ket, ket_named, s_s, KetLabel, ProductBasis};
use sqkd_core::{run_session, AttackModel, RandomSource, SessionConfig, SessionStatus};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: Duration, detail: String) -> Outcome {
    let elapsed = start.elapsed();
    check(elapsed < budget, format!("{detail}; {:.2} s of {} s", elapsed.as_secs_f64(), budget.as_secs()))
}

fn intercept(fake: &str, backward: BackwardTap) -> AttackModel {
    AttackModel::InterceptResend {
        fake: FakeSource::Fixed(ket_named(fake).unwrap()),
        backward,
    }
}

fn measure(policy: BasisPolicy) -> AttackModel {
    AttackModel::MeasureResend { policy }
}

/// Rounds giving about 10⁵ CTRL rounds.
const ROUNDS_FOR_1E5_CTRL: u64 = 202_000;

fn honest_perfection() -> Outcome {
    let start = Instant::now();
    for seed in 0..100u64 {
        let config = SessionConfig::new(64, 0x5eed_0000 + seed).with_delta(0.25);
        let r = run_session(&config, &AttackModel::NoAttack).map_err(|e| e.to_string())?;
        let ok = r.status == SessionStatus::Completed
            && r.ctrl_error_rate == Some(0.0)
            && r.sift_error_rate == Some(0.0)
            && r.alice_key.as_ref().map(|k| k.len()) == Some(128)
            && r.alice_key == r.bob_key;
        if !ok {
            return Err(format!("seed {seed}: {:?}", r.status));
        }
    }
    within_budget(start, Duration::from_secs(1), "100 honest sessions, L = 64".into())
}

fn sift_uniformity() -> Outcome {
    let start = Instant::now();
    let r = run_session(&SessionConfig::new(10_000, 0xc0ffee), &AttackModel::NoAttack).map_err(|e| e.to_string())?;
    let h = r.sift_check_histogram.ok_or("no SIFT check ran")?;
    let total: u64 = h.iter().sum();
    let freqs: Vec<f64> = h.iter().map(|c| *c as f64 / total as f64).collect();
    let chi = chi_square_uniform(&h).map_err(|e| e.to_string())?;
    let ok = total == 10_000 && freqs.iter().all(|f| (f - 0.25).abs() <= 0.015) && chi.p_value > 0.001;
    if !ok {
        return Err(format!("frequencies {freqs:?}, p = {:.4}", chi.p_value));
    }
    within_budget(
        start,
        Duration::from_secs(1),
        format!("frequencies {freqs:.4?}, chi-square p = {:.4}", chi.p_value),
    )
}

fn intercept_resend_detection() -> Outcome {
    let start = Instant::now();
    let attack = intercept("Hs", BackwardTap::Passthrough);
    let s = estimate_detection(&attack, ROUNDS_FOR_1E5_CTRL, 3).map_err(|e| e.to_string())?;
    let exact = exact_detection(&attack).map_err(|e| e.to_string())?;
    let rate = s.ctrl_detection_rate.estimate;
    if (rate - 0.5).abs() > 0.01 || exact.ctrl_detection != 0.5 || s.ctrl_rounds < 100_000 {
        return Err(format!("sampled {rate} over {} CTRL, exact {}", s.ctrl_rounds, exact.ctrl_detection));
    }
    // SIFT-mode signature: no per-round mismatch, but a skewed outcome histogram.
    let config = SessionConfig::new(10_000, 3).with_thresholds(0.9, 0.0);
    let r = run_session(&config, &attack).map_err(|e| e.to_string())?;
    let h = r.sift_check_histogram.ok_or("no SIFT check ran")?;
    let p = chi_square_uniform(&h).map_err(|e| e.to_string())?.p_value;
    let tv = r.sift_check_tv_distance.unwrap_or(0.0);
    let ok = exact.sift_mismatch == 0.0 && r.sift_error_rate == Some(0.0) && (tv - 0.5).abs() < 1e-12 && p < 1e-6;
    if !ok {
        return Err(format!("SIFT mismatch {:?}, tv {tv}, p {p}", r.sift_error_rate));
    }
    within_budget(
        start,
        Duration::from_secs(5),
        format!(
            "CTRL {rate:.4} over {} rounds, exact {}; SIFT mismatch 0, tv {tv}, p = {p:.1e}",
            s.ctrl_rounds, exact.ctrl_detection
        ),
    )
}

fn measure_resend_detection() -> Outcome {
    let start = Instant::now();
    let fixed = measure(BasisPolicy::Fixed(ProductBasis::ZX));
    let s = estimate_detection(&fixed, ROUNDS_FOR_1E5_CTRL, 4).map_err(|e| e.to_string())?;
    let fixed_rate = s.ctrl_detection_rate.estimate;
    let uniform = measure(BasisPolicy::UniformOverFour);
    let u = estimate_detection(&uniform, ROUNDS_FOR_1E5_CTRL, 5).map_err(|e| e.to_string())?;
    let exact = exact_detection(&uniform).map_err(|e| e.to_string())?.ctrl_detection;
    let uniform_rate = u.ctrl_detection_rate.estimate;
    let ok = (fixed_rate - 0.5).abs() <= 0.01 && exact == 0.4375 && (uniform_rate - exact).abs() <= 0.01;
    let detail = format!("ZpXs {fixed_rate:.4}; uniform {uniform_rate:.4} vs exact {exact}");
    if !ok {
        return Err(detail);
    }
    within_budget(start, Duration::from_secs(5), detail)
}

fn enumerate_all_pass(per_round: &[(f64, bool)], n: u32) -> f64 {
    let k = per_round.len();
    (0..k.pow(n))
        .map(|mut code| {
            let mut p = 1.0;
            for _ in 0..n {
                let (w, pass) = per_round[code % k];
                if !pass {
                    return 0.0;
                }
                p *= w;
                code /= k;
            }
            p
        })
        .sum()
}

fn undetectable_corners() -> Outcome {
    for attack in [
        intercept("Ss", BackwardTap::Passthrough),
        measure(BasisPolicy::Fixed(ProductBasis::XX)),
    ] {
        let s = estimate_detection(&attack, 100_000, 6).map_err(|e| e.to_string())?;
        if s.ctrl_detections != 0 || s.sift_mismatches != 0 {
            return Err(format!("{}: {} CTRL, {} SIFT errors", attack.label(), s.ctrl_detections, s.sift_mismatches));
        }
    }
    let genuine = s_s();
    let fakes: Vec<(f64, bool)> = KetLabel::all()
        .map(|l| (1.0 / 16.0, ket(l).fidelity(&genuine) > 1.0 - 1e-12))
        .collect();
    let bases: Vec<(f64, bool)> = ProductBasis::ALL.iter().map(|b| (0.25, *b == ProductBasis::XX)).collect();
    for n in 1..=8u32 {
        let fake = evasion_probability(EvasionFamily::UniformFake, n as u64);
        let basis = evasion_probability(EvasionFamily::UniformBasis, n as u64);
        let fake_enum = if n <= 4 {
            enumerate_all_pass(&fakes, n)
        } else {
            enumerate_all_pass(&[(1.0 / 16.0, true), (15.0 / 16.0, false)], n)
        };
        let ok = fake == (1.0f64 / 16.0).powi(n as i32)
            && basis == 0.25f64.powi(n as i32)
            && fake == evasion_probability(EvasionFamily::UniformFake, 1).powi(n as i32)
            && basis == evasion_probability(EvasionFamily::UniformBasis, 1).powi(n as i32)
            && fake == fake_enum
            && basis == enumerate_all_pass(&bases, n);
        if !ok {
            return Err(format!("N = {n}: fake {fake}, basis {basis}"));
        }
    }
    Ok("S s fake and XpXs basis: 0 errors in 10^5 rounds; evasion formulas match enumeration for N <= 8".into())
}

fn theorem1_forward() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomSource::new(0x7e01, 0);
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..50 {
        let d = [1, 2, 4, 8][i % 4];
        let attack = sample_no_error_attack(d, &mut rng).map_err(|e| e.to_string())?;
        let r = theorem1_check(&attack);
        worst.0 = worst.0.max(r.error_ctrl.max(r.error_sift));
        worst.1 = worst.1.max(r.max_pairwise_trace_distance);
        if !(r.error_ctrl < 1e-10 && r.error_sift < 1e-10 && r.max_pairwise_trace_distance < 1e-9) {
            return Err(format!("attack {i} (d = {d}): {r:?}"));
        }
    }
    within_budget(
        start,
        Duration::from_secs(5),
        format!("50 attacks, max error {:.1e}, max distance {:.1e}", worst.0, worst.1),
    )
}

fn theorem1_witness() -> Outcome {
    let attack = EntangleMeasure::controlled_orthogonal(4).map_err(|e| e.to_string())?;
    let r = theorem1_check(&attack);
    let distances_one = r.pairwise_distances.len() == 6 && r.pairwise_distances.iter().all(|(_, _, d)| (d - 1.0).abs() < 1e-12);
    check(
        r.error_sift.abs() < 1e-12 && distances_one && (r.error_ctrl - 0.75).abs() < 1e-10,
        format!("error_ctrl {}, error_sift {}, verdict {}", r.error_ctrl, r.error_sift, r.verdict),
    )
}

fn capacity_doubling() -> Outcome {
    for l in [16, 64, 256] {
        let r = capacity_compare(&SessionConfig::new(l, 8)).map_err(|e| e.to_string())?;
        if !(r.ratio == 2.0 && r.key_bits_1dof == l && r.key_bits_2dof == 2 * l) {
            return Err(format!("L = {l}: {r:?}"));
        }
    }
    Ok("ratio 2.0 at L = 16, 64, 256".into())
}

fn eve_information_check() -> Outcome {
    let honest = run_session(&SessionConfig::new(64, 9), &AttackModel::NoAttack).map_err(|e| e.to_string())?;
    let none = eve_information(&honest);
    let config = SessionConfig::new(10_000, 9).with_thresholds(0.9, 0.0);
    let r = run_session(&config, &intercept("Ss", BackwardTap::MeasureZZ)).map_err(|e| e.to_string())?;
    let bits = eve_information(&r);
    let key_rounds = r.key_rounds().count();
    check(
        none == 0.0 && r.status == SessionStatus::Completed && key_rounds == 10_000 && (bits - 2.0).abs() <= 0.05,
        format!("no attack {none}; intercept S s + ZpZs tap {bits:.4} bits over {key_rounds} key rounds"),
    )
}

fn run_cli(dir: &Path, args: &[&str], threads: &str) -> Result<(Option<i32>, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sqkd"))
        .args(args)
        .args(["--threads", threads])
        .env_remove("SQKD_SEED")
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code(), out.stdout))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        ("honest.json", r#"{"session": {"L": 64, "seed": 10}, "attack": "none"}"#),
        (
            "uniform.json",
            r#"{"session": {"L": 64, "seed": 11}, "attack": {"kind": "measure_resend", "basis": "uniform"}}"#,
        ),
        ("random.json", r#"{"session": {"L": 16, "seed": 12}, "attack": "probe-only-random"}"#),
    ];
    for (name, body) in configs {
        fs::write(dir.path().join(name), body).map_err(|e| e.to_string())?;
    }
    let cases: [&[&str]; 9] = [
        &["run", "--config", "honest.json"],
        &["run", "--config", "uniform.json", "--output", "csv"],
        &["run", "--config", "random.json", "--output", "table"],
        &["detect", "--config", "uniform.json", "--trials", "50000"],
        &["detect", "--config", "random.json", "--trials", "5000", "--output", "table"],
        &["theorem1", "--config", "random.json"],
        &["capacity", "--config", "honest.json"],
        &["baseline", "--config", "honest.json", "--output", "csv"],
        &["run", "--config", "honest.json", "--seed", "99"],
    ];
    for args in cases {
        let a = run_cli(dir.path(), args, "1")?;
        let b = run_cli(dir.path(), args, "1")?;
        let c = run_cli(dir.path(), args, "4")?;
        if a.1.is_empty() || a != b || a != c {
            return Err(format!("`sqkd {}` differs between runs", args.join(" ")));
        }
    }
    Ok(format!("{} invocations byte-identical across repeats and --threads 1/4", cases.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("honest-run perfection", honest_perfection),
        ("SIFT outcome uniformity", sift_uniformity),
        ("intercept-resend CTRL detection", intercept_resend_detection),
        ("measure-resend CTRL detection", measure_resend_detection),
        ("undetectable corner cases", undetectable_corners),
        ("zero-error attacks leave the probe independent", theorem1_forward),
        ("probe dependence forces CTRL error", theorem1_witness),
        ("capacity doubling", capacity_doubling),
        ("Eve information", eve_information_check),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
