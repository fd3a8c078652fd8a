//! The twelve acceptance criteria, each printed as one PASS/FAIL line.
//!
//! Set `ACCEPTANCE_ONLY=3,9` to run a subset.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use itertools::Itertools;
use pbrl::bound::{
    bound_profile, count_punctured_subsets, full_bound, reduced_bound, reduced_bound_report,
    subset_sum, BoundValue,
};
use pbrl::fixtures;
use pbrl::lifting::{lift_cpeg_ace, DEFAULT_ACE_DEPTH};
use pbrl::permanent::{perm_naive, perm_reduced, perm_ryser, SquareIntMatrix};
use pbrl::protomatrix::{HrcShape, Protomatrix};
use pbrl::simulator::{transmit, BpDecoder, DecodeStatus, Encoder, FerConfig, Harness, RateMember};
use pbrl::threshold::{threshold_profile, DEFAULT_MAX_ITER, DEFAULT_TOL_DB};
use pbrl::{LiftedCode, RatePoint};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Operating point where the rate-6/15 P3 code sits near FER 1e-3.
const FER_SNR_DB: f64 = 2.4;
const FER_GRID_DB: [f64; 3] = [1.0, 1.5, 2.0];

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn rate(s: &str) -> RatePoint {
    s.parse().unwrap()
}

fn timed(limit: Duration, f: impl FnOnce() -> Result<String, String>) -> Result<String, String> {
    let start = Instant::now();
    let detail = f()?;
    let took = start.elapsed();
    ensure!(took <= limit, "took {took:?}, limit {limit:?}");
    Ok(format!("{detail} in {took:.2?}"))
}

fn hrc_bounds() -> Result<String, String> {
    timed(Duration::from_secs(1), || {
        for (p, want) in [(fixtures::hrc(), 12), (fixtures::hrc_punctured(), 8)] {
            let r = reduced_bound(&p).map_err(|e| e.to_string())?;
            let f = full_bound(&p).map_err(|e| e.to_string())?;
            ensure!(
                r == BoundValue::Finite(want),
                "reduced {r}, expected {want}"
            );
            ensure!(f == BoundValue::Finite(want), "full {f}, expected {want}");
        }
        Ok("12 unpunctured, 8 punctured".into())
    })
}

fn appendix_counterexample() -> Result<String, String> {
    timed(Duration::from_secs(1), || {
        let p = fixtures::appendix();
        let s1 = subset_sum(&p, &[1, 2, 3, 4])
            .map_err(|e| e.to_string())?
            .value;
        let s2 = subset_sum(&p, &[2, 3, 4, 7])
            .map_err(|e| e.to_string())?
            .value;
        let rows: Vec<Vec<u64>> = p
            .rows()
            .map(|r| [0, 2, 3].iter().map(|&c| r[c] as u64).collect())
            .collect();
        let m = SquareIntMatrix::from_rows(&rows).unwrap();
        let perm = perm_ryser(&m).unwrap();
        ensure!(s1 == 17, "subset {{1,2,3,4}} = {s1}");
        ensure!(perm == 5, "perm of columns {{1,3,4}} = {perm}");
        ensure!(s2 == 19, "subset {{2,3,4,7}} = {s2}");
        Ok("17, 5, 19".into())
    })
}

fn random_pbrl(rng: &mut ChaCha8Rng) -> Protomatrix {
    let n_ch = rng.random_range(1..=3);
    let n_vh = rng.random_range(n_ch + 1..=8);
    let n_ir = rng.random_range(0..=8 - n_ch);
    let (n_c, n_v) = (n_ch + n_ir, n_vh + n_ir);
    let mut rows = vec![vec![0u8; n_v]; n_c];
    for (r, row) in rows.iter_mut().enumerate() {
        let max = if r < n_ch { 2 } else { 1 };
        for x in row.iter_mut().take(n_vh) {
            *x = rng.random_range(0..=max);
        }
        if r >= n_ch {
            row[n_vh + r - n_ch] = 1;
        }
    }
    let mut punct: Vec<usize> = (1..=n_vh).collect();
    punct.shuffle(rng);
    punct.truncate(rng.random_range(0..=2usize.min(n_c - 1)));
    Protomatrix::new(
        rows,
        punct,
        Some(HrcShape {
            checks: n_ch,
            vars: n_vh,
        }),
    )
    .unwrap()
}

fn oracle_equivalence() -> Result<String, String> {
    timed(Duration::from_secs(600), || {
        let mut prefixes = 0;
        for (name, p) in fixtures::ensembles() {
            for rows in 2..=p.n_c() {
                let q = p.prefix(rows).unwrap();
                let full = full_bound(&q).map_err(|e| e.to_string())?;
                let reduced = reduced_bound(&q).map_err(|e| e.to_string())?;
                ensure!(
                    full == reduced,
                    "{name} at {}: {reduced} vs {full}",
                    q.rate().unwrap()
                );
                prefixes += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut random = 0;
        while random < 200 {
            let p = random_pbrl(&mut rng);
            let full = full_bound(&p).map_err(|e| e.to_string())?;
            if !full.is_finite() {
                continue;
            }
            let reduced = reduced_bound(&p).map_err(|e| e.to_string())?;
            ensure!(full == reduced, "{reduced} vs {full} on\n{p}");
            random += 1;
        }
        Ok(format!(
            "{prefixes} fixture prefixes, {random} random matrices"
        ))
    })
}

fn exhaustive_group2(p: &Protomatrix) -> u128 {
    let h = p.hrc_shape().unwrap();
    let ir: Vec<usize> = (h.vars + 1..=p.n_v()).collect();
    (1..=p.n_v())
        .combinations(p.n_c() + 1)
        .filter(|s| s.iter().any(|&c| p.is_punctured(c)))
        .filter(|s| !ir.iter().all(|c| s.contains(c)))
        .count() as u128
}

fn complexity_counters() -> Result<String, String> {
    let mut checked = 0;
    for (name, p) in fixtures::ensembles() {
        for rows in 2..=p.n_c() {
            let q = p.prefix(rows).unwrap();
            let r = reduced_bound_report(&q, None).map_err(|e| e.to_string())?;
            ensure!(
                r.group1_subsets == 56,
                "{name} rows {rows}: {} subsets",
                r.group1_subsets
            );
            let counted = count_punctured_subsets(&q).map_err(|e| e.to_string())?;
            let exhaustive = exhaustive_group2(&q);
            ensure!(
                counted == exhaustive,
                "{name} rows {rows}: {counted} vs {exhaustive}"
            );
            ensure!(
                r.group2_subsets as u128 == counted,
                "{name} rows {rows}: visited {}",
                r.group2_subsets
            );
            if q.n_p() == 0 {
                ensure!(
                    r.subsets == 56,
                    "{name} rows {rows}: {} sets in total",
                    r.subsets
                );
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} prefixes"))
}

fn extension_monotonicity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut extensions = 0;
    for core in [fixtures::hrc(), fixtures::hrc_punctured()] {
        let n_vh = core.n_v();
        let d_core = reduced_bound(&core).map_err(|e| e.to_string())?;
        for _ in 0..500 {
            let mut p = core.clone();
            let mut prev = d_core;
            for _ in 0..rng.random_range(1..=5) {
                let row: Vec<u8> = (0..n_vh).map(|_| rng.random_range(0..=1)).collect();
                p = p.extend(&row).map_err(|e| e.to_string())?;
                let b = reduced_bound(&p).map_err(|e| e.to_string())?;
                ensure!(
                    b >= prev && prev >= d_core,
                    "{b} after {prev} (core {d_core}) on\n{p}"
                );
                prev = b;
            }
            extensions += 1;
        }
    }
    Ok(format!("{extensions} extensions, no violations"))
}

fn permanent_engines() -> Result<String, String> {
    timed(Duration::from_secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for i in 0..10_000 {
            let dim = rng.random_range(1..=8);
            let zero_bias = rng.random_range(0.0..0.7);
            let entries: Vec<u64> = (0..dim * dim)
                .map(|_| {
                    if rng.random_bool(zero_bias) {
                        0
                    } else {
                        rng.random_range(0..=3)
                    }
                })
                .collect();
            let m = SquareIntMatrix::new(dim, entries).unwrap();
            let (a, b, c) = (
                perm_naive(&m).unwrap(),
                perm_ryser(&m).unwrap(),
                perm_reduced(&m).unwrap(),
            );
            ensure!(
                a == b && b == c,
                "matrix {i}: naive {a}, ryser {b}, reduced {c}"
            );
        }
        Ok("10000 matrices agree".into())
    })
}

fn profiles<T>(
    f: impl Fn(&Protomatrix) -> Vec<(RatePoint, T)>,
) -> BTreeMap<&'static str, Vec<(RatePoint, T)>> {
    fixtures::ensembles()
        .into_iter()
        .map(|(n, p)| (n, f(&p)))
        .collect()
}

fn at<T: Copy>(profile: &[(RatePoint, T)], r: RatePoint) -> Option<T> {
    profile.iter().find(|(q, _)| *q == r).map(|&(_, v)| v)
}

fn bound_ordering() -> Result<String, String> {
    let all = profiles(|p| {
        bound_profile(p)
            .unwrap()
            .into_iter()
            .map(|pt| (pt.rate, pt.bound))
            .collect()
    });
    let mut compared = 0;
    for &(r, b5) in &all["P5"] {
        for (name, prof) in &all {
            if let Some(b) = at(prof, r) {
                ensure!(b5 <= b, "at {r}: P5 {b5} exceeds {name} {b}");
                compared += 1;
            }
        }
    }
    let mut exceptions = Vec::new();
    for &(r, b1) in &all["P1"] {
        let b2 = at(&all["P2"], r).ok_or(format!("P2 has no rate {r}"))?;
        if b1 < b2 {
            exceptions.push(format!("{r}: {b1} < {b2}"));
        }
    }
    ensure!(exceptions.len() <= 1, "P1 below P2 at {exceptions:?}");
    Ok(format!(
        "{compared} comparisons with P5, P1 below P2 at {exceptions:?}"
    ))
}

fn threshold_ordering() -> Result<String, String> {
    let all = profiles(|p| {
        threshold_profile(p, DEFAULT_TOL_DB, DEFAULT_MAX_ITER)
            .unwrap()
            .into_iter()
            .map(|pt| (pt.rate, pt.threshold.eb_n0_db))
            .collect()
    });
    for &(r, t5) in &all["P5"] {
        for (name, prof) in &all {
            if let Some(t) = at(prof, r) {
                ensure!(t5 <= t, "at {r}: P5 {t5:.3} dB above {name} {t:.3} dB");
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (a, b) in [("P1", "P2"), ("P3", "P4")] {
        for &(r, ta) in &all[a] {
            if let Some(tb) = at(&all[b], r) {
                let gap = (ta - tb).abs();
                ensure!(gap <= 0.2, "at {r}: {a} {ta:.3} dB vs {b} {tb:.3} dB");
                worst = worst.max(gap);
            }
        }
    }
    Ok(format!(
        "P5 best everywhere, largest pair gap {worst:.3} dB"
    ))
}

fn lifting_girth() -> Result<String, String> {
    let p = fixtures::p3();
    let mut good = 0;
    let mut girths = Vec::new();
    for seed in 0..10 {
        let code = lift_cpeg_ace(&p, 33, seed, DEFAULT_ACE_DEPTH).map_err(|e| e.to_string())?;
        ensure!(code.k() == 198, "seed {seed}: k = {}", code.k());
        let g = code.girth();
        good += usize::from(g >= pbrl::Girth::Finite(6));
        girths.push(g.to_string());
    }
    ensure!(good >= 9, "girth >= 6 for only {good} seeds: {girths:?}");
    Ok(format!("girths {}, k = 198", girths.join(" ")))
}

fn ml_even_weight(llr: &[f64]) -> Vec<u8> {
    (0u8..16)
        .filter(|m| m.count_ones() % 2 == 0)
        .map(|m| (0..4).map(|i| (m >> i) & 1).collect::<Vec<u8>>())
        .max_by(|a, b| {
            let score = |x: &[u8]| -> f64 {
                x.iter()
                    .zip(llr)
                    .map(|(&b, &l)| if b == 0 { l } else { -l })
                    .sum()
            };
            score(a).total_cmp(&score(b))
        })
        .unwrap()
}

fn decoder_correctness() -> Result<String, String> {
    let spc: Protomatrix = "proto 1 4\n1 1 1 1\n".parse().unwrap();
    let code = LiftedCode::new(spc, 1, vec![vec![0]; 4]).unwrap();
    let enc = Encoder::new(&code).unwrap();
    let member = RateMember::new(&code, rate("3/4")).unwrap();
    let h = code.expand();
    let dec = BpDecoder::new(&h);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut converged = 0;
    for i in 0..100_000 {
        let info: Vec<u8> = (0..3).map(|_| rng.random::<bool>() as u8).collect();
        let x = enc.encode(&info).unwrap();
        ensure!(h.is_codeword(&x), "frame {i} has a nonzero syndrome");
        let llr = transmit(&x, &member, 1.0, &mut rng).unwrap();
        let out = dec.decode(&llr, 10).unwrap();
        if out.status == DecodeStatus::Converged {
            converged += 1;
            ensure!(
                out.bits == ml_even_weight(&llr),
                "frame {i} differs from ML"
            );
        }
    }
    let lifted = lift_cpeg_ace(&fixtures::p3(), 33, 0, DEFAULT_ACE_DEPTH).unwrap();
    let enc = Encoder::new(&lifted).unwrap();
    let h = lifted.expand();
    for i in 0..1000 {
        let info: Vec<u8> = (0..enc.k()).map(|_| rng.random::<bool>() as u8).collect();
        ensure!(
            h.is_codeword(&enc.encode(&info).unwrap()),
            "P3 frame {i} has a nonzero syndrome"
        );
    }
    Ok(format!("{converged} converged frames equal ML"))
}

fn desk_scale_fer() -> Result<String, String> {
    let r = rate("6/15");
    let lift = |p: &Protomatrix| lift_cpeg_ace(p, 33, 0, DEFAULT_ACE_DEPTH).unwrap();
    let cfg = FerConfig::new(100, 1_000_000, 1);
    let p3 = Harness::new(&lift(&fixtures::p3()))
        .unwrap()
        .fer_run(r, FER_SNR_DB, &cfg)
        .unwrap();
    let p5 = Harness::new(&lift(&fixtures::p5()))
        .unwrap()
        .fer_run(r, FER_SNR_DB, &cfg)
        .unwrap();
    let (lo3, hi3) = p3.fer_interval();
    let (lo5, hi5) = p5.fer_interval();
    let summary = format!(
        "P3 {}/{} [{lo3:.2e}, {hi3:.2e}], P5 {}/{} [{lo5:.2e}, {hi5:.2e}] at {FER_SNR_DB} dB",
        p3.frame_errors, p3.frames_run, p5.frame_errors, p5.frames_run
    );
    ensure!(p3.frame_errors >= 100, "too few errors: {summary}");
    ensure!(
        (5e-4..=2e-3).contains(&p3.fer()),
        "P3 not near 1e-3: {summary}"
    );
    ensure!(p3.fer() <= p5.fer() && hi3 < lo5, "{summary}");

    let grid_cfg = FerConfig::new(100, 50_000, 2);
    let mut curves = Vec::new();
    for (name, p) in fixtures::ensembles() {
        let harness = Harness::new(&lift(&p)).unwrap();
        let fers: Vec<f64> = FER_GRID_DB
            .iter()
            .map(|&snr| harness.fer_run(r, snr, &grid_cfg).unwrap().fer())
            .collect();
        ensure!(
            fers.windows(2).all(|w| w[1] <= w[0]),
            "{name} not monotone: {fers:?}"
        );
        curves.push(format!(
            "{name} {:.1e}/{:.1e}/{:.1e}",
            fers[0], fers[1], fers[2]
        ));
    }
    Ok(format!("{summary}; grid {}", curves.join(", ")))
}

fn pbrl(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pbrl"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

/// Every output file except the manifest, by name.
fn results(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let hrc = root.join("hrc.txt");
    fs::write(&hrc, fixtures::HRC).unwrap();
    let p3 = root.join("p3.txt");
    fs::write(&p3, fixtures::P3).unwrap();
    let sweep = root.join("sweep.txt");
    fs::write(&sweep, "6/12 1.0,1.5 30 2000\n6/15 1.5 20 2000\n").unwrap();
    let code = root.join("code.qc");
    fs::write(
        &code,
        lift_cpeg_ace(&fixtures::p3(), 33, 0, DEFAULT_ACE_DEPTH)
            .unwrap()
            .to_text(),
    )
    .unwrap();
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "design",
            vec![
                "design".into(),
                s(&hrc),
                "--rows".into(),
                "4".into(),
                "--seed".into(),
                "9".into(),
            ],
        ),
        (
            "lift",
            vec![
                "lift".into(),
                s(&p3),
                "--factor".into(),
                "33".into(),
                "--seed".into(),
                "4".into(),
            ],
        ),
        (
            "simulate",
            vec![
                "simulate".into(),
                s(&code),
                s(&sweep),
                "--seed".into(),
                "8".into(),
            ],
        ),
    ];
    for (name, args) in &commands {
        let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
        for workers in [1, 4, 16] {
            let first = root.join(format!("{name}-{workers}"));
            let mut argv: Vec<String> = args.clone();
            argv.extend([
                "--workers".into(),
                workers.to_string(),
                "--out".into(),
                s(&first),
            ]);
            pbrl(&argv.iter().map(String::as_str).collect::<Vec<_>>())?;
            let rerun = root.join(format!("{name}-{workers}-replay"));
            let manifest = s(&first.join("manifest.json"));
            pbrl(&[
                "--workers",
                &workers.to_string(),
                "replay",
                &manifest,
                "--out",
                &s(&rerun),
            ])?;
            let a = results(&first);
            ensure!(!a.is_empty(), "{name} wrote no results");
            ensure!(
                results(&rerun) == a,
                "{name} replay differs with {workers} workers"
            );
            match &reference {
                None => reference = Some(a),
                Some(r) => ensure!(
                    *r == a,
                    "{name} with {workers} workers differs from 1 worker"
                ),
            }
        }
    }
    Ok("design, lift and simulate identical with 1, 4 and 16 workers and on replay".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Check); 12] = [
        ("core bound values", hrc_bounds),
        ("appendix counterexample", appendix_counterexample),
        ("reduced equals full enumeration", oracle_equivalence),
        ("enumeration counters", complexity_counters),
        (
            "extension rows never lower the bound",
            extension_monotonicity,
        ),
        ("permanent engines agree", permanent_engines),
        ("bound profile ordering", bound_ordering),
        ("threshold ordering", threshold_ordering),
        ("lifting girth and dimension", lifting_girth),
        ("decoder matches ML", decoder_correctness),
        ("desk-scale FER ordering", desk_scale_fer),
        ("determinism across workers", determinism),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{took:.1?}]"),
            Err(why) => {
                println!("criterion {n:>2} FAIL  {name}: {why} [{took:.1?}]");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
