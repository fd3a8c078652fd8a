//! `reduced_bound` against the full-enumeration reference, plus the counting
//! identities of the reduced path.

use itertools::Itertools;
use pbrl::bound::{
    binomial, count_punctured_subsets, full_bound, full_bound_report, reduced_bound,
    reduced_bound_report, BoundValue,
};
use pbrl::fixtures;
use pbrl::protomatrix::{HrcShape, Protomatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive count of the sets with a punctured column that do not contain
/// every redundancy column.
fn brute_force_group2(p: &Protomatrix) -> u128 {
    let h = p.hrc_shape().unwrap();
    let ir: Vec<usize> = (h.vars + 1..=p.n_v()).collect();
    (1..=p.n_v())
        .combinations(p.n_c() + 1)
        .filter(|s| s.iter().any(|&c| p.is_punctured(c)))
        .filter(|s| !ir.iter().all(|c| s.contains(c)))
        .count() as u128
}

fn random_pbrl(rng: &mut ChaCha8Rng) -> Protomatrix {
    let n_ch = rng.random_range(1..=3);
    let n_vh = rng.random_range(n_ch + 1..=8);
    let n_ir = rng.random_range(0..=8 - n_ch);
    let n_c = n_ch + n_ir;
    let n_v = n_vh + n_ir;
    let mut rows = vec![vec![0u8; n_v]; n_c];
    for (r, row) in rows.iter_mut().enumerate() {
        for x in row.iter_mut().take(n_vh) {
            *x = if r < n_ch {
                rng.random_range(0..=2)
            } else {
                rng.random_range(0..=1)
            };
        }
        if r >= n_ch {
            row[n_vh + r - n_ch] = 1;
        }
    }
    let n_p = rng.random_range(0..=2usize.min(n_c - 1));
    let mut punct: Vec<usize> = (1..=n_vh).collect();
    use rand::seq::SliceRandom;
    punct.shuffle(rng);
    punct.truncate(n_p);
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

#[test]
fn fixture_prefixes_match_full_enumeration() {
    for (name, p) in fixtures::ensembles() {
        for rows in 2..=p.n_c() {
            let q = p.prefix(rows).unwrap();
            let full = full_bound(&q).unwrap();
            let reduced = reduced_bound(&q).unwrap();
            assert!(full.is_finite(), "{name} rows {rows}");
            assert_eq!(reduced, full, "{name} at rate {}", q.rate().unwrap());
        }
    }
}

#[test]
fn random_pbrl_matrices_match_full_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_db0d);
    let mut checked = 0;
    let mut punctured = 0;
    while checked < 250 {
        let p = random_pbrl(&mut rng);
        let full = full_bound(&p).unwrap();
        if !full.is_finite() {
            continue;
        }
        assert_eq!(reduced_bound(&p).unwrap(), full, "mismatch on\n{p}");
        checked += 1;
        punctured += usize::from(p.n_p() > 0);
    }
    assert!(punctured > 50, "only {punctured} punctured cases");
}

#[test]
fn reduced_path_counters() {
    for (name, p) in fixtures::ensembles() {
        for rows in 2..=p.n_c() {
            let q = p.prefix(rows).unwrap();
            let r = reduced_bound_report(&q, None).unwrap();
            assert_eq!(r.group1_subsets, 56, "{name} rows {rows}");
            assert!(
                r.max_core_dim <= 3,
                "{name} rows {rows}: core {}",
                r.max_core_dim
            );
            let eq14 = count_punctured_subsets(&q).unwrap();
            assert_eq!(eq14, brute_force_group2(&q), "{name} rows {rows}");
            assert_eq!(r.group2_subsets as u128, eq14, "{name} rows {rows}");
            if q.n_p() == 0 {
                assert_eq!(r.subsets, 56);
                assert!(r.permanents <= 56 * (q.n_c() as u64 + 1));
            }
        }
    }
}

#[test]
fn punctured_count_on_appendix_matrix() {
    let p = fixtures::appendix();
    assert_eq!(count_punctured_subsets(&p).unwrap(), brute_force_group2(&p));
    // Column 1 plus three of columns 2..6, column 7 excluded: C(5, 3).
    assert_eq!(count_punctured_subsets(&p).unwrap(), 10);
}

#[test]
fn punctured_count_on_rate_six_ninths_prefix() {
    let q = fixtures::p3().prefix(3).unwrap();
    assert_eq!(q.rate().unwrap().to_string(), "6/8");
    let q = fixtures::p3().prefix(4).unwrap();
    assert_eq!(q.rate().unwrap().to_string(), "6/9");
    assert_eq!(count_punctured_subsets(&q).unwrap(), brute_force_group2(&q));
}

#[test]
fn full_enumeration_counts() {
    let r = full_bound_report(&fixtures::p1().prefix(3).unwrap(), u128::MAX).unwrap();
    assert_eq!(r.subsets as u128, binomial(9, 4));
    assert_eq!(r.permanents as u128, binomial(9, 4) * 4);
}

/// Appending any extension row never lowers the bound and never drops it
/// below the bound of the core.
#[test]
fn extension_rows_never_lower_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for core in [fixtures::hrc(), fixtures::hrc_punctured()] {
        let d_core = reduced_bound(&core).unwrap();
        for _ in 0..100 {
            let mut p = core.clone();
            let mut prev = d_core;
            for _ in 0..rng.random_range(1..=4) {
                let row: Vec<u8> = (0..8).map(|_| rng.random_range(0..=1)).collect();
                p = p.extend(&row).unwrap();
                let b = reduced_bound(&p).unwrap();
                assert!(b >= prev && prev >= d_core, "{p}");
                prev = b;
            }
        }
    }
}

fn bump(p: &Protomatrix, r: usize, c: usize) -> Protomatrix {
    let mut rows: Vec<Vec<u8>> = p.rows().map(<[u8]>::to_vec).collect();
    rows[r][c] += 1;
    Protomatrix::new(rows, p.punctured().iter().copied(), None).unwrap()
}

/// Raising one entry of a core-rooted raptor-like matrix never lowers its
/// finite bound.
#[test]
fn incrementing_an_entry_of_a_core_extension_never_lowers_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for core in [fixtures::hrc(), fixtures::hrc_punctured()] {
        for _ in 0..300 {
            let mut p = core.clone();
            for _ in 0..rng.random_range(1..=3) {
                let row: Vec<u8> = (0..8).map(|_| rng.random_range(0..=1)).collect();
                p = p.extend(&row).unwrap();
            }
            let before = full_bound(&p).unwrap();
            if !before.is_finite() {
                continue;
            }
            let (r, c) = (rng.random_range(0..p.n_c()), rng.random_range(0..8));
            let after = full_bound(&bump(&p, r, c)).unwrap();
            assert!(after >= before, "{p} ({r}, {c}): {before} -> {after}");
            checked += 1;
        }
    }
    assert!(checked > 500);
}

/// Outside that family the monotonicity fails: a new non-zero entry can
/// turn a zero subset sum into a small positive one.
#[test]
fn entry_increment_can_lower_a_general_bound() {
    let p: Protomatrix = "proto 1 4\n2 0 0 0\n".parse().unwrap();
    assert_eq!(full_bound(&p).unwrap(), BoundValue::Finite(2));
    assert_eq!(full_bound(&bump(&p, 0, 1)).unwrap(), BoundValue::Finite(1));

    let p: Protomatrix = "proto 2 5\n2 2 0 0 0\n2 1 1 1 1\n".parse().unwrap();
    assert_eq!(full_bound(&p).unwrap(), BoundValue::Finite(4));
    assert_eq!(full_bound(&bump(&p, 0, 2)).unwrap(), BoundValue::Finite(2));
}
