//! Greedy designs re-scored by an independent exhaustive search and compared
//! with the bundled ensembles.

use itertools::Itertools;
use pbrl::bound::{bound_profile, full_bound, reduced_bound, BoundValue};
use pbrl::designer::{design_pbd, design_threshold, DesignConstraints, DesignRecord};
use pbrl::fixtures;
use pbrl::threshold::{threshold, threshold_profile, DEFAULT_MAX_ITER, DEFAULT_TOL_DB};
use pbrl::Protomatrix;

/// Weight-three 0/1 core rows, built without the library's enumerator.
fn weight_three_rows(n_vh: usize) -> Vec<Vec<u8>> {
    (0..n_vh)
        .combinations(3)
        .map(|cols| (0..n_vh).map(|c| cols.contains(&c) as u8).collect())
        .collect()
}

/// Best bound over all one-row extensions, and how many rows reach it.
/// Shallow histories use full enumeration; deeper ones use the uncached
/// reduced path, which the bound oracle suite checks against it.
fn best_extension(p: &Protomatrix) -> (BoundValue, usize) {
    let engine = if p.n_c() <= 4 {
        full_bound
    } else {
        reduced_bound
    };
    let scores: Vec<BoundValue> = weight_three_rows(8)
        .iter()
        .map(|r| engine(&p.extend(r).unwrap()).unwrap())
        .collect();
    let best = *scores.iter().max().unwrap();
    (best, scores.iter().filter(|&&s| s == best).count())
}

fn check_record_against_oracle(rec: &DesignRecord) {
    let base = rec.hrc.n_c();
    let mut prev = rec.hrc_bound;
    for row in &rec.rows {
        let history = rec.protomatrix.prefix(base + row.round - 1).unwrap();
        let (best, ties) = best_extension(&history);
        assert_eq!(row.bound, best, "round {}", row.round);
        assert_eq!(row.ties, ties, "round {}", row.round);
        assert_eq!(
            reduced_bound(&history.extend(&row.row).unwrap()).unwrap(),
            best
        );
        assert!(row.bound >= prev, "bound fell in round {}", row.round);
        assert_eq!(row.row.iter().filter(|&&v| v == 1).count(), 3);
        assert!(row.row.iter().all(|&v| v <= 1));
        prev = row.bound;
    }
}

#[test]
fn pbd_rounds_match_exhaustive_rescoring() {
    let c = DesignConstraints::weight_four(7);
    for (hrc, seed) in [(fixtures::hrc(), 1), (fixtures::hrc_punctured(), 2)] {
        let rec = design_pbd(&hrc, &c, seed).unwrap();
        assert_eq!(rec.rows.len(), 7);
        check_record_against_oracle(&rec);
    }
}

#[test]
fn pbd_design_profile_dominates_the_threshold_design() {
    let p2 = bound_profile(&fixtures::p2()).unwrap();
    for seed in 0..3 {
        let rec = design_pbd(&fixtures::hrc(), &DesignConstraints::weight_four(7), seed).unwrap();
        let mine = bound_profile(&rec.protomatrix).unwrap();
        assert_eq!(mine.len(), p2.len());
        for (a, b) in mine.iter().zip(&p2) {
            assert_eq!(a.rate, b.rate);
            assert!(
                a.bound >= b.bound,
                "seed {seed} at {}: {} < {}",
                a.rate,
                a.bound,
                b.bound
            );
        }
    }
}

#[test]
fn published_rows_never_beat_the_greedy_choice() {
    for p in [fixtures::p1(), fixtures::p3()] {
        let h = p.hrc_shape().unwrap();
        for rows in h.checks..p.n_c() {
            let history = p.prefix(rows).unwrap();
            let (best, _) = best_extension(&history);
            let published = reduced_bound(&p.prefix(rows + 1).unwrap()).unwrap();
            assert!(published <= best, "row {}: {published} > {best}", rows + 1);
        }
    }
}

#[test]
fn threshold_design_with_unweighted_rows_matches_the_best_ensemble() {
    let c = DesignConstraints {
        row_weight: None,
        max_entry: 1,
        forced_columns: [1].into(),
        num_irc_rows: 8,
    };
    let rec = design_threshold(&fixtures::hrc_punctured(), &c, 5).unwrap();
    for row in &rec.rows {
        assert_eq!(
            row.row[0], 1,
            "forced column missing in round {}",
            row.round
        );
        assert_eq!(row.candidates, 128);
    }

    // Each round's threshold is the minimum over its candidates.
    let first = &rec.rows[0];
    let best = weight_rows_with_first_column()
        .iter()
        .map(|r| {
            threshold(
                &rec.hrc.extend(r).unwrap(),
                DEFAULT_TOL_DB,
                DEFAULT_MAX_ITER,
            )
            .map(|t| t.eb_n0_db)
            .unwrap_or(f64::INFINITY)
        })
        .fold(f64::INFINITY, f64::min);
    assert_eq!(first.threshold_db, Some(best));

    let mine = threshold_profile(&rec.protomatrix, DEFAULT_TOL_DB, DEFAULT_MAX_ITER).unwrap();
    let p3 = threshold_profile(&fixtures::p3(), DEFAULT_TOL_DB, DEFAULT_MAX_ITER).unwrap();
    for (a, b) in mine.iter().zip(&p3) {
        assert_eq!(a.rate, b.rate);
        assert!(
            a.threshold.eb_n0_db <= b.threshold.eb_n0_db + 0.05,
            "{}: {} vs {}",
            a.rate,
            a.threshold.eb_n0_db,
            b.threshold.eb_n0_db
        );
    }
}

/// Every 0/1 core row over eight columns with the first entry set.
fn weight_rows_with_first_column() -> Vec<Vec<u8>> {
    (0..128u32)
        .map(|mask| {
            let mut row = vec![1u8];
            row.extend((0..7).map(|b| ((mask >> b) & 1) as u8));
            row
        })
        .collect()
}
