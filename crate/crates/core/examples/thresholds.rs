//! Prints the threshold profile of every bundled ensemble.

use pbrl::fixtures;
use pbrl::threshold::{threshold, threshold_profile, DEFAULT_MAX_ITER, DEFAULT_TOL_DB};

fn main() {
    let regular: pbrl::Protomatrix = "proto 1 2\n3 3\n".parse().unwrap();
    let t = threshold(&regular, 0.001, DEFAULT_MAX_ITER).unwrap();
    println!("(3,6) regular: {:.3} dB", t.eb_n0_db);
    for (name, p) in fixtures::ensembles() {
        let prof = threshold_profile(&p, DEFAULT_TOL_DB, DEFAULT_MAX_ITER).unwrap();
        let line: Vec<String> = prof
            .iter()
            .map(|pt| format!("{}:{:.2}", pt.rate, pt.threshold.eb_n0_db))
            .collect();
        println!("{name}: {}", line.join("  "));
    }
}
