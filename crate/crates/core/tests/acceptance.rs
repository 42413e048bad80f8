//! Acceptance checks, one line per criterion. Runs offline.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::criteria::{self, Outcome};

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "1 golden replay of both worked tasks",
            limit: Duration::from_secs(5),
            run: criteria::golden_replay,
        },
        Criterion {
            name: "2 DSL programs reproduce train outputs",
            limit: Duration::from_secs(1),
            run: criteria::dsl_ground_truth,
        },
        Criterion {
            name: "3 interpreter algebra on 1000 grids",
            limit: Duration::from_secs(10),
            run: || criteria::interpreter_algebra(1000),
        },
        Criterion {
            name: "4 object extraction vs union-find oracle",
            limit: Duration::from_secs(30),
            run: || criteria::object_extraction(1000),
        },
        Criterion {
            name: "5 filter keeps planted programs, drops decoys",
            limit: Duration::from_secs(60),
            run: || criteria::filter_soundness(50),
        },
        Criterion {
            name: "6 top-k equals brute-force scan, survives reopen",
            limit: Duration::from_secs(60),
            run: || criteria::knn_exactness(1000, 1000),
        },
        Criterion {
            name: "7 memory refinement loop bounds",
            limit: Duration::from_secs(5),
            run: criteria::memory_loop_bounds,
        },
        Criterion {
            name: "8 redaction matches golden files",
            limit: Duration::from_secs(1),
            run: criteria::format_fidelity,
        },
        Criterion {
            name: "9 identical report.json across runs",
            limit: Duration::from_secs(10),
            run: criteria::reproducibility,
        },
    ];

    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; took {elapsed:.2?}, limit {:?}", c.limit)),
            Err(e) => (false, e),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "[{}] {} ({:.2?} / {:?}): {}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed,
            c.limit,
            detail
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
