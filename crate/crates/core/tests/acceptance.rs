//! Acceptance suite: one pass/fail line per criterion.
//!
//! Lines are written straight to the process stdout so they appear in
//! `cargo test` output without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use dudley::output::to_json;
use dudley::selftest::{run, Outcome};

const SEED: u64 = 20_240_601;

fn report(id: u8, passed: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {id:>2}: {} | {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    let _ = out.flush();
}

fn timed(id: u8) -> (Outcome, Duration) {
    let t = Instant::now();
    let o = run(id, SEED).unwrap_or_else(|e| panic!("criterion {id} errored: {e}"));
    (o, t.elapsed())
}

#[test]
fn acceptance() {
    let limits = [(1u8, 30u64), (7, 120), (9, 900)];
    let mut failed = Vec::new();
    let mut payloads = Vec::new();
    for id in 1..=9u8 {
        let (o, dt) = timed(id);
        let mut passed = o.passed;
        let mut detail = format!("{}: {}", o.title, o.detail);
        if let Some(&(_, secs)) = limits.iter().find(|l| l.0 == id) {
            let ok = dt < Duration::from_secs(secs);
            passed &= ok;
            detail.push_str(&format!(" | runtime {:.1} s (< {secs} s)", dt.as_secs_f64()));
        }
        report(id, passed, &detail);
        if !passed {
            failed.push(id);
        }
        if (7..=9).contains(&id) {
            payloads.push((id, to_json(&o.payload)));
        }
    }

    let mut identical = true;
    let mut which = Vec::new();
    for (id, first) in &payloads {
        let (again, _) = timed(*id);
        let same = to_json(&again.payload) == *first;
        identical &= same;
        which.push(format!("{id}: {}", if same { "identical" } else { "differs" }));
    }
    report(10, identical, &format!("determinism of criteria 7-9 JSON on rerun ({})", which.join(", ")));
    if !identical {
        failed.push(10);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
