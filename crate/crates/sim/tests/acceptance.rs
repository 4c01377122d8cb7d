//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line. Run with `--nocapture` to see the lines for
//! passing tests:
//!
//! ```text
//! cargo test -p mprx-sim --test acceptance -- --nocapture --test-threads=1
//! ```
//!
//! The suite is split in two so the one criterion that is infeasible by
//! construction stays visible without masking the rest:
//!
//! - `acceptance_criteria` covers criteria 1-6, 8, 9 plus the
//!   loaded-configuration ordering companion, and must pass.
//! - `criterion7_ber_ordering_default_config` runs criterion 7 exactly as
//!   written (default config, 0-16 dB window). The default desk-scale
//!   geometry puts every receiver's waterfall below 0 dB and the two
//!   iterative receivers coincide below BER 1e-3, so the required 0.5 dB
//!   interpolated gap cannot exist in that window; the test runs the
//!   measurement honestly, prints the quantitative diagnosis, and fails.
//!   The companion run in `acceptance_criteria` demonstrates the same
//!   ordering-and-gap claim where it is physically present (N = 4).

use mprx_sim::check;

#[test]
fn acceptance_criteria() {
    let reports = vec![
        ("criterion 1", check::criterion1_hybrid_rule()),
        ("criterion 2", check::criterion2_belief_z()),
        ("criterion 3", check::criterion3_gmsg()),
        ("criterion 4", check::criterion4_chanest()),
        ("criterion 5", check::criterion5_lambda()),
        ("criterion 6", check::criterion6_bcjr()),
        ("criterion 8", check::criterion8_scaling()),
        ("criterion 9", check::criterion9_determinism()),
        ("companion 7b", check::loaded_ordering()),
    ];
    let mut failures = Vec::new();
    for (tag, report) in &reports {
        println!("{tag}: {}", report.line());
        if !report.passed {
            failures.push(format!("{tag}: {}", report.line()));
        }
    }
    assert!(failures.is_empty(), "failed checks:\n{}", failures.join("\n"));
}

#[test]
fn criterion7_ber_ordering_default_config() {
    let report = check::criterion7_ordering();
    println!("criterion 7: {}", report.line());
    assert!(
        report.passed,
        "criterion 7 as written cannot pass: the default-config waterfalls sit below the stated \
         0-16 dB window and the iterative receivers merge below BER 1e-3 there. Measurement:\n{}",
        report.line()
    );
}
