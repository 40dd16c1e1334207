//! Classification stability of p-sweeps.

use plap_core::*;

fn leaf_cases() -> Vec<RadialCase> {
    [(2.0, 0.0, 1.0), (1.0, 0.5, 1.0), (1.0, 0.5, 1.5), (1.0, 0.5, 2.0), (0.5, 1.0, 1.0), (0.5, 0.5, 1.0), (0.5, 0.0, 2.0)]
        .iter()
        .map(|&(a, g, l)| RadialCase::new(2, 1.0, a, g, l).unwrap())
        .collect()
}

fn refined_schedule() -> Vec<f64> {
    // Adds the midpoints in 1/(p-1) between consecutive default values.
    let mut out = Vec::new();
    for j in 2..=14 {
        out.push(1.0 + 0.5f64.powf(j as f64 / 2.0));
    }
    out
}

#[test]
fn refinement_keeps_verdict() {
    let opts = SweepOptions::default();
    for case in leaf_cases() {
        let mesh = case.mesh(120, 1.0).unwrap();
        let data = case.problem_data();
        let coarse = run_sweep(&mesh, &data, &default_schedule(), &opts).unwrap();
        let fine = run_sweep(&mesh, &data, &refined_schedule(), &opts).unwrap();
        assert_ne!(coarse.verdict, Verdict::Inconclusive, "{case:?}");
        assert_eq!(coarse.verdict, fine.verdict, "{case:?}");
    }
}

#[test]
fn records_align_with_schedule() {
    let case = RadialCase::new(2, 1.0, 1.0, 0.5, 2.0).unwrap();
    let mesh = case.mesh(60, 1.0).unwrap();
    let schedule = refined_schedule();
    let report = run_sweep(&mesh, &case.problem_data(), &schedule, &SweepOptions::default()).unwrap();
    assert_eq!(report.schedule, schedule);
    assert_eq!(report.records.len(), schedule.len());
    for (r, p) in report.records.iter().zip(&schedule) {
        assert_eq!(r.p, *p);
    }
}

#[test]
fn truncated_flux_stays_below_one() {
    let opts = SweepOptions { divergence_limit: 1e300, ..SweepOptions::default() };
    for case in leaf_cases() {
        let mesh = case.mesh(120, 1.0).unwrap();
        let report = run_sweep(&mesh, &case.problem_data(), &default_schedule(), &opts).unwrap();
        let rec = report.records.iter().rev().find(|r| r.is_usable()).unwrap();
        assert!(rec.truncated_flux_sup <= 1.05, "{case:?}: {}", rec.truncated_flux_sup);
    }
}

#[test]
fn zero_data_is_degenerate() {
    let mesh = build_disk(1.0, 2).unwrap();
    let data = ProblemData::new(SourceSpec::Constant(0.0), BoundarySpec::Constant(0.0), BoundarySpec::Constant(1.0));
    let report = run_sweep(&mesh, &data, &default_schedule(), &SweepOptions::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Degenerate);
    assert_eq!(report.slope_m_estimate, Some(0.0));
}

#[test]
fn sweep_csv_carries_version() {
    let case = RadialCase::new(2, 1.0, 0.5, 0.0, 1.0).unwrap();
    let mesh = case.mesh(40, 1.0).unwrap();
    let report = run_sweep(&mesh, &case.problem_data(), &default_schedule(), &SweepOptions::default()).unwrap();
    let mut buf = Vec::new();
    plap_core::sweep::write_sweep_csv(&report, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let body = plap_core::io::csv_body(&text).unwrap();
    assert_eq!(body.lines().count(), 1 + report.records.len());
}
