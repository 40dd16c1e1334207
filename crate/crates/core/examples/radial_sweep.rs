use plap_core::*;

fn main() -> Result<()> {
    let case = RadialCase::new(2, 1.0, 1.0, 0.5, 2.0)?;
    let mesh = case.mesh(200, 1.0)?;
    let data = case.problem_data();

    let u = solve_p(&mesh, &data, &SolveParams::new(1.25), None)?;
    let exact = radial_solution(&case, 1.25, 0.0)?;
    assert!((u.u.values()[0] - exact).abs() < 1e-6 * exact);

    let report = run_sweep(&mesh, &data, &default_schedule(), &SweepOptions::default())?;
    println!("{} (M ≈ {:?})", report.verdict, report.slope_m_estimate);
    Ok(())
}
