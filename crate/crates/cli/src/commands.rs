use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::anyhow;
use plap_core::fields::limit_check_with;
use plap_core::inequalities::{default_exponents, normalized_mixed_norm};
use plap_core::io::{read_solution_csv, to_json_string, write_solution_csv, SCHEMA_VERSION};
use plap_core::radial::write_solution_grid;
use plap_core::sweep::write_sweep_csv;
use plap_core::threshold::radial_report;
use plap_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Format};
use crate::Failure;

type Outcome = Result<(), Failure>;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Failure::Config(anyhow!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(cfg: &ExperimentConfig, dir: &Path, name: &str, value: &T) -> Outcome {
    if cfg.output.wants(Format::Json) {
        std::fs::write(dir.join(name), to_json_string(value)?)?;
    }
    Ok(())
}

fn mesh_summary(mesh: &Mesh) -> serde_json::Value {
    json!({
        "id": mesh.id(),
        "kind": mesh.kind(),
        "nodes": mesh.node_count(),
        "elements": mesh.elements().len(),
        "boundary_nodes": mesh.boundary_nodes().len(),
        "volume": mesh.volume(),
        "boundary_measure": mesh.boundary_measure(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |m| format!("{m:.6}"))
}

pub fn solve(cfg: &ExperimentConfig, out: &Path, p: Option<f64>) -> Outcome {
    let mesh = cfg.mesh()?;
    let data = cfg.problem();
    let params = cfg.solve_params(p.unwrap_or(cfg.solver.p));
    let result = solve_p(&mesh, &data, &params, None)?;
    if cfg.output.wants(Format::Csv) {
        write_solution_csv(&mesh, &result.u, create(out, "solution.csv")?)?;
    }
    let checks = if result.converged {
        Some(limit_check(&mesh, &data, &result, &[cfg.sweep.truncation_level])?)
    } else {
        None
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "config": cfg,
        "mesh": mesh_summary(&mesh),
        "result": {
            "p": result.p,
            "epsilon": result.epsilon,
            "iterations": result.iterations,
            "converged": result.converged,
            "termination": result.termination,
            "final_residual": result.final_residual,
            "residual": result.residual,
            "energy": result.energy,
            "energy_history": result.energy_history,
            "sup_norm": result.u.sup_norm(),
        },
        "limit_check": checks,
    });
    write_json(cfg, out, "report.json", &report)?;
    println!(
        "CONVERGED={} ITERATIONS={} RESIDUAL={:.3e} SUP={:.6e}",
        result.converged,
        result.iterations,
        result.final_residual,
        result.u.sup_norm()
    );
    if !result.converged {
        return Err(Failure::Numerical(anyhow!(
            "solve stopped ({:?}) with residual {:e}",
            result.termination,
            result.final_residual
        )));
    }
    Ok(())
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let mesh = cfg.mesh()?;
    let data = cfg.problem();
    let mut report = run_sweep(&mesh, &data, &cfg.schedule(), &cfg.sweep_options())?;
    let final_u = report.final_u.take();
    if cfg.output.wants(Format::Csv) {
        write_sweep_csv(&report, create(out, "sweep.csv")?)?;
        if let Some(u) = &final_u {
            write_solution_csv(&mesh, u, create(out, "sweep_solution.csv")?)?;
        }
    }
    write_json(cfg, out, "sweep.json", &report)?;
    for r in &report.records {
        let status = match &r.status {
            RecordStatus::Converged => "converged".to_string(),
            RecordStatus::NotConverged(t) => format!("stopped:{t:?}"),
            RecordStatus::Overflow => "overflow".to_string(),
            RecordStatus::Failed(msg) => format!("failed:{msg}"),
        };
        println!("p={:.6} norm={:.6e} status={status}", r.p, r.norm_lambda);
    }
    println!("VERDICT={} M_SLOPE={}", report.verdict, fmt_opt(report.slope_m_estimate));
    Ok(())
}

#[derive(Serialize)]
struct EigenCheck {
    lambda: f64,
    bound: f64,
    inverse_m: f64,
    relative_gap: f64,
    holds: bool,
}

pub fn threshold(cfg: &ExperimentConfig, out: &Path) -> Outcome {
    let mesh = cfg.mesh()?;
    let data = cfg.problem();
    let case = cfg.radial_case();
    let mut slope = None;
    let report = match cfg.threshold.method {
        ThresholdMethod::Dinkelbach => Some(estimate_m(&mesh, &data, &cfg.threshold_options())?),
        ThresholdMethod::RadialClosedForm => {
            let case = case.as_ref().ok_or_else(|| {
                Failure::Config(anyhow!("radial_closed_form needs a radial domain with f = A/|x| and constant g, λ"))
            })?;
            Some(radial_report(&mesh, case))
        }
        ThresholdMethod::SlopeRegression => {
            let s = run_sweep(&mesh, &data, &cfg.schedule(), &cfg.sweep_options())?;
            slope = Some(s.slope_m_estimate.ok_or(plap_core::Error::InsufficientData { usable: 0, needed: 2 })?);
            None
        }
    };
    let m = report.as_ref().map(|r| r.m_lower).or(slope).unwrap_or(f64::NAN);
    let radial_m = case.as_ref().map(|c| c.threshold());
    let eigen = match (&data.f, data.g.constant_value(), data.lambda.constant_value()) {
        (SourceSpec::Constant(f), Some(g), Some(lambda)) if *f == 1.0 && g == 0.0 => {
            let bound = eigen_lower_bound(&mesh, lambda)?;
            let inverse_m = 1.0 / m;
            Some(EigenCheck {
                lambda,
                bound,
                inverse_m,
                relative_gap: if bound > 0.0 { (inverse_m - bound) / bound } else { f64::NAN },
                holds: inverse_m >= bound * (1.0 - 0.02),
            })
        }
        _ => None,
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "threshold",
        "method": cfg.threshold.method,
        "m": m,
        "report": report,
        "slope_m_estimate": slope,
        "radial_M": radial_m,
        "radial_label": case.as_ref().map(|c| radial_limit(c).label),
        "eigen_check": eigen,
    });
    write_json(cfg, out, "threshold.json", &doc)?;
    println!("M={m:.6} RADIAL_M={}", fmt_opt(radial_m));
    Ok(())
}

pub fn radial(cfg: &ExperimentConfig, out: &Path, samples: usize) -> Outcome {
    let case = cfg.radial_case().ok_or_else(|| {
        Failure::Config(anyhow!("radial needs a radial domain with f = A/|x| and constant g, λ > 0"))
    })?;
    let schedule = cfg.schedule();
    if cfg.output.wants(Format::Csv) {
        write_solution_grid(&case, &schedule, samples, create(out, "radial.csv")?)?;
    }
    let tag = radial_limit(&case);
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "radial",
        "case": case,
        "a": case.a(),
        "b": case.b(),
        "M": case.threshold(),
        "label": tag.label,
        "limit": tag.limit,
        "schedule": schedule,
    });
    write_json(cfg, out, "radial.json", &doc)?;
    println!("M={:.6} LABEL={}", case.threshold(), tag.label);
    Ok(())
}

pub fn verify(cfg: &ExperimentConfig, out: &Path, solution: &Path, p: Option<f64>) -> Outcome {
    let mesh = cfg.mesh()?;
    let data = cfg.problem();
    let p = p.unwrap_or(cfg.solver.p);
    let text = std::fs::read_to_string(solution)
        .map_err(|e| Failure::Config(anyhow!("cannot read {}: {e}", solution.display())))?;
    let u = read_solution_csv(&mesh, &text)?;
    let d = data.discretize(&mesh)?;
    let eps = cfg.solver.epsilon;
    let flux = FluxField::from_field(&mesh, &d, &u, p, eps)?;
    let checks = limit_check_with(&mesh, &d, &u, p, &flux, &[cfg.sweep.truncation_level])?;
    let solver = Solver::from_discrete(&mesh, d)?;
    let residual = solver.residual(&solver.gradient(u.values(), p, eps));
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "p": p,
        "epsilon": eps,
        "optimality_residual": residual,
        "limit_check": checks,
    });
    write_json(cfg, out, "verify.json", &doc)?;
    println!(
        "RESIDUAL={:.3e} DIV={:.3e} BOUNDARY={:.3e} PAIRING={:.3e}",
        residual.max(),
        checks.div_residual,
        checks.boundary_residual,
        checks.pairing_gap
    );
    Ok(())
}

#[derive(Serialize)]
struct InequalityBattery {
    schema_version: u32,
    command: &'static str,
    samples: usize,
    seed: u64,
    holder_violations: usize,
    max_holder_ratio: f64,
    monotonicity_failures: usize,
    max_limit_relative_error: f64,
}

fn random_pair(rng: &mut ChaCha8Rng, mesh: &Mesh, lambda: &[f64]) -> plap_core::Result<MixedFunctionPair> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let f = (0..mesh.elements().len()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    let g = (0..mesh.boundary_nodes().len()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    MixedFunctionPair::new(mesh, f, g, lambda)
}

pub fn check_ineq(cfg: &ExperimentConfig, out: &Path, samples: usize, seed: u64) -> Outcome {
    let mesh = cfg.mesh()?;
    let d = cfg.problem().discretize(&mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exps = default_exponents();
    let mut b = InequalityBattery {
        schema_version: SCHEMA_VERSION,
        command: "check-ineq",
        samples,
        seed,
        holder_violations: 0,
        max_holder_ratio: 0.0,
        monotonicity_failures: 0,
        max_limit_relative_error: 0.0,
    };
    for _ in 0..samples {
        let a = random_pair(&mut rng, &mesh, &d.lambda)?;
        let c = random_pair(&mut rng, &mesh, &d.lambda)?;
        let p = rng.gen_range(1.01..10.0);
        let (lhs, rhs) = mixed_holder_check(&a, &c, p)?;
        b.max_holder_ratio = b.max_holder_ratio.max(lhs / rhs);
        if lhs > rhs * (1.0 + 1e-12) {
            b.holder_violations += 1;
        }
        let mut prev = 0.0;
        for &s in &exps {
            let v = normalized_mixed_norm(&a, s)?;
            if v < prev * (1.0 - 1e-12) {
                b.monotonicity_failures += 1;
            }
            prev = v;
        }
        let target = a.weighted_sup();
        let lim = mixed_norm_limit(&a, &exps)?;
        b.max_limit_relative_error = b.max_limit_relative_error.max((lim - target).abs() / target);
    }
    write_json(cfg, out, "check_ineq.json", &b)?;
    println!(
        "HOLDER_VIOLATIONS={} MONOTONICITY_FAILURES={} LIMIT_ERROR={:.3e}",
        b.holder_violations, b.monotonicity_failures, b.max_limit_relative_error
    );
    if b.holder_violations > 0 || b.monotonicity_failures > 0 || b.max_limit_relative_error > 0.01 {
        return Err(Failure::Numerical(anyhow!("inequality battery failed")));
    }
    Ok(())
}
