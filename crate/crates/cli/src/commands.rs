//! Subcommand implementations. Each returns `Err(CliError)` with the
//! validation/numerical distinction that `main` maps onto exit codes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use translab_core::elliptic::{self, RateLabel, SolveOptions};
use translab_core::fem::DiscreteField;
use translab_core::field_io::{self, FieldFile};
use translab_core::oracle::{self, ScalarOracle};
use translab_core::parabolic::{self, ParabolicOptions, Scheme};
use translab_core::regularity::{self, AnalysisParams, DyadicReport};

use crate::config::{
    parse_centers, parse_scales, Config, ConformancePolicy, InitialConfig, SchemeConfig,
    ThresholdConfig,
};
use crate::report::{self, RunRecord};
use crate::CliError;

fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn write_out(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::validation(format!("cannot write {path:?}: {e}")))
}

/// `solve`: elliptic solve → field file, run log, gradient CSV.
pub fn solve(config_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let cfg = Config::load(config_path)?;
    let problem = cfg.build_problem(&base_dir(config_path))?;
    let grid = cfg.build_grid()?;
    let opts = SolveOptions { tol: cfg.solver.tol, max_iter: cfg.solver.max_iter };

    let (field, log) = elliptic::solve_transmission(&problem, &grid, &opts)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::validation(format!("cannot create {out_dir:?}: {e}")))?;
    field_io::write_field_path(out_dir.join("field.fld"), &FieldFile::Static(field.clone()))?;
    let record = RunRecord {
        command: "solve",
        problem_hash: log.problem_hash.clone(),
        cells_per_side: log.cells_per_side,
        iterations: log.iterations,
        residual: log.residual,
        wall_seconds: log.wall_seconds,
    };
    write_out(&out_dir.join("run.log"), &report::run_log(&record, &cfg))?;
    write_out(&out_dir.join("gradients.csv"), &report::gradients_to_csv(&field))?;

    println!(
        "solve: grid {} -> {} CG iterations, residual {:.3e}, {:.3}s; outputs in {}",
        log.cells_per_side,
        log.iterations,
        log.residual,
        log.wall_seconds,
        out_dir.display()
    );
    Ok(())
}

/// `parabolic`: time-dependent solve → time field file + run log.
pub fn parabolic_cmd(config_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let cfg = Config::load(config_path)?;
    let problem = cfg.build_problem(&base_dir(config_path))?;
    let grid = cfg.build_grid()?;
    let dt = if cfg.parabolic.dt > 0.0 { cfg.parabolic.dt } else { grid.h() * grid.h() };
    let opts = ParabolicOptions {
        dt,
        scheme: match cfg.parabolic.scheme {
            SchemeConfig::BackwardEuler => Scheme::BackwardEuler,
            SchemeConfig::CrankNicolson => Scheme::CrankNicolson,
        },
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        store_every: cfg.parabolic.snapshot_every,
        t_end: 0.0,
    };

    let initial = match &cfg.parabolic.initial {
        InitialConfig::Zero => DiscreteField::zeros(grid, problem.m),
        InitialConfig::Oracle => {
            let oracle = cfg
                .oracle()
                .ok_or_else(|| CliError::validation("initial 'oracle' needs [problem.oracle]"))?;
            DiscreteField::from_fn(grid, problem.m, |x| {
                vec![oracle.eval(x).expect("oracle eval").0; problem.m]
            })
        }
        InitialConfig::Eigenmode { modes, amplitude, add_oracle } => {
            let oracle = cfg.oracle();
            if *add_oracle && oracle.is_none() {
                return Err(CliError::validation("add_oracle needs [problem.oracle]"));
            }
            let modes = modes.clone();
            let amplitude = *amplitude;
            let add = *add_oracle;
            DiscreteField::from_fn(grid, problem.m, move |x| {
                let mut v = amplitude * oracle::eigenmode_decay(&modes, x, 0.0);
                if add {
                    v += oracle.unwrap().eval(x).expect("oracle eval").0;
                }
                vec![v; problem.m]
            })
        }
    };

    let start = Instant::now();
    let (field, logs) = parabolic::solve_parabolic(&problem, &grid, &opts, &initial)?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::validation(format!("cannot create {out_dir:?}: {e}")))?;
    field_io::write_field_path(out_dir.join("field.fld"), &FieldFile::Time(field))?;
    let last = logs.last().expect("at least one step");
    let record = RunRecord {
        command: "parabolic",
        problem_hash: format!("{:016x}", problem.fingerprint()),
        cells_per_side: grid.cells_per_side(),
        iterations: logs.iter().map(|l| l.iterations).sum(),
        residual: last.residual,
        wall_seconds: wall,
    };
    write_out(&out_dir.join("run.log"), &report::run_log(&record, &cfg))?;

    println!(
        "parabolic: {} steps of dt={dt:.3e} ({}), stored {} frames, {:.3}s; outputs in {}",
        logs.len(),
        opts.scheme.label(),
        1 + logs.len() / opts.store_every,
        wall,
        out_dir.display()
    );
    Ok(())
}

/// `analyze`: dyadic reports over a grid of centers → CSV.
pub fn analyze(
    config_path: &Path,
    field_path: &Path,
    centers_override: Option<&str>,
    scales_override: Option<&str>,
    out_path: &Path,
) -> Result<(), CliError> {
    let cfg = Config::load(config_path)?;
    let problem = cfg.build_problem(&base_dir(config_path))?;
    let field = field_io::read_field_path(field_path)?;
    if field.grid().dim() != problem.n || field.components() != problem.m {
        return Err(CliError::validation(
            "field file dimensions do not match the configured problem",
        ));
    }

    let centers_spec = centers_override.unwrap_or(&cfg.analysis.centers);
    let scales_spec = scales_override.unwrap_or(&cfg.analysis.scales);
    let centers = parse_centers(centers_spec, problem.n)?;
    let (r0, k_max) = parse_scales(scales_spec)?;

    // geometry filter: keep centers whose coarsest ball is contained
    let admissible: Vec<Vec<f64>> = centers
        .into_iter()
        .filter(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt() + r0 <= 1.0)
        .collect();

    let csv = match &field {
        FieldFile::Static(u) => {
            let threshold_m = match cfg.analysis.threshold_m {
                ThresholdConfig::Value(v) => v,
                ThresholdConfig::Auto => regularity::default_threshold(&problem, u),
            };
            let params = AnalysisParams {
                r0,
                k_max,
                threshold_m,
                density_resolution: cfg.analysis.density_resolution,
                c_fit: cfg.analysis.c_fit,
            };
            let reports = regularity::analyze_centers(&problem, u, &admissible, &params)?;
            print_report_summary(&reports, threshold_m);
            report::reports_to_csv(&reports, false)
        }
        FieldFile::Time(u) => {
            let check = parabolic::normalization_check(&problem, u);
            let threshold_m = match cfg.analysis.threshold_m {
                ThresholdConfig::Value(v) => v,
                ThresholdConfig::Auto => 10.0 * (check.sup_l2_squared.sqrt() + check.lip_d),
            };
            let params = AnalysisParams {
                r0,
                k_max,
                threshold_m,
                density_resolution: cfg.analysis.density_resolution,
                c_fit: cfg.analysis.c_fit,
            };
            let s = cfg.analysis.center_time;
            let reports: Result<Vec<DyadicReport>, _> = admissible
                .iter()
                .map(|z| regularity::parabolic_density_decay(&problem, u, z, s, &params))
                .collect();
            let reports = reports?;
            print_report_summary(&reports, threshold_m);
            report::reports_to_csv(&reports, true)
        }
    };
    write_out(out_path, &csv)?;
    println!("analyze: wrote {}", out_path.display());
    Ok(())
}

fn print_report_summary(reports: &[DyadicReport], threshold_m: f64) {
    let rows: usize = reports.iter().map(|r| r.rows.len()).sum();
    let case1 = reports.iter().filter(|r| r.case == regularity::CaseTag::Case1).count();
    let case2 = reports.iter().filter(|r| r.case == regularity::CaseTag::Case2).count();
    let c_req = reports
        .iter()
        .filter_map(|r| r.c_required)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "analyze: {} centers, {rows} rows, M = {threshold_m:.6e}, case1/case2/undet = {case1}/{case2}/{}",
        reports.len(),
        reports.len() - case1 - case2
    );
    if c_req.is_finite() {
        println!("analyze: density decay consistent for c >= {c_req:.6e}");
    }
}

/// `oracle-check`: strong-form residual suite over the closed forms.
pub fn oracle_check(points: usize) -> Result<(), CliError> {
    let cases = [
        ("flat_interface(a=1,b=4)", ScalarOracle::FlatInterface { a: 1.0, b: 4.0 }),
        ("disk_inclusion(k=2,R=0.5)", ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 }),
    ];
    println!("oracle suite at {points} low-discrepancy points (FD step {:.0e}):", oracle::FD_STEP);
    println!("{:<26} {:>14} {:>14} {:>14}  verdict", "oracle", "residual", "flux jump", "grad dev");
    let mut failed = false;
    for (name, oracle_case) in cases {
        let r = oracle::strong_form_residuals(oracle_case, points)?;
        let ok = r.max_strong_residual < oracle::STRONG_RESIDUAL_TOL
            && r.max_flux_jump < 1e-10
            && r.max_gradient_mismatch < 1e-10;
        failed |= !ok;
        println!(
            "{:<26} {:>14.3e} {:>14.3e} {:>14.3e}  {}",
            name,
            r.max_strong_residual,
            r.max_flux_jump,
            r.max_gradient_mismatch,
            if ok { "pass" } else { "FAIL" }
        );
    }
    if failed {
        return Err(CliError::numerical("oracle residual suite failed"));
    }
    Ok(())
}

/// `modulus-check`: the Dini-calculus suite on the configured modulus.
pub fn modulus_check(config_path: &Path, r_min: f64, alpha: f64) -> Result<(), CliError> {
    let cfg = Config::load(config_path)?;
    let dir = base_dir(config_path);
    let (modulus_cfg, policy) = match &cfg.modulus {
        Some(section) => (section.modulus.clone(), section.conformance),
        None => (cfg.problem.tensor_a.modulus.clone(), ConformancePolicy::Warn),
    };
    let mut modulus = modulus_cfg.build(&dir)?;

    // normalization hypotheses: ω(1) ≤ 1/2 and ω(r)|log r| ≤ 1/2
    let omega_1 = modulus.eval(1.0)?;
    let max_log_product = (1..=40)
        .map(|k| {
            let r = 0.5f64.powi(k);
            modulus.eval(r).map(|w| w * (1.0 / r).ln())
        })
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let conforming = omega_1 <= 0.5 && max_log_product <= 0.5;
    if !conforming {
        let msg = format!(
            "modulus violates normalization hypotheses: omega(1) = {omega_1:.4}, max omega(r)|log r| = {max_log_product:.4} (both must be <= 1/2)"
        );
        match policy {
            ConformancePolicy::Warn => eprintln!("warning: {msg}"),
            ConformancePolicy::Reject => return Err(CliError::validation(msg)),
            ConformancePolicy::Rescale => {
                let factor = (0.5 / omega_1).min(0.5 / max_log_product.max(1e-300));
                modulus = modulus.scaled(factor);
                println!("modulus rescaled by {factor:.6e} to meet the hypotheses");
            }
        }
    }

    let (dini_value, dini_convergent) = modulus.dini_integral(r_min, 1e-8)?;
    println!("dini integral over [{r_min:.1e}, 1]: {dini_value:.8e}  ({})",
        if dini_convergent { "convergent" } else { "DIVERGENT" });

    let radii: Vec<f64> = (1..=40).map(|k| 0.5f64.powi(k)).collect();
    let profile = modulus.log_decay_profile(&radii)?;
    println!(
        "omega(r)·log(1/r) at r = 2^-1..2^-40: first {:.4e}, last {:.4e}",
        profile[0],
        profile[profile.len() - 1]
    );

    let n = cfg.problem.n;
    print!("psi(rho, n={n}) at rho = 1/2^j: ");
    let mut psi_prev = f64::INFINITY;
    let mut psi_monotone = true;
    for j in 1..=8 {
        let rho = 0.5f64.powi(j);
        let v = modulus.psi(rho, n)?;
        psi_monotone &= v <= psi_prev + 1e-6;
        psi_prev = v;
        print!("{v:.4e} ");
    }
    println!();
    if !psi_monotone {
        return Err(CliError::numerical("psi failed to be non-increasing toward 0"));
    }

    let (a2_value, a2_convergent) = modulus.nested_dini_integral(alpha, r_min.max(1e-12))?;
    println!(
        "weighted nested integral (alpha = {alpha}): {a2_value:.8e}  ({})",
        if a2_convergent { "convergent" } else { "DIVERGENT" }
    );

    if !dini_convergent {
        return Err(CliError::validation(
            "modulus flagged non-Dini: tail increments of ∫ omega(r)/r dr fail geometric decay",
        ));
    }
    println!("modulus-check: pass");
    Ok(())
}

/// `sweep`: refinement study, optionally against the configured oracle.
pub fn sweep(config_path: &Path, resolutions: &[usize], out: Option<&Path>) -> Result<(), CliError> {
    let cfg = Config::load(config_path)?;
    let problem = cfg.build_problem(&base_dir(config_path))?;
    let opts = SolveOptions { tol: cfg.solver.tol, max_iter: cfg.solver.max_iter };

    let oracle_ref = cfg.oracle();
    let reference = oracle_ref.map(|o| {
        move |x: &[f64]| {
            let u = o.eval(x).expect("oracle eval").0;
            vec![u; 1]
        }
    });
    let rows = match &reference {
        Some(r) => elliptic::refine_study(&problem, resolutions, Some(r), &opts)?,
        None => elliptic::refine_study(&problem, resolutions, None, &opts)?,
    };

    println!(
        "sweep ({}):",
        if oracle_ref.is_some() { "error vs oracle" } else { "error vs finest grid" }
    );
    println!("{:>8} {:>12} {:>14} {:>10}", "cells", "h", "rel L2 error", "rate");
    let mut csv = String::from("# translab-report v1\ncells,h,error,rate\n");
    for row in &rows {
        let rate = match row.rate {
            RateLabel::First => "-".to_string(),
            RateLabel::Exact => "exact".to_string(),
            RateLabel::Observed(r) => format!("{r:.3}"),
        };
        println!("{:>8} {:>12.5e} {:>14.6e} {:>10}", row.cells_per_side, row.h, row.error, rate);
        csv.push_str(&format!("{},{:.12e},{:.12e},{rate}\n", row.cells_per_side, row.h, row.error));
    }
    if let Some(path) = out {
        write_out(path, &csv)?;
        println!("sweep: wrote {}", path.display());
    }
    Ok(())
}

/// `report`: aggregate analysis CSVs into per-file summary statistics.
pub fn report_cmd(inputs: &[PathBuf]) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::validation("report needs at least one input CSV"));
    }
    for path in inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {path:?}: {e}")))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(line) if line.trim() == report::CSV_VERSION_LINE => {}
            other => {
                return Err(CliError::validation(format!(
                    "{path:?}: missing '{}' header (found {other:?})",
                    report::CSV_VERSION_LINE
                )))
            }
        }
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| CliError::validation(format!("{path:?}: empty report")))?
            .split(',')
            .collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let (grad_i, bmo_i, dens_i, slack_i, case_i) = (
            col("grad_l_norm"),
            col("bmo_C"),
            col("density"),
            col("slack"),
            col("case_tag"),
        );

        let mut rows = 0usize;
        let mut stats: [(f64, f64); 4] = [(f64::INFINITY, f64::NEG_INFINITY); 4];
        let mut cases = std::collections::BTreeMap::<String, usize>::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            rows += 1;
            let fields: Vec<&str> = line.split(',').collect();
            for (slot, idx) in [grad_i, bmo_i, dens_i, slack_i].iter().enumerate() {
                if let Some(i) = idx {
                    if let Some(Ok(v)) = fields.get(*i).map(|f| f.parse::<f64>()) {
                        stats[slot].0 = stats[slot].0.min(v);
                        stats[slot].1 = stats[slot].1.max(v);
                    }
                }
            }
            if let Some(i) = case_i {
                if let Some(tag) = fields.get(i) {
                    *cases.entry(tag.to_string()).or_default() += 1;
                }
            }
        }
        println!("{}: {rows} rows", path.display());
        for (slot, name) in ["grad_l_norm", "bmo_C", "density", "slack"].iter().enumerate() {
            let (lo, hi) = stats[slot];
            if lo.is_finite() {
                println!("  {name:<12} min {lo:.6e}  max {hi:.6e}");
            } else {
                println!("  {name:<12} (no values)");
            }
        }
        let case_summary: Vec<String> =
            cases.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        println!("  cases        {}", case_summary.join(", "));
    }
    Ok(())
}
