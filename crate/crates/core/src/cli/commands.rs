//! Command implementations. Each writes its files under `out` and returns
//! the manifest it wrote.

use super::output::{gnuplot_script, to_value, write_csv, write_json, write_text, Cell, RunManifest};
use super::scenario::{Format, Scenario};
use super::{resolve_jobs, CliError};
use crate::adiabaticity::{adiabaticity_report, AdiabaticityReport};
use crate::constants::joule_to_khz;
use crate::dynamics::Trajectory;
use crate::fields::{time_averaged_potential_with, Branch, PotentialOptions};
use crate::geometry::{analytic_trap_geometry, numeric_trap_geometry, resonance_radius, NumericOptions, TrapGeometry};
use crate::interferometer::{run_sequence, SequenceRun};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Output(format!("cannot start worker pool: {e}")))
}

fn finish(out: &Path, mut manifest: RunManifest, files: Vec<PathBuf>) -> Result<RunManifest, CliError> {
    manifest.outputs = files;
    write_json(&out.join("manifest.json"), &to_value(&manifest))?;
    Ok(manifest)
}

fn header(s: &Scenario) -> Value {
    json!({
        "scenario_hash": s.hash,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "constants_version": crate::constants::CONSTANTS_VERSION,
    })
}

/// Time-averaged potential of both branches on the scenario's grid.
pub fn potential_map(s: &Scenario, out: &Path, jobs: Option<usize>) -> Result<RunManifest, CliError> {
    let spec = &s.file.potential_map;
    let points = spec.grid.points(resonance_radius(&s.field, &s.atom));
    if points.is_empty() {
        return Err(CliError::Validation(vec!["potential_map grid is empty".into()]));
    }
    let opts = PotentialOptions {
        gravity: spec.gravity,
        ..Default::default()
    };
    let plus = s.atom.with_branch(Branch::Plus);
    let minus = s.atom.with_branch(Branch::Minus);
    let eval = |r| {
        let v = |a| time_averaged_potential_with(r, &s.field, a, &opts).unwrap_or(f64::NAN);
        (v(&plus), v(&minus))
    };
    let values: Vec<(f64, f64)> =
        pool(resolve_jobs(jobs, None, points.len())?)?.install(|| points.par_iter().map(|&r| eval(r)).collect());
    let rows = points.iter().zip(&values).map(|(r, &(vp, vm))| {
        vec![
            Cell::Num(r.x),
            Cell::Num(r.y),
            Cell::Num(r.z),
            Cell::Num(vp),
            Cell::Num(vm),
            Cell::Num(joule_to_khz(vp)),
            Cell::Num(joule_to_khz(vm)),
        ]
    });
    let mut files = Vec::new();
    let csv_path = out.join("potential_map.csv");
    write_csv(
        &csv_path,
        &["x", "y", "z", "V_plus_J", "V_minus_J", "V_plus_kHz", "V_minus_kHz"],
        rows,
    )?;
    files.push(csv_path);
    if s.file.outputs.wants(Format::Gnuplot) {
        let gp = out.join("potential_map.gp");
        write_text(
            &gp,
            &gnuplot_script(
                "potential_map.csv",
                "time-averaged potential",
                1,
                &[(6, "V+ (kHz)"), (7, "V- (kHz)")],
            ),
        )?;
        files.push(gp);
    }
    finish(out, RunManifest::new("potential-map", &s.hash), files)
}

fn relative(a: f64, b: f64) -> Value {
    if a == 0.0 && b == 0.0 {
        json!(0.0)
    } else {
        json!((b - a) / a.abs().max(b.abs()))
    }
}

/// Trap parameters from the closed forms and from the numerical survey.
pub fn trap_params_value(s: &Scenario) -> Value {
    let outcome = |g: crate::Result<TrapGeometry>| match g {
        Ok(g) => (Some(g), to_value(&g)),
        Err(e) => (None, json!({ "error": e.to_string() })),
    };
    let (analytic, a_json) = outcome(analytic_trap_geometry(&s.field, &s.atom));
    let (numeric, n_json) = outcome(numeric_trap_geometry(&s.field, &s.atom, &NumericOptions::default()));
    let minima: Vec<Value> = s
        .file
        .atom
        .branch
        .branches()
        .into_iter()
        .filter_map(|b| {
            let g = numeric.or(analytic)?;
            g.phi0_defined
                .then(|| json!({ "branch": b.label(), "phi_min": g.branch_minimum(b) }))
        })
        .collect();
    let comparison = match (analytic, numeric) {
        (Some(a), Some(n)) => json!({
            "radius": relative(a.radius, n.radius),
            "omega_r": relative(a.omega_r, n.omega_r),
            "omega_z": relative(a.omega_z, n.omega_z),
            "omega_phi": relative(a.omega_phi, n.omega_phi),
            "v0": relative(a.v0, n.v0),
        }),
        _ => Value::Null,
    };
    let mut v = header(s);
    v["analytic"] = a_json;
    v["numeric"] = n_json;
    v["branch_minima"] = Value::Array(minima);
    v["relative_difference"] = comparison;
    v
}

pub fn trap_params(s: &Scenario, out: &Path) -> Result<RunManifest, CliError> {
    let v = trap_params_value(s);
    if v["analytic"].get("error").is_some() && v["numeric"].get("error").is_some() {
        let msg = v["numeric"]["error"].as_str().unwrap_or_default().to_string();
        return Err(CliError::Numeric(crate::Error::Minimization(msg)));
    }
    let path = out.join("trap_params.json");
    write_json(&path, &v)?;
    finish(out, RunManifest::new("trap-params", &s.hash), vec![path])
}

/// Sequence run and diagnostics for one scenario.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub run: SequenceRun,
    pub report: AdiabaticityReport,
}

pub fn run_simulation(s: &Scenario) -> Result<Simulation, CliError> {
    let run = run_sequence(&s.file.sequence, &s.field, &s.atom)?;
    let report = adiabaticity_report(&s.field, &s.atom, &run.geometry, &s.file.report)?;
    Ok(Simulation { run, report })
}

pub fn summary_value(s: &Scenario, sim: &Simulation) -> Value {
    let mut v = header(s);
    v["geometry"] = to_value(&sim.run.geometry);
    v["result"] = to_value(&sim.run.result);
    v["adiabaticity"] = to_value(&sim.report);
    v
}

fn trajectory_rows(t: &Trajectory) -> impl Iterator<Item = Vec<Cell>> + '_ {
    (0..t.times.len()).map(move |k| {
        vec![
            Cell::Num(t.times[k]),
            Cell::Num(t.phi[k]),
            Cell::Num(t.phi_dot[k]),
            Cell::Num(t.action_phase[k]),
        ]
    })
}

fn write_simulation(s: &Scenario, sim: &Simulation, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let outputs = &s.file.outputs;
    let mut files = Vec::new();
    if outputs.wants(Format::Json) {
        let p = dir.join("summary.json");
        write_json(&p, &summary_value(s, sim))?;
        files.push(p);
    }
    if outputs.wants(Format::Csv) {
        for (name, traj) in [
            ("trajectory_plus.csv", &sim.run.plus),
            ("trajectory_minus.csv", &sim.run.minus),
        ] {
            let p = dir.join(name);
            write_csv(&p, &["t", "phi", "phi_dot", "action_phase"], trajectory_rows(traj))?;
            files.push(p);
        }
    }
    if outputs.wants(Format::Gnuplot) {
        let p = dir.join("trajectories.gp");
        let mut text = gnuplot_script("trajectory_plus.csv", "arm angles", 1, &[(2, "phi+")]);
        text.push_str(&gnuplot_script("trajectory_minus.csv", "arm angles", 1, &[(2, "phi-")]));
        write_text(&p, &text)?;
        files.push(p);
    }
    Ok(files)
}

pub fn simulate(s: &Scenario, out: &Path) -> Result<RunManifest, CliError> {
    let sim = run_simulation(s)?;
    let files = write_simulation(s, &sim, out)?;
    finish(out, RunManifest::new("simulate", &s.hash), files)
}

const SWEEP_HEADER: [&str; 15] = [
    "index",
    "value",
    "status",
    "transit_time",
    "omega_rot",
    "sagnac_phase",
    "sagnac_ideal",
    "sagnac_ratio",
    "sagnac_incomplete",
    "delta_phi_final",
    "delta_phi_dot_final",
    "visibility",
    "p_plus",
    "p_minus",
    "error",
];

fn value_cell(v: &Value) -> Cell {
    match v.as_f64() {
        Some(x) if !v.is_u64() && !v.is_i64() => Cell::Num(x),
        _ => Cell::Text(super::output::canonical_json(v)),
    }
}

fn sweep_row(index: usize, value: &Value, outcome: &Result<Simulation, CliError>) -> Vec<Cell> {
    let mut row = vec![Cell::Int(index as i64), value_cell(value)];
    match outcome {
        Ok(sim) => {
            let r = &sim.run.result;
            row.push(Cell::Text("ok".into()));
            row.extend(
                [
                    r.transit_time,
                    r.omega_rot,
                    r.sagnac_phase,
                    r.sagnac_ideal,
                    r.sagnac_ratio,
                    r.sagnac_incomplete,
                    r.delta_phi_final,
                    r.delta_phi_dot_final,
                    r.visibility,
                    r.populations.plus,
                    r.populations.minus,
                ]
                .map(Cell::Num),
            );
            row.push(Cell::Text(String::new()));
        }
        Err(e) => {
            row.push(Cell::Text("failed".into()));
            row.extend((0..11).map(|_| Cell::Num(f64::NAN)));
            row.push(Cell::Text(e.to_string().replace('\n', " ")));
        }
    }
    row
}

/// Run every sweep value. Failed runs are recorded and the sweep continues;
/// the result is [`CliError::PartialSweep`] if any failed.
pub fn sweep(s: &Scenario, out: &Path, jobs: Option<usize>) -> Result<RunManifest, CliError> {
    let variants = s.sweep_variants()?;
    let sweep_jobs = s.file.sweep.as_ref().and_then(|w| w.jobs);
    let jobs = resolve_jobs(jobs, sweep_jobs, variants.len())?;
    let outcomes: Vec<(Result<Simulation, CliError>, Vec<PathBuf>)> = pool(jobs)?.install(|| {
        variants
            .par_iter()
            .enumerate()
            .map(|(i, (_, scenario))| {
                let dir = out.join(format!("run_{i:03}"));
                match scenario {
                    Ok(sc) => match run_simulation(sc) {
                        Ok(sim) => match write_simulation(sc, &sim, &dir) {
                            Ok(files) => (Ok(sim), files),
                            Err(e) => (Err(e), Vec::new()),
                        },
                        Err(e) => (Err(e), Vec::new()),
                    },
                    Err(e) => (Err(CliError::Validation(vec![e.to_string()])), Vec::new()),
                }
            })
            .collect()
    });
    let rows = variants
        .iter()
        .zip(&outcomes)
        .enumerate()
        .map(|(i, ((v, _), (o, _)))| sweep_row(i, v, o));
    let agg = out.join("sweep.csv");
    write_csv(&agg, &SWEEP_HEADER, rows)?;
    let mut files = vec![agg];
    if s.file.outputs.wants(Format::Gnuplot) {
        let gp = out.join("sweep.gp");
        write_text(
            &gp,
            &gnuplot_script("sweep.csv", "sweep", 2, &[(8, "sagnac_ratio"), (12, "visibility")]),
        )?;
        files.push(gp);
    }
    let mut manifest = RunManifest::new("sweep", &s.hash);
    manifest.failed_runs = outcomes
        .iter()
        .enumerate()
        .filter(|(_, (o, _))| o.is_err())
        .map(|(i, _)| i)
        .collect();
    files.extend(outcomes.into_iter().flat_map(|(_, f)| f));
    let manifest = finish(out, manifest, files)?;
    if manifest.failed_runs.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::PartialSweep {
            failed: manifest.failed_runs.len(),
            total: variants.len(),
        })
    }
}

/// Validation, geometry and diagnostics without running the sequence.
pub fn check(s: &Scenario) -> Result<Value, CliError> {
    let geom = crate::interferometer::sequence_geometry(&s.field, &s.atom)?;
    let report = adiabaticity_report(&s.field, &s.atom, &geom, &s.file.report)?;
    let mut v = header(s);
    v["valid"] = json!(true);
    v["geometry"] = to_value(&geom);
    v["adiabaticity"] = to_value(&report);
    Ok(v)
}
