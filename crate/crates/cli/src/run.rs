//! The four run modes. Each returns a JSON report and whether every check passed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use plap_core::certify::{
    certification_checks, nodal_distance, verify, verify_nodal, verify_poisson, Check, VerifyOptions,
};
use plap_core::energy::duality_gap;
use plap_core::io::read_profile_csv;
use plap_core::oracle::{compare, minimize_discrete_energy};
use plap_core::radial::evaluate_solution;
use plap_core::{Error, ProblemSpec, QuadratureRule, SourceTerm};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult};

/// Report plus pass flag; the exit status is derived from `passed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub report: Value,
}

pub fn run(config: &RunConfig) -> CliResult<Outcome> {
    match config.mode {
        Mode::Solve => run_solve(config),
        Mode::Verify => run_verify(config),
        Mode::Converge => run_converge(config),
        Mode::Sweep => run_sweep(config),
    }
}

/// First 16 hex digits of the SHA-256 of the compact JSON text.
pub fn case_id(identity: &Value) -> String {
    let digest = Sha256::digest(identity.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn envelope(config: &RunConfig, id: &str, passed: bool, body: Value, outputs: Vec<String>) -> Value {
    let mut report = json!({
        "case_id": id,
        "mode": config.mode.as_str(),
        "passed": passed,
        "config_echo": config.identity(),
        "versions": {"plap": env!("CARGO_PKG_VERSION"), "plap_core": plap_core::VERSION},
        "outputs": outputs,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        dst.extend(src);
    }
    report
}

struct Sink<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Sink<'a> {
    fn new(dir: &'a Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Sink { dir, written: Vec::new() })
    }

    fn create(&mut self, name: String) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(&name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name);
        Ok(BufWriter::new(file))
    }

    fn json(&mut self, name: String, v: &Value) -> CliResult<()> {
        let path: PathBuf = self.dir.join(&name);
        let text = serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name);
        Ok(())
    }
}

fn all_pass(checks: &[Check<f64>]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Solve, certify, and write the profile and the energy report.
pub fn run_solve(config: &RunConfig) -> CliResult<Outcome> {
    let id = case_id(&config.identity());
    let rule = QuadratureRule::default();
    let profile = evaluate_solution(&config.spec, &config.grid()?, &rule)?;
    let energy = duality_gap(&profile, &rule)?;
    let checks = certification_checks(&profile, &energy);
    let passed = all_pass(&checks);
    let mut sink = Sink::new(&config.out_dir)?;
    if config.emit_csv {
        profile.write_csv(sink.create(format!("{id}.profile.csv"))?)?;
    }
    let body = json!({
        "energy": to_value(&energy),
        "checks": to_value(&checks),
        "shooting": to_value(&profile.shooting),
        "sign": to_value(&profile.sign),
        "kink": profile.kink(),
    });
    finish(config, &id, passed, body, sink)
}

fn finish(config: &RunConfig, id: &str, passed: bool, body: Value, mut sink: Sink) -> CliResult<Outcome> {
    let name = format!("{id}.{}.json", config.mode.as_str());
    let mut outputs = sink.written.clone();
    if config.emit_json {
        outputs.push(name.clone());
    }
    let report = envelope(config, id, passed, body, outputs);
    if config.emit_json {
        sink.json(name, &report)?;
    }
    Ok(Outcome { passed, report })
}

/// Full certification suite; a nodal profile from `profile_csv` is checked instead when given,
/// and `p = 2` runs the Poisson anchor.
pub fn run_verify(config: &RunConfig) -> CliResult<Outcome> {
    let id = case_id(&config.identity());
    let spec = &config.spec;
    let options = VerifyOptions {
        seed: config.seed,
        minimality_probes: config.probes,
        variation_samples: config.variation_samples,
        oracle: config.oracle,
        ..VerifyOptions::default()
    };
    let mut sink = Sink::new(&config.out_dir)?;
    let rule = QuadratureRule::default();

    if let Some(path) = &config.profile_csv {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let nodal = read_profile_csv::<f64, _>(file)?;
        if nodal.grid.first() != spec.r_inner || nodal.grid.last() != spec.r_outer {
            return Err(Error::Profile(format!(
                "profile spans [{}, {}], problem is posed on [{}, {}]",
                nodal.grid.first(),
                nodal.grid.last(),
                spec.r_inner,
                spec.r_outer
            ))
            .into());
        }
        let report = verify_nodal(spec, &nodal.grid, &nodal.u, &options)?;
        let mut body = to_value(&report);
        body["profile_source"] = json!(path.display().to_string());
        if !spec.is_oracle_only() {
            let reference = evaluate_solution(spec, &nodal.grid, &rule)?;
            body["distance_to_analytic"] = to_value(&nodal_distance(spec, &nodal.grid, &nodal.u, &reference)?);
        }
        return finish(config, &id, report.passed, body, sink);
    }

    let grid = config.grid()?;
    if spec.is_oracle_only() {
        let report = verify_poisson(spec, &grid)?;
        if config.emit_csv {
            minimize_discrete_energy(spec, &grid)?.write_csv(spec, sink.create(format!("{id}.oracle.csv"))?)?;
        }
        let mut body = to_value(&report);
        body["profile_source"] = json!("oracle");
        return finish(config, &id, report.passed, body, sink);
    }

    let (profile, report) = verify(spec, &grid, &rule, &options)?;
    if config.emit_csv {
        profile.write_csv(sink.create(format!("{id}.profile.csv"))?)?;
    }
    let mut body = to_value(&report);
    body["profile_source"] = json!("analytic");
    finish(config, &id, report.passed, body, sink)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub sup: f64,
    pub seminorm: f64,
    pub c_epsilon: f64,
}

/// Distances of `u_ε` to the `reference_epsilon` solution along the configured sequence.
pub fn run_converge(config: &RunConfig) -> CliResult<Outcome> {
    let id = case_id(&config.identity());
    let spec = &config.spec;
    let epsilons = config.epsilons.clone().unwrap_or_default();
    spec.validate()?;
    if spec.is_oracle_only() {
        return Err(Error::OracleOnlyExponent.into());
    }
    let grid = config.grid()?;
    let rule = QuadratureRule::default();
    let mut note = None;
    let rows: Vec<ConvergenceRow> = if spec.p > 2.0 {
        note = Some(format!(
            "p = {} > 2: the regularization switch is off, every epsilon gives the same solution and all distances are 0",
            spec.p
        ));
        let c = evaluate_solution(spec, &grid, &rule)?.c_epsilon;
        epsilons.iter().map(|&epsilon| ConvergenceRow { epsilon, sup: 0.0, seminorm: 0.0, c_epsilon: c }).collect()
    } else {
        let reference = evaluate_solution(&spec.with_epsilon(config.reference_epsilon), &grid, &rule)?;
        let target = reference.grid_function();
        epsilons
            .par_iter()
            .map(|&epsilon| {
                let profile = evaluate_solution(&spec.with_epsilon(epsilon), &grid, &rule)?;
                let d = compare(&profile.grid_function(), &target, spec)?;
                Ok(ConvergenceRow { epsilon, sup: d.sup, seminorm: d.seminorm, c_epsilon: profile.c_epsilon })
            })
            .collect::<plap_core::Result<_>>()?
    };
    let non_increasing = |f: fn(&ConvergenceRow) -> f64| rows.windows(2).all(|w| f(&w[1]) <= f(&w[0]));
    let strictly = |f: fn(&ConvergenceRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let sup_ok = non_increasing(|r| r.sup);
    let semi_ok = non_increasing(|r| r.seminorm);
    let passed = sup_ok && semi_ok;
    let mut sink = Sink::new(&config.out_dir)?;
    if config.emit_csv {
        let mut w = sink.create(format!("{id}.converge.csv"))?;
        use std::io::Write;
        let path = config.out_dir.join(format!("{id}.converge.csv"));
        let io = |e| CliError::io(&path, e);
        writeln!(w, "epsilon,sup,seminorm,c_epsilon").map_err(io)?;
        for r in &rows {
            writeln!(w, "{:?},{:?},{:?},{:?}", r.epsilon, r.sup, r.seminorm, r.c_epsilon).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    let body = json!({
        "reference_epsilon": config.reference_epsilon,
        "rows": to_value(&rows),
        "sup_non_increasing": sup_ok,
        "seminorm_non_increasing": semi_ok,
        "strictly_decreasing": strictly(|r| r.sup) && strictly(|r| r.seminorm),
        "note": note,
    });
    finish(config, &id, passed, body, sink)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub case_id: String,
    pub p: f64,
    pub epsilon: f64,
    pub source: SourceTerm<f64>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub el_residual_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signed_minimum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

/// The `(p, f, ε)` cases of a sweep, in a fixed order. `ε` only varies where it matters (`p < 2`).
pub fn sweep_cases(config: &RunConfig) -> Vec<ProblemSpec<f64>> {
    let base = &config.spec;
    let ps = config.p_list.clone().unwrap_or_else(|| vec![base.p]);
    let fs = config.f_list.clone().unwrap_or_else(|| vec![base.source.clone()]);
    let eps = config.epsilons.clone().unwrap_or_else(|| vec![base.epsilon]);
    let mut cases = Vec::new();
    for &p in &ps {
        for f in &fs {
            let spec = ProblemSpec { p, source: f.clone(), ..base.clone() };
            if p < 2.0 {
                cases.extend(eps.iter().map(|&e| spec.with_epsilon(e)));
            } else {
                cases.push(spec);
            }
        }
    }
    cases
}

fn sweep_case(config: &RunConfig, spec: &ProblemSpec<f64>) -> (SweepRow, Option<Vec<u8>>) {
    let mut identity = config.identity();
    identity["spec"] = to_value(spec);
    for key in ["mode", "p_list", "f_list", "epsilons"] {
        identity.as_object_mut().expect("object").remove(key);
    }
    let id = case_id(&identity);
    let mut row = SweepRow {
        case_id: id,
        p: spec.p,
        epsilon: spec.epsilon,
        source: spec.source.clone(),
        passed: false,
        c_epsilon: None,
        gap_rel: None,
        el_residual_norm: None,
        signed_minimum: None,
        error: None,
    };
    let rule = QuadratureRule::default();
    let result = config.grid().and_then(|grid| {
        let profile = evaluate_solution(spec, &grid, &rule)?;
        let energy = duality_gap(&profile, &rule)?;
        Ok((profile, energy))
    });
    match result {
        Ok((profile, energy)) => {
            row.passed = all_pass(&certification_checks(&profile, &energy));
            row.c_epsilon = Some(energy.c_epsilon);
            row.gap_rel = Some(energy.gap_rel);
            row.el_residual_norm = Some(energy.el_residual_norm);
            row.signed_minimum = Some(profile.signed_minimum());
            let csv = config.emit_csv.then(|| {
                let mut buf = Vec::new();
                profile.write_csv(&mut buf).map(|_| buf).ok()
            });
            (row, csv.flatten())
        }
        Err(e) => {
            row.error = Some(e.to_json()["error"].clone());
            (row, None)
        }
    }
}

/// Independent certified solves over the `(p, f, ε)` cross product, run in parallel.
pub fn run_sweep(config: &RunConfig) -> CliResult<Outcome> {
    let id = case_id(&config.identity());
    let cases = sweep_cases(config);
    let results: Vec<(SweepRow, Option<Vec<u8>>)> = cases.par_iter().map(|s| sweep_case(config, s)).collect();
    let mut sink = Sink::new(&config.out_dir)?;
    let mut rows = Vec::with_capacity(results.len());
    for (row, csv) in results {
        if let Some(bytes) = csv {
            let name = format!("{}.profile.csv", row.case_id);
            let path = config.out_dir.join(&name);
            fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            sink.written.push(name);
        }
        rows.push(row);
    }
    let passed = rows.iter().all(|r| r.passed);
    let failures = rows.iter().filter(|r| !r.passed).count();
    let body = json!({"cases": rows.len(), "failures": failures, "rows": to_value(&rows)});
    finish(config, &id, passed, body, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    #[test]
    fn case_ids_are_stable_hex() {
        let id = case_id(&json!({"a": 1}));
        assert_eq!(id.len(), 16);
        assert_eq!(id, case_id(&json!({"a": 1})));
        assert_ne!(id, case_id(&json!({"a": 2})));
    }

    #[test]
    fn sweep_case_order() {
        let doc = json!({
            "mode": "sweep",
            "spec": {"r_inner": 1.0, "r_outer": 2.0, "dim": 2, "p": 3.0, "epsilon": 0.1,
                     "source": {"kind": "constant", "value": 1.0}},
            "p_list": [1.5, 3.0],
            "f_list": [{"kind": "constant", "value": 1.0}, {"kind": "constant", "value": -1.0}],
            "epsilons": [0.2, 0.1]
        });
        let c = RunConfig::from_value(doc, &Overrides::default()).unwrap();
        let cases = sweep_cases(&c);
        let got: Vec<(f64, f64)> = cases.iter().map(|s| (s.p, s.epsilon)).collect();
        assert_eq!(got, vec![(1.5, 0.2), (1.5, 0.1), (1.5, 0.2), (1.5, 0.1), (3.0, 0.1), (3.0, 0.1)]);
    }
}
