//! Scenario files, task dispatch and report emission.
//!
//! A scenario is a JSON object with a header (`name`, `mode`, `window`,
//! `seed`), a `task` tagged by `kind`, and an optional stored `expected`
//! report. Reports are deterministic: in rational mode the same scenario
//! yields the same bytes.
//!
//! Files tag variants inline (`"kind"`, `"op"`, `"action"`); they are moved
//! to the external form before decoding so that error paths reach into the
//! payload.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::check::{all_passed, Check};
use crate::density::{common_disk, Enumeration, EpsilonNet, Role};
use crate::error::{Error, Result};
use crate::finite_rank::{Base, FiniteRankOperator};
use crate::hypercyclic::{
    bml_premise_check, build_nonorbit_set, build_shift_operator, omega_shift_demo, omega_shift_operator,
    path_operator, refute_orbit, transitivity_witness, verify_shift, NonOrbitSet,
};
use crate::omega::{build_omega_operator, interleave_triangularize, verify_omega, verify_triangularize};
use crate::random::Gen;
use crate::scalar::{Field, Rational, ScalarMode};
use crate::spaces::{DiskSpec, SeminormSpec};
use crate::sparse::{CoordFunctional, SparseVector};
use crate::transport::{matched_pairs, run_transport, verify_transport, EpsSchedule};

/// Bumped whenever the report layout changes.
pub const REPORT_FORMAT: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", deny_unknown_fields)]
pub struct Scenario<S> {
    pub name: String,
    #[serde(default = "default_mode")]
    pub mode: ScalarMode,
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
    pub task: Task<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Value>,
}

fn default_mode() -> ScalarMode {
    ScalarMode::Rational
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", rename_all = "snake_case")]
pub enum Task<S> {
    Transport(TransportTask<S>),
    Triangularize(TriangularizeTask<S>),
    Disk(DiskTask<S>),
    Hypercyclic(HypercyclicTask<S>),
    Refute(RefuteTask<S>),
}

impl<S> Task<S> {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Transport(_) => "transport",
            Task::Triangularize(_) => "triangularize",
            Task::Disk(_) => "disk",
            Task::Hypercyclic(_) => "hypercyclic",
            Task::Refute(_) => "refute",
        }
    }
}

/// Without `a` and `b` a pair-swapped instance is drawn from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", deny_unknown_fields)]
pub struct TransportTask<S> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<SparseVector<S>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<SparseVector<S>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<SeminormSpec<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk: Option<DiskSpec<S>>,
    pub stages: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<EpsSchedule<S>>,
}

/// Without `basis` a random basis of the window is drawn; `funcs` default to `δ₁..δ_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", deny_unknown_fields)]
pub struct TriangularizeTask<S> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<SparseVector<S>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub funcs: Option<Vec<CoordFunctional<S>>>,
    pub stages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiskTask<S> {
    /// Gauges of `queries` in an explicit disk.
    Gauge { disk: DiskSpec<S>, queries: Vec<SparseVector<S>> },
    /// Gauges in the disk generated by a truncated null sequence.
    NullSequence { sequence: Vec<SparseVector<S>>, queries: Vec<SparseVector<S>> },
    /// Common disk of two sets that are `eps`-nets for `targets`.
    Common {
        a: Vec<SparseVector<S>>,
        b: Vec<SparseVector<S>>,
        targets: Vec<SparseVector<S>>,
        #[serde(with = "crate::scalar::text")]
        eps: S,
        #[serde(default = "one")]
        rounds: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", rename_all = "snake_case", deny_unknown_fields)]
pub enum HypercyclicTask<S> {
    /// Defaults: `us = e₁..e_N`, `p = SUP` and `D = ℓ¹` on the window, 500 samples.
    BuildShift {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        us: Option<Vec<SparseVector<S>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<SeminormSpec<S>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        disk: Option<DiskSpec<S>>,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Defaults: `T = I + Σ 2^{−k} δ_{k+1}⊗e_k` on the window, `p = SUP` on
    /// its first half, random pairs from the seed.
    Witness {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<FiniteRankOperator<S>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<SeminormSpec<S>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<(SparseVector<S>, SparseVector<S>)>>,
        #[serde(default = "default_pairs")]
        random_pairs: usize,
        #[serde(default = "default_eps", with = "crate::scalar::text")]
        eps: S,
        #[serde(default = "default_max_n")]
        max_n: usize,
    },
    Bml {
        t: FiniteRankOperator<S>,
        depth: usize,
    },
    OmegaShift {
        x0: SparseVector<S>,
        horizon: usize,
    },
}

fn default_samples() -> usize {
    500
}

fn default_pairs() -> usize {
    10
}

fn default_eps<S: Field>() -> S {
    S::from_ratio(1, 1000)
}

fn default_max_n() -> usize {
    64
}

/// A candidate orbit `(T, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", deny_unknown_fields)]
pub struct Candidate<S> {
    pub t: FiniteRankOperator<S>,
    pub x: SparseVector<S>,
}

/// Defaults: `pₙ = max_{i≤n}|xᵢ|` for `n ≤ N`, `B = {e₁}`, candidates drawn from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Field", deny_unknown_fields)]
pub struct RefuteTask<S> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<SeminormSpec<S>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<SparseVector<S>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Candidate<S>>>,
    #[serde(default = "default_pairs")]
    pub random_candidates: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub task: String,
    pub mode: String,
    pub window: usize,
    pub seed: u64,
    pub scenario_hash: String,
    pub versions: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Table>,
    pub data: Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }

    /// The tables plus the checks as a `checks` table.
    pub fn tabular(&self) -> BTreeMap<String, Table> {
        let mut out = self.tables.clone();
        if !self.checks.is_empty() {
            let mut t = Table::new(&["name", "passed", "detail"]);
            for c in &self.checks {
                t.push(vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]);
            }
            out.insert("checks".into(), t);
        }
        out
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("orbitlab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("report_format".to_string(), REPORT_FORMAT.to_string()),
    ])
}

/// Output of a task before the header is attached.
#[derive(Default)]
struct Outcome {
    checks: Vec<Check>,
    tables: BTreeMap<String, Table>,
    data: Value,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report data serializes")
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

fn decode<T: for<'de> Deserialize<'de>>(value: &Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        schema(&path, e.into_inner().to_string())
    })
}

/// Parses and runs one scenario document.
pub fn run_scenario_json(text: &str) -> Result<Report> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    run_scenario_value(&value)
}

pub fn run_scenario_value(value: &Value) -> Result<Report> {
    let mode = match value.get("mode") {
        None => ScalarMode::Rational,
        Some(m) => decode::<ScalarMode>(m).map_err(|e| match e {
            Error::Schema { message, .. } => schema("mode", message),
            other => other,
        })?,
    };
    match mode {
        ScalarMode::Rational => run_scenario(&parse_scenario::<Rational>(value)?),
        ScalarMode::Float => run_scenario(&parse_scenario::<f64>(value)?),
    }
}

fn retag(value: &Value, tag: &str, path: &str) -> Result<Value> {
    let Value::Object(map) = value else {
        return Err(schema(path, "expected an object"));
    };
    let mut rest = map.clone();
    match rest.remove(tag) {
        Some(Value::String(t)) => Ok(json!({ t: Value::Object(rest) })),
        Some(_) => Err(schema(&format!("{path}.{tag}"), "expected a string")),
        None => Err(schema(path, format!("missing field `{tag}`"))),
    }
}

/// Decodes a scenario document written with inline tags.
pub fn parse_scenario<S: Field>(value: &Value) -> Result<Scenario<S>> {
    let mut doc = value.clone();
    let Some(task) = value.get("task") else {
        return Err(schema(".", "missing field `task`"));
    };
    let mut task = retag(task, "kind", "task")?;
    // error paths are reported in the inline-tag layout of the file
    let mut injected = Vec::new();
    if let Some((kind, _)) = task.as_object().and_then(|m| m.iter().next()) {
        injected.push(format!("task.{kind}"));
    }
    for (kind, tag) in [("disk", "op"), ("hypercyclic", "action")] {
        if let Some(inner) = task.get(kind) {
            let retagged = retag(inner, tag, &format!("task.{kind}"))?;
            if let Some((op, _)) = retagged.as_object().and_then(|m| m.iter().next()) {
                injected.insert(0, format!("task.{kind}.{op}"));
            }
            task[kind] = retagged;
        }
    }
    doc["task"] = task;
    decode(&doc).map_err(|e| match e {
        Error::Schema { path, message } => {
            let path = injected
                .iter()
                .find_map(|prefix| {
                    path.strip_prefix(prefix.as_str())
                        .filter(|rest| rest.is_empty() || rest.starts_with(['.', '[']))
                        .map(|rest| format!("task{rest}"))
                })
                .unwrap_or(path);
            Error::Schema { path, message }
        }
        other => other,
    })
}

/// SHA-256 of the scenario's canonical JSON without its `expected` block.
pub fn scenario_hash<S: Field>(s: &Scenario<S>) -> String {
    let mut bare = s.clone();
    bare.expected = None;
    let bytes = serde_json::to_vec(&bare).expect("scenario serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn run_scenario<S: Field>(s: &Scenario<S>) -> Result<Report> {
    validate_window(s)?;
    let outcome = match &s.task {
        Task::Transport(t) => run_transport_task(s, t),
        Task::Triangularize(t) => run_triangularize_task(s, t),
        Task::Disk(t) => run_disk_task(t),
        Task::Hypercyclic(t) => run_hypercyclic_task(s, t),
        Task::Refute(t) => run_refute_task(s, t),
    };
    let outcome = outcome.unwrap_or_else(|e| Outcome {
        checks: vec![Check::new("run", false, format!("{}: {e}", e.code_name()))],
        ..Outcome::default()
    });
    let mut report = Report {
        scenario: s.name.clone(),
        task: s.task.name().into(),
        mode: s.mode.to_string(),
        window: s.window,
        seed: s.seed,
        scenario_hash: scenario_hash(s),
        versions: versions(),
        checks: outcome.checks,
        tables: outcome.tables,
        data: outcome.data,
    };
    if let Some(expected) = &s.expected {
        let actual = to_value(&report);
        let check = if actual == *expected {
            Check::pass("regression")
        } else {
            Check::new("regression", false, first_difference(expected, &actual, "$"))
        };
        report.checks.push(check);
    }
    Ok(report)
}

fn first_difference(expected: &Value, actual: &Value, path: &str) -> String {
    match (expected, actual) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, va) in a {
                match b.get(k) {
                    Some(vb) if va != vb => return first_difference(va, vb, &format!("{path}.{k}")),
                    None => return format!("{path}.{k} missing"),
                    _ => {}
                }
            }
            b.keys().find(|k| !a.contains_key(*k)).map_or_else(
                || format!("{path} differs"),
                |k| format!("{path}.{k} unexpected"),
            )
        }
        (Value::Array(a), Value::Array(b)) if a.len() == b.len() => a
            .iter()
            .zip(b)
            .enumerate()
            .find(|(_, (x, y))| x != y)
            .map_or_else(|| format!("{path} differs"), |(i, (x, y))| first_difference(x, y, &format!("{path}[{i}]"))),
        _ => format!("{path}: expected {expected}, got {actual}"),
    }
}

fn validate_window<S: Field>(s: &Scenario<S>) -> Result<()> {
    let need = match &s.task {
        Task::Transport(t) if t.a.is_none() => 4 * t.stages.max(1),
        Task::Triangularize(t) if t.basis.is_none() => 2 * t.stages + 2,
        Task::Hypercyclic(HypercyclicTask::Witness { .. }) => 2,
        Task::Refute(_) => 2,
        _ => 1,
    };
    if s.window < need {
        return Err(schema("window", format!("{} needs window ≥ {need}, got {}", s.task.name(), s.window)));
    }
    Ok(())
}

fn s_text<S: Field>(x: &S) -> String {
    x.canonical()
}

fn run_transport_task<S: Field>(s: &Scenario<S>, t: &TransportTask<S>) -> Result<Outcome> {
    let schedule = t.eps_schedule.clone().unwrap_or(EpsSchedule::Geometric(S::from_ratio(1, 2)));
    let (a, b, p, disk) = match (&t.a, &t.b) {
        (Some(a), Some(b)) => (
            Enumeration::new(Role::A, a.clone())?,
            Enumeration::new(Role::B, b.clone())?,
            t.p.clone().unwrap_or_else(|| SeminormSpec::sup_upto((s.window / 2).max(1))),
            t.disk.clone().unwrap_or_else(|| DiskSpec::l1_upto(s.window)),
        ),
        (None, None) => {
            let inst = Gen::new(s.seed).transport_instance::<S>(s.window, t.stages);
            (inst.a, inst.b, inst.p, inst.disk)
        }
        _ => return Err(schema("task", "give both `a` and `b` or neither")),
    };
    let mut pairs = Table::new(&["j", "n_j", "m_j", "residual"]);
    match run_transport(&a, &b, &p, &disk, &schedule, t.stages) {
        Ok((j, state)) => {
            for mp in matched_pairs(&state) {
                pairs.push(vec![mp.j.to_string(), mp.n.to_string(), mp.m.to_string(), s_text(&mp.residual)]);
            }
            let checks = verify_transport(&state);
            Ok(Outcome {
                checks,
                tables: BTreeMap::from([("pairs".into(), pairs)]),
                data: json!({ "j": to_value(&j), "state": to_value(&state) }),
            })
        }
        Err(abort) => Ok(Outcome {
            checks: vec![Check::new("run", false, format!("{}: {}", abort.error.code_name(), abort.error))],
            tables: BTreeMap::from([("pairs".into(), pairs)]),
            data: json!({ "partial": to_value(&*abort.partial) }),
        }),
    }
}

fn run_triangularize_task<S: Field>(s: &Scenario<S>, t: &TriangularizeTask<S>) -> Result<Outcome> {
    let basis = match &t.basis {
        Some(b) => b.clone(),
        None => Gen::new(s.seed).basis(s.window, s.window, 0.3),
    };
    let funcs = t.funcs.clone().unwrap_or_else(|| (1..=s.window).map(CoordFunctional::delta).collect());
    let state = interleave_triangularize(&basis, &funcs, t.stages)?;
    let mut checks = verify_triangularize(&state);
    let mut data = json!({ "state": to_value(&state) });
    match build_omega_operator(&state) {
        Ok(op) => {
            checks.extend(verify_omega(&state, &op));
            data["operator"] = to_value(&op);
        }
        Err(e) if t.funcs.is_some() => {
            checks.push(Check::new("omega_operator", true, format!("skipped: {e}")));
        }
        Err(e) => return Err(e),
    }
    let mut table = Table::new(&["n", "alpha", "beta", "minor"]);
    for (i, minor) in state.minors.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), state.alpha[i].to_string(), state.beta[i].to_string(), s_text(minor)]);
    }
    Ok(Outcome { checks, tables: BTreeMap::from([("stages".into(), table)]), data })
}

fn gauge_table<S: Field>(disk: &DiskSpec<S>, queries: &[SparseVector<S>]) -> Result<Table> {
    let mut table = Table::new(&["query", "gauge"]);
    for (i, q) in queries.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), s_text(&disk.gauge(q)?)]);
    }
    Ok(table)
}

fn run_disk_task<S: Field>(t: &DiskTask<S>) -> Result<Outcome> {
    match t {
        DiskTask::Gauge { disk, queries } => Ok(Outcome {
            checks: vec![Check::pass("gauges")],
            tables: BTreeMap::from([("gauges".into(), gauge_table(disk, queries)?)]),
            data: json!({ "disk": to_value(disk) }),
        }),
        DiskTask::NullSequence { sequence, queries } => {
            let disk = crate::density::null_sequence_disk(sequence);
            let inside = sequence.iter().all(|x| disk.gauge(x).is_ok_and(|g| g <= S::one()));
            Ok(Outcome {
                checks: vec![Check::new("sequence_in_disk", inside, "p_D(x_n) ≤ 1")],
                tables: BTreeMap::from([("gauges".into(), gauge_table(&disk, queries)?)]),
                data: json!({ "disk": to_value(&disk) }),
            })
        }
        DiskTask::Common { a, b, targets, eps, rounds } => {
            let window = a.iter().chain(b).chain(targets).map(SparseVector::max_index).max().unwrap_or(0);
            let net = EpsilonNet { window, targets: targets.clone(), eps: eps.clone() };
            let a = Enumeration::new(Role::A, a.clone())?;
            let b = Enumeration::new(Role::B, b.clone())?;
            let cd = common_disk(&a, &b, &net, *rounds)?;
            let mut checks = Vec::new();
            let gens_ok = cd.generators.iter().all(|g| cd.disk.gauge(g).is_ok_and(|v| v <= S::one()));
            checks.push(Check::new("generators_in_disk", gens_ok, format!("{} generators", cd.generators.len())));
            let sched_ok = cd.schedule.iter().all(|e| {
                let bound = S::pow2(-(e.m as i32));
                e.pd_a <= bound && e.pd_b <= bound
            });
            checks.push(Check::new("schedule_bounds", sched_ok, "p_D(f(m) − α(m)), p_D(f(m) − β(m)) ≤ 2^{−m}"));
            let dom_ok = a
                .items
                .iter()
                .chain(&b.items)
                .all(|x| cd.disk.gauge(x).is_ok_and(|g| x.max_abs() <= cd.domination.clone() * g));
            checks.push(Check::new("window_domination", dom_ok, format!("constant {}", s_text(&cd.domination))));
            let mut table = Table::new(&["target", "nearest_a", "dist_a", "nearest_b", "dist_b"]);
            for d in &cd.distances {
                table.push(vec![
                    d.target.to_string(),
                    d.nearest_a.to_string(),
                    s_text(&d.dist_a),
                    d.nearest_b.to_string(),
                    s_text(&d.dist_b),
                ]);
            }
            Ok(Outcome {
                checks,
                tables: BTreeMap::from([("net".into(), table)]),
                data: json!({
                    "disk": to_value(&cd.disk),
                    "eps_prime": s_text(&cd.eps_prime),
                    "schedule": to_value(&cd.schedule),
                }),
            })
        }
    }
}

/// `I + Σ_{k<N} 2^{−k} δ_{k+1}⊗e_k`.
pub fn default_shift<S: Field>(window: usize) -> FiniteRankOperator<S> {
    FiniteRankOperator::new(
        Base::Identity,
        (1..window).map(|k| (CoordFunctional::delta(k + 1), SparseVector::basis(k).scale(&S::pow2(-(k as i32))))),
    )
}

fn run_hypercyclic_task<S: Field>(s: &Scenario<S>, t: &HypercyclicTask<S>) -> Result<Outcome> {
    let n = s.window;
    let mut gen = Gen::new(s.seed);
    match t {
        HypercyclicTask::BuildShift { us, p, disk, samples } => {
            let us = us.clone().unwrap_or_else(|| (1..=n).map(SparseVector::basis).collect());
            let p = p.clone().unwrap_or_else(|| SeminormSpec::sup_upto(n));
            let disk = disk.clone().unwrap_or_else(|| DiskSpec::l1_upto(n));
            let spec = build_shift_operator(&us, &p, &disk)?;
            let xs: Vec<SparseVector<S>> = (0..*samples).map(|_| gen.vector(n, 0.6)).collect();
            let checks = verify_shift(&spec, &p, &disk, n, &xs);
            let mut table = Table::new(&["n", "weight"]);
            for (i, w) in spec.weights.iter().enumerate() {
                table.push(vec![(i + 1).to_string(), s_text(w)]);
            }
            Ok(Outcome { checks, tables: BTreeMap::from([("weights".into(), table)]), data: to_value(&spec) })
        }
        HypercyclicTask::Witness { t: op, p, pairs, random_pairs, eps, max_n } => {
            let op = op.clone().unwrap_or_else(|| default_shift(n));
            let p = p.clone().unwrap_or_else(|| SeminormSpec::sup_upto((n / 2).max(1)));
            let pairs = pairs.clone().unwrap_or_else(|| {
                (0..*random_pairs).map(|_| (gen.vector(n, 0.5), gen.vector(n, 0.5))).collect()
            });
            let mut table = Table::new(&["pair", "n", "residual_x", "residual_y"]);
            let mut checks = Vec::new();
            let mut found = Vec::new();
            for (i, (x, y)) in pairs.iter().enumerate() {
                let name = format!("witness_{}", i + 1);
                match transitivity_witness(&op, &p, x, y, eps, *max_n, n) {
                    Ok(w) => {
                        // re-evaluate by repeated application rather than the matrix power
                        let rx = p.eval(&w.z.sub(x));
                        let ry = p.eval(&op.power_apply(&w.z, w.n).sub(y));
                        let ok = rx < *eps && ry < *eps;
                        checks.push(Check::new(name, ok, format!("n = {}", w.n)));
                        table.push(vec![(i + 1).to_string(), w.n.to_string(), s_text(&rx), s_text(&ry)]);
                        found.push(to_value(&w));
                    }
                    Err(e) => {
                        checks.push(Check::new(name, false, e.to_string()));
                        found.push(Value::Null);
                    }
                }
            }
            Ok(Outcome { checks, tables: BTreeMap::from([("witnesses".into(), table)]), data: Value::Array(found) })
        }
        HypercyclicTask::Bml { t: op, depth } => {
            let r = bml_premise_check(op, n, *depth);
            let mut table = Table::new(&["n", "range_dim", "kernel_dim", "intersection_dim"]);
            for l in &r.levels {
                table.push(vec![
                    l.n.to_string(),
                    l.range_dim.to_string(),
                    l.kernel_dim.to_string(),
                    l.intersection_dim.to_string(),
                ]);
            }
            let check = Check::new(
                "premise_covers_window",
                r.full(),
                format!("{} of {} window dimensions", r.window_covered, r.window),
            );
            Ok(Outcome { checks: vec![check], tables: BTreeMap::from([("levels".into(), table)]), data: to_value(&r) })
        }
        HypercyclicTask::OmegaShift { x0, horizon } => {
            let orbit = omega_shift_demo(n, x0, *horizon);
            let mut table = Table::new(&["step", "vector"]);
            for (i, y) in orbit.iter().enumerate() {
                table.push(vec![i.to_string(), y.to_string()]);
            }
            Ok(Outcome {
                checks: vec![Check::pass("orbit")],
                tables: BTreeMap::from([("orbit".into(), table)]),
                data: to_value(&orbit),
            })
        }
    }
}

fn run_refute_task<S: Field>(s: &Scenario<S>, t: &RefuteTask<S>) -> Result<Outcome> {
    let n = s.window;
    let family = t.family.clone().unwrap_or_else(|| (1..=n).map(SeminormSpec::sup_upto).collect());
    let b = t.b.clone().unwrap_or_else(|| vec![SparseVector::basis(1)]);
    let set = build_nonorbit_set(&family, Enumeration::new(Role::A, b)?)?;
    let mut gen = Gen::new(s.seed);
    let candidates = match &t.candidates {
        Some(c) => c.clone(),
        None => random_candidates(&mut gen, &set, n, t.random_candidates)?,
    };
    let mut checks = vec![
        Check::new("a_independent", crate::linalg::rank_of(&set.a()) == set.a().len(), format!("|A| = {}", set.a().len())),
        Check::new("kernel_ladder", set.kernel_ladder_holds(), "x_n ∈ ker p_n ∖ ker p_{n+1}"),
    ];
    let mut table =
        Table::new(&["candidate", "exit_step", "m_size", "m_set", "stays_inside", "orbit_not_dense", "p1_rank"]);
    let mut reports = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let r = refute_orbit(&c.t, &c.x, &set, t.horizon);
        let diverges = !r.stays_inside || r.orbit_not_dense;
        let detail = match r.exit_step {
            Some(k) => format!("leaves A at step {k}"),
            None if r.orbit_not_dense => "prefix misses part of A".to_string(),
            None => "prefix equals A".to_string(),
        };
        checks.push(Check::new(format!("candidate_{}_not_an_orbit", i + 1), diverges, detail));
        let m: Vec<String> = r.m_set.iter().map(usize::to_string).collect();
        table.push(vec![
            (i + 1).to_string(),
            r.exit_step.map_or_else(|| "-".into(), |k| k.to_string()),
            r.unit_sum.to_string(),
            m.join(" "),
            r.stays_inside.to_string(),
            r.orbit_not_dense.to_string(),
            r.orbit_p1_rank.to_string(),
        ]);
        reports.push(to_value(&r));
    }
    Ok(Outcome {
        checks,
        tables: BTreeMap::from([("candidates".into(), table)]),
        data: json!({ "set": to_value(&set), "reports": reports }),
    })
}

/// Cycles through arbitrary finite-rank maps, the coordinate shift started in
/// `C`, and path operators that walk a random sequence of `A` before leaving.
pub fn random_candidates<S: Field>(
    gen: &mut Gen,
    set: &NonOrbitSet<S>,
    window: usize,
    count: usize,
) -> Result<Vec<Candidate<S>>> {
    let a = set.a();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let candidate = match i % 3 {
            0 => {
                let base = if gen.range(0, 1) == 0 { Base::Identity } else { Base::Zero };
                let rank = gen.range(1, 3);
                Candidate { t: gen.operator(base, window, rank), x: gen.pick(&a) }
            }
            1 => Candidate { t: omega_shift_operator(window), x: gen.pick(&set.c) },
            _ => {
                let mut order: Vec<usize> = (1..=a.len()).collect();
                order.shuffle(gen.rng());
                order.truncate(gen.range(2, a.len()));
                Candidate { t: path_operator(set, &order, window)?, x: a[order[0] - 1].clone() }
            }
        };
        out.push(candidate);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "txt",
        }
    }
}

const TABLE_MARK: &str = "#table";

pub fn emit_report(r: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(r).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => emit_csv(&r.tabular()),
        Format::Text => emit_text(r).into_bytes(),
    }
}

/// Tables as CSV blocks, each introduced by a `#table,<name>` record.
pub fn emit_csv(tables: &BTreeMap<String, Table>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for (name, t) in tables {
        w.write_record([TABLE_MARK, name.as_str()]).expect("in-memory write");
        w.write_record(&t.columns).expect("in-memory write");
        for row in &t.rows {
            w.write_record(row).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn parse_csv_tables(bytes: &[u8]) -> Result<BTreeMap<String, Table>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes);
    let mut out: BTreeMap<String, Table> = BTreeMap::new();
    let mut current: Option<(String, Option<Table>)> = None;
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.len() == 2 && fields[0] == TABLE_MARK {
            if let Some((name, t)) = current.take() {
                out.insert(name, t.unwrap_or_default());
            }
            current = Some((fields[1].clone(), None));
            continue;
        }
        let Some((_, table)) = current.as_mut() else {
            return Err(Error::Parse("record before the first table marker".into()));
        };
        match table {
            None => *table = Some(Table { columns: fields, rows: Vec::new() }),
            Some(t) => {
                if fields.len() != t.columns.len() {
                    return Err(Error::Parse(format!("row of {} fields under {} columns", fields.len(), t.columns.len())));
                }
                t.rows.push(fields);
            }
        }
    }
    if let Some((name, t)) = current {
        out.insert(name, t.unwrap_or_default());
    }
    Ok(out)
}

fn emit_text(r: &Report) -> String {
    if *r == Report::default() {
        return String::new();
    }
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} ({}, {} mode, window {}, seed {})", r.scenario, r.task, r.mode, r.window, r.seed);
    let _ = writeln!(out, "hash {}", r.scenario_hash);
    for c in &r.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            let _ = writeln!(out, "  {mark} {}", c.name);
        } else {
            let _ = writeln!(out, "  {mark} {}: {}", c.name, c.detail);
        }
    }
    for (name, t) in &r.tables {
        let _ = writeln!(out, "\n[{name}]");
        let widths: Vec<usize> = (0..t.columns.len())
            .map(|i| t.rows.iter().map(|row| row[i].chars().count()).chain([t.columns[i].chars().count()]).max().unwrap_or(0))
            .collect();
        for row in std::iter::once(&t.columns).chain(&t.rows) {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "  {}", cells.join("  ").trim_end());
        }
    }
    let verdict = if r.passed() { "all checks passed" } else { "some checks failed" };
    let _ = writeln!(out, "\n{verdict}");
    out
}
