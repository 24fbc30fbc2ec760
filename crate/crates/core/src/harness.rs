//! Benchmark grids over the problem suite, run records and Dolan–Moré
//! performance profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{solve, SolverKind, Status, TrConfig};
use crate::error::HarnessError;
use crate::init::InitOption;
use crate::problems::{problem, problem_names, ProblemDef};

/// Number of evenly spaced τ samples in a profile, before breakpoints are merged in.
pub const PROFILE_SAMPLES: usize = 512;
/// Floor applied to wall times so ratios stay finite.
pub const WALL_MS_FLOOR: f64 = 1e-3;

pub const RUNS_HEADER: [&str; 13] = [
    "problem", "n", "solver", "m", "option", "status", "iters", "fevals", "gevals", "final_gnorm", "final_f",
    "wall_ms", "fallback_steps",
];

/// One solver configuration of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(rename = "type")]
    pub kind: SolverKind,
    pub m: usize,
    /// Only meaningful for MSS; defaults to `half-sum-bb`.
    #[serde(default)]
    pub option: Option<InitOption>,
}

impl SolverSpec {
    pub fn option_name(&self) -> &'static str {
        match self.kind {
            SolverKind::Mss => self.option.unwrap_or(InitOption::HalfSumBb).name(),
            _ => "none",
        }
    }

    pub fn label(&self) -> String {
        run_label(self.kind.name(), self.m, self.option_name())
    }
}

fn run_label(solver: &str, m: usize, option: &str) -> String {
    if option == "none" {
        format!("{solver}-m{m}")
    } else {
        format!("{solver}-{option}-m{m}")
    }
}

/// Overrides of the default budgets and tolerances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub iter_factor: Option<usize>,
    pub feval_factor: Option<usize>,
    pub delta_min: Option<f64>,
    pub delta0: Option<f64>,
    pub tau_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Problem names; empty means the whole suite.
    #[serde(default)]
    pub problems: Vec<String>,
    pub n: usize,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub seed: u64,
}

impl GridConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text =
            fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Resolves every problem and checks solver settings.
    pub fn validate(&self) -> Result<Vec<ProblemDef>, HarnessError> {
        if self.solvers.is_empty() {
            return Err(HarnessError::Config("no solvers listed".into()));
        }
        for s in &self.solvers {
            if s.m == 0 {
                return Err(HarnessError::Config(format!("{}: memory must be positive", s.kind)));
            }
            self.tr_config(s).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let names: Vec<String> = if self.problems.is_empty() {
            problem_names().map(String::from).collect()
        } else {
            self.problems.clone()
        };
        let problems = names.iter().map(|name| problem(name, self.n)).collect::<Result<Vec<_>, _>>()?;
        Ok(problems)
    }

    pub fn tr_config(&self, spec: &SolverSpec) -> TrConfig {
        let d = TrConfig::default();
        let b = &self.budgets;
        TrConfig {
            solver: spec.kind,
            m: spec.m,
            option: spec.option.unwrap_or(InitOption::HalfSumBb),
            iter_factor: b.iter_factor.unwrap_or(d.iter_factor),
            feval_factor: b.feval_factor.unwrap_or(d.feval_factor),
            delta_min: b.delta_min.unwrap_or(d.delta_min),
            delta0: b.delta0.unwrap_or(d.delta0),
            tau_g: b.tau_g.unwrap_or(d.tau_g),
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub n: usize,
    pub solver: String,
    pub m: usize,
    pub option: String,
    pub status: Status,
    pub iters: usize,
    pub fevals: usize,
    pub gevals: usize,
    pub final_gnorm: f64,
    pub final_f: f64,
    pub wall_ms: f64,
    pub fallback_steps: usize,
}

impl RunRecord {
    pub fn label(&self) -> String {
        run_label(&self.solver, self.m, &self.option)
    }

    pub fn solved(&self) -> bool {
        self.status == Status::Converged
    }

    /// Same record with the wall time cleared, for replay comparisons.
    pub fn without_timing(&self) -> Self {
        Self { wall_ms: 0.0, ..self.clone() }
    }
}

fn run_cell(p: &ProblemDef, spec: &SolverSpec, cfg: &TrConfig) -> RunRecord {
    let outcome = catch_unwind(AssertUnwindSafe(|| solve(p, cfg)));
    let base = RunRecord {
        problem: p.name.to_string(),
        n: p.n,
        solver: spec.kind.name().to_string(),
        m: spec.m,
        option: spec.option_name().to_string(),
        status: Status::Error,
        iters: 0,
        fevals: 1,
        gevals: 1,
        final_gnorm: f64::NAN,
        final_f: f64::NAN,
        wall_ms: 0.0,
        fallback_steps: 0,
    };
    match outcome {
        Ok(Ok(r)) => RunRecord {
            status: r.status,
            iters: r.iters,
            fevals: r.fevals,
            gevals: r.gevals,
            final_gnorm: r.final_gnorm,
            final_f: r.final_f,
            wall_ms: r.wall_ms,
            fallback_steps: r.fallback_steps,
            ..base
        },
        Ok(Err(e)) => {
            warn!("{} / {}: {e}", p.name, spec.label());
            base
        }
        Err(_) => {
            warn!("{} / {}: run panicked", p.name, spec.label());
            base
        }
    }
}

/// Runs every (problem, solver) cell with at most `jobs` threads.
/// Records come back in problem-major order regardless of scheduling.
pub fn run_grid(config: &GridConfig, jobs: usize) -> Result<Vec<RunRecord>, HarnessError> {
    let problems = config.validate()?;
    let cells: Vec<(&ProblemDef, &SolverSpec)> =
        problems.iter().flat_map(|p| config.solvers.iter().map(move |s| (p, s))).collect();
    info!("running {} cells on {} threads", cells.len(), jobs.max(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        cells
            .par_iter()
            .map(|(p, s)| run_cell(p, s, &config.tr_config(s)))
            .collect::<Vec<_>>()
    });
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "fevals")]
    Fevals,
    #[serde(rename = "wall_ms")]
    WallMs,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Fevals, Metric::WallMs];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Fevals => "fevals",
            Metric::WallMs => "wall_ms",
        }
    }

    fn of(self, r: &RunRecord) -> f64 {
        match self {
            Metric::Fevals => r.fevals as f64,
            Metric::WallMs => r.wall_ms.max(WALL_MS_FLOOR),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fevals" => Ok(Metric::Fevals),
            "wall_ms" | "wall-ms" => Ok(Metric::WallMs),
            other => Err(HarnessError::Config(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileCurve {
    pub label: String,
    /// `(τ, π(τ))` on the shared grid.
    pub points: Vec<(f64, f64)>,
}

type ProblemKey = (String, usize);

/// `log₂ r_{p,s}` per label and problem; unsolved runs are `+∞`.
fn log_ratios(records: &[RunRecord], metric: Metric) -> (Vec<String>, Vec<ProblemKey>, BTreeMap<String, Vec<f64>>) {
    let labels: BTreeSet<String> = records.iter().map(RunRecord::label).collect();
    let problems: BTreeSet<ProblemKey> = records.iter().map(|r| (r.problem.clone(), r.n)).collect();
    let mut table: BTreeMap<(ProblemKey, String), f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.solved()) {
        let key = ((r.problem.clone(), r.n), r.label());
        let v = metric.of(r);
        table.entry(key).and_modify(|t| *t = t.min(v)).or_insert(v);
    }
    let labels: Vec<String> = labels.into_iter().collect();
    let problems: Vec<ProblemKey> = problems.into_iter().collect();
    let mut out: BTreeMap<String, Vec<f64>> = labels.iter().map(|l| (l.clone(), Vec::new())).collect();
    for p in &problems {
        let best = labels
            .iter()
            .filter_map(|l| table.get(&(p.clone(), l.clone())))
            .fold(f64::INFINITY, |a, &b| a.min(b));
        for l in &labels {
            let lr = match table.get(&(p.clone(), l.clone())) {
                Some(&t) => (t / best).log2(),
                None => f64::INFINITY,
            };
            out.get_mut(l).expect("label present").push(lr);
        }
    }
    (labels, problems, out)
}

/// Dolan–Moré profiles, one curve per solver label (sorted).
pub fn performance_profile(records: &[RunRecord], metric: Metric) -> Result<Vec<ProfileCurve>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let (labels, problems, ratios) = log_ratios(records, metric);
    let finite: Vec<f64> = ratios.values().flatten().copied().filter(|v| v.is_finite()).collect();
    let r_max = finite.iter().copied().fold(0.0_f64, f64::max);
    let mut grid: Vec<f64> = (0..PROFILE_SAMPLES)
        .map(|k| r_max * k as f64 / (PROFILE_SAMPLES - 1) as f64)
        .collect();
    grid.extend(finite.iter().copied());
    grid.push(r_max);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let np = problems.len() as f64;
    Ok(labels
        .into_iter()
        .map(|label| {
            let mut lr = ratios[&label].clone();
            lr.sort_by(f64::total_cmp);
            let mut count = 0;
            let points = grid
                .iter()
                .map(|&tau| {
                    while count < lr.len() && lr[count] <= tau {
                        count += 1;
                    }
                    (tau, count as f64 / np)
                })
                .collect();
            ProfileCurve { label, points }
        })
        .collect())
}

/// `100 · (other − ours) / other`.
pub fn percent_improvement(ours: f64, other: f64) -> f64 {
    100.0 * (other - ours) / other
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub label: String,
    pub runs: usize,
    pub solved: usize,
    pub errors: usize,
    /// Total function evaluations over the problems every solver solved.
    pub common_fevals: usize,
    pub common_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub ours: String,
    pub other: String,
    pub ours_fevals: usize,
    pub other_fevals: usize,
    /// `(other − ours) / other` in percent; positive when `ours` needs fewer evaluations.
    pub fevals_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problems: usize,
    pub common_problems: Vec<String>,
    pub solvers: Vec<SolverSummary>,
    pub improvements: Vec<Improvement>,
}

/// Problems (as `name/n`) solved by every label present.
pub fn commonly_solved(records: &[RunRecord]) -> BTreeSet<ProblemKey> {
    let labels: BTreeSet<String> = records.iter().map(RunRecord::label).collect();
    let mut per_problem: BTreeMap<ProblemKey, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        let entry = per_problem.entry((r.problem.clone(), r.n)).or_default();
        if r.solved() {
            entry.insert(r.label());
        }
    }
    per_problem.into_iter().filter(|(_, s)| *s == labels).map(|(p, _)| p).collect()
}

pub fn summarize(records: &[RunRecord]) -> Result<Summary, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let common = commonly_solved(records);
    let labels: BTreeSet<String> = records.iter().map(RunRecord::label).collect();
    let problems: BTreeSet<ProblemKey> = records.iter().map(|r| (r.problem.clone(), r.n)).collect();
    let solvers: Vec<SolverSummary> = labels
        .iter()
        .map(|label| {
            let mine: Vec<&RunRecord> = records.iter().filter(|r| &r.label() == label).collect();
            let in_common: Vec<&&RunRecord> =
                mine.iter().filter(|r| common.contains(&(r.problem.clone(), r.n))).collect();
            SolverSummary {
                label: label.clone(),
                runs: mine.len(),
                solved: mine.iter().filter(|r| r.solved()).count(),
                errors: mine.iter().filter(|r| r.status == Status::Error).count(),
                common_fevals: in_common.iter().map(|r| r.fevals).sum(),
                common_wall_ms: in_common.iter().map(|r| r.wall_ms).sum(),
            }
        })
        .collect();
    let mut improvements = Vec::new();
    for a in &solvers {
        for b in solvers.iter().filter(|b| b.label != a.label) {
            improvements.push(Improvement {
                ours: a.label.clone(),
                other: b.label.clone(),
                ours_fevals: a.common_fevals,
                other_fevals: b.common_fevals,
                fevals_percent: percent_improvement(a.common_fevals as f64, b.common_fevals as f64),
            });
        }
    }
    Ok(Summary {
        problems: problems.len(),
        common_problems: common.into_iter().map(|(p, n)| format!("{p}/{n}")).collect(),
        solvers,
        improvements,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.to_path_buf(), source }
}

pub fn write_runs_csv(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in records {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut rd = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = rd.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(RUNS_HEADER.iter().copied()) {
        return Err(HarnessError::Config(format!("{}: unexpected header", path.display())));
    }
    rd.deserialize().collect::<Result<Vec<RunRecord>, _>>().map_err(csv_err(path))
}

pub fn write_profile_csv(curves: &[ProfileCurve], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["tau".to_string()];
    header.extend(curves.iter().map(|c| c.label.clone()));
    w.write_record(&header).map_err(csv_err(path))?;
    let rows = curves.first().map_or(0, |c| c.points.len());
    for i in 0..rows {
        let mut row = vec![curves[0].points[i].0.to_string()];
        row.extend(curves.iter().map(|c| c.points[i].1.to_string()));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text + "\n").map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// Writes `runs.csv`, `profile_fevals.csv`, `profile_wall_ms.csv` and `summary.json`.
pub fn emit(records: &[RunRecord], out_dir: &Path) -> Result<Summary, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;
    write_runs_csv(records, &out_dir.join("runs.csv"))?;
    for metric in Metric::ALL {
        let curves = performance_profile(records, metric)?;
        write_profile_csv(&curves, &out_dir.join(format!("profile_{}.csv", metric.name())))?;
    }
    let summary = summarize(records)?;
    write_summary(&summary, &out_dir.join("summary.json"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(problem: &str, solver: &str, status: Status, fevals: usize) -> RunRecord {
        RunRecord {
            problem: problem.into(),
            n: 8,
            solver: solver.into(),
            m: 3,
            option: "none".into(),
            status,
            iters: fevals.saturating_sub(1),
            fevals,
            gevals: fevals,
            final_gnorm: 0.0,
            final_f: 0.0,
            wall_ms: fevals as f64,
            fallback_steps: 0,
        }
    }

    fn value_at(c: &ProfileCurve, tau: f64) -> f64 {
        c.points.iter().rev().find(|p| p.0 <= tau).unwrap().1
    }

    #[test]
    fn hand_profile() {
        let rs = vec![
            rec("p1", "a", Status::Converged, 10),
            rec("p2", "a", Status::Converged, 20),
            rec("p1", "b", Status::Converged, 20),
            rec("p2", "b", Status::Converged, 20),
        ];
        let curves = performance_profile(&rs, Metric::Fevals).unwrap();
        assert_eq!(curves[0].label, "a-m3");
        assert_eq!(value_at(&curves[0], 0.0), 1.0);
        assert_eq!(value_at(&curves[1], 0.0), 0.5);
        assert_eq!(value_at(&curves[1], 1.0), 1.0);
        assert_eq!(curves[1].points.last().unwrap().0, 1.0);
    }

    #[test]
    fn single_and_failing_solvers() {
        let rs = vec![rec("p1", "a", Status::Converged, 5), rec("p2", "a", Status::IterLimit, 9)];
        let c = performance_profile(&rs, Metric::Fevals).unwrap();
        assert!(c[0].points.iter().all(|p| p.1 == 0.5));

        let rs = vec![
            rec("p1", "a", Status::Converged, 5),
            rec("p1", "b", Status::DeltaCollapse, 5),
            rec("p2", "b", Status::Error, 1),
        ];
        let c = performance_profile(&rs, Metric::Fevals).unwrap();
        assert!(c[1].points.iter().all(|p| p.1 == 0.0));
        assert!(performance_profile(&[], Metric::Fevals).is_err());
    }

    #[test]
    fn improvement_arithmetic() {
        assert!((percent_improvement(8753.0, 20152.0) - 56.57).abs() < 5e-3);
        assert!((percent_improvement(8753.0, 23066.0) - 62.05).abs() < 5e-3);
    }

    #[test]
    fn summary_uses_common_problems() {
        let rs = vec![
            rec("p1", "a", Status::Converged, 10),
            rec("p1", "b", Status::Converged, 40),
            rec("p2", "a", Status::Converged, 10),
            rec("p2", "b", Status::IterLimit, 99),
        ];
        let s = summarize(&rs).unwrap();
        assert_eq!(s.common_problems, vec!["p1/8".to_string()]);
        assert_eq!(s.solvers[0].solved, 2);
        assert_eq!(s.solvers[0].common_fevals, 10);
        assert_eq!(s.solvers[1].common_fevals, 40);
        let imp = s.improvements.iter().find(|i| i.ours == "a-m3").unwrap();
        assert_eq!(imp.fevals_percent, 75.0);
    }

    #[test]
    fn config_parsing_and_validation() {
        let cfg = GridConfig::from_json(
            r#"{"problems": ["ext-rosenbrock"], "n": 8,
                "solvers": [{"type": "mss", "m": 3, "option": "half-sum-bb"}, {"type": "lsr1-bb", "m": 5}],
                "budgets": {"iter_factor": 3}}"#,
        )
        .unwrap();
        assert_eq!(cfg.solvers[1].label(), "lsr1-bb-m5");
        assert_eq!(cfg.solvers[0].label(), "mss-half-sum-bb-m3");
        assert_eq!(cfg.tr_config(&cfg.solvers[0]).iter_factor, 3);
        assert!(cfg.validate().is_ok());

        assert!(GridConfig::from_json(r#"{"n": 8, "solvers": [{"type": "bfgs", "m": 3}]}"#).is_err());
        assert!(GridConfig::from_json(r#"{"n": 8, "solvers": [{"type": "mss", "m": 3, "option": "x"}]}"#).is_err());
        let missing = GridConfig { problems: vec!["nope".into()], ..cfg.clone() };
        assert!(matches!(missing.validate(), Err(HarnessError::Problem(_))));
        let bad_n = GridConfig { n: 6, ..cfg };
        assert!(bad_n.validate().is_err());
    }
}
