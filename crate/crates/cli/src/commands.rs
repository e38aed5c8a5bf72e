use std::path::PathBuf;

use jumpest_core::detect::{
    block_sufficient_threshold, decoupled_detectability, ms_detectable_decision, necessary_condition,
    unit_circle_controllability, verify_wonham_form, wonham_decompose, WONHAM_TOL,
};
use jumpest_core::estimators::{los_theoretical_cov, solve_los, EstimatorKind};
use jumpest_core::matrix::RANK_TOL;
use jumpest_core::mjls::assemble;
use jumpest_core::riccati::{cdre_iterate, verify_stabilizing};
use jumpest_core::sim::{emit_csv, monte_carlo, path_csv_path};
use jumpest_core::{Decision, JumpModel, WonhamForm};

use crate::config::ConfigDocument;
use crate::report::{
    AnalysisSection, BlockSummary, CareSection, LosSection, ReportDocument, SimulationSection, SteadyLevel, WonhamSection,
};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct Run {
    pub report: ReportDocument,
    /// Lines for the terminal.
    pub lines: Vec<String>,
    /// Undetectable / non-stabilizing verdict: exit status 2.
    pub negative: bool,
}

impl Run {
    pub fn exit_code(&self) -> i32 {
        if self.negative {
            2
        } else {
            0
        }
    }
}

fn model_of(doc: &ConfigDocument) -> Result<JumpModel, CliError> {
    Ok(assemble(&doc.plant()?, &doc.channels()?)?)
}

fn new_report(command: &str, doc: &ConfigDocument) -> Result<ReportDocument, CliError> {
    let plant = doc.plant()?;
    Ok(ReportDocument::new(command, plant.x0_mean, plant.x0_cov))
}

fn verdict(d: Decision) -> &'static str {
    match d {
        Decision::Detectable => "detectable",
        Decision::Undetectable => "undetectable",
        Decision::Inconclusive => "inconclusive",
    }
}

/// Rank condition, necessary condition, per-block test and the Riccati test.
pub fn cmd_analyze(doc: &ConfigDocument) -> Result<Run, CliError> {
    let model = model_of(doc)?;
    let plant = &model.plant;
    let rank_condition = unit_circle_controllability(&plant.a, &plant.q, RANK_TOL)?;
    let necessary = necessary_condition(&model.chain.channels, &plant.a)?;
    let (decoupled, decoupled_skipped) = match wonham_decompose(&plant.a, &plant.c, WONHAM_TOL) {
        Ok(wf) => (Some(decoupled_detectability(&wf, &model.chain.channels, &doc.solver)?), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let riccati = ms_detectable_decision(&model, &doc.solver)?;
    let decision = if !necessary.holds {
        Decision::Undetectable
    } else if riccati.decision == Decision::Detectable
        || decoupled.as_ref().is_some_and(|d| d.decision == Decision::Detectable)
    {
        Decision::Detectable
    } else {
        riccati.decision
    };

    let mut lines = vec![
        format!(
            "rank condition (unit-circle modes controllable from Q): {}",
            if rank_condition { "satisfied" } else { "violated" }
        ),
        format!(
            "necessary condition: prod(1 - q_i) rho(A)^2 = {:.6} ({})",
            necessary.value,
            if necessary.holds { "holds" } else { "fails" }
        ),
    ];
    match (&decoupled, &decoupled_skipped) {
        (Some(d), _) => {
            for b in &d.blocks {
                lines.push(format!(
                    "block {} (size {}): lambda_c = {:.4}, {:?} test {}",
                    b.block,
                    b.size,
                    b.lambda_c,
                    b.test,
                    if b.passed { "passed" } else { "failed" }
                ));
            }
            lines.push(format!("per-block verdict: {}", verdict(d.decision)));
        }
        (None, Some(why)) => lines.push(format!("per-block test skipped: {why}")),
        (None, None) => {}
    }
    let status = match &riccati.cdre {
        Some(c) => format!(" ({:?} after {} iterations)", c.status, c.iterations).to_lowercase(),
        None => String::new(),
    };
    lines.push(format!("riccati verdict: {}{status}", verdict(riccati.decision)));
    lines.push(format!("decision: {}", verdict(decision)));

    let mut report = new_report("analyze", doc)?;
    report.analysis = Some(AnalysisSection {
        decision,
        rank_condition,
        necessary,
        decoupled,
        decoupled_skipped,
        riccati,
    });
    Ok(Run {
        report,
        lines,
        negative: decision == Decision::Undetectable,
    })
}

/// Solves the coupled Riccati equations for the optimal gains, plus the LOS
/// gain when the plant has a block-triangular form.
pub fn cmd_solve(doc: &ConfigDocument) -> Result<Run, CliError> {
    let model = model_of(doc)?;
    let sol = cdre_iterate(&model, &doc.solver)?;
    let stabilizing = verify_stabilizing(&model, &sol.y);
    let error_cov = sol.total();
    let mut lines = vec![
        format!("converged after {} iterations, residual {:.3e}", sol.iterations, sol.residual),
        format!("closed-loop spectral radius: {:.6}", sol.rho_closed),
        format!("stationary cost sum tr Y_i: {:.6}", error_cov.trace()),
        format!("stabilizing: {}", if stabilizing { "yes" } else { "no" }),
    ];
    let mut report = new_report("solve", doc)?;
    report.care = Some(CareSection {
        cost: sol.cost,
        rho_closed: sol.rho_closed,
        residual: sol.residual,
        iterations: sol.iterations,
        stabilizing,
        y: sol.y.clone(),
        gains: sol.gains.gains.clone(),
        error_cov,
    });
    match wonham_decompose(&model.plant.a, &model.plant.c, WONHAM_TOL).and_then(|wf| {
        let (est, subs) = solve_los(&model, &wf, &doc.solver)?;
        let (cov, _) = los_theoretical_cov(&model, &est)?;
        Ok((est, subs, cov))
    }) {
        Ok((est, subs, cov)) => {
            lines.push(format!("LOS stationary cost: {:.6}", cov.trace()));
            report.los = Some(LosSection {
                gain: est.gain_table.gains[0].clone(),
                block_gains: subs.iter().map(|s| s.gain.clone()).collect(),
                block_rho: subs.iter().map(|s| s.rho_closed).collect(),
                error_cov: cov,
            });
        }
        Err(e) => lines.push(format!("LOS gain unavailable: {e}")),
    }
    Ok(Run {
        report,
        lines,
        negative: !stabilizing,
    })
}

fn wonham_section(wf: &WonhamForm, doc: &ConfigDocument) -> Result<WonhamSection, CliError> {
    let blocks = (0..wf.block_count())
        .map(|i| {
            let lambda_c = block_sufficient_threshold(&wf.a_block(i))?;
            let q = doc.channels[i].q;
            Ok(BlockSummary {
                block: i + 1,
                size: wf.block_sizes[i],
                lambda_c,
                q,
                passes_threshold: q > lambda_c,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(WonhamSection {
        t: wf.t.clone(),
        condition: wf.condition,
        block_sizes: wf.block_sizes.clone(),
        a_transformed: wf.a_transformed.clone(),
        c_transformed: wf.c_transformed.clone(),
        verified: verify_wonham_form(&wf.a_transformed, &wf.c_transformed, &wf.block_sizes, 1e-8),
        blocks,
    })
}

/// Block-triangular decomposition with per-block thresholds.
pub fn cmd_wonham(doc: &ConfigDocument) -> Result<Run, CliError> {
    let model = model_of(doc)?;
    let wf = wonham_decompose(&model.plant.a, &model.plant.c, WONHAM_TOL)?;
    let section = wonham_section(&wf, doc)?;
    let mut lines = vec![format!(
        "block sizes {:?}, transform condition number {:.3e}",
        wf.block_sizes, wf.condition
    )];
    for b in &section.blocks {
        lines.push(format!(
            "block {}: lambda_c = {:.4}, q = {:.4} ({})",
            b.block,
            b.lambda_c,
            b.q,
            if b.passes_threshold { "above threshold" } else { "not above threshold" }
        ));
    }
    let mut report = new_report("wonham", doc)?;
    report.wonham = Some(section);
    Ok(Run {
        report,
        lines,
        negative: false,
    })
}

/// `"os,los"` → `[Os, Los]`. An empty list is allowed.
pub fn parse_estimators(list: &str) -> Result<Vec<EstimatorKind>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<EstimatorKind>().map_err(|e| CliError::Config(format!("--estimators: {e}"))))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub csv: PathBuf,
    /// Defaults to the CSV path with a `.json` extension.
    pub summary: Option<PathBuf>,
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub workers: Option<usize>,
}

/// Monte Carlo run; writes the variance CSV, the channel-path CSV and a JSON summary.
pub fn cmd_simulate(doc: &ConfigDocument, opts: &SimulateOptions) -> Result<Run, CliError> {
    let mut doc = doc.clone();
    if let Some(t) = opts.trials {
        doc.sim.trials = t;
    }
    if let Some(h) = opts.horizon {
        doc.sim.horizon = h;
    }
    if let Some(s) = opts.seed {
        doc.sim.seed = s;
    }
    if let Some(e) = &opts.estimators {
        doc.sim.estimators = e.clone();
    }
    let sc = doc.scenario()?;
    let entries = doc.entries()?;
    let res = monte_carlo(&sc, opts.workers)?;
    emit_csv(&res, &opts.csv, &entries)?;

    let mut steady = Vec::new();
    let mut lines = vec![format!(
        "{} trials, horizon {}, seed {}: wrote {}",
        res.trials,
        res.horizon,
        res.seed,
        opts.csv.display()
    )];
    for s in &res.series {
        for &(i, j) in &entries {
            let level = SteadyLevel {
                estimator: s.kind,
                entry: [i + 1, j + 1],
                empirical: s.steady(i, j),
                theoretical: s.theory.as_ref().map(|t| t[(i, j)]),
            };
            lines.push(match level.theoretical {
                Some(t) => format!(
                    "{} ({},{}) steady level {:.6} (theory {:.6})",
                    s.kind,
                    i + 1,
                    j + 1,
                    level.empirical,
                    t
                ),
                None => format!("{} ({},{}) steady level {:.6}", s.kind, i + 1, j + 1, level.empirical),
            });
            steady.push(level);
        }
    }
    let mut report = new_report("simulate", &doc)?;
    report.seed = Some(sc.master_seed);
    report.simulation = Some(SimulationSection {
        trials: res.trials,
        horizon: res.horizon,
        seed: res.seed,
        estimators: sc.estimators.clone(),
        csv: opts.csv.display().to_string(),
        path_csv: path_csv_path(&opts.csv).display().to_string(),
        steady,
    });
    let summary = opts.summary.clone().unwrap_or_else(|| opts.csv.with_extension("json"));
    report.write(&summary)?;
    Ok(Run {
        report,
        lines,
        negative: false,
    })
}
