//! The request, serve, observe loop.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};

use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, AdversaryEvent, Mode};
use crate::algorithms::{self, OnlineAlgorithm};
use crate::error::{Error, Result};
use crate::mass::{CostLedger, MassConfig};
use crate::numeric;
use crate::offline::{brute_force_opt, BoundsChecker, BoundsReport, OptBudget, OptInstance};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

use super::config::{Resolved, RunConfig};
use super::trace::{BudgetReason, Footer, Header, Record, StepRecord, TraceWriter, SCHEMA};

/// Totals for one executed prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub depth: u32,
    pub b: u32,
    pub h: u64,
    pub k: Q,
    pub epsilon: Q,
    pub rho: Q,
    pub algorithm: String,
    pub requests: u64,
    pub alg_cost: Q,
    pub adv_cost: Q,
    pub opt_cost: Option<Q>,
    /// `alg_cost / adv_cost` when the offline cost is positive.
    pub empirical_ratio: Option<Q>,
    /// Largest `rho ADV - ALG` over all prefixes.
    pub additive_offset: Q,
    pub complete_phases: u64,
    pub complete_epochs: u64,
    pub budget_hit: Option<BudgetReason>,
    pub warnings: Vec<String>,
    pub bounds: BoundsReport,
}

impl RunSummary {
    pub fn ratio_f64(&self) -> Option<f64> {
        self.empirical_ratio.map(|q| q.to_f64())
    }
}

/// Informational real-valued constants for the trace header.
pub fn derived_constants(res: &Resolved) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    out.insert("exp_3rho".into(), numeric::exp_decimal(Q::int(3) * res.rho, 30));
    if let Some(s) = &res.schedule {
        out.insert("ln_h".into(), numeric::ln_decimal(s.h, 1, 30));
        out.insert("ln_b_over_3".into(), s.rho_decimal.clone());
    }
    out
}

/// Runs `config` with its named builtin, writing the trace and summary files
/// it names.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let res = config.resolve()?;
    let opts = algorithms::parse_options(&config.option)?;
    let mut alg = algorithms::by_name(&config.algorithm, &opts, &res.params)?;
    let summary = match &config.trace {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            let s = execute(config, alg.as_mut(), Some(&mut out));
            out.flush()?;
            s?
        }
        None => execute(config, alg.as_mut(), None)?,
    };
    if let Some(path) = &config.summary {
        std::fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(summary)
}

/// Runs `config` against any algorithm. The trace, if requested, is written
/// up to and including a contract violation, which is then returned as an error.
pub fn execute(
    config: &RunConfig,
    alg: &mut dyn OnlineAlgorithm,
    trace: Option<&mut dyn Write>,
) -> Result<RunSummary> {
    let res = config.resolve()?;
    let params = &res.params;
    let metric = TreeMetric::new(res.tree_depth as usize, params.gamma)?;
    let mut mass = MassConfig::initial(params.k, NodePath::root());
    let mut adv = Adversary::new(res.mode, params, &mass)?;
    let whole = params.k == params.cap(params.depth);
    let mut bounds = BoundsChecker::new(res.mode, res.rho, params.b, params.depth, &metric, whole);
    let mut out = trace.map(TraceWriter::new);
    let mut emit = |r: &Record| -> Result<()> {
        match out.as_mut() {
            Some(w) => w.write(r),
            None => Ok(()),
        }
    };
    emit(&Record::Header(Box::new(Header {
        schema: SCHEMA.into(),
        config: config.echo(),
        resolved: res.clone(),
        derived: derived_constants(&res),
    })))?;

    let top_len = res.mode.has_epochs() as usize;
    let opt_budget = OptBudget::default();
    let mut tiny: Option<Vec<NodePath>> = Some(Vec::new());
    let mut alg_ledger = CostLedger::new();
    let mut events: Vec<AdversaryEvent> = Vec::new();
    let (mut phases, mut epochs) = (0u64, 0u64);
    let mut budget_hit = None;
    let mut m: u64 = 0;
    loop {
        let index = m + 1;
        if index > config.max_requests {
            budget_hit = Some(BudgetReason::MaxRequests);
        } else if config.max_cost.is_some_and(|c| alg_ledger.down_total >= c) {
            budget_hit = Some(BudgetReason::MaxCost);
        }
        if budget_hit.is_none() {
            events.clear();
            let request = adv.next_request(&mass, &mut events);
            for e in &events {
                emit(&Record::Event { index, event: e.clone() })?;
                bounds.on_event(index, e);
                match e {
                    AdversaryEvent::PhaseComplete { game, .. } if game.len() == top_len => phases += 1,
                    AdversaryEvent::EpochComplete { .. } => epochs += 1,
                    _ => {}
                }
            }
            let done = if res.mode.has_epochs() { epochs } else { phases };
            if config.max_phases.is_some_and(|p| done >= p) {
                budget_hit = Some(BudgetReason::MaxPhases);
            } else {
                let decision = alg.serve(&metric, &mass, &request);
                let fail = |reason: String| Error::ContractViolation {
                    algorithm: alg.name().to_string(),
                    request: request.clone(),
                    reason,
                };
                let err = match mass.apply_transfers(&metric, &decision.transfers, &mut alg_ledger) {
                    Err(e) => Some(fail(e.to_string())),
                    Ok(_) if !mass.is_served(&request) => {
                        Some(fail(format!("mass {} at the requested node", mass.mass(&request))))
                    }
                    Ok(delta) => {
                        let mut masses = BTreeMap::new();
                        for t in &decision.transfers {
                            masses.insert(t.from.clone(), mass.mass(&t.from));
                            masses.insert(t.to.clone(), mass.mass(&t.to));
                        }
                        masses.insert(request.clone(), mass.mass(&request));
                        emit(&Record::Step(StepRecord {
                            index,
                            request: request.clone(),
                            transfers: decision.transfers.clone(),
                            down: delta.down_by_level.clone(),
                            up: delta.up_by_level.clone(),
                            masses,
                        }))?;
                        adv.observe(&decision.transfers, &request);
                        bounds.on_step(index, &decision.transfers, &delta);
                        None
                    }
                };
                if let Some(e) = err {
                    emit(&Record::Violation {
                        index,
                        message: e.to_string(),
                    })?;
                    if let Some(w) = out.as_mut() {
                        w.flush()?;
                    }
                    return Err(e);
                }
                if let Some(reqs) = tiny.as_mut() {
                    reqs.push(request);
                    if reqs.len() > opt_budget.max_requests {
                        tiny = None;
                    }
                }
                m = index;
                continue;
            }
        }
        let reason = budget_hit.expect("loop exits only on a budget");
        emit(&Record::Budget {
            index,
            reason,
            alg_cost: alg_ledger.down_total,
        })?;
        break;
    }

    let opt_cost = tiny.and_then(|reqs| {
        let inst = OptInstance::from_requests(&metric, &reqs, res.adv_servers as usize);
        brute_force_opt(&inst, &opt_budget).ok()
    });
    let mut report = bounds.finish();
    if let (Some(opt), Some(last)) = (opt_cost, report.samples.last_mut()) {
        last.opt_cost = Some(opt);
        report.opt = Some((m, opt));
    }
    emit(&Record::Footer(Footer {
        requests: m,
        alg: alg_ledger.clone(),
        adv: report.adv.ledger.clone(),
        complete_phases: phases,
        complete_epochs: epochs,
        budget_hit,
    }))?;
    if let Some(w) = out.as_mut() {
        w.flush()?;
    }
    let adv_cost = report.adv_cost;
    Ok(RunSummary {
        mode: res.mode,
        depth: params.depth,
        b: params.b,
        h: params.h,
        k: params.k,
        epsilon: params.epsilon,
        rho: res.rho,
        algorithm: alg.name().to_string(),
        requests: m,
        alg_cost: alg_ledger.down_total,
        adv_cost,
        opt_cost,
        empirical_ratio: adv_cost.is_positive().then(|| alg_ledger.down_total / adv_cost),
        additive_offset: report.offset,
        complete_phases: phases,
        complete_epochs: epochs,
        budget_hit,
        warnings: res.warnings.clone(),
        bounds: report,
    })
}
