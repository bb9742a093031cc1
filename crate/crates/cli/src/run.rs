//! Command dispatch. Each command writes its reports and says whether its
//! checks passed.

use std::path::PathBuf;
use std::sync::Arc;

use mbl_core::bellman::{candidates, BellmanPoint, B2Sampler, CandidateBellman, Exponents};
use mbl_core::certifier::{certify_with, Witness};
use mbl_core::estimator::{duality_bound, lower_bound_search, lp_constant_scan, SearchOptions};
use mbl_core::martingale::{HVec, MartFunction};
use mbl_core::suites::{
    aggregate, all_gating_pass, instance_on, run_corpus, run_suite, CheckRow, Suite, DEFAULT_DELTAS, DEFAULT_DIMS,
};
use mbl_core::{build_dyadic, build_random_regular, dyadic_expand, estimate_rescale_constant, rng, Filtration};

use crate::config::{CliError, CliResult, Command, RunConfig};
use crate::report::{emit_report, emit_summary, write_file, Cell, Summary, Table};

/// Dyadic weights in `lemma1` are multiples of `2^-LEMMA1_M`.
const LEMMA1_M: u32 = 5;
/// Tolerance for comparing the duality bounds.
const BOUND_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    pub message: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed { 0 } else { 1 }
    }
}

pub fn run(cfg: &RunConfig) -> CliResult<Outcome> {
    match cfg.command {
        Command::Gen => gen(cfg),
        Command::Check => check(cfg),
        Command::Certify => certify_cmd(cfg),
        Command::Lemma1 => lemma1(cfg),
        Command::Search => search(cfg),
        Command::Scan => scan(cfg),
        Command::Bound => bound(cfg),
    }
}

pub fn build_filtration(cfg: &RunConfig) -> CliResult<Arc<Filtration>> {
    let f = if cfg.delta == 0.5 {
        build_dyadic(cfg.depth)?
    } else {
        build_random_regular(cfg.depth, cfg.delta, cfg.max_children, cfg.split_prob, cfg.seed())?
    };
    Ok(Arc::new(f))
}

/// The witness from `--input`, or a random one on the configured filtration.
fn load_witness(cfg: &RunConfig) -> CliResult<Witness> {
    match &cfg.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
            Ok(Witness::from_json(&text)?)
        }
        None => Ok(Witness::random(&build_filtration(cfg)?, cfg.dim, &mut rng::master(cfg.seed()))?),
    }
}

/// The named candidate at the filtration's declared `δ`. The radial
/// candidate is only verified at `δ = 1/2`; below that it is rescaled by the
/// sampled constant from [`estimate_rescale_constant`].
pub fn resolve_candidate(cfg: &RunConfig, filt: &Filtration) -> CliResult<CandidateBellman> {
    let delta = filt.delta();
    Ok(match cfg.candidate.as_str() {
        "linear" => candidates::linear(cfg.p, 1.0)?.with_delta(delta)?,
        "radial" if delta < 0.5 => {
            let base = candidates::radial_power(cfg.p)?;
            let est = estimate_rescale_constant(&base, delta, cfg.samples, cfg.seed(), cfg.dim.min(4))?;
            base.scaled(est.constant).with_delta(delta)?
        }
        name => candidates::by_name(name, cfg.p, delta)?,
    })
}

fn gen(cfg: &RunConfig) -> CliResult<Outcome> {
    let w = if cfg.is_haar_fixture() {
        Witness::haar()
    } else {
        Witness::random(&build_filtration(cfg)?, cfg.dim, &mut rng::master(cfg.seed()))?
    };
    let filt = w.filtration().clone();
    let mut files = vec![
        write_file(&cfg.out.join("filtration.json"), &(filt.to_json()? + "\n"))?,
        write_file(&cfg.out.join("witness.json"), &(w.to_json()? + "\n"))?,
    ];
    let mut cols = vec!["leaf".to_string(), "atom_id".into(), "a".into(), "b".into(), "measure".into(), "g".into()];
    cols.extend((1..=w.f.dim()).map(|k| format!("f_{k}")));
    let mut table = Table::new(cols);
    for (i, &id) in filt.leaves().iter().enumerate() {
        let atom = &filt.atoms()[id];
        let mut row: Vec<Cell> =
            vec![i.into(), id.into(), atom.a.into(), atom.b.into(), atom.measure.into(), w.g.leaf(i)[0].into()];
        row.extend(w.f.leaf(i).iter().map(|&v| Cell::Float(v)));
        table.push(row);
    }
    files.push(emit_report(&table, cfg.format, &cfg.out, "gen")?);
    let summary = Summary::default()
        .with("depth", filt.depth())
        .with("delta", filt.delta())
        .with("regularity_delta", filt.regularity_delta())
        .with("leaves", filt.num_leaves())
        .with("dim", w.f.dim())
        .with("objective", w.objective()?)
        .with("seed", cfg.seed);
    files.push(emit_summary(&summary, &cfg.out, "gen_summary")?);
    Ok(Outcome { passed: true, files, message: format!("wrote fixture with {} leaves", filt.num_leaves()) })
}

fn check(cfg: &RunConfig) -> CliResult<Outcome> {
    let tols = cfg.tolerances();
    let seed = cfg.seed();
    let rows = if cfg.corpus {
        let seeds: Vec<u64> = (0..cfg.trials as u64).map(|k| seed.wrapping_add(k)).collect();
        run_corpus(&Suite::ALL, &DEFAULT_DELTAS, &DEFAULT_DIMS, &seeds, &tols)?
    } else {
        let filt = build_filtration(cfg)?;
        let mut all = Vec::new();
        for k in 0..cfg.trials as u64 {
            let inst = instance_on(filt.clone(), cfg.delta, cfg.dim, seed.wrapping_add(k))?;
            for s in Suite::ALL {
                all.extend(run_suite(s, &inst, &tols)?);
            }
        }
        aggregate(all)
    };
    let mut table = Table::new(CheckRow::COLUMNS);
    for r in &rows {
        table.push(vec![
            r.name.clone().into(),
            r.value.into(),
            r.tolerance.into(),
            r.passed.into(),
            r.gating.into(),
            r.instances.into(),
            r.worst.clone().into(),
        ]);
    }
    let files = vec![emit_report(&table, cfg.format, &cfg.out, "check")?];
    let failed: Vec<&str> = rows.iter().filter(|r| r.gating && !r.passed).map(|r| r.name.as_str()).collect();
    let passed = all_gating_pass(&rows);
    let message = if passed {
        format!("{} checks passed", rows.iter().filter(|r| r.gating).count())
    } else {
        format!("failing checks: {}", failed.join(", "))
    };
    Ok(Outcome { passed, files, message })
}

fn certify_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let w = load_witness(cfg)?;
    let b = resolve_candidate(cfg, w.filtration())?;
    let cert = certify_with(&w.f, &w.g, &w.t, &b, &cfg.tolerances())?;
    let mut files = vec![write_file(&cfg.out.join("certificate.json"), &(serde_json::to_string_pretty(&cert)? + "\n"))?];
    let mut table = Table::new(["atom_id", "d", "diam", "slack", "pairing", "passed"]);
    for r in &cert.records {
        table.push(vec![r.event.atom.into(), r.d.into(), r.diam.into(), r.b2_slack.into(), r.pairing.into(), r.passed.into()]);
    }
    if table.rows.is_empty() {
        return Err(CliError::EmptyReport("certify".into()));
    }
    files.push(emit_report(&table, cfg.format, &cfg.out, "certify")?);
    let failing = cert.failing_record();
    let summary = Summary::default()
        .with("candidate", cert.candidate.clone())
        .with("objective", cert.objective)
        .with("root_value", cert.root_value)
        .with("final_slack", cert.final_slack)
        .with("passed", cert.passed)
        .with("failing_atom", failing.map(|r| r.event.atom))
        .with("failing_slack", failing.map(|r| r.b2_slack))
        .with("violations", cert.violations.len());
    files.push(emit_summary(&summary, &cfg.out, "certify_summary")?);
    let message = match failing {
        Some(r) => format!("rejected at split of atom {} with slack {:e}", r.event.atom, r.b2_slack),
        None if cert.passed => format!("certified: B(root) = {:e} >= objective = {:e}", cert.root_value, cert.objective),
        None => format!("rejected: {}", cert.violations.join("; ")),
    };
    Ok(Outcome { passed: cert.passed, files, message })
}

fn lemma1(cfg: &RunConfig) -> CliResult<Outcome> {
    let seed = cfg.seed();
    let base = candidates::by_name(&cfg.candidate, cfg.p, 0.5)?;
    let mut sampler = B2Sampler::new(cfg.delta, cfg.p, cfg.dim)?;
    sampler.dyadic_m = Some(LEMMA1_M);
    let mut table = Table::new(["n", "configs", "min_ratio", "degenerate", "max_recombination_error"]);
    // (n, configs, min ratio, degenerate, worst recombination error)
    let mut per_n: Vec<(usize, usize, f64, usize, f64)> = Vec::new();
    for k in 0..cfg.samples as u64 {
        let c = sampler.sample(&mut rng::stream(seed, k))?;
        let cert = dyadic_expand(&c)?;
        let rec = cert.recombine(&base);
        let err = (rec.recombined - rec.direct).abs() / rec.scale.max(f64::MIN_POSITIVE);
        let n = c.n();
        let slot = match per_n.iter().position(|e| e.0 == n) {
            Some(i) => i,
            None => {
                per_n.push((n, 0, f64::INFINITY, 0, 0.0));
                per_n.len() - 1
            }
        };
        let e = &mut per_n[slot];
        e.1 += 1;
        match cert.ratio {
            Some(r) => e.2 = e.2.min(r),
            None => e.3 += 1,
        }
        e.4 = e.4.max(err);
    }
    per_n.sort_by_key(|e| e.0);
    for &(n, configs, min_ratio, degenerate, err) in &per_n {
        let ratio = if min_ratio.is_finite() { Cell::Float(min_ratio) } else { Cell::Null };
        table.push(vec![n.into(), configs.into(), ratio, degenerate.into(), err.into()]);
    }
    let min_ratio = per_n.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let max_err = per_n.iter().map(|e| e.4).fold(0.0, f64::max);
    let tols = cfg.tolerances();
    let recombination_ok = max_err <= tols.identity;
    let ratio_ok = min_ratio > 0.0;

    let rescale = estimate_rescale_constant(&base, cfg.delta, cfg.samples, seed, cfg.dim);
    let (constant, rescale_error) = match &rescale {
        Ok(e) => (Some(e.constant), None),
        Err(e @ (mbl_core::Error::NotInBaseClass(_) | mbl_core::Error::NoRescaleConstant(_))) => (None, Some(e.to_string())),
        Err(_) => return Err(rescale.unwrap_err().into()),
    };
    let mut files = vec![emit_report(&table, cfg.format, &cfg.out, "lemma1")?];
    let summary = Summary::default()
        .with("candidate", base.name.clone())
        .with("delta", cfg.delta)
        .with("p", cfg.p)
        .with("samples", cfg.samples)
        .with("seed", seed)
        .with("min_ratio", if min_ratio.is_finite() { Some(min_ratio) } else { None })
        .with("max_recombination_error", max_err)
        .with("rescale_constant", constant)
        .with("rescale_error", rescale_error.clone())
        .with("worst_base_slack", rescale.as_ref().ok().map(|e| e.worst_base_slack));
    files.push(emit_summary(&summary, &cfg.out, "lemma1_summary")?);
    let passed = recombination_ok && ratio_ok && constant.is_some();
    let message = match (constant, rescale_error) {
        (Some(c), _) => format!("C = {c:e}, min ratio {min_ratio:e}, recombination error {max_err:e}"),
        (None, Some(e)) => e,
        (None, None) => unreachable!("either a constant or an error"),
    };
    Ok(Outcome { passed, files, message })
}

fn target_point(cfg: &RunConfig) -> CliResult<Option<BellmanPoint>> {
    let Some(t) = &cfg.target else { return Ok(None) };
    let exps = Exponents::new(cfg.p)?;
    let d = cfg.dim;
    Ok(Some(BellmanPoint::new(HVec(t[..d].to_vec()), t[d], t[d + 1], t[d + 2], exps)))
}

fn search(cfg: &RunConfig) -> CliResult<Outcome> {
    let filt = build_filtration(cfg)?;
    let target = target_point(cfg)?;
    let mut opts = SearchOptions::new(cfg.p, cfg.dim, cfg.trials, cfg.seed());
    opts.refine_rounds = cfg.refine;
    let res = lower_bound_search(&filt, target.as_ref(), &opts)?;
    let exps = Exponents::new(cfg.p)?;
    let mut cols = vec!["trial".to_string(), "objective".into()];
    cols.extend((1..=cfg.dim).map(|k| format!("x1_{k}")));
    cols.extend(["x2".into(), "x3".into(), "x4".into(), "ratio".into(), "feasible".into()]);
    let mut table = Table::new(cols);
    for r in &res.rows {
        let x = &r.point;
        // The objective against its Hölder-type scale x3^{1/p} x4^{1/q}.
        let scale = x.x3.powf(1.0 / exps.p) * x.x4.powf(1.0 / exps.q);
        let mut row: Vec<Cell> = vec![r.trial.into(), r.objective.into()];
        row.extend(x.x1.0.iter().map(|&v| Cell::Float(v)));
        row.extend([
            x.x2.into(),
            x.x3.into(),
            x.x4.into(),
            (if scale > 0.0 { r.objective / scale } else { 0.0 }).into(),
            r.feasible.into(),
        ]);
        table.push(row);
    }
    let mut files = vec![emit_report(&table, cfg.format, &cfg.out, "search")?];
    let witness_path = match &res.witness {
        Some(w) => {
            files.push(write_file(&cfg.out.join("search_witness.json"), &(w.to_json()? + "\n"))?);
            Some("search_witness.json")
        }
        None => None,
    };
    let best = res.witness.as_ref().map(|_| res.best_objective);
    let summary = Summary::default()
        .with("best", best)
        .with("best_trial", res.best_trial)
        .with("witness_path", witness_path)
        .with("seed", res.seed)
        .with("trials", res.trials)
        .with("feasible", res.feasible)
        .with("box_tol", target.as_ref().map(|_| opts.box_tol))
        .with("kind", "lower bound from explicit witnesses");
    files.push(emit_summary(&summary, &cfg.out, "search_summary")?);
    let message = match best {
        Some(b) => format!("best objective {b:e} over {} trials", res.trials),
        None => "no feasible witness in the target box".into(),
    };
    Ok(Outcome { passed: true, files, message })
}

fn scan(cfg: &RunConfig) -> CliResult<Outcome> {
    let filt = build_filtration(cfg)?;
    let rep = lp_constant_scan(&filt, cfg.p, cfg.dim, cfg.trials, cfg.seed())?;
    let mut table = Table::new(["trial", "lp_f", "lp_tf", "ratio"]);
    for r in &rep.rows {
        table.push(vec![r.trial.into(), r.lp_f.into(), r.lp_tf.into(), r.ratio.into()]);
    }
    let mut hist = Table::new(["lower", "upper", "count"]);
    for &(lo, hi, n) in &rep.histogram {
        hist.push(vec![lo.into(), hi.into(), n.into()]);
    }
    let zero_g = MartFunction::zeros(&filt, 1);
    let witness = Witness::new(rep.witness_f.clone(), zero_g, rep.witness_t.clone())?;
    let mut files = vec![
        emit_report(&table, cfg.format, &cfg.out, "scan")?,
        emit_report(&hist, cfg.format, &cfg.out, "scan_histogram")?,
        write_file(&cfg.out.join("scan_witness.json"), &(witness.to_json()? + "\n"))?,
    ];
    let summary = Summary::default()
        .with("p", cfg.p)
        .with("trials", cfg.trials)
        .with("seed", cfg.seed())
        .with("max_ratio", rep.max_ratio)
        .with("argmax_trial", rep.argmax_trial)
        .with("witness_path", "scan_witness.json")
        .with("kind", "empirical");
    files.push(emit_summary(&summary, &cfg.out, "scan_summary")?);
    // At p = 2 every transform is an L^2 contraction.
    let passed = cfg.p != 2.0 || rep.max_ratio <= 1.0 + cfg.tolerances().norm;
    Ok(Outcome { passed, files, message: format!("max ratio {:e} at trial {}", rep.max_ratio, rep.argmax_trial) })
}

fn bound(cfg: &RunConfig) -> CliResult<Outcome> {
    let w = load_witness(cfg)?;
    let b = resolve_candidate(cfg, w.filtration())?;
    let rep = duality_bound(&w.t, &w.f, &b, cfg.trials, cfg.seed())?;
    let mut table = Table::new([
        "sample",
        "sign",
        "integral",
        "lp_f",
        "lq_g",
        "ratio",
        "lambda",
        "certified_bound",
        "analytic_bound",
        "certified",
    ]);
    for r in &rep.rows {
        table.push(vec![
            r.sample.into(),
            r.sign.into(),
            r.integral.into(),
            r.lp_f.into(),
            r.lq_g.into(),
            r.ratio.into(),
            r.lambda.into(),
            r.certified_bound.into(),
            r.analytic_bound.into(),
            r.certified.into(),
        ]);
    }
    let mut files = vec![emit_report(&table, cfg.format, &cfg.out, "bound")?];
    let passed = rep.analytic_constant.is_some_and(|a| rep.empirical_constant <= a + BOUND_TOL);
    let summary = Summary::default()
        .with("candidate", b.name.clone())
        .with("p", b.exps.p)
        .with("empirical_constant", rep.empirical_constant)
        .with("analytic_constant", rep.analytic_constant)
        .with("failures", rep.failures.len())
        .with("passed", passed)
        .with("kind", "empirical constant against the assembled analytic bound");
    files.push(emit_summary(&summary, &cfg.out, "bound_summary")?);
    let message = match rep.analytic_constant {
        Some(a) => format!("empirical {:e} vs analytic {a:e}", rep.empirical_constant),
        None => format!("bound withheld: {}", rep.failures.first().cloned().unwrap_or_default()),
    };
    Ok(Outcome { passed, files, message })
}
