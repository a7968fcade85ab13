//! One function per subcommand. Each writes its outputs and returns the
//! resolved configuration recorded in the manifest.

use std::fmt::Write as _;

use bayes_ergm::adjust::Estimate;
use bayes_ergm::evidence::Comparison;
use bayes_ergm::exchange::{ChainSchedule, ImputationRefresh, StartPoint};
use bayes_ergm::gof::GofStart;
use bayes_ergm::graph::io::{write_edge_list, NodeLabels};
use bayes_ergm::rng::{stream, Domain};
use bayes_ergm::sampler::TieSampler;
use bayes_ergm::stats::{gof_stats, suff_stats};
use bayes_ergm::{
    bgof, build_apl, compare, evidence_cj, evidence_pp, exchange_fit, exchange_fit_missing, mple, summarize,
    AplSettings, CjSettings, EvidenceEstimate, ExchangeSettings, GofSettings, Graph, Model, PosteriorSample,
    PpSettings,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::load;
use crate::output::{draws_csv, read_draws, summary_csv, OutDir};

fn exchange_settings(a: &ExchangeArgs, d: usize, seed: u64) -> CliResult<ExchangeSettings> {
    let mut s = ExchangeSettings {
        burn_in: a.burn_in,
        main_iters: a.main_iters,
        aux_iters: a.aux_iters,
        nchains: a.nchains,
        gamma: a.gamma,
        seed,
        schedule: match a.schedule {
            Schedule::Sequential => ChainSchedule::Sequential,
            Schedule::Split => ChainSchedule::Split,
        },
        start: match a.start {
            Start::Mple => StartPoint::Mple,
            Start::PriorMean => StartPoint::PriorMean,
        },
        ..ExchangeSettings::default()
    };
    if let Some(v) = &a.v_proposal {
        let m = load::covariance(v, d, "proposal covariance")?;
        s.v_proposal = Some(rows(&m));
    }
    s.nchains = Some(s.resolved_nchains(d));
    s.v_proposal = Some(rows(&s.proposal_matrix(d)?));
    Ok(s)
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn write_sample(sample: &PosteriorSample, format: Format, out: &OutDir) -> CliResult<()> {
    let table = summarize(sample);
    match format {
        Format::Csv => out.write("summary.csv", summary_csv(&table))?,
        Format::Json => out.write_json("summary.json", &table)?,
    };
    out.write("draws.csv", draws_csv(sample))?;
    println!("{table}");
    Ok(())
}

fn model_record(model: &Model) -> Value {
    json!({
        "formula": model.formula(),
        "coordinates": model.names,
        "offset": model.offset,
        "offset_values": model.offset_values,
    })
}

pub fn fit(a: &FitArgs, out: &OutDir) -> CliResult<Value> {
    let net = load::network_args(&a.network)?;
    let model = load::model(&a.model, &net.graph)?;
    if a.method == FitMethod::Mple {
        return pseudo(&model, &net.graph, a.format, out);
    }
    let prior = load::prior(&a.prior, model.free_dim())?;
    let settings = exchange_settings(&a.exchange, model.free_dim(), a.seed)?;
    let sample = exchange_fit(&model, &net.graph, &prior, &settings)?;
    write_sample(&sample, a.format, out)?;
    Ok(json!({ "model": model_record(&model), "prior": prior.to_spec(), "exchange": settings }))
}

pub fn fit_missing(a: &FitMissingArgs, out: &OutDir) -> CliResult<Value> {
    let net = load::network_args(&a.network)?;
    let dyads = load::missing_dyads(&net.graph, &net.labels, a.missing_file.as_deref(), a.missing_nodes.as_deref())?;
    let g = net.graph.apply_missing_mask(&dyads)?;
    let model = load::model(&a.model, &g)?;
    let prior = load::prior(&a.prior, model.free_dim())?;
    let mut settings = exchange_settings(&a.exchange, model.free_dim(), a.seed)?;
    settings.n_imp = a.n_imp;
    settings.missing_update = Some(a.missing_update.unwrap_or(g.missing_count()));
    settings.imputation_refresh = match a.refresh {
        Refresh::OnAccept => ImputationRefresh::OnAccept,
        Refresh::EveryIteration => ImputationRefresh::EveryIteration,
    };
    let sample = exchange_fit_missing(&model, &g, &prior, &settings)?;
    write_sample(&sample, a.format, out)?;
    for (k, y) in sample.imputed_networks.iter().enumerate() {
        out.write(&format!("imputed_{}.edges", k + 1), edges_text(y, &net.labels))?;
    }
    Ok(json!({
        "model": model_record(&model),
        "prior": prior.to_spec(),
        "exchange": settings,
        "missing_dyads": dyads.iter().map(|d| [net.labels.label(d.i), net.labels.label(d.j)]).collect::<Vec<_>>(),
    }))
}

fn edges_text(g: &Graph, labels: &NodeLabels) -> Vec<u8> {
    let mut buf = Vec::new();
    write_edge_list(&mut buf, g, Some(labels)).expect("writing to memory");
    buf
}

fn pseudo(model: &Model, g: &Graph, format: Format, out: &OutDir) -> CliResult<Value> {
    let fit = mple(model, g)?;
    let se = fit.naive_standard_errors();
    let mut text = String::from("Maximum pseudo-likelihood estimate\n");
    let _ = writeln!(text, "{:<28} {:>12} {:>12}", "", "estimate", "naive s.e.");
    for ((n, t), s) in fit.names.iter().zip(&fit.theta_mple).zip(&se) {
        let _ = writeln!(text, "{n:<28} {t:>12.4} {s:>12.4}");
    }
    let _ = writeln!(text, "log pseudo-likelihood {:.4}", fit.log_pl_at_mode);
    text.push_str("Standard errors ignore dependence between dyads and are typically too small.\n");
    print!("{text}");
    match format {
        Format::Csv => {
            let mut csv = String::from("parameter,estimate,naive_se\n");
            for ((n, t), s) in fit.names.iter().zip(&fit.theta_mple).zip(&se) {
                let _ = writeln!(csv, "{n},{t},{s}");
            }
            out.write("mple.csv", csv)?;
        }
        Format::Json => {
            out.write_json("mple.json", &json!({ "fit": fit, "naive_se": se }))?;
        }
    }
    Ok(json!({ "model": model_record(model), "method": "mple" }))
}

pub fn mple_cmd(a: &MpleArgs, out: &OutDir) -> CliResult<Value> {
    let net = load::network_args(&a.network)?;
    let model = load::model(&a.model, &net.graph)?;
    pseudo(&model, &net.graph, a.format, out)
}

/// Contents of `evidence.json`.
#[derive(Serialize, Deserialize)]
pub struct EvidenceFile {
    pub formula: String,
    pub summary: Option<bayes_ergm::SummaryTable>,
    #[serde(flatten)]
    pub estimate: EvidenceEstimate,
}

pub fn evidence(a: &EvidenceArgs, out: &OutDir) -> CliResult<Value> {
    let net = load::network_args(&a.network)?;
    let model = load::model(&a.model, &net.graph)?;
    let prior = load::prior(&a.prior, model.free_dim())?;
    let apl_settings = AplSettings {
        aux_iters: a.aux_iters,
        n_aux_draws: a.n_aux_draws,
        aux_thin: a.aux_thin,
        ladder: a.ladder,
        estimate: match a.estimate {
            EstimateArg::Cd => Estimate::Cd,
            EstimateArg::Mle => Estimate::Mle,
        },
        mle_draws: a.mle_draws,
        cd_steps: a.cd_steps,
        curvature_draws: a.curvature_draws,
        seed: a.seed,
        ..AplSettings::default()
    };
    let apl = build_apl(&model, &net.graph, &apl_settings)?;
    let mut estimate = match a.method {
        EvidenceMethodArg::Cj => {
            let d = CjSettings::default();
            let main_iters = a.main_iters.unwrap_or(d.main_iters);
            let s = CjSettings {
                v_proposal: a.v_proposal,
                burn_in: a.burn_in.unwrap_or(d.burn_in),
                main_iters,
                num_samples: a.num_samples.unwrap_or(main_iters / 2),
                seed: a.seed,
                ..d
            };
            evidence_cj(&apl, &prior, &s)?
        }
        EvidenceMethodArg::Pp => {
            let d = PpSettings::default();
            let s = PpSettings {
                rungs: a.rungs,
                exponent: a.pp_exponent,
                v_proposal: a.v_proposal,
                burn_in: a.burn_in.unwrap_or(d.burn_in),
                main_iters: a.main_iters.unwrap_or(d.main_iters),
                parallel_rungs: a.parallel_rungs,
                seed: a.seed,
                ..d
            };
            evidence_pp(&apl, &prior, &s)?
        }
    };
    let summary = match estimate.posterior_sample.take() {
        Some(sample) => {
            write_sample(&sample, a.format, out)?;
            Some(summarize(&sample))
        }
        None => None,
    };
    println!("log evidence {:.4}  ({} , {:.2} s)", estimate.log_evidence, estimate.method, estimate.wall_time_secs);
    let settings = estimate.settings.clone();
    let file = EvidenceFile { formula: model.formula(), summary, estimate };
    out.write_json("evidence.json", &file)?;
    Ok(json!({ "model": model_record(&model), "prior": prior.to_spec(), "apl": apl_settings, "evidence": settings }))
}

fn bf_text(log_bf: f64) -> String {
    let digits = log_bf / std::f64::consts::LN_10;
    if digits.abs() < 4.0 {
        return format!("{:.3}", log_bf.exp());
    }
    let exp = digits.floor();
    format!("{:.2}e{}", 10f64.powf(digits - exp), exp as i64)
}

/// Text report: log evidence, run time and Bayes factor of the first model
/// against each other one.
pub fn compare_report(labels: &[String], files: &[EvidenceFile], cmp: &Comparison) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>20} {:>12} {:>14} {:>12}",
        "Model", "Log evidence", "CPU (mins)", "BF(1,m)", "P(m | y)"
    );
    for (m, (label, f)) in labels.iter().zip(files).enumerate() {
        let bf = if m == 0 { String::new() } else { bf_text(cmp.log_bayes_factors[0][m]) };
        let _ = writeln!(
            s,
            "{:<16} {:>20.2} {:>12.2} {:>14} {:>12.4}",
            label,
            f.estimate.log_evidence,
            f.estimate.wall_time_secs / 60.0,
            bf,
            cmp.posterior_model_probs[m]
        );
    }
    s
}

pub fn compare_cmd(a: &CompareArgs, out: &OutDir) -> CliResult<Value> {
    let mut files = Vec::new();
    let mut labels = Vec::new();
    for p in &a.evidence_files {
        let text = std::fs::read_to_string(p).map_err(CliError::io(p))?;
        let f: EvidenceFile = serde_json::from_str(&text).map_err(|e| CliError::malformed(p, e))?;
        labels.push(format!("M{}", labels.len() + 1));
        files.push(f);
    }
    let k = files.len();
    let probs = match &a.prior_probs {
        Some(t) => load::parse_list(t, "--prior-probs")?,
        None => vec![1.0 / k as f64; k],
    };
    let log_z: Vec<f64> = files.iter().map(|f| f.estimate.log_evidence).collect();
    let cmp = compare(&log_z, &probs)?;
    let report = compare_report(&labels, &files, &cmp);
    print!("{report}");
    match a.format {
        Format::Csv => {
            let mut csv = String::from("model,file,formula,log_evidence,cpu_minutes,log_bf_1m,posterior_prob\n");
            for (m, (label, f)) in labels.iter().zip(&files).enumerate() {
                let _ = writeln!(
                    csv,
                    "{label},{},\"{}\",{},{},{},{}",
                    a.evidence_files[m].display(),
                    f.formula.replace('"', "\"\""),
                    f.estimate.log_evidence,
                    f.estimate.wall_time_secs / 60.0,
                    cmp.log_bayes_factors[0][m],
                    cmp.posterior_model_probs[m]
                );
            }
            out.write("compare.csv", csv)?;
        }
        Format::Json => {
            out.write_json("compare.json", &json!({ "models": labels, "comparison": cmp }))?;
        }
    }
    out.write("compare.txt", report)?;
    Ok(json!({ "models": labels, "files": a.evidence_files, "prior_probs": probs }))
}

pub fn gof(a: &GofArgs, out: &OutDir) -> CliResult<Value> {
    let sample = read_draws(&a.fit)?;
    let net = load::network_args(&a.network)?;
    let model = load::model(&a.model, &net.graph)?;
    if sample.dim() != model.free_dim() {
        return Err(bayes_ergm::Error::DimensionMismatch {
            what: format!("draws in {}", a.fit.display()),
            expected: model.free_dim(),
            got: sample.dim(),
        }
        .into());
    }
    let settings = GofSettings {
        sample_size: a.sample_size,
        aux_iters: a.aux_iters,
        n_deg: a.n_deg,
        n_ideg: a.n_ideg,
        n_odeg: a.n_odeg,
        n_dist: a.n_dist,
        n_esp: a.n_esp,
        start: match a.start {
            GofStartArg::Observed => GofStart::Observed,
            GofStartArg::Empty => GofStart::Empty,
        },
        seed: a.seed,
        ..GofSettings::default()
    };
    let report = bgof(&sample, &model, &net.graph, &settings)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(CliError::io(&out.path("gof.csv")))?;
    out.write("gof.csv", csv)?;
    if a.text {
        let text = report.to_text();
        print!("{text}");
        out.write("gof.txt", text)?;
    }
    println!("observed values inside the 95% band: {:.1}%", 100.0 * report.coverage());
    Ok(json!({ "model": model_record(&model), "gof": settings }))
}

pub fn simulate(a: &SimulateArgs, out: &OutDir) -> CliResult<Value> {
    if a.network.is_none() && a.attrs.is_none() && a.n.is_none() {
        return Err(CliError::Usage("simulate needs --network, --attrs or --n".into()));
    }
    let net = load::network(a.network.as_deref(), a.attrs.as_deref(), a.directed, a.n)?;
    let model = load::model(&a.model, &net.graph)?;
    let theta = load::parse_list(&a.theta, "--theta")?;
    if theta.len() != model.free_dim() {
        return Err(bayes_ergm::Error::DimensionMismatch {
            what: "--theta".into(),
            expected: model.free_dim(),
            got: theta.len(),
        }
        .into());
    }
    let full = model.full_theta(&theta);
    let mut sampler = TieSampler::new(&model, &full)?;
    let mut g = if a.from_empty { net.graph.cleared() } else { net.graph.clone() };
    let mut rng = stream(a.seed, Domain::Simulate, 0);
    let mut stats = format!("draw,{}\n", model.names.join(","));
    let mut dists = String::from("draw,statistic,bin,count\n");
    for k in 1..=a.draws {
        sampler.run(&mut g, a.aux_iters, &mut rng);
        let s = suff_stats(&model, &g);
        let _ = writeln!(stats, "{k},{}", s.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        let d = gof_stats(&g);
        let mut emit = |name: &str, counts: &[usize], first: usize| {
            for (b, c) in counts.iter().enumerate().skip(first) {
                let _ = writeln!(dists, "{k},{name},{b},{c}");
            }
        };
        if d.directed {
            emit("idegree", &d.in_degree, 0);
            emit("odegree", &d.out_degree, 0);
        } else {
            emit("degree", &d.degree, 0);
        }
        emit("esp", &d.esp, 0);
        emit("distance", &d.geodesic, 1);
        let _ = writeln!(dists, "{k},distance,NR,{}", d.unreachable);
        out.write(&format!("sim_{k}.edges"), edges_text(&g, &net.labels))?;
    }
    out.write("stats.csv", stats)?;
    out.write("gof_stats.csv", dists)?;
    Ok(json!({ "model": model_record(&model), "theta_full": full }))
}
