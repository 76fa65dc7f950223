use std::collections::BTreeSet;
use std::io::Write;

use anyhow::{bail, Context, Result};

use bugflow::ctmc;
use bugflow::filter::{
    apply_standard_pipeline, inactivity_filter, tukey_outlier_filter, FilterReport, OutlierMode,
};
use bugflow::ingest::{
    parse_export_path, to_bug_record, write_bug_records, write_export, BugRecord, Conversion,
    ProjectProfile,
};
use bugflow::numeric::fmt_f64;
use bugflow::predict::{
    self, cross_validate, encode_features, evaluate, train_model, CvConfig, Example, ModelKind,
    TrainConfig, TrainOptions,
};
use bugflow::stats;
use bugflow::synth;

use crate::common::{
    load_corpus, parse_grid, parse_priorities, resolve_filter_config, resolve_workflow,
};
use crate::output::{write_output, Cell, Table};
use crate::{CtmcCmd, FilterArgs, IngestArgs, NnFlags, PredictCmd, StatsCmd, SynthCmd};

pub fn ingest(args: IngestArgs) -> Result<()> {
    let profile = ProjectProfile::load(&args.profile)
        .with_context(|| format!("cannot load profile {}", args.profile.display()))?;
    let raw = parse_export_path(&args.input)?;
    let mut kept = Vec::new();
    let mut skipped: std::collections::BTreeMap<String, usize> = Default::default();
    for record in &raw {
        match to_bug_record(record, &profile)? {
            Conversion::Kept(bug) => kept.push(bug),
            Conversion::Skipped(reason) => {
                *skipped.entry(reason.to_string()).or_default() += 1;
            }
        }
    }
    let mut buf = Vec::new();
    write_bug_records(&kept, &mut buf)?;
    write_output(&args.out, std::str::from_utf8(&buf)?)?;
    eprintln!(
        "ingested {} of {} records ({} skipped)",
        kept.len(),
        raw.len(),
        raw.len() - kept.len()
    );
    for (reason, count) in skipped {
        eprintln!("  skipped {count}: {reason}");
    }
    Ok(())
}

fn merge_report(total: &mut FilterReport, stage: FilterReport) {
    for (rule, count) in stage.removed_by_rule {
        *total.removed_by_rule.entry(rule).or_default() += count;
    }
    total.merged_transient_states += stage.merged_transient_states;
    total.merged_loops += stage.merged_loops;
    total.dropped_undefined_states += stage.dropped_undefined_states;
    total.truncated_tails += stage.truncated_tails;
    total.kept_count = stage.kept_count;
}

pub fn filter(args: FilterArgs) -> Result<()> {
    let workflow = resolve_workflow(&args.workflow, &args.profile)?;
    let mut config = resolve_filter_config(&args.profile)?;
    if let Some(statuses) = &args.statuses {
        config.allowed_statuses = statuses.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(seconds) = args.transient_seconds {
        config.transient_threshold_seconds = seconds;
    }
    if let Some(mode) = &args.outlier {
        config.outlier_mode = mode.parse().map_err(anyhow::Error::msg)?;
    }
    if let Some(days) = args.inactivity_days {
        config.inactivity_gap_days = days;
    }
    let corpus = load_corpus(&args.input)?;
    let input_count = corpus.len();
    let (mut corpus, mut report) = apply_standard_pipeline(corpus, &config, &workflow)?;
    if config.outlier_mode != OutlierMode::None {
        let (kept, stage) =
            tukey_outlier_filter(corpus, config.outlier_mode, &workflow.terminal)?;
        corpus = kept;
        merge_report(&mut report, stage);
    }
    if args.apply_inactivity {
        let (kept, stage) =
            inactivity_filter(corpus, config.inactivity_gap_days, &workflow.terminal);
        corpus = kept;
        merge_report(&mut report, stage);
    }
    report.input_count = input_count;
    let mut buf = Vec::new();
    write_bug_records(&corpus, &mut buf)?;
    write_output(&args.out, std::str::from_utf8(&buf)?)?;
    let report_json = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => std::fs::write(path, report_json + "\n")?,
        None => eprintln!("{report_json}"),
    }
    Ok(())
}

fn restrict_priority(corpus: Vec<BugRecord>, priority: Option<u8>) -> Vec<BugRecord> {
    match priority {
        Some(p) => corpus.into_iter().filter(|b| b.priority == p).collect(),
        None => corpus,
    }
}

pub fn stats(cmd: StatsCmd) -> Result<()> {
    match cmd {
        StatsCmd::StatusTable { common, priorities } => {
            let corpus = restrict_priority(load_corpus(&common.input)?, common.priority);
            let priorities = parse_priorities(&priorities)?;
            let table_data = stats::resolution_status_table(&corpus, &priorities);
            for warning in &table_data.warnings {
                eprintln!("warning: {warning}");
            }
            let mut table = Table::new(vec!["priority", "status", "percent"]);
            for ((priority, status), percent) in &table_data.rows {
                table.push(vec![
                    Cell::Int(*priority as i64),
                    Cell::Text(status.clone()),
                    Cell::Num(*percent),
                ]);
            }
            write_output(&common.out, &table.render(common.format)?)
        }
        StatsCmd::Paths { common } => {
            let corpus = restrict_priority(load_corpus(&common.input)?, common.priority);
            let mut table = Table::new(vec!["path", "count", "fraction"]);
            for path in stats::path_frequencies(&corpus) {
                table.push(vec![
                    Cell::Text(path.path.join("-")),
                    Cell::Int(path.count as i64),
                    Cell::Num(path.fraction),
                ]);
            }
            write_output(&common.out, &table.render(common.format)?)
        }
        StatsCmd::Transitions { common } => {
            let corpus = restrict_priority(load_corpus(&common.input)?, common.priority);
            let mut table =
                Table::new(vec!["from", "to", "mean_hours", "median_hours", "count"]);
            for ((from, to), stat) in stats::transition_duration_stats(&corpus) {
                table.push(vec![
                    Cell::Text(from),
                    Cell::Text(to),
                    Cell::Num(stat.mean_hours),
                    Cell::Num(stat.median_hours),
                    Cell::Int(stat.count as i64),
                ]);
            }
            write_output(&common.out, &table.render(common.format)?)
        }
        StatsCmd::Entities {
            common,
            role,
            top,
            order_priority,
        } => {
            let workflow = resolve_workflow(&common.workflow, &common.profile)?;
            let corpus = restrict_priority(load_corpus(&common.input)?, common.priority);
            let role: stats::Role = role.parse().map_err(anyhow::Error::msg)?;
            let impact =
                stats::entity_impact(&corpus, role, top, order_priority, &workflow.terminal);
            for warning in &impact.warnings {
                eprintln!("warning: {warning}");
            }
            let mut table = Table::new(vec![
                "rank",
                "entity_id",
                "priority",
                "count",
                "median_hours",
            ]);
            for (rank, entity) in impact.entities.iter().enumerate() {
                for (priority, (count, median)) in &entity.per_priority {
                    table.push(vec![
                        Cell::Int(rank as i64 + 1),
                        Cell::Text(entity.entity_id.clone()),
                        Cell::Int(*priority as i64),
                        Cell::Int(*count as i64),
                        Cell::Num(*median),
                    ]);
                }
            }
            write_output(&common.out, &table.render(common.format)?)
        }
        StatsCmd::SelfAssign { common } => {
            let workflow = resolve_workflow(&common.workflow, &common.profile)?;
            let corpus = restrict_priority(load_corpus(&common.input)?, common.priority);
            let comparison = stats::self_assignment_comparison(&corpus, &workflow.terminal);
            for warning in &comparison.warnings {
                eprintln!("warning: {warning}");
            }
            let mut table = Table::new(vec!["priority", "group", "count", "median_hours"]);
            for (priority, groups) in &comparison.per_priority {
                for (group, (count, median)) in groups {
                    table.push(vec![
                        Cell::Int(*priority as i64),
                        Cell::Text(group.label().to_string()),
                        Cell::Int(*count as i64),
                        Cell::Num(*median),
                    ]);
                }
            }
            write_output(&common.out, &table.render(common.format)?)
        }
        StatsCmd::Occupancy { common, grid } => {
            let workflow = resolve_workflow(&common.workflow, &common.profile)?;
            let corpus = restrict_priority(load_corpus(&common.input)?, common.priority);
            let grid = parse_grid(&grid)?;
            let curve = stats::occupancy_curve(&corpus, &grid, &workflow.terminal)?;
            let mut columns = vec!["t_hours".to_string()];
            columns.extend(curve.per_state_fraction.keys().cloned());
            let mut table = Table::new(columns);
            for (gi, &t) in curve.grid_hours.iter().enumerate() {
                let mut row = vec![Cell::Num(t)];
                for fractions in curve.per_state_fraction.values() {
                    row.push(Cell::Num(fractions[gi]));
                }
                table.push(row);
            }
            write_output(&common.out, &table.render(common.format)?)
        }
    }
}

pub fn ctmc(cmd: CtmcCmd) -> Result<()> {
    match cmd {
        CtmcCmd::Fit {
            input,
            workflow,
            profile,
            out,
        } => {
            let spec = resolve_workflow(&workflow, &profile)?;
            let corpus = load_corpus(&input)?;
            let stats_map = stats::transition_duration_stats(&corpus);
            // Exponential sojourns are fitted from means; a heavy mean/median
            // skew in the data flags how coarse that fit is per transition.
            for ((from, to), stat) in &stats_map {
                if stat.median_hours > 0.0 {
                    eprintln!(
                        "diagnostic: {from} -> {to}: mean/median = {}",
                        fmt_f64(stat.mean_hours / stat.median_hours)
                    );
                }
            }
            let model = ctmc::build_dual_model(&stats_map, &spec)?;
            eprintln!("fitted chain with {} nodes", model.nodes.len());
            write_output(&out, &(ctmc::model_to_json(&model) + "\n"))
        }
        CtmcCmd::Cdf {
            model,
            grid,
            format,
            out,
        } => {
            let model = ctmc::model_from_json(&std::fs::read_to_string(&model)?)?;
            let grid = parse_grid(&grid)?;
            let cdf = ctmc::resolution_cdf(&model, &grid)?;
            let mut table = Table::new(vec!["t_hours", "cdf"]);
            for (t, f) in cdf {
                table.push(vec![Cell::Num(t), Cell::Num(f)]);
            }
            write_output(&out, &table.render(format)?)
        }
        CtmcCmd::Simulate {
            model,
            samples,
            seed,
            grid,
            format,
            out,
        } => {
            let model = ctmc::model_from_json(&std::fs::read_to_string(&model)?)?;
            let grid = parse_grid(&grid)?;
            let cdf = ctmc::monte_carlo_cdf(&model, samples, seed, &grid);
            let mut table = Table::new(vec!["t_hours", "cdf"]);
            for (t, f) in cdf {
                table.push(vec![Cell::Num(t), Cell::Num(f)]);
            }
            write_output(&out, &table.render(format)?)
        }
        CtmcCmd::Export { model, out } => {
            let model = ctmc::model_from_json(&std::fs::read_to_string(&model)?)?;
            write_output(&out, &(ctmc::model_to_json(&model) + "\n"))
        }
    }
}

fn train_options(nn: &NnFlags, seed: u64) -> TrainOptions {
    TrainOptions {
        knn_k: nn.knn_k,
        nn: TrainConfig {
            epochs: nn.epochs,
            batch_size: nn.batch,
            learning_rate: nn.learning_rate,
            seed,
        },
    }
}

fn eval_table(rows: Vec<(String, String, predict::RepeatEval)>) -> Table {
    let mut table = Table::new(vec![
        "model",
        "repeat",
        "accuracy",
        "median_normalized_error",
        "n_test",
    ]);
    for (model, repeat, eval) in rows {
        table.push(vec![
            Cell::Text(model),
            Cell::Text(repeat),
            Cell::Num(eval.accuracy),
            match eval.median_normalized_error {
                Some(err) => Cell::Num(err),
                None => Cell::Missing,
            },
            Cell::Int(eval.n_test as i64),
        ]);
    }
    table
}

pub fn predict(cmd: PredictCmd) -> Result<()> {
    match cmd {
        PredictCmd::Train {
            input,
            workflow,
            profile,
            model_kind,
            seed,
            nn,
            out,
        } => {
            let spec = resolve_workflow(&workflow, &profile)?;
            let corpus = load_corpus(&input)?;
            let kind: ModelKind = model_kind.parse().map_err(anyhow::Error::msg)?;
            let ids: BTreeSet<String> = corpus.iter().map(|b| b.id.clone()).collect();
            let dataset = encode_features(&corpus, &ids, &spec.terminal)?;
            let model = train_model(kind, &dataset.examples, &train_options(&nn, seed))?;
            eprintln!(
                "trained {} on {} bugs (training median {} h)",
                kind.label(),
                dataset.examples.len(),
                fmt_f64(model.training_median_hours)
            );
            if let Some(curve) = model.loss_curve() {
                eprintln!(
                    "loss: first epoch {}, last epoch {}",
                    fmt_f64(curve[0]),
                    fmt_f64(*curve.last().unwrap())
                );
            }
            let file = predict::ModelFile {
                version: 1,
                encoder: dataset.encoder,
                model,
            };
            write_output(&out, &(predict::model_to_json(&file) + "\n"))
        }
        PredictCmd::Eval {
            input,
            workflow,
            profile,
            model,
            format,
            out,
        } => {
            let spec = resolve_workflow(&workflow, &profile)?;
            let corpus = load_corpus(&input)?;
            let file = predict::model_from_json(&std::fs::read_to_string(&model)?)?;
            let examples: Vec<Example> = corpus
                .iter()
                .map(|bug| {
                    let hours = stats::resolution_time(bug, &spec.terminal)?;
                    Ok(Example {
                        bug_id: bug.id.clone(),
                        features: file.encoder.features_for(bug),
                        resolution_hours: hours,
                    })
                })
                .collect::<Result<_>>()?;
            if examples.is_empty() {
                bail!("corpus is empty");
            }
            let report = evaluate(&file.model, &examples);
            let rows = vec![(
                file.model.kind.label().to_string(),
                "all".to_string(),
                report.per_repeat[0].clone(),
            )];
            write_output(&out, &eval_table(rows).render(format)?)
        }
        PredictCmd::Cv {
            input,
            workflow,
            profile,
            repeats,
            models,
            filter_variant,
            train_fraction,
            inactivity_days,
            seed,
            nn,
            format,
            out,
        } => {
            let spec = resolve_workflow(&workflow, &profile)?;
            let corpus = load_corpus(&input)?;
            let kinds: Vec<ModelKind> = match &models {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse().map_err(anyhow::Error::msg))
                    .collect::<Result<_>>()?,
                None => ModelKind::ALL.to_vec(),
            };
            let config = CvConfig {
                repeats,
                train_fraction,
                base_seed: seed,
                filter_variant: filter_variant.parse().map_err(anyhow::Error::msg)?,
                inactivity_gap_days: inactivity_days,
                options: train_options(&nn, seed),
            };
            let reports = cross_validate(&corpus, &spec.terminal, &kinds, &config)?;
            let mut rows = Vec::new();
            for (kind, report) in &reports {
                for (i, repeat) in report.per_repeat.iter().enumerate() {
                    rows.push((
                        kind.label().to_string(),
                        (i + 1).to_string(),
                        repeat.clone(),
                    ));
                }
                rows.push((
                    kind.label().to_string(),
                    "mean".to_string(),
                    predict::RepeatEval {
                        accuracy: report.accuracy,
                        median_normalized_error: report.median_normalized_error,
                        n_test: report.n_test,
                    },
                ));
            }
            write_output(&out, &eval_table(rows).render(format)?)
        }
    }
}

pub fn synth(cmd: SynthCmd) -> Result<()> {
    match cmd {
        SynthCmd::Generate { config, out, truth } => {
            let spec = synth::GeneratorSpec::from_toml_str(&std::fs::read_to_string(&config)?)?;
            let (corpus, truth_rows) = synth::generate_corpus(&spec)?;
            let raw = synth::to_raw_records(&corpus);
            let mut buf = Vec::new();
            write_export(&raw, &mut buf)?;
            write_output(&out, std::str::from_utf8(&buf)?)?;
            if let Some(path) = truth {
                let mut file = std::fs::File::create(&path)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                for row in &truth_rows {
                    serde_json::to_writer(&mut file, row)?;
                    file.write_all(b"\n")?;
                }
            }
            eprintln!("generated {} bugs", corpus.len());
            Ok(())
        }
        SynthCmd::Inject {
            input,
            config,
            workflow,
            profile,
            ledger,
            out,
        } => {
            let spec = resolve_workflow(&workflow, &profile)?;
            let noise = synth::NoiseSpec::from_toml_str(&std::fs::read_to_string(&config)?)?;
            let corpus = load_corpus(&input)?;
            let (noisy, ledger_data) = synth::inject_noise(corpus, &noise, &spec);
            let mut buf = Vec::new();
            write_bug_records(&noisy, &mut buf)?;
            write_output(&out, std::str::from_utf8(&buf)?)?;
            let ledger_json = serde_json::to_string_pretty(&ledger_data)?;
            match &ledger {
                Some(path) => std::fs::write(path, ledger_json + "\n")?,
                None => eprintln!("{ledger_json}"),
            }
            Ok(())
        }
    }
}
