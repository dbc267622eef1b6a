use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use grace_core::data::{load_csv, Dataset, Manifest, TrainOverrides, DEFAULT_RATIOS};
use grace_core::entropy::entropy_filter;
use grace_core::eval::{evaluate_runs, report_csv, Prepared};
use grace_core::explainer::{extract_predicate, render_text, TemplateSet};
use grace_core::generator::{contrastive_class, grace};
use grace_core::nn::TrainConfig;
use grace_core::synth;
use grace_core::{argmax, Classifier, DifferentiableModel};
use serde_json::json;

use crate::args::{
    DataArgs, EvaluateArgs, ExplainArgs, RankArgs, SynthArgs, TrainArgs, TrainFlags,
};
use crate::CliError;

type CliResult<T> = std::result::Result<T, CliError>;

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{what} '{}' not found",
            path.display()
        )))
    }
}

fn require_seed(seed: Option<u64>) -> CliResult<u64> {
    seed.ok_or_else(|| CliError::Usage("--seed (or GRACE_SEED) is required".into()))
}

struct Loaded {
    dataset: Dataset,
    train: Option<TrainOverrides>,
    name: String,
}

fn load_data(args: &DataArgs) -> CliResult<Loaded> {
    require_file(&args.data, "data file")?;
    let name = args
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    let is_manifest = args.data.extension().is_some_and(|e| e == "toml");
    if is_manifest {
        let manifest = Manifest::load(&args.data)?;
        Ok(Loaded {
            dataset: manifest.load_dataset()?,
            train: manifest.train.clone(),
            name,
        })
    } else {
        let label = args
            .label
            .as_deref()
            .ok_or_else(|| CliError::Usage("--label is required for CSV input".into()))?;
        Ok(Loaded {
            dataset: load_csv(&args.data, label, &BTreeMap::new())?,
            train: None,
            name,
        })
    }
}

fn train_config(
    seed: u64,
    manifest: Option<&TrainOverrides>,
    flags: &TrainFlags,
) -> CliResult<TrainConfig> {
    let mut config = TrainConfig {
        rng_seed: seed,
        ..TrainConfig::default()
    };
    if let Some(o) = manifest {
        config = o.apply(config);
    }
    if let Some(h) = &flags.hidden {
        config.hidden_sizes = [h[0], h[1]];
    }
    config.batch_size = flags.batch_size.unwrap_or(config.batch_size);
    config.learning_rate = flags.learning_rate.unwrap_or(config.learning_rate);
    config.early_stopping_patience = flags.patience.unwrap_or(config.early_stopping_patience);
    config.max_epochs = flags.max_epochs.unwrap_or(config.max_epochs);
    config.validate()?;
    Ok(config)
}

fn ratios(flags: &TrainFlags) -> [f64; 3] {
    match &flags.split {
        Some(r) => [r[0], r[1], r[2]],
        None => DEFAULT_RATIOS,
    }
}

fn load_model(path: &Path) -> CliResult<Classifier> {
    require_file(path, "model file")?;
    Ok(Classifier::load(path)?)
}

fn check_row(row: usize, dataset: &Dataset) -> CliResult<()> {
    if row >= dataset.len() {
        return Err(CliError::Usage(format!(
            "row {row} is out of range (dataset has {} rows)",
            dataset.len()
        )));
    }
    Ok(())
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Data(format!("cannot write '{}': {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let seed = require_seed(args.seed.seed)?;
    let loaded = load_data(&args.data)?;
    let config = train_config(seed, loaded.train.as_ref(), &args.train)?;
    let prepared = Prepared::train(loaded.dataset, ratios(&args.train), seed, &config)?;
    prepared.model.save(&args.out)?;
    let (acc, f1) = prepared.test_scores()?;
    println!("test_accuracy={acc:.4} macro_f1={f1:.4}");
    Ok(())
}

pub fn explain(args: ExplainArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let loaded = load_data(&args.data)?;
    check_row(args.row, &loaded.dataset)?;
    let config = args.generation.config();
    config.validate()?;
    let mut templates = match &args.templates {
        Some(path) => {
            require_file(path, "template file")?;
            TemplateSet::load(path)?
        }
        None => TemplateSet::default(),
    };
    if let Some(subject) = &args.subject {
        templates.subject = subject.clone();
    }

    let prepared = Prepared::from_model(loaded.dataset, model)?;
    let x = prepared.dataset.rows[args.row].clone();
    let result = grace(prepared.context(), &x, &config)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let classes = &prepared.model.class_labels;
    let names = &prepared.dataset.feature_names;
    let mut text = None;
    let mut predicate = None;
    if result.success {
        let p = extract_predicate(
            &x,
            &result.x_tilde,
            names,
            &result.features,
            &classes[result.original_class],
            &classes[result.y_tilde],
        )?;
        let id = match &args.template {
            Some(id) => id.clone(),
            None => templates
                .choose(args.seed.seed.unwrap_or(0), args.row as u64)?
                .to_string(),
        };
        text = Some(render_text(&p, &templates, &id, &args.degree)?);
        predicate = Some(p);
    }

    let record = json!({
        "row": args.row,
        "x": x,
        "x_tilde": result.x_tilde,
        "features": result.features,
        "feature_names": result.features.iter().map(|&j| &names[j]).collect::<Vec<_>>(),
        "original_class": result.original_class,
        "original_label": classes[result.original_class],
        "contrastive_class": result.contrastive_class,
        "y_tilde": result.y_tilde,
        "y_tilde_label": classes[result.y_tilde],
        "success": result.success,
        "iterations": result.iterations,
        "total_iterations": result.total_iterations,
        "k_used": result.k_used,
        "ranking": result.ranking.as_ref().map(|r| &r.order),
        "filtered": result.filtered,
        "warnings": result.warnings,
        "predicate": predicate,
        "explanation": text,
    });
    println!("{}", to_json(&record)?);
    match text {
        Some(t) => {
            println!("{}", t.text);
            Ok(())
        }
        None => Err(CliError::NotFlipped),
    }
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    if args.methods.is_empty() {
        return Err(CliError::Usage("--methods is empty".into()));
    }
    let loaded = load_data(&args.data)?;
    let base = args.generation.config();
    base.validate()?;

    let runs = match &args.model {
        Some(path) => {
            if args.runs != 1 {
                return Err(CliError::Usage(
                    "--runs retrains, so it cannot be combined with --model".into(),
                ));
            }
            vec![Prepared::from_model(loaded.dataset, load_model(path)?)?]
        }
        None => {
            let seed = require_seed(args.seed.seed)?;
            (0..args.runs as u64)
                .map(|r| {
                    let run_seed = seed + r;
                    let config = train_config(run_seed, loaded.train.as_ref(), &args.train)?;
                    Ok(Prepared::train(
                        loaded.dataset.clone(),
                        ratios(&args.train),
                        run_seed,
                        &config,
                    )?)
                })
                .collect::<CliResult<Vec<_>>>()?
        }
    };
    let rows = evaluate_runs(
        &loaded.name,
        &runs,
        &args.methods,
        &base,
        args.sweep,
        args.info_gain,
    )?;
    write_or_print(args.out.as_ref(), &report_csv(&rows))
}

pub fn rank(args: RankArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let loaded = load_data(&args.data)?;
    check_row(args.row, &loaded.dataset)?;
    if !(0.0..=1.0).contains(&args.gamma) {
        return Err(CliError::Usage("--gamma must be within [0, 1]".into()));
    }
    let prepared = Prepared::from_model(loaded.dataset, model)?;
    let x = &prepared.dataset.rows[args.row];
    let current = argmax(&prepared.model.predict(x)?);
    let v = contrastive_class(&prepared.model, x)?;
    let config = grace_core::generator::GenerationConfig {
        mode: args.mode,
        gamma: args.gamma,
        neighbors: args.neighbors,
        ..Default::default()
    };
    let (ranked, warnings) = prepared.context().rank(x, current, v, &config)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let filtered = entropy_filter(&ranked.order, args.gamma, &prepared.su)?;
    let names = &prepared.dataset.feature_names;
    let record = json!({
        "row": args.row,
        "original_class": current,
        "contrastive_class": v,
        "mode": format!("{:?}", ranked.mode).to_lowercase(),
        "ranking": ranked.order,
        "scores": ranked.scores,
        "ranking_names": ranked.order.iter().map(|&j| &names[j]).collect::<Vec<_>>(),
        "filtered": filtered,
        "filtered_names": filtered.iter().map(|&j| &names[j]).collect::<Vec<_>>(),
        "warnings": warnings,
    });
    if let Some(path) = &args.su_out {
        write_or_print(Some(path), &prepared.su.to_csv(names)?)?;
    }
    println!("{}", to_json(&record)?);
    Ok(())
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    let kind = args.kind;
    let dataset = kind.generate(args.rows.unwrap_or(kind.default_rows()), args.seed)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Data(format!("cannot create '{}': {e}", args.out.display())))?;
    let csv_name = format!("{}.csv", kind.as_str());
    let manifest_path = args.out.join(format!("{}.toml", kind.as_str()));
    write_or_print(Some(&args.out.join(&csv_name)), &synth::to_csv(&dataset))?;
    let train = kind.train_config(0);
    write_or_print(
        Some(&manifest_path),
        &synth::manifest_toml(&dataset, &csv_name, Some(&train)),
    )?;
    println!("{}", manifest_path.display());
    Ok(())
}
