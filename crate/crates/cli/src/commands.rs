use std::fmt;
use std::path::Path;

use posture_core::dataset::{self, write_csv, SynthParams};
use posture_core::model_file::{self, write_atomic, Creation, ModelFile};
use posture_core::{
    correlation_matrix, evaluate_stack, fit_stack, render_report, PerAlgorithm, ReportFormat,
    StackConfig, StackMode,
};
use serde::Serialize;

use crate::args::{EvaluateArgs, GenerateArgs, ModeArg, PredictArgs, Preset, TrainArgs};

/// Exit code 2 for bad input or usage, 3 when fitting fails.
pub enum CliError {
    Data(String),
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Training(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(m) | CliError::Training(m) => f.write_str(m),
        }
    }
}

fn data_err(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

type CliResult = Result<(), CliError>;

pub fn generate(args: GenerateArgs) -> CliResult {
    let mut params = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SynthParams>(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => match args.preset {
            Preset::Separated => SynthParams::separated(args.seed),
            Preset::Noisy => SynthParams::noisy(args.seed),
        },
    };
    params.seed = args.seed;
    let data = dataset::generate(&params, args.n).map_err(data_err)?;
    let mut buf = Vec::new();
    write_csv(&data, &mut buf).map_err(data_err)?;
    write_atomic(&args.out, &buf).map_err(data_err)?;

    let counts = data.class_counts();
    let per_class: Vec<String> = data
        .schema()
        .class_names()
        .iter()
        .zip(&counts)
        .map(|(name, n)| format!("{name}={n}"))
        .collect();
    println!(
        "wrote {} rows to {} ({})",
        data.len(),
        args.out.display(),
        per_class.join(", ")
    );
    Ok(())
}

/// Writes every `(path, contents)` pair or none of them.
fn write_all_or_nothing(outputs: &[(&Path, Vec<u8>)]) -> CliResult {
    for (i, (path, contents)) in outputs.iter().enumerate() {
        if let Err(e) = write_atomic(path, contents) {
            for (done, _) in &outputs[..i] {
                let _ = std::fs::remove_file(done);
            }
            return Err(data_err(e));
        }
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> CliResult {
    let mode = if args.reproduce_paper || args.mode == ModeArg::Paper {
        StackMode::Paper
    } else {
        StackMode::Oof
    };
    let schema = dataset::FeatureSchema::posture();
    let data = dataset::load_csv(&args.data, &schema).map_err(data_err)?;
    let (train, test) =
        dataset::split(&data, args.test_fraction, args.seed, true).map_err(data_err)?;
    if test.is_empty() {
        return Err(CliError::Data(
            "test split is empty; use a larger --test-fraction or more rows".into(),
        ));
    }

    let config = StackConfig::seeded(mode, args.seed);
    let model = fit_stack(&train, &config).map_err(|e| CliError::Training(e.to_string()))?;
    let mut report =
        evaluate_stack(&model, &test).map_err(|e| CliError::Training(e.to_string()))?;
    report.provenance.n_train = Some(train.len());
    report.correlation = Some(correlation_matrix(&data).map_err(data_err)?);

    let file = ModelFile::new(
        model,
        Creation {
            seed: args.seed,
            data_fingerprint: train.fingerprint(),
        },
    );
    let mut outputs = vec![
        (args.model_out.as_path(), file.to_json().into_bytes()),
        (
            args.report_out.as_path(),
            render_report(&report, ReportFormat::Json).into_bytes(),
        ),
    ];
    if let Some(path) = &args.test_out {
        let mut buf = Vec::new();
        write_csv(&test, &mut buf).map_err(data_err)?;
        outputs.push((path.as_path(), buf));
    }
    write_all_or_nothing(&outputs)?;

    print!("{}", render_report(&report, ReportFormat::Table));
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> CliResult {
    let file = model_file::load_model(&args.model).map_err(data_err)?;
    let model = &file.model;
    let data = dataset::load_csv(&args.data, model.schema()).map_err(data_err)?;
    if data.is_empty() {
        return Err(CliError::Data(format!(
            "{} has no rows",
            args.data.display()
        )));
    }
    let report = evaluate_stack(model, &data).map_err(data_err)?;
    write_atomic(
        &args.report_out,
        render_report(&report, ReportFormat::Json).as_bytes(),
    )
    .map_err(data_err)?;
    print!("{}", render_report(&report, ReportFormat::Table));
    Ok(())
}

pub fn predict(args: PredictArgs) -> CliResult {
    let row = [args.egg, args.heart_rate, args.respiration_rate, args.spo2];
    let names = ["--egg", "--heart-rate", "--respiration-rate", "--spo2"];
    if let Some(i) = row.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Data(format!("{} must be finite", names[i])));
    }
    let file = model_file::load_model(&args.model).map_err(data_err)?;
    let model = &file.model;
    let preds = model.predict(&row).map_err(data_err)?;
    let names = |p: &PerAlgorithm<usize>| {
        p.map(|_, &k| model.schema().class_name(k).unwrap_or("?").to_string())
    };
    let out = LayeredNames {
        layer1: names(&preds.layer1),
        layer2: names(&preds.layer2),
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

#[derive(Serialize)]
struct LayeredNames {
    layer1: PerAlgorithm<String>,
    layer2: PerAlgorithm<String>,
}
