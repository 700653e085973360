mod common;

use std::fs;

use common::{p, read_json, run, run_ok, Workdir};
use posture_core::boost::{RegressionNode, RegressionTree};
use posture_core::forest::ForestMember;
use posture_core::stack::LearnerSet;
use posture_core::{
    load_model, predict_stack, save_model, BoostConfig, BoostedModel, Creation, DecisionTree,
    FeatureSchema, Forest, ForestConfig, MaxFeatures, ModelFile, ScalerParams, StackConfig,
    StackMode, StackedModel,
};

#[test]
fn generate_rejects_indivisible_n() {
    let w = Workdir::new();
    let out = w.path("bad.csv");
    let res = run(&["generate", "-n", "181", "-o", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("divisible"));
    assert!(!out.exists());
}

#[test]
fn generate_writes_balanced_csv() {
    let w = Workdir::new();
    let data = w.generate(180, 42, "separated");
    let text = fs::read_to_string(&data).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 181);
    assert_eq!(lines[0], "egg,heart_rate,respiration_rate,spo2,position");
    for class in ["right", "supine", "left"] {
        let n = lines[1..]
            .iter()
            .filter(|l| l.ends_with(&format!(",{class}")))
            .count();
        assert_eq!(n, 60, "{class}");
    }
    let again = w.path("again.csv");
    run_ok(&["generate", "-n", "180", "--seed", "42", "-o", p(&again)]);
    assert_eq!(fs::read(&data).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn generate_unwritable_path() {
    let w = Workdir::new();
    let out = w.path("missing-dir/data.csv");
    assert_eq!(
        run(&["generate", "-n", "9", "-o", p(&out)]).status.code(),
        Some(2)
    );
}

#[test]
fn train_missing_input_leaves_nothing() {
    let w = Workdir::new();
    let model = w.path("model.json");
    let report = w.path("report.json");
    let res = run(&[
        "train",
        "--data",
        p(&w.path("nope.csv")),
        "--model-out",
        p(&model),
        "--report-out",
        p(&report),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!model.exists());
    assert!(!report.exists());
    assert_eq!(fs::read_dir(w.dir.path()).unwrap().count(), 0);
}

#[test]
fn train_records_split_sizes() {
    let w = Workdir::new();
    let data = w.generate(180, 42, "separated");
    let (_, report, _) = w.train(&data, "oof", "oof");
    let r = read_json(&report);
    assert_eq!(r["provenance"]["n_train"], 144);
    assert_eq!(r["provenance"]["n_test"], 36);
    assert_eq!(r["provenance"]["mode"], "oof");
    assert!(r["correlation"].is_object());
}

#[test]
fn train_then_evaluate_matches() {
    let w = Workdir::new();
    let data = w.generate(180, 7, "noisy");
    let (model, report, test) = w.train(&data, "oof", "m");
    let again = w.path("eval.json");
    run_ok(&[
        "evaluate",
        "--model",
        p(&model),
        "--data",
        p(&test),
        "--report-out",
        p(&again),
    ]);
    let a = read_json(&report);
    let b = read_json(&again);
    assert_eq!(a["layers"], b["layers"]);
    assert_eq!(b["provenance"]["n_test"], 36);
}

#[test]
fn evaluate_errors() {
    let w = Workdir::new();
    let data = w.generate(90, 3, "separated");
    let (model, _, _) = w.train(&data, "paper", "m");
    let report = w.path("r.json");

    let empty = w.path("empty.csv");
    fs::write(&empty, "egg,heart_rate,respiration_rate,spo2,position\n").unwrap();
    let res = run(&[
        "evaluate",
        "--model",
        p(&model),
        "--data",
        p(&empty),
        "--report-out",
        p(&report),
    ]);
    assert_eq!(res.status.code(), Some(2));

    let mut v = read_json(&model);
    v["format_version"] = serde_json::json!(99);
    let bumped = w.path("bumped.json");
    fs::write(&bumped, v.to_string()).unwrap();
    let res = run(&[
        "evaluate",
        "--model",
        p(&bumped),
        "--data",
        p(&data),
        "--report-out",
        p(&report),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("version"));

    let text = fs::read_to_string(&model).unwrap();
    let truncated = w.path("truncated.json");
    fs::write(&truncated, &text[..text.len() / 3]).unwrap();
    let res = run(&[
        "evaluate",
        "--model",
        p(&truncated),
        "--data",
        p(&data),
        "--report-out",
        p(&report),
    ]);
    assert_ne!(res.status.code(), Some(0));

    let other = w.path("other.csv");
    fs::write(
        &other,
        "egg,hr,respiration_rate,spo2,position\n1,2,3,4,left\n",
    )
    .unwrap();
    let res = run(&[
        "evaluate",
        "--model",
        p(&model),
        "--data",
        p(&other),
        "--report-out",
        p(&report),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!report.exists());
}

#[test]
fn evaluate_in_sample_paper_mode() {
    let w = Workdir::new();
    let data = w.generate(180, 42, "noisy");
    let (model, _, _) = w.train(&data, "paper", "m");
    let a = w.path("a.json");
    let b = w.path("b.json");
    run_ok(&[
        "evaluate",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--report-out",
        p(&a),
    ]);
    run_ok(&[
        "evaluate",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--report-out",
        p(&b),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let r = read_json(&a);
    // 36 of the 180 rows were held out, so the in-sample share is 0.8
    for alg in ["tree", "forest"] {
        let acc = r["layers"]["2"][alg]["accuracy"].as_f64().unwrap();
        assert!(acc >= 0.8, "{alg}: {acc}");
    }
}

fn predict_args<'a>(model: &'a str, row: &'a [String; 4]) -> Vec<&'a str> {
    vec![
        "predict",
        "--model",
        model,
        "--egg",
        &row[0],
        "--heart-rate",
        &row[1],
        "--respiration-rate",
        &row[2],
        "--spo2",
        &row[3],
    ]
}

#[test]
fn predict_matches_library() {
    let w = Workdir::new();
    let data = w.generate(90, 11, "noisy");
    let (model_path, _, _) = w.train(&data, "oof", "m");
    let file = load_model(&model_path).unwrap();
    let schema = file.model.schema();
    let rows = [
        [2.4, 70.0, 17.0, 97.5],
        [3.0, 72.0, 16.2, 96.8],
        [3.9, -5.0, 15.0, 95.0],
    ];
    for row in rows {
        let strs = row.map(|v| v.to_string());
        let out = run_ok(&predict_args(p(&model_path), &strs));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let expect = predict_stack(&file.model, &row).unwrap();
        let mut fields = 0;
        for (layer, preds) in [("layer1", expect.layer1), ("layer2", expect.layer2)] {
            let obj = v[layer].as_object().unwrap();
            fields += obj.len();
            for (key, k) in [
                ("tree", preds.tree),
                ("forest", preds.forest),
                ("boost", preds.boost),
            ] {
                assert_eq!(obj[key], schema.class_name(k).unwrap());
            }
        }
        assert_eq!(fields, 6);
        assert_eq!(v.as_object().unwrap().len(), 2);
    }
}

#[test]
fn predict_flag_errors() {
    let w = Workdir::new();
    let model = w.path("m.json");
    let res = run(&[
        "predict",
        "--model",
        p(&model),
        "--egg",
        "1",
        "--heart-rate",
        "70",
        "--spo2",
        "97",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let row = ["inf".to_string(), "70".into(), "16".into(), "97".into()];
    assert_eq!(run(&predict_args(p(&model), &row)).status.code(), Some(2));
}

fn constant_model(class: usize) -> StackedModel {
    let schema = FeatureSchema::posture();
    let k = schema.n_classes();
    let mut counts = vec![0; k];
    counts[class] = 1;
    let learners = |arity: usize| {
        let tree = DecisionTree::single_leaf(arity, counts.clone()).unwrap();
        let fcfg = ForestConfig {
            n_trees: 1,
            max_features: MaxFeatures::Count(arity),
            bootstrap: false,
            ..ForestConfig::default()
        };
        let forest = Forest::from_members(
            fcfg,
            vec![ForestMember {
                features: (0..arity).collect(),
                tree: tree.clone(),
            }],
        )
        .unwrap();
        let trees = (0..k)
            .map(|c| {
                let weight = if c == class { 1.0 } else { 0.0 };
                vec![RegressionTree::from_nodes(vec![RegressionNode::Leaf { weight }]).unwrap()]
            })
            .collect();
        let bcfg = BoostConfig {
            n_rounds: 1,
            ..BoostConfig::default()
        };
        let boost = BoostedModel::from_parts(arity, 0.0, bcfg, trees).unwrap();
        LearnerSet {
            tree,
            forest,
            boost,
        }
    };
    let config = StackConfig::seeded(StackMode::Paper, 0);
    let scaler = ScalerParams {
        means: vec![0.0; 4],
        stds: vec![1.0; 4],
    };
    StackedModel::from_parts(schema, scaler, config, learners(4), learners(4 + 3 * k)).unwrap()
}

#[test]
fn predict_constant_model() {
    let w = Workdir::new();
    let path = w.path("const.json");
    let file = ModelFile::new(
        constant_model(1),
        Creation {
            seed: 0,
            data_fingerprint: String::new(),
        },
    );
    save_model(&file, &path).unwrap();
    let row = ["9".to_string(), "150".into(), "39".into(), "86".into()];
    let out = run_ok(&predict_args(p(&path), &row));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for layer in ["layer1", "layer2"] {
        for alg in ["tree", "forest", "boost"] {
            assert_eq!(v[layer][alg], "supine");
        }
    }
}
