//! Versioned JSON persistence for [`StackedModel`].

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stack::StackedModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Creation {
    pub seed: u64,
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub created: Creation,
    pub model: StackedModel,
}

impl ModelFile {
    pub fn new(model: StackedModel, created: Creation) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            created,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::ModelLoad {
                field: "<document>".into(),
                message: e.to_string(),
            })?;
        match value.get("format_version") {
            None => {
                return Err(Error::ModelLoad {
                    field: "format_version".into(),
                    message: "missing".into(),
                })
            }
            Some(v) => match v.as_i64() {
                Some(n) if n == FORMAT_VERSION as i64 => {}
                Some(n) => {
                    return Err(Error::Version {
                        found: n,
                        supported: FORMAT_VERSION,
                    })
                }
                None => {
                    return Err(Error::ModelLoad {
                        field: "format_version".into(),
                        message: format!("expected an integer, found {v}"),
                    })
                }
            },
        }
        let file: ModelFile =
            serde_path_to_error::deserialize(value).map_err(|e| Error::ModelLoad {
                field: e.path().to_string(),
                message: e.into_inner().to_string(),
            })?;
        if file.model.schema().n_features() != 4 {
            return Err(Error::ModelLoad {
                field: "model.schema.names".into(),
                message: format!(
                    "expected 4 features, found {}",
                    file.model.schema().n_features()
                ),
            });
        }
        file.model.validate()?;
        Ok(file)
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    builder.prefix(".tmp-");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_model(file: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, file.to_json().as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelFile::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, SynthParams};
    use crate::stack::{fit_stack, StackConfig, StackMode};

    fn model() -> ModelFile {
        let d = generate(&SynthParams::noisy(1), 45).unwrap();
        let mut cfg = StackConfig::seeded(StackMode::Paper, 1);
        cfg.base.forest.n_trees = 5;
        cfg.meta.forest.n_trees = 5;
        cfg.base.boost.n_rounds = 3;
        cfg.meta.boost.n_rounds = 3;
        let m = fit_stack(&d, &cfg).unwrap();
        ModelFile::new(
            m,
            Creation {
                seed: 1,
                data_fingerprint: d.fingerprint(),
            },
        )
    }

    #[test]
    fn json_round_trip() {
        let f = model();
        let back = ModelFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_json(), f.to_json());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let f = model();
        save_model(&f, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), f);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn truncated_file() {
        let text = model().to_json();
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            ModelFile::from_json(cut),
            Err(Error::ModelLoad { .. })
        ));
    }

    #[test]
    fn future_version() {
        let mut v: serde_json::Value = serde_json::from_str(&model().to_json()).unwrap();
        v["format_version"] = serde_json::json!(2);
        assert!(matches!(
            ModelFile::from_json(&v.to_string()),
            Err(Error::Version {
                found: 2,
                supported: 1
            })
        ));
        v["format_version"] = serde_json::json!("one");
        assert!(matches!(
            ModelFile::from_json(&v.to_string()),
            Err(Error::ModelLoad { ref field, .. }) if field == "format_version"
        ));
    }

    #[test]
    fn names_first_invalid_field() {
        let mut v: serde_json::Value = serde_json::from_str(&model().to_json()).unwrap();
        v["model"]["scaler"]["stds"] = serde_json::json!("oops");
        match ModelFile::from_json(&v.to_string()) {
            Err(Error::ModelLoad { field, .. }) => assert_eq!(field, "model.scaler.stds"),
            other => panic!("{other:?}"),
        }
        let mut v: serde_json::Value = serde_json::from_str(&model().to_json()).unwrap();
        v["model"]["layer1"]["tree"]["nodes"][0] = serde_json::json!({"kind": "split", "feature_index": 0, "threshold": 0.5, "left": 0, "right": 0});
        assert!(matches!(
            ModelFile::from_json(&v.to_string()),
            Err(Error::ModelLoad { .. })
        ));
    }

    #[test]
    fn garbage() {
        assert!(matches!(
            ModelFile::from_json("not json"),
            Err(Error::ModelLoad { .. })
        ));
        assert!(matches!(
            ModelFile::from_json("{}"),
            Err(Error::ModelLoad { ref field, .. }) if field == "format_version"
        ));
    }
}
