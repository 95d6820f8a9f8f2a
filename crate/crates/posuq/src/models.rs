//! Versioned structured text formats for trained models.
//!
//! `gpmodel-v1`: per-BS hyperparameters followed by the training arrays.
//! `rfmodel-v1`: a params header, then a pre-order node listing per tree.

use std::fmt::Write as _;
use std::path::Path;

use posuq_core::geo::Point2;
use posuq_core::gp::{GpHyperparams, GpModel};
use posuq_core::rf::{RandomForestModel, RfParams, TreeNode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: expected header {expected:?}, found {found:?}")]
    WrongVersion {
        path: String,
        expected: String,
        found: String,
    },
    #[error("stored GP model is inconsistent: {0}")]
    BadGp(posuq_core::gp::GpError),
}

struct LineReader<'a> {
    path: &'a str,
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str, path: &'a str) -> Self {
        Self {
            path,
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str, ModelFileError> {
        self.line_no += 1;
        self.lines.next().ok_or_else(|| ModelFileError::Parse {
            path: self.path.to_string(),
            line: self.line_no,
            message: "unexpected end of file".into(),
        })
    }

    fn err(&self, message: impl Into<String>) -> ModelFileError {
        ModelFileError::Parse {
            path: self.path.to_string(),
            line: self.line_no,
            message: message.into(),
        }
    }

    /// `key value` line with the given key.
    fn keyed(&mut self, key: &str) -> Result<&'a str, ModelFileError> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected {key:?} entry, found {line:?}")))
    }

    fn keyed_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelFileError> {
        let raw = self.keyed(key)?;
        raw.parse()
            .map_err(|_| self.err(format!("cannot parse {key} value {raw:?}")))
    }
}

// ---------------------------------------------------------------- gpmodel-v1

pub fn gp_models_to_string(models: &[GpModel]) -> String {
    let mut out = String::from("gpmodel-v1\n");
    let _ = writeln!(out, "bs_count {}", models.len());
    for (i, m) in models.iter().enumerate() {
        let _ = writeln!(out, "bs {i}");
        let _ = writeln!(out, "signal_std {}", m.hyperparams.signal_std);
        let _ = writeln!(out, "length_scale {}", m.hyperparams.length_scale);
        let _ = writeln!(out, "noise_std {}", m.hyperparams.noise_std);
        let _ = writeln!(out, "m {}", m.train_toas.len());
        for (t, d) in m.train_toas.iter().zip(&m.train_distances) {
            let _ = writeln!(out, "{t} {d}");
        }
    }
    out
}

pub fn gp_models_from_string(text: &str, path: &str) -> Result<Vec<GpModel>, ModelFileError> {
    let mut r = LineReader::new(text, path);
    let header = r.next()?;
    if header != "gpmodel-v1" {
        return Err(ModelFileError::WrongVersion {
            path: path.to_string(),
            expected: "gpmodel-v1".into(),
            found: header.to_string(),
        });
    }
    let bs_count: usize = r.keyed_parse("bs_count")?;
    let mut models = Vec::with_capacity(bs_count);
    for i in 0..bs_count {
        let idx: usize = r.keyed_parse("bs")?;
        if idx != i {
            return Err(r.err(format!("expected bs {i}, found bs {idx}")));
        }
        let hyperparams = GpHyperparams {
            signal_std: r.keyed_parse("signal_std")?,
            length_scale: r.keyed_parse("length_scale")?,
            noise_std: r.keyed_parse("noise_std")?,
        };
        let m: usize = r.keyed_parse("m")?;
        let mut taus = Vec::with_capacity(m);
        let mut ds = Vec::with_capacity(m);
        for _ in 0..m {
            let line = r.next()?;
            let mut parts = line.split(' ');
            let (Some(t), Some(d), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(r.err(format!("expected \"tau distance\" pair, found {line:?}")));
            };
            taus.push(t.parse().map_err(|_| r.err(format!("bad tau {t:?}")))?);
            ds.push(d.parse().map_err(|_| r.err(format!("bad distance {d:?}")))?);
        }
        models.push(GpModel::from_parts(taus, ds, hyperparams).map_err(ModelFileError::BadGp)?);
    }
    Ok(models)
}

pub fn write_gp_models(models: &[GpModel], path: &Path) -> Result<(), ModelFileError> {
    std::fs::write(path, gp_models_to_string(models)).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_gp_models(path: &Path) -> Result<Vec<GpModel>, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    gp_models_from_string(&text, &path.display().to_string())
}

// ---------------------------------------------------------------- rfmodel-v1

fn count_nodes(node: &TreeNode) -> usize {
    match node {
        TreeNode::Leaf { .. } => 1,
        TreeNode::Internal { left, right, .. } => 1 + count_nodes(left) + count_nodes(right),
    }
}

fn write_node(out: &mut String, node: &TreeNode) {
    match node {
        TreeNode::Leaf { mean_position } => {
            let _ = writeln!(out, "L {} {}", mean_position.x, mean_position.y);
        }
        TreeNode::Internal {
            feature_index,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "I {feature_index} {threshold}");
            write_node(out, left);
            write_node(out, right);
        }
    }
}

pub fn rf_model_to_string(model: &RandomForestModel) -> String {
    let p = &model.params;
    let mut out = String::from("rfmodel-v1\n");
    let _ = writeln!(out, "n_trees {}", p.n_trees);
    let _ = writeln!(out, "max_depth {}", p.max_depth);
    let _ = writeln!(out, "min_leaf_size {}", p.min_leaf_size);
    let _ = writeln!(out, "features_per_split {}", p.features_per_split);
    let _ = writeln!(out, "bootstrap {}", u8::from(p.bootstrap));
    let _ = writeln!(out, "seed {}", model.bootstrap_seed);
    for (i, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {i} {}", count_nodes(tree));
        write_node(&mut out, tree);
    }
    out
}

fn read_node(r: &mut LineReader<'_>) -> Result<TreeNode, ModelFileError> {
    let line = r.next()?;
    let mut parts = line.split(' ');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("L"), Some(x), Some(y), None) => Ok(TreeNode::Leaf {
            mean_position: Point2::new(
                x.parse().map_err(|_| r.err(format!("bad leaf x {x:?}")))?,
                y.parse().map_err(|_| r.err(format!("bad leaf y {y:?}")))?,
            ),
        }),
        (Some("I"), Some(f), Some(t), None) => {
            let feature_index = f
                .parse()
                .map_err(|_| r.err(format!("bad feature index {f:?}")))?;
            let threshold = t
                .parse()
                .map_err(|_| r.err(format!("bad threshold {t:?}")))?;
            let left = Box::new(read_node(r)?);
            let right = Box::new(read_node(r)?);
            Ok(TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
            })
        }
        _ => Err(r.err(format!("expected node line, found {line:?}"))),
    }
}

pub fn rf_model_from_string(text: &str, path: &str) -> Result<RandomForestModel, ModelFileError> {
    let mut r = LineReader::new(text, path);
    let header = r.next()?;
    if header != "rfmodel-v1" {
        return Err(ModelFileError::WrongVersion {
            path: path.to_string(),
            expected: "rfmodel-v1".into(),
            found: header.to_string(),
        });
    }
    let params = RfParams {
        n_trees: r.keyed_parse("n_trees")?,
        max_depth: r.keyed_parse("max_depth")?,
        min_leaf_size: r.keyed_parse("min_leaf_size")?,
        features_per_split: r.keyed_parse("features_per_split")?,
        bootstrap: r.keyed_parse::<u8>("bootstrap")? != 0,
    };
    let bootstrap_seed = r.keyed_parse("seed")?;
    let mut trees = Vec::with_capacity(params.n_trees);
    for i in 0..params.n_trees {
        let decl = r.keyed("tree")?;
        let mut parts = decl.split(' ');
        let (Some(idx), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(r.err(format!("expected \"tree <i> <nodes>\", found {decl:?}")));
        };
        let idx: usize = idx.parse().map_err(|_| r.err("bad tree index"))?;
        if idx != i {
            return Err(r.err(format!("expected tree {i}, found tree {idx}")));
        }
        let declared: usize = count.parse().map_err(|_| r.err("bad node count"))?;
        let tree = read_node(&mut r)?;
        if count_nodes(&tree) != declared {
            return Err(r.err(format!(
                "tree {i} declared {declared} nodes but contains {}",
                count_nodes(&tree)
            )));
        }
        trees.push(tree);
    }
    Ok(RandomForestModel {
        trees,
        params,
        bootstrap_seed,
    })
}

pub fn write_rf_model(model: &RandomForestModel, path: &Path) -> Result<(), ModelFileError> {
    std::fs::write(path, rf_model_to_string(model)).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_rf_model(path: &Path) -> Result<RandomForestModel, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    rf_model_from_string(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use posuq_core::rng;

    #[test]
    fn gp_round_trip() {
        let mut r = rng::stream(1, "m", 0);
        let models: Vec<GpModel> = (0..3)
            .map(|_| {
                let taus: Vec<f64> = (0..6).map(|_| rng::uniform_in(&mut r, 0.0, 2.0)).collect();
                let ds: Vec<f64> = (0..6).map(|_| rng::uniform_in(&mut r, 5.0, 30.0)).collect();
                GpModel::from_parts(
                    taus,
                    ds,
                    GpHyperparams {
                        signal_std: 10.0,
                        length_scale: 0.5,
                        noise_std: 1.0,
                    },
                )
                .unwrap()
            })
            .collect();
        let text = gp_models_to_string(&models);
        let parsed = gp_models_from_string(&text, "mem").unwrap();
        assert_eq!(parsed.len(), 3);
        for (a, b) in models.iter().zip(&parsed) {
            assert_eq!(a.train_toas, b.train_toas);
            assert_eq!(a.train_distances, b.train_distances);
            assert_eq!(a.hyperparams, b.hyperparams);
            // predictions agree through the rebuilt factorization
            let (ma, va) = a.predict(1.0);
            let (mb, vb) = b.predict(1.0);
            assert_eq!(ma, mb);
            assert_eq!(va, vb);
        }
        assert_eq!(gp_models_to_string(&parsed), text);
    }

    #[test]
    fn gp_rejects_wrong_header() {
        let err = gp_models_from_string("gpmodel-v2\nbs_count 0\n", "mem").unwrap_err();
        assert!(err.to_string().contains("gpmodel-v1"));
    }

    #[test]
    fn rf_round_trip() {
        let mut r = rng::stream(2, "m", 0);
        let features: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng::uniform(&mut r)).collect())
            .collect();
        let targets: Vec<Point2> = (0..30)
            .map(|_| Point2::new(rng::uniform(&mut r) * 100.0, rng::uniform(&mut r) * 50.0))
            .collect();
        let params = RfParams {
            n_trees: 5,
            ..RfParams::defaults_for(4)
        };
        let model = posuq_core::rf::train_rf(&features, &targets, &params, 17).unwrap();
        let text = rf_model_to_string(&model);
        let parsed = rf_model_from_string(&text, "mem").unwrap();
        assert_eq!(parsed, model);
        assert_eq!(rf_model_to_string(&parsed), text);
    }

    #[test]
    fn rf_detects_truncation() {
        let model = RandomForestModel {
            trees: vec![TreeNode::Leaf {
                mean_position: Point2::new(1.0, 2.0),
            }],
            params: RfParams {
                n_trees: 1,
                ..RfParams::defaults_for(2)
            },
            bootstrap_seed: 0,
        };
        let text = rf_model_to_string(&model);
        let truncated = text.lines().take(7).collect::<Vec<_>>().join("\n");
        assert!(rf_model_from_string(&truncated, "mem").is_err());
    }
}
