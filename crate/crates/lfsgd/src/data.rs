//! Dataset loading and the label mapping each model needs.

use std::path::Path;

use lfsgd_core::libsvm::parse_libsvm;
use lfsgd_core::{Dataset, ModelKind};

use crate::error::{Error, Result};

/// Reads a LIBSVM file. `limit` keeps the first instances only; `scale`
/// rescales every feature into `[-1, 1]` by its maximum magnitude.
pub fn load_libsvm(path: &Path, limit: Option<usize>, scale: bool) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut data = parse_libsvm(&bytes, false)?;
    if let Some(n) = limit {
        data = data.truncated(n)?;
    }
    if scale {
        data.scale_max_abs();
    }
    Ok(data)
}

/// Adapts the class structure to the model.
///
/// The MLP keeps all classes. The binary models need two: by default a
/// two-class file maps its larger label to `+1`, and a multi-class file
/// maps its smallest label to `+1` against the rest. `positive` and
/// `negative` select raw label values instead; naming a negative class
/// drops every instance outside the pair.
pub fn for_model(data: &Dataset, kind: ModelKind, positive: Option<i64>, negative: Option<i64>) -> Result<Dataset> {
    if kind == ModelKind::Mlp {
        if positive.is_some() || negative.is_some() {
            return Err(Error::usage(
                "--positive-class/--negative-class apply to binary models only",
            ));
        }
        return Ok(data.clone());
    }
    let class_of = |label: i64| {
        data.class_labels()
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::usage(format!("label {label} does not occur in the dataset")))
    };
    let pos = match positive {
        Some(l) => class_of(l)?,
        None if data.num_classes() == 2 => 1,
        None => 0,
    };
    let neg = negative.map(class_of).transpose()?;
    if data.num_classes() < 2 && neg.is_none() {
        return Err(Error::usage("a binary model needs at least two classes"));
    }
    Ok(data.binary(pos, neg)?)
}
