//! JSON import of a finite sequence.
//!
//! ```json
//! {"p": 1, "vectors": [[[1, "1"]], [[1, "-1"]]]}
//! ```
//!
//! Each vector is a list of `[coordinate, scalar]` pairs with 1-based
//! coordinates. A scalar is a decimal string, a number, a `[re, im]` pair
//! or an object `{"re": .., "im": ..}`.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::macphail::FiniteSequence;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Part {
    Number(f64),
    Text(String),
}

impl Part {
    fn value(&self) -> Result<f64> {
        match self {
            Part::Number(x) => Ok(*x),
            Part::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("cannot parse scalar {s:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Real(Part),
    Pair([Part; 2]),
    Object { re: Part, im: Part },
}

impl Scalar {
    fn value(&self) -> Result<Complex64> {
        let z = match self {
            Scalar::Real(x) => Complex64::new(x.value()?, 0.0),
            Scalar::Pair([re, im]) | Scalar::Object { re, im } => Complex64::new(re.value()?, im.value()?),
        };
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(Error::Input("scalars must be finite".into()))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceFile {
    p: f64,
    vectors: Vec<Vec<(u64, Scalar)>>,
}

pub fn parse_sequence(text: &str) -> Result<FiniteSequence> {
    let file: SequenceFile =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed sequence: {e}")))?;
    if !(1.0..=2.0).contains(&file.p) {
        return Err(Error::Input(format!("p must lie in [1, 2], got {}", file.p)));
    }
    let vectors = file
        .vectors
        .iter()
        .map(|v| v.iter().map(|(m, z)| Ok((*m, z.value()?))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    FiniteSequence::new(file.p, vectors)
}

pub fn read_sequence(path: &Path) -> Result<FiniteSequence> {
    parse_sequence(&std::fs::read_to_string(path)?)
}
