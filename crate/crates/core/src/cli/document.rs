//! JSON documents: algebra inputs and emitted certificates.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major lists of
//! rows.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, Tolerance, Vector};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;
pub type JsonVector = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceDoc {
    pub rel_eps: f64,
    pub abs_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraDocument {
    pub ambient_dim: usize,
    #[serde(default)]
    pub generators: Vec<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_subalgebra: Option<Vec<JsonMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<BTreeMap<String, JsonVector>>,
    /// Matrix of an antilinear operator `ξ ↦ A conj(ξ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugation: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualTable {
    pub fixed_point: f64,
    pub involution: f64,
    pub antiunitary: f64,
    pub z_antilinearity: f64,
    pub exchange: f64,
    pub centre: f64,
    pub worst: f64,
}

pub const CERTIFICATE_KIND: &str = "reduced-standardness-certificate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDocument {
    pub kind: String,
    pub document: AlgebraDocument,
    pub e: JsonMatrix,
    pub conjugation: JsonMatrix,
    pub module_action: JsonMatrix,
    pub pairing: Vec<usize>,
    pub residuals: ResidualTable,
    pub passes: bool,
}

/// Rounds to twelve decimals so that reports are stable in the last bits.
pub fn clean(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn encode_complex(z: Complex64) -> [f64; 2] {
    [clean(z.re), clean(z.im)]
}

pub fn encode_matrix(m: &Matrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| encode_complex(m[(i, j)])).collect())
        .collect()
}

/// Full precision, for certificates that are read back.
pub fn encode_matrix_exact(m: &Matrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn decode_matrix(rows: &JsonMatrix, n: usize, field: &str) -> Result<Matrix, String> {
    decode_rect(rows, n, n, field)
}

pub fn decode_rect(rows: &JsonMatrix, r: usize, c: usize, field: &str) -> Result<Matrix, String> {
    if rows.len() != r {
        return Err(format!("{field}: expected {r} rows, found {}", rows.len()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(format!(
                "{field}: row {i} has {} entries, expected {c}",
                row.len()
            ));
        }
        if row.iter().flatten().any(|x| !x.is_finite()) {
            return Err(format!("{field}: row {i} has non-finite entries"));
        }
    }
    Ok(Matrix::from_fn(r, c, |i, j| {
        let [a, b] = rows[i][j];
        Complex64::new(a, b)
    }))
}

pub fn decode_vector(entries: &JsonVector, n: usize, field: &str) -> Result<Vector, String> {
    if entries.len() != n {
        return Err(format!(
            "{field}: expected {n} entries, found {}",
            entries.len()
        ));
    }
    if entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(format!("{field}: non-finite entries"));
    }
    Ok(Vector::from_iterator(
        n,
        entries.iter().map(|[a, b]| Complex64::new(*a, *b)),
    ))
}

/// Decoded form of an [`AlgebraDocument`].
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub generators: Vec<Matrix>,
    pub central: Option<Vec<Matrix>>,
    pub vectors: BTreeMap<String, Vector>,
    pub conjugation: Option<Matrix>,
    pub seed: Option<u64>,
    pub tolerance: Option<Tolerance>,
}

impl AlgebraDocument {
    pub fn decode(&self) -> Result<Instance, String> {
        let n = self.ambient_dim;
        if n == 0 {
            return Err("ambient_dim: must be positive".to_string());
        }
        let generators = self
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| decode_matrix(g, n, &format!("generators[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let central = match &self.central_subalgebra {
            Some(list) => Some(
                list.iter()
                    .enumerate()
                    .map(|(i, g)| decode_matrix(g, n, &format!("central_subalgebra[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        let mut vectors = BTreeMap::new();
        for (name, v) in self.vectors.iter().flatten() {
            vectors.insert(name.clone(), decode_vector(v, n, &format!("vectors.{name}"))?);
        }
        let conjugation = match &self.conjugation {
            Some(m) => Some(decode_matrix(m, n, "conjugation")?),
            None => None,
        };
        let tolerance = match &self.tolerance {
            Some(t) => Some(
                Tolerance::new(t.rel_eps, t.abs_eps).map_err(|e| format!("tolerance: {e}"))?,
            ),
            None => None,
        };
        Ok(Instance {
            n,
            generators,
            central,
            vectors,
            conjugation,
            seed: self.seed,
            tolerance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        let bad = r#"{"ambient_dim": 2, "generatorz": []}"#;
        assert!(serde_json::from_str::<AlgebraDocument>(bad).is_err());
        let doc: AlgebraDocument =
            serde_json::from_str(r#"{"ambient_dim": 2, "generators": [[[[1,0]]]]}"#).unwrap();
        let err = doc.decode().unwrap_err();
        assert!(err.starts_with("generators[0]"), "{err}");
    }

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_fn(2, 3, |i, j| Complex64::new(i as f64, j as f64 * 0.5));
        let back = decode_rect(&encode_matrix_exact(&m), 2, 3, "m").unwrap();
        assert_eq!(m, back);
        assert_eq!(encode_matrix(&m)[1][2], [1.0, 1.0]);
        assert_eq!(clean(-1e-15), 0.0);
    }
}
