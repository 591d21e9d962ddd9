use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Categorical predictors carry their split sets as 64-bit masks.
pub const MAX_LEVELS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredictorKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub name: String,
    pub kind: PredictorKind,
}

impl Predictor {
    pub fn numeric(name: impl Into<String>) -> Self {
        Predictor {
            name: name.into(),
            kind: PredictorKind::Numeric,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Self {
        Predictor {
            name: name.into(),
            kind: PredictorKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, PredictorKind::Categorical { .. })
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            PredictorKind::Categorical { levels } => Some(levels),
            PredictorKind::Numeric => None,
        }
    }

    pub fn level_code(&self, label: &str) -> Option<usize> {
        self.levels()?.iter().position(|l| l == label)
    }
}

/// Ordered predictor declarations. Declaration order is the tie-break order
/// everywhere a ranking over predictors is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    predictors: Vec<Predictor>,
}

impl Schema {
    pub fn new(predictors: Vec<Predictor>) -> Result<Self> {
        if predictors.is_empty() {
            return Err(Error::InvalidParameter("schema has no predictors".into()));
        }
        for (i, p) in predictors.iter().enumerate() {
            if predictors[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate predictor `{}`",
                    p.name
                )));
            }
            if let Some(levels) = p.levels() {
                if levels.is_empty() || levels.len() > MAX_LEVELS {
                    return Err(Error::InvalidParameter(format!(
                        "categorical predictor `{}` needs 1..={MAX_LEVELS} levels",
                        p.name
                    )));
                }
            }
        }
        Ok(Schema { predictors })
    }

    pub fn len(&self) -> usize {
        self.predictors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictors.is_empty()
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    pub fn get(&self, index: usize) -> Option<&Predictor> {
        self.predictors.get(index)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.predictors.iter().position(|p| p.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.predictors.iter().map(|p| p.name.as_str()).collect()
    }

    /// Schema restricted to `columns`, in the given order.
    pub fn project(&self, columns: &[usize]) -> Result<Schema> {
        let predictors = columns
            .iter()
            .map(|&c| {
                self.predictors.get(c).cloned().ok_or_else(|| {
                    Error::InvalidParameter(format!("unknown predictor index {c}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::new(predictors)
    }

    /// Checks width and categorical codes. Missing (NaN) is always allowed.
    pub fn check(&self, x: &FeatureVector) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::SchemaMismatch(format!(
                "feature vector has {} slots, schema has {}",
                x.len(),
                self.len()
            )));
        }
        for (p, &v) in self.predictors.iter().zip(x.values()) {
            if v.is_nan() {
                continue;
            }
            match &p.kind {
                PredictorKind::Numeric if !v.is_finite() => {
                    return Err(Error::SchemaMismatch(format!(
                        "non-finite value for `{}`",
                        p.name
                    )))
                }
                PredictorKind::Categorical { levels }
                    if v.fract() != 0.0 || v < 0.0 || v as usize >= levels.len() =>
                {
                    return Err(Error::SchemaMismatch(format!(
                        "invalid level code {v} for `{}`",
                        p.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One value per predictor slot. Categorical slots hold the level code;
/// `NaN` marks a missing value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn missing(width: usize) -> Self {
        FeatureVector(vec![f64::NAN; width])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.0.get(index).copied().filter(|v| !v.is_nan())
    }

    pub fn set(&mut self, index: usize, value: f64) {
        self.0[index] = value;
    }

    pub fn set_missing(&mut self, index: usize) {
        self.0[index] = f64::NAN;
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.0[index].is_nan()
    }

    pub fn project(&self, columns: &[usize]) -> FeatureVector {
        FeatureVector(columns.iter().map(|&c| self.0[c]).collect())
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }
}

/// Rows of predictors with their measured response (Bq/m³) and planar location (m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    schema: Schema,
    rows: Vec<FeatureVector>,
    response: Vec<f64>,
    locations: Vec<[f64; 2]>,
}

impl TrainingSet {
    pub fn new(
        schema: Schema,
        rows: Vec<FeatureVector>,
        response: Vec<f64>,
        locations: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if rows.len() != response.len() || rows.len() != locations.len() {
            return Err(Error::InvalidInput(format!(
                "row count mismatch: {} rows, {} responses, {} locations",
                rows.len(),
                response.len(),
                locations.len()
            )));
        }
        if let Some(bad) = response.iter().find(|y| !(y.is_finite() && **y >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "response must be finite and non-negative, got {bad}"
            )));
        }
        for row in &rows {
            schema.check(row)?;
        }
        Ok(TrainingSet {
            schema,
            rows,
            response,
            locations,
        })
    }

    /// Convenience for data without meaningful locations; all rows sit at the origin.
    pub fn without_locations(
        schema: Schema,
        rows: Vec<FeatureVector>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = rows.len();
        Self::new(schema, rows, response, vec![[0.0, 0.0]; n])
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &FeatureVector {
        &self.rows[i]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    #[inline]
    pub(crate) fn value(&self, row: usize, predictor: usize) -> f64 {
        self.rows[row].0[predictor]
    }

    pub fn subset(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            response: indices.iter().map(|&i| self.response[i]).collect(),
            locations: indices.iter().map(|&i| self.locations[i]).collect(),
        }
    }

    /// Keeps only `columns` (in that order).
    pub fn project(&self, columns: &[usize]) -> Result<TrainingSet> {
        Ok(TrainingSet {
            schema: self.schema.project(columns)?,
            rows: self.rows.iter().map(|r| r.project(columns)).collect(),
            response: self.response.clone(),
            locations: self.locations.clone(),
        })
    }

    /// Replaces one predictor column; used for permutation and partial dependence.
    pub(crate) fn with_column(&self, predictor: usize, values: &[f64]) -> TrainingSet {
        let mut out = self.clone();
        for (row, &v) in out.rows.iter_mut().zip(values) {
            row.0[predictor] = v;
        }
        out
    }

    pub fn column(&self, predictor: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.0[predictor]).collect()
    }
}
