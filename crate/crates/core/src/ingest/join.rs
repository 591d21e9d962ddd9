//! Spatial join of raster layers and building attributes into predictor rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::raster::RasterStack;
use super::records::SurveyRecord;
use crate::error::{Error, Result};
use crate::population::{AgeClass, BuildingType};
use crate::qrf::{FeatureVector, Predictor, Schema, TrainingSet};

/// Predictors taken from the dwelling rather than from a raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingPredictor {
    Floor,
    AgeClass,
    BuildingType,
    Households,
}

impl BuildingPredictor {
    pub const ALL: [BuildingPredictor; 4] = [
        BuildingPredictor::Floor,
        BuildingPredictor::AgeClass,
        BuildingPredictor::BuildingType,
        BuildingPredictor::Households,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuildingPredictor::Floor => "floor",
            BuildingPredictor::AgeClass => "age_class",
            BuildingPredictor::BuildingType => "building_type",
            BuildingPredictor::Households => "households",
        }
    }

    fn predictor(self) -> Predictor {
        match self {
            BuildingPredictor::Floor | BuildingPredictor::Households => Predictor::numeric(self.name()),
            BuildingPredictor::AgeClass => {
                Predictor::categorical(self.name(), AgeClass::ALL.iter().map(|a| a.label()))
            }
            BuildingPredictor::BuildingType => {
                Predictor::categorical(self.name(), BuildingType::ALL.iter().map(|t| t.code()))
            }
        }
    }
}

impl FromStr for BuildingPredictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuildingPredictor::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown building predictor `{s}`")))
    }
}

impl fmt::Display for BuildingPredictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Attributes of one dwelling (a floor of a building).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellingAttributes {
    pub floor: i32,
    pub age_class: AgeClass,
    pub building_type: Option<BuildingType>,
    pub households: u32,
}

/// Column order of a predictor row: raster layers first, then building
/// predictors, each in the given order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    layers: Vec<String>,
    building: Vec<BuildingPredictor>,
}

impl FeatureLayout {
    pub fn new(layers: Vec<String>, building: Vec<BuildingPredictor>) -> Result<Self> {
        let layout = FeatureLayout { layers, building };
        layout.schema()?;
        Ok(layout)
    }

    /// All given layers plus every building predictor.
    pub fn full(layers: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        Self::new(layers.into_iter().map(Into::into).collect(), BuildingPredictor::ALL.to_vec())
    }

    /// Inverse of [`FeatureLayout::schema`]: names matching a building
    /// predictor are building columns, everything else is a raster layer.
    pub fn from_schema(schema: &Schema) -> Result<Self> {
        let mut layers = Vec::new();
        let mut building = Vec::new();
        for name in schema.names() {
            match name.parse::<BuildingPredictor>() {
                Ok(p) => building.push(p),
                Err(_) if building.is_empty() => layers.push(name.to_string()),
                Err(_) => {
                    return Err(Error::SchemaMismatch(format!(
                        "raster column `{name}` after building columns"
                    )))
                }
            }
        }
        let layout = FeatureLayout { layers, building };
        if layout.schema()? != *schema {
            return Err(Error::SchemaMismatch("schema does not match a feature layout".into()));
        }
        Ok(layout)
    }

    pub fn layers(&self) -> &[String] {
        &self.layers
    }

    pub fn building(&self) -> &[BuildingPredictor] {
        &self.building
    }

    pub fn width(&self) -> usize {
        self.layers.len() + self.building.len()
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut predictors: Vec<Predictor> = self.layers.iter().map(Predictor::numeric).collect();
        predictors.extend(self.building.iter().map(|b| b.predictor()));
        Schema::new(predictors)
    }

    /// Layout restricted to a subset of schema columns.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        let schema = self.schema()?.project(columns)?;
        Self::from_schema(&schema)
    }

    /// Fails if a layer the layout needs is not in the stack.
    pub fn check_stack(&self, stack: &RasterStack) -> Result<()> {
        match self.layers.iter().find(|l| stack.get(l).is_none()) {
            Some(l) => Err(Error::InvalidInput(format!("raster layer `{l}` not loaded"))),
            None => Ok(()),
        }
    }

    /// Raster values at `(x, y)`, `None` where a layer is off-grid or nodata.
    pub fn raster_values(&self, stack: &RasterStack, x: f64, y: f64) -> Result<Vec<Option<f64>>> {
        self.check_stack(stack)?;
        Ok(self.layers.iter().map(|l| stack.get(l).and_then(|g| g.lookup(x, y))).collect())
    }

    /// Predictor row for one dwelling. Off-grid raster values are missing.
    pub fn vector(&self, stack: &RasterStack, x: f64, y: f64, attrs: &DwellingAttributes) -> Result<FeatureVector> {
        if attrs.floor < -1 {
            return Err(Error::InvalidInput(format!("floor {} < -1", attrs.floor)));
        }
        let mut values: Vec<f64> = self
            .raster_values(stack, x, y)?
            .into_iter()
            .map(|v| v.unwrap_or(f64::NAN))
            .collect();
        values.extend(self.building.iter().map(|b| match b {
            BuildingPredictor::Floor => f64::from(attrs.floor),
            BuildingPredictor::AgeClass => attrs.age_class.index() as f64,
            BuildingPredictor::BuildingType => attrs.building_type.map_or(f64::NAN, |t| t.index() as f64),
            BuildingPredictor::Households => f64::from(attrs.households),
        }));
        Ok(FeatureVector::new(values))
    }
}

/// One predictor row per survey record, with the measured radon as response.
pub fn join_predictors(records: &[SurveyRecord], stack: &RasterStack, layout: &FeatureLayout) -> Result<TrainingSet> {
    layout.check_stack(stack)?;
    let schema = layout.schema()?;
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let attrs = DwellingAttributes {
            floor: r.floor,
            age_class: r.harmonized_age()?,
            building_type: r.building_type,
            households: r.living_units,
        };
        rows.push(layout.vector(stack, r.x, r.y, &attrs)?);
    }
    let response = records.iter().map(|r| r.radon_bq_m3).collect();
    let locations = records.iter().map(|r| [r.x, r.y]).collect();
    TrainingSet::new(schema, rows, response, locations)
}
