//! Building stock, floor-level population model, basement occupancy and the
//! attribute harmonization and imputation rules applied to the stock.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ags::Ags;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingType {
    SingleTwoFamily,
    Townhouse,
    MultiFamily,
    Apartment,
    HighRise,
    TerraceHouse,
    FarmHouse,
    Office,
}

impl BuildingType {
    pub const ALL: [BuildingType; 8] = [
        BuildingType::SingleTwoFamily,
        BuildingType::Townhouse,
        BuildingType::MultiFamily,
        BuildingType::Apartment,
        BuildingType::HighRise,
        BuildingType::TerraceHouse,
        BuildingType::FarmHouse,
        BuildingType::Office,
    ];

    pub fn code(self) -> &'static str {
        match self {
            BuildingType::SingleTwoFamily => "single_two_family",
            BuildingType::Townhouse => "townhouse",
            BuildingType::MultiFamily => "multi_family",
            BuildingType::Apartment => "apartment",
            BuildingType::HighRise => "high_rise",
            BuildingType::TerraceHouse => "terrace_house",
            BuildingType::FarmHouse => "farm_house",
            BuildingType::Office => "office",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BuildingType::SingleTwoFamily => "Single- and two-family house",
            BuildingType::Townhouse => "Townhouse/row house and semi-detached house",
            BuildingType::MultiFamily => "Multi-family house",
            BuildingType::Apartment => "Apartment building",
            BuildingType::HighRise => "High-rise apartment building",
            BuildingType::TerraceHouse => "Terrace house",
            BuildingType::FarmHouse => "Farm house",
            BuildingType::Office => "Office building",
        }
    }

    /// Single/two-family houses and townhouses use their basements more.
    pub fn occupancy_group(self) -> OccupancyGroup {
        match self {
            BuildingType::SingleTwoFamily | BuildingType::Townhouse => OccupancyGroup::Houses,
            _ => OccupancyGroup::Apartments,
        }
    }

    pub fn index(self) -> usize {
        BuildingType::ALL.iter().position(|&t| t == self).unwrap()
    }
}

impl FromStr for BuildingType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        BuildingType::ALL
            .into_iter()
            .find(|t| t.code() == s || t.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownCategory {
                field: "building_type".into(),
                label: s.into(),
            })
    }
}

impl fmt::Display for BuildingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupancyGroup {
    Houses,
    Apartments,
}

/// Harmonized age-of-building class. `Unknown` is an explicit level, not a
/// missing value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeClass {
    #[serde(rename = "before_1945")]
    Before1945,
    #[serde(rename = "1945_1980")]
    From1945To1980,
    #[serde(rename = "1981_1995")]
    From1981To1995,
    #[serde(rename = "1996_2005")]
    From1996To2005,
    #[serde(rename = "2006_later")]
    From2006,
    #[serde(rename = "na")]
    Unknown,
}

impl AgeClass {
    pub const ALL: [AgeClass; 6] = [
        AgeClass::Before1945,
        AgeClass::From1945To1980,
        AgeClass::From1981To1995,
        AgeClass::From1996To2005,
        AgeClass::From2006,
        AgeClass::Unknown,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AgeClass::Before1945 => "Before 1945",
            AgeClass::From1945To1980 => "1945 – 1980",
            AgeClass::From1981To1995 => "1981 – 1995",
            AgeClass::From1996To2005 => "1996 – 2005",
            AgeClass::From2006 => "2006 and later",
            AgeClass::Unknown => "NA",
        }
    }

    /// Short machine name, identical to the serialized form.
    pub fn code(self) -> &'static str {
        match self {
            AgeClass::Before1945 => "before_1945",
            AgeClass::From1945To1980 => "1945_1980",
            AgeClass::From1981To1995 => "1981_1995",
            AgeClass::From1996To2005 => "1996_2005",
            AgeClass::From2006 => "2006_later",
            AgeClass::Unknown => "na",
        }
    }

    pub fn index(self) -> usize {
        AgeClass::ALL.iter().position(|&a| a == self).unwrap()
    }

    pub fn is_known(self) -> bool {
        self != AgeClass::Unknown
    }
}

impl fmt::Display for AgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Accepts a code, a harmonized label or any raw survey or stock label.
impl FromStr for AgeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match AgeClass::ALL.into_iter().find(|a| a.code() == s.trim()) {
            Some(a) => Ok(a),
            None => harmonize_age_class(AgeSource::Survey, Some(s)),
        }
    }
}

/// Where a raw age-class label comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeSource {
    Survey,
    Stock,
}

use AgeClass::*;

pub const SURVEY_AGE_CLASSES: [(&str, AgeClass); 10] = [
    ("Before 1919", Before1945),
    ("1919 – 1948", Before1945),
    ("1949 – 1978", From1945To1980),
    ("1979 – 1986", From1981To1995),
    ("1987 – 1990", From1981To1995),
    ("1991 – 1995", From1981To1995),
    ("1996 – 2000", From1996To2005),
    ("2001 – 2004", From1996To2005),
    ("2005 – 2008", From2006),
    ("2009 and later", From2006),
];

pub const STOCK_AGE_CLASSES: [(&str, AgeClass); 12] = [
    ("Before 1900", Before1945),
    ("1900 – 1945", Before1945),
    ("1946 – 1960", From1945To1980),
    ("1961 – 1970", From1945To1980),
    ("1971 – 1980", From1945To1980),
    ("1981 – 1985", From1981To1995),
    ("1986 – 1995", From1981To1995),
    ("1996 – 2000", From1996To2005),
    ("2001 – 2005", From1996To2005),
    ("2006 – 2010", From2006),
    ("2011 – 2015", From2006),
    ("2016 and later", From2006),
];

/// Dash variants and spacing around them do not matter; case does not either.
fn normalize_label(s: &str) -> String {
    let dashed: String = s
        .trim()
        .chars()
        .map(|c| if matches!(c, '–' | '—' | '‐' | '-') { '-' } else { c })
        .collect();
    dashed
        .split('-')
        .map(|part| part.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("-")
        .to_lowercase()
}

fn lookup(table: &[(&str, AgeClass)], key: &str) -> Option<AgeClass> {
    table
        .iter()
        .find(|(label, _)| normalize_label(label) == key)
        .map(|&(_, class)| class)
}

/// Maps a raw label onto the harmonized classes. Empty, absent and `NA`
/// labels map to [`AgeClass::Unknown`]; harmonized labels map to themselves.
pub fn harmonize_age_class(source: AgeSource, label: Option<&str>) -> Result<AgeClass> {
    let Some(label) = label else {
        return Ok(Unknown);
    };
    let key = normalize_label(label);
    if key.is_empty() || key == "na" {
        return Ok(Unknown);
    }
    let (own, other): (&[_], &[_]) = match source {
        AgeSource::Survey => (&SURVEY_AGE_CLASSES, &STOCK_AGE_CLASSES),
        AgeSource::Stock => (&STOCK_AGE_CLASSES, &SURVEY_AGE_CLASSES),
    };
    lookup(own, &key)
        .or_else(|| lookup(other, &key))
        .or_else(|| AgeClass::ALL.into_iter().find(|a| normalize_label(a.label()) == key))
        .ok_or_else(|| Error::UnknownCategory {
            field: "age_class".into(),
            label: label.into(),
        })
}

pub fn impute_building_type(households: u32) -> BuildingType {
    if households <= 2 {
        BuildingType::SingleTwoFamily
    } else {
        BuildingType::MultiFamily
    }
}

/// Basement occupancy relative to one above-ground floor, per building group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyModel {
    pub houses: f64,
    pub apartments: f64,
}

impl Default for OccupancyModel {
    fn default() -> Self {
        OccupancyModel { houses: 0.30, apartments: 0.05 }
    }
}

impl OccupancyModel {
    pub fn new(houses: f64, apartments: f64) -> Result<Self> {
        for f in [houses, apartments] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!("basement factor {f} outside [0, 1]")));
            }
        }
        Ok(OccupancyModel { houses, apartments })
    }

    pub fn basement_factor(&self, building_type: BuildingType) -> f64 {
        match building_type.occupancy_group() {
            OccupancyGroup::Houses => self.houses,
            OccupancyGroup::Apartments => self.apartments,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Base,
    S1,
    S2,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Base, Scenario::S1, Scenario::S2];

    pub fn occupancy(self) -> OccupancyModel {
        match self {
            Scenario::Base => OccupancyModel { houses: 0.30, apartments: 0.05 },
            Scenario::S1 => OccupancyModel { houses: 0.20, apartments: 0.02 },
            Scenario::S2 => OccupancyModel { houses: 0.50, apartments: 0.10 },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Base => "base",
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scenario `{s}`")))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of the residential building stock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub ags: Ags,
    pub households: u32,
    pub inhabitants: u32,
    /// Above-ground floor levels.
    pub floors: Option<u32>,
    pub age_class: AgeClass,
    pub building_type: Option<BuildingType>,
}

impl BuildingRecord {
    pub fn is_residential(&self) -> bool {
        self.inhabitants >= 1
    }
}

/// Expected inhabitants per floor level, basement (−1) first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorOccupancy {
    pub entries: Vec<(i32, f64)>,
}

impl FloorOccupancy {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn basement(&self) -> f64 {
        self.entries[0].1
    }

    pub fn per_floor(&self) -> f64 {
        self.entries.get(1).map_or(0.0, |e| e.1)
    }
}

/// Everyone is spread evenly over the above-ground floors; the basement holds
/// `f_b` times one floor's share: `per_floor = inhabitants / (floors + f_b)`.
pub fn floor_population(b: &BuildingRecord, occ: &OccupancyModel) -> Result<FloorOccupancy> {
    let floors = b
        .floors
        .filter(|&f| f >= 1)
        .ok_or_else(|| Error::InvalidInput(format!("building {}: floor count missing", b.id)))?;
    let building_type = b
        .building_type
        .ok_or_else(|| Error::InvalidInput(format!("building {}: building type missing", b.id)))?;
    if b.inhabitants == 0 {
        return Err(Error::InvalidInput(format!("building {}: no inhabitants", b.id)));
    }
    let fb = occ.basement_factor(building_type);
    let per_floor = f64::from(b.inhabitants) / (f64::from(floors) + fb);
    let mut entries = Vec::with_capacity(floors as usize + 1);
    entries.push((-1, fb * per_floor));
    entries.extend((0..floors as i32).map(|level| (level, per_floor)));
    Ok(FloorOccupancy { entries })
}

/// Fallback when a chunk has no rows with a known floor count.
pub const DEFAULT_FLOOR_COUNT: u32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputationSummary {
    pub full_model: usize,
    pub households_model: usize,
    pub fallback: usize,
}

fn round_floor_count(prediction: f64) -> u32 {
    // f64::round rounds half away from zero.
    prediction.round().max(1.0) as u32
}

struct LinearModel {
    coefficients: DVector<f64>,
}

impl LinearModel {
    fn fit(design: Vec<Vec<f64>>, target: Vec<f64>) -> Option<LinearModel> {
        let rows = design.len();
        let cols = design.first()?.len();
        let x = DMatrix::from_fn(rows, cols, |r, c| design[r][c]);
        let y = DVector::from_vec(target);
        let svd = x.svd(true, true);
        let eps = 1e-9 * svd.singular_values.max().max(1.0);
        svd.solve(&y, eps).ok().map(|coefficients| LinearModel { coefficients })
    }

    fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(self.coefficients.iter()).map(|(a, b)| a * b).sum()
    }
}

fn full_design(b: &BuildingRecord, building_type: BuildingType) -> Vec<f64> {
    let mut row = vec![0.0; 1 + BuildingType::ALL.len() + AgeClass::ALL.len() + 1];
    row[0] = 1.0;
    row[1 + building_type.index()] = 1.0;
    row[1 + BuildingType::ALL.len() + b.age_class.index()] = 1.0;
    let last = row.len() - 1;
    row[last] = f64::from(b.households);
    row
}

fn households_design(b: &BuildingRecord) -> Vec<f64> {
    vec![1.0, f64::from(b.households)]
}

/// Fills missing floor counts from a linear model fitted on the chunk's own
/// complete rows (type, age class and households as predictors). Rows
/// without a known type or age use a households-only model; with fewer than
/// two usable rows the chunk median (or [`DEFAULT_FLOOR_COUNT`]) is used.
pub fn impute_floor_count(chunk: &mut [BuildingRecord]) -> ImputationSummary {
    let mut summary = ImputationSummary::default();
    if chunk.iter().all(|b| b.floors.is_some()) {
        return summary;
    }
    let complete: Vec<&BuildingRecord> = chunk
        .iter()
        .filter(|b| b.floors.is_some() && b.building_type.is_some() && b.age_class.is_known())
        .collect();
    let with_floors: Vec<&BuildingRecord> = chunk.iter().filter(|b| b.floors.is_some()).collect();

    let target = |rows: &[&BuildingRecord]| -> Vec<f64> {
        rows.iter().map(|b| f64::from(b.floors.unwrap())).collect()
    };
    let full = (complete.len() >= 2)
        .then(|| {
            LinearModel::fit(
                complete.iter().map(|b| full_design(b, b.building_type.unwrap())).collect(),
                target(&complete),
            )
        })
        .flatten();
    let by_households = (with_floors.len() >= 2)
        .then(|| {
            LinearModel::fit(
                with_floors.iter().map(|b| households_design(b)).collect(),
                target(&with_floors),
            )
        })
        .flatten();
    let fallback = {
        let mut known: Vec<u32> = with_floors.iter().map(|b| b.floors.unwrap()).collect();
        known.sort_unstable();
        if known.is_empty() {
            DEFAULT_FLOOR_COUNT
        } else {
            known[(known.len() - 1) / 2]
        }
    };

    for b in chunk.iter_mut().filter(|b| b.floors.is_none()) {
        let floors = match (&full, b.building_type, b.age_class.is_known(), &by_households) {
            (Some(model), Some(t), true, _) => {
                summary.full_model += 1;
                round_floor_count(model.predict(&full_design(b, t)))
            }
            (_, _, _, Some(model)) => {
                summary.households_model += 1;
                round_floor_count(model.predict(&households_design(b)))
            }
            _ => {
                summary.fallback += 1;
                fallback
            }
        };
        b.floors = Some(floors);
    }
    summary
}
