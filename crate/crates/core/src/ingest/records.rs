//! CSV readers and writers for survey measurements and the building stock.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{harmonize_age_class, AgeClass, AgeSource, BuildingRecord, BuildingType};

pub const SURVEY_HEADER: [&str; 9] = [
    "id",
    "x",
    "y",
    "radon_bq_m3",
    "floor",
    "age_class",
    "building_type",
    "living_units",
    "duration_days",
];

pub const STOCK_HEADER: [&str; 9] = [
    "id",
    "x",
    "y",
    "ags",
    "households",
    "inhabitants",
    "floors",
    "age_class",
    "type",
];

/// One indoor radon measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub radon_bq_m3: f64,
    /// −1 basement, 0 ground floor, 1.. upper floors.
    pub floor: i32,
    /// Raw questionnaire label; harmonized when joined.
    pub age_class: Option<String>,
    pub building_type: Option<BuildingType>,
    pub living_units: u32,
    pub duration_days: f64,
}

impl SurveyRecord {
    /// Target duration of one year, ±10 %.
    pub fn is_valid_year(&self) -> bool {
        (328.5..=401.5).contains(&self.duration_days)
    }

    pub fn harmonized_age(&self) -> Result<AgeClass> {
        harmonize_age_class(AgeSource::Survey, self.age_class.as_deref())
    }

    fn validate(&self) -> Result<()> {
        if !(self.radon_bq_m3 >= 0.0 && self.radon_bq_m3.is_finite()) {
            return Err(Error::InvalidInput(format!("survey {}: radon must be >= 0", self.id)));
        }
        if self.floor < -1 {
            return Err(Error::InvalidInput(format!("survey {}: floor {} < -1", self.id, self.floor)));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawSurvey {
    id: String,
    x: f64,
    y: f64,
    radon_bq_m3: f64,
    floor: i32,
    age_class: Option<String>,
    building_type: Option<String>,
    living_units: u32,
    duration_days: f64,
}

fn blank_to_none(s: Option<String>) -> Option<String> {
    s.filter(|v| !v.trim().is_empty())
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str], path: &Path) -> Result<()> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::parse(
            path,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

pub fn read_survey_from<R: Read>(reader: R, path: &Path) -> Result<Vec<SurveyRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &SURVEY_HEADER, path)?;
    let mut out = Vec::new();
    for (line, raw) in rdr.deserialize::<RawSurvey>().enumerate() {
        let raw = raw.map_err(|e| Error::parse(path, format!("row {}: {e}", line + 2)))?;
        let building_type = blank_to_none(raw.building_type).map(|t| t.parse()).transpose()?;
        let rec = SurveyRecord {
            id: raw.id,
            x: raw.x,
            y: raw.y,
            radon_bq_m3: raw.radon_bq_m3,
            floor: raw.floor,
            age_class: blank_to_none(raw.age_class),
            building_type,
            living_units: raw.living_units,
            duration_days: raw.duration_days,
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_survey(path: &Path) -> Result<Vec<SurveyRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_survey_from(file, path)
}

pub fn write_survey<W: Write>(records: &[SurveyRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SURVEY_HEADER)?;
    for r in records {
        wtr.write_record([
            r.id.clone(),
            r.x.to_string(),
            r.y.to_string(),
            r.radon_bq_m3.to_string(),
            r.floor.to_string(),
            r.age_class.clone().unwrap_or_default(),
            r.building_type.map(|t| t.code().to_string()).unwrap_or_default(),
            r.living_units.to_string(),
            r.duration_days.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<survey>", e))
}

#[derive(Deserialize)]
struct RawBuilding {
    id: String,
    x: f64,
    y: f64,
    ags: String,
    households: u32,
    inhabitants: u32,
    floors: Option<u32>,
    age_class: Option<String>,
    #[serde(rename = "type")]
    building_type: Option<String>,
}

/// Reads the stock; age classes are harmonized from the stock vocabulary.
/// Buildings without inhabitants are kept; callers filter residential rows.
pub fn read_stock_from<R: Read>(reader: R, path: &Path) -> Result<Vec<BuildingRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &STOCK_HEADER, path)?;
    let mut out = Vec::new();
    for (line, raw) in rdr.deserialize::<RawBuilding>().enumerate() {
        let row = line + 2;
        let raw = raw.map_err(|e| Error::parse(path, format!("row {row}: {e}")))?;
        let ctx = |e: Error| Error::parse(path, format!("row {row}: {e}"));
        out.push(BuildingRecord {
            ags: raw.ags.parse().map_err(ctx)?,
            age_class: harmonize_age_class(AgeSource::Stock, blank_to_none(raw.age_class).as_deref())
                .map_err(ctx)?,
            building_type: blank_to_none(raw.building_type)
                .map(|t| t.parse())
                .transpose()
                .map_err(ctx)?,
            id: raw.id,
            x: raw.x,
            y: raw.y,
            households: raw.households,
            inhabitants: raw.inhabitants,
            floors: raw.floors,
        });
    }
    Ok(out)
}

pub fn read_stock(path: &Path) -> Result<Vec<BuildingRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_stock_from(file, path)
}

/// Writes the stock with harmonized age labels (or a caller-supplied raw
/// label per row).
pub fn write_stock<W: Write>(records: &[BuildingRecord], raw_age: Option<&[String]>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(STOCK_HEADER)?;
    for (i, b) in records.iter().enumerate() {
        let age = match raw_age {
            Some(labels) => labels[i].clone(),
            None if b.age_class.is_known() => b.age_class.label().to_string(),
            None => String::new(),
        };
        wtr.write_record([
            b.id.clone(),
            b.x.to_string(),
            b.y.to_string(),
            b.ags.to_string(),
            b.households.to_string(),
            b.inhabitants.to_string(),
            b.floors.map(|f| f.to_string()).unwrap_or_default(),
            age,
            b.building_type.map(|t| t.code().to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<stock>", e))
}
