//! Synthetic survey, building stock and predictor rasters with a known
//! data-generating process, so conditional quantiles are available exactly.
//!
//! Radon in a dwelling is `offset + exp(mu + sigma * e)` with `e ~ N(0, 1)`,
//! where `offset` is the outdoor radon layer, `mu` depends on soil radon,
//! permeability, floor, age class and building type, and `sigma` grows with
//! soil radon.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::raster::{RasterGrid, RasterStack};
use super::records::{write_stock, write_survey, SurveyRecord};
use crate::ags::Ags;
use crate::dist::ShiftedLognormal;
use crate::error::{Error, Result};
use crate::population::{AgeClass, BuildingRecord, BuildingType, STOCK_AGE_CLASSES, SURVEY_AGE_CLASSES};
use crate::rng;

pub const SOIL_RADON: &str = "soil_radon";
pub const PERMEABILITY: &str = "permeability";
pub const TEMPERATURE: &str = "temperature";
pub const SLOPE: &str = "slope";
pub const PRECIPITATION: &str = "precipitation";
pub const OUTDOOR_RADON: &str = "outdoor_radon";

/// Environmental predictor layers, in schema order. The outdoor radon layer
/// is the distribution offset and not a predictor.
pub const ENVIRONMENTAL_LAYERS: [&str; 5] = [SOIL_RADON, PERMEABILITY, TEMPERATURE, SLOPE, PRECIPITATION];

/// Parameters of the generating process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruthSpec {
    /// Side of the square study area, meters.
    pub extent_m: f64,
    pub cellsize_m: f64,
    /// Median soil radon, kBq/m³, and log-spread of the soil field.
    pub soil_median: f64,
    pub soil_logsd: f64,
    /// Median radon excess over outdoor air at reference conditions, Bq/m³.
    pub base_excess: f64,
    pub soil_coef: f64,
    pub permeability_coef: f64,
    pub basement_effect: f64,
    pub upper_floor_effect: f64,
    /// `sigma = max(sigma_min, sigma_base + sigma_soil * z_soil) * noise_scale`
    pub sigma_base: f64,
    pub sigma_soil: f64,
    pub sigma_min: f64,
    pub noise_scale: f64,
    pub outdoor_min: f64,
    pub outdoor_max: f64,
    /// Survey sampling weight multiplier `exp(soil_bias * z_soil)`.
    pub soil_bias: f64,
    pub basement_share: f64,
    pub towns: usize,
    pub town_share: f64,
    pub missing_floors: f64,
    pub missing_type: f64,
    pub missing_age: f64,
}

impl Default for GroundTruthSpec {
    fn default() -> Self {
        GroundTruthSpec {
            extent_m: 400_000.0,
            cellsize_m: 2_000.0,
            soil_median: 40.0,
            soil_logsd: 0.7,
            base_excess: 40.0,
            soil_coef: 0.6,
            permeability_coef: 0.3,
            basement_effect: 0.55,
            upper_floor_effect: -0.12,
            sigma_base: 0.75,
            sigma_soil: 0.15,
            sigma_min: 0.2,
            noise_scale: 1.0,
            outdoor_min: 5.0,
            outdoor_max: 15.0,
            soil_bias: 0.0,
            basement_share: 0.15,
            towns: 60,
            town_share: 0.8,
            missing_floors: 0.05,
            missing_type: 0.01,
            missing_age: 0.03,
        }
    }
}

impl GroundTruthSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("extent_m", self.extent_m),
            ("cellsize_m", self.cellsize_m),
            ("soil_median", self.soil_median),
            ("soil_logsd", self.soil_logsd),
            ("base_excess", self.base_excess),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("synth.{name} must be > 0")));
            }
        }
        let fractions = [
            ("basement_share", self.basement_share),
            ("town_share", self.town_share),
            ("missing_floors", self.missing_floors),
            ("missing_type", self.missing_type),
            ("missing_age", self.missing_age),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("synth.{name} must be in [0, 1]")));
            }
        }
        if self.noise_scale < 0.0 || self.sigma_min <= 0.0 {
            return Err(Error::InvalidParameter("synth noise parameters must be non-negative".into()));
        }
        if !(0.0 <= self.outdoor_min && self.outdoor_min <= self.outdoor_max) {
            return Err(Error::InvalidParameter("synth outdoor range invalid".into()));
        }
        if self.extent_m / self.cellsize_m < 1.0 {
            return Err(Error::InvalidParameter("synth extent smaller than one cell".into()));
        }
        if self.towns == 0 && self.town_share > 0.0 {
            return Err(Error::InvalidParameter("synth.town_share > 0 needs towns".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSizes {
    pub survey: usize,
    pub buildings: usize,
}

impl Default for SyntheticSizes {
    fn default() -> Self {
        SyntheticSizes { survey: 3000, buildings: 20_000 }
    }
}

/// Lognormal parameters of the excess over outdoor radon, plus the offset.
/// `sdlog` may be zero when the spec has no noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub meanlog: f64,
    pub sdlog: f64,
    pub offset: f64,
}

impl TruthParams {
    pub fn quantile(&self, p: f64) -> f64 {
        self.offset + (self.meanlog + self.sdlog * crate::dist::normal_quantile(p)).exp()
    }

    pub fn median(&self) -> f64 {
        self.offset + self.meanlog.exp()
    }

    pub fn distribution(&self) -> Result<ShiftedLognormal> {
        ShiftedLognormal::new(self.meanlog, self.sdlog, self.offset)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        self.offset + (self.meanlog + self.sdlog * e).exp()
    }
}

/// The generating process evaluated on the generated rasters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: GroundTruthSpec,
    pub seed: u64,
}

impl GroundTruth {
    fn age_effect(age: AgeClass) -> f64 {
        match age {
            AgeClass::Before1945 => 0.15,
            AgeClass::From1945To1980 => 0.05,
            AgeClass::From1981To1995 => 0.0,
            AgeClass::From1996To2005 => -0.10,
            AgeClass::From2006 => -0.20,
            AgeClass::Unknown => 0.0,
        }
    }

    fn type_effect(t: Option<BuildingType>) -> f64 {
        match t {
            Some(BuildingType::SingleTwoFamily) | Some(BuildingType::FarmHouse) => 0.10,
            Some(BuildingType::Townhouse) | Some(BuildingType::TerraceHouse) => 0.05,
            Some(BuildingType::MultiFamily) => -0.05,
            Some(BuildingType::Apartment) | Some(BuildingType::Office) => -0.10,
            Some(BuildingType::HighRise) => -0.20,
            None => 0.0,
        }
    }

    fn floor_effect(&self, floor: i32) -> f64 {
        match floor {
            f if f < 0 => self.spec.basement_effect,
            f => self.spec.upper_floor_effect * f64::from(f.min(3)),
        }
    }

    /// Conditional distribution from raster values at the dwelling.
    pub fn params_from(
        &self,
        soil: f64,
        permeability: f64,
        outdoor: f64,
        floor: i32,
        age: AgeClass,
        building_type: Option<BuildingType>,
    ) -> TruthParams {
        let s = &self.spec;
        let z_soil = (soil / s.soil_median).ln() / s.soil_logsd;
        let meanlog = s.base_excess.ln()
            + s.soil_coef * (soil / s.soil_median).ln()
            + s.permeability_coef * permeability
            + self.floor_effect(floor)
            + Self::age_effect(age)
            + Self::type_effect(building_type);
        let sdlog = (s.sigma_base + s.sigma_soil * z_soil).max(s.sigma_min) * s.noise_scale;
        TruthParams { meanlog, sdlog, offset: outdoor }
    }

    /// Conditional distribution at `(x, y)`; `None` off-grid.
    pub fn params_at(
        &self,
        stack: &RasterStack,
        x: f64,
        y: f64,
        floor: i32,
        age: AgeClass,
        building_type: Option<BuildingType>,
    ) -> Option<TruthParams> {
        let get = |name: &str| stack.get(name).and_then(|g| g.lookup(x, y));
        Some(self.params_from(get(SOIL_RADON)?, get(PERMEABILITY)?, get(OUTDOOR_RADON)?, floor, age, building_type))
    }
}

/// Everything `generate_synthetic` produces.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub survey: Vec<SurveyRecord>,
    /// Stock as it would be delivered: some floors, types and ages missing.
    pub stock: Vec<BuildingRecord>,
    /// Raw stock-vocabulary age labels, one per stock row (empty = missing).
    pub stock_age_labels: Vec<String>,
    /// Complete floor counts and types before masking.
    pub true_floors: Vec<u32>,
    pub true_types: Vec<BuildingType>,
    pub rasters: RasterStack,
    pub truth: GroundTruth,
}

impl SyntheticData {
    /// Writes `survey.csv`, `stock.csv`, `rasters/<layer>.asc` and `truth.json`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        let raster_dir = dir.join("rasters");
        fs::create_dir_all(&raster_dir).map_err(|e| Error::io(&raster_dir, e))?;
        let create = |name: &str| {
            let path = dir.join(name);
            fs::File::create(&path).map_err(|e| Error::io(&path, e))
        };
        write_survey(&self.survey, create("survey.csv")?)?;
        write_stock(&self.stock, Some(&self.stock_age_labels), create("stock.csv")?)?;
        for (name, grid) in self.rasters.layers() {
            grid.write(&raster_dir.join(format!("{name}.asc")))?;
        }
        serde_json::to_writer_pretty(create("truth.json")?, &self.truth)?;
        Ok(())
    }
}

/// A smooth random field with roughly standard-normal marginals: a sum of
/// cosine waves with random direction, wavelength and phase.
struct Field {
    waves: Vec<(f64, f64, f64)>,
    norm: f64,
}

impl Field {
    const WAVES: usize = 16;

    fn new<R: Rng>(rng: &mut R) -> Field {
        let waves = (0..Self::WAVES)
            .map(|_| {
                let angle = rng.random::<f64>() * 2.0 * PI;
                let wavelength = 40_000.0 * (250.0f64 / 40.0).powf(rng.random::<f64>());
                let k = 2.0 * PI / wavelength;
                (k * angle.cos(), k * angle.sin(), rng.random::<f64>() * 2.0 * PI)
            })
            .collect();
        Field { waves, norm: (2.0 / Self::WAVES as f64).sqrt() }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.norm * self.waves.iter().map(|(kx, ky, ph)| (kx * x + ky * y + ph).cos()).sum::<f64>()
    }
}

fn rasters(spec: &GroundTruthSpec, seed: u64) -> Result<RasterStack> {
    let n = (spec.extent_m / spec.cellsize_m).round() as usize;
    let cs = spec.cellsize_m;
    let mut layers = Vec::new();
    let transforms: [(&str, Box<dyn Fn(f64) -> f64>); 6] = [
        (SOIL_RADON, Box::new(|z| spec.soil_median * (spec.soil_logsd * z).exp())),
        (PERMEABILITY, Box::new(|z| z)),
        (TEMPERATURE, Box::new(|z| 9.0 + 1.5 * z)),
        (SLOPE, Box::new(|z| 3.0 * (0.5 * z).exp())),
        (PRECIPITATION, Box::new(|z| 800.0 + 150.0 * z)),
        (
            OUTDOOR_RADON,
            Box::new(|z| {
                let mid = 0.5 * (spec.outdoor_min + spec.outdoor_max);
                let half = 0.5 * (spec.outdoor_max - spec.outdoor_min);
                (mid + 0.6 * half * z).clamp(spec.outdoor_min, spec.outdoor_max)
            }),
        ),
    ];
    for (i, (name, f)) in transforms.iter().enumerate() {
        let field = Field::new(&mut rng::stream(seed, &[1, i as u64]));
        layers.push((name.to_string(), RasterGrid::from_fn(n, n, 0.0, 0.0, cs, |x, y| f(field.at(x, y)))?));
    }
    RasterStack::new(layers)
}

const TYPE_WEIGHTS: [(BuildingType, f64); 8] = [
    (BuildingType::SingleTwoFamily, 0.55),
    (BuildingType::Townhouse, 0.15),
    (BuildingType::MultiFamily, 0.17),
    (BuildingType::Apartment, 0.08),
    (BuildingType::HighRise, 0.02),
    (BuildingType::TerraceHouse, 0.01),
    (BuildingType::FarmHouse, 0.015),
    (BuildingType::Office, 0.005),
];

fn households_and_floors<R: Rng>(t: BuildingType, rng: &mut R) -> (u32, u32) {
    let (h, f) = match t {
        BuildingType::SingleTwoFamily | BuildingType::TerraceHouse | BuildingType::FarmHouse => ((1, 2), (1, 2)),
        BuildingType::Townhouse => ((1, 2), (2, 3)),
        BuildingType::MultiFamily => ((3, 6), (2, 4)),
        BuildingType::Apartment => ((6, 20), (4, 6)),
        BuildingType::HighRise => ((20, 60), (8, 15)),
        BuildingType::Office => ((1, 4), (3, 5)),
    };
    (rng.random_range(h.0..=h.1), rng.random_range(f.0..=f.1))
}

/// AGS from the position: 2 x 2 states, each 3 x 3 districts, each 4 x 4
/// municipalities.
fn ags_at(spec: &GroundTruthSpec, x: f64, y: f64) -> Ags {
    let cell = |v: f64, parts: usize| ((v / spec.extent_m * parts as f64).floor() as usize).min(parts - 1);
    let (mx, my) = (cell(x, 24), cell(y, 24));
    let (sx, sy) = (mx / 12, my / 12);
    let (dx, dy) = ((mx % 12) / 4, (my % 12) / 4);
    let (ux, uy) = (mx % 4, my % 4);
    let state = sy * 2 + sx + 1;
    let district = dy * 3 + dx + 1;
    let muni = uy * 4 + ux + 1;
    format!("{state:02}{district:03}{muni:03}").parse().expect("valid AGS")
}

fn raw_label(table: &[(&'static str, AgeClass)], age: AgeClass, pick: usize) -> Option<&'static str> {
    let labels: Vec<&str> = table.iter().filter(|(_, a)| *a == age).map(|(l, _)| *l).collect();
    (!labels.is_empty()).then(|| labels[pick % labels.len()])
}

/// Deterministic synthetic dataset for a seed.
pub fn generate_synthetic(spec: &GroundTruthSpec, sizes: SyntheticSizes, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    if sizes.buildings == 0 && sizes.survey > 0 {
        return Err(Error::InvalidParameter("survey needs at least one building".into()));
    }
    let stack = rasters(spec, seed)?;
    let truth = GroundTruth { spec: spec.clone(), seed };
    let soil = stack.get(SOIL_RADON).expect("generated");
    let z_soil = |x: f64, y: f64| soil.lookup(x, y).map_or(0.0, |s| (s / spec.soil_median).ln() / spec.soil_logsd);

    // buildings
    let mut rng = rng::stream(seed, &[2]);
    let extent = spec.extent_m;
    let towns: Vec<(f64, f64, f64)> = (0..spec.towns)
        .map(|_| {
            (
                rng.random_range(0.0..extent),
                rng.random_range(0.0..extent),
                rng.random_range(3_000.0..8_000.0),
            )
        })
        .collect();
    let type_dist = WeightedIndex::new(TYPE_WEIGHTS.iter().map(|t| t.1)).expect("positive weights");
    let mut stock = Vec::with_capacity(sizes.buildings);
    let mut labels = Vec::with_capacity(sizes.buildings);
    let mut true_floors = Vec::with_capacity(sizes.buildings);
    let mut true_types = Vec::with_capacity(sizes.buildings);
    for i in 0..sizes.buildings {
        let (x, y) = loop {
            let (x, y) = if rng.random::<f64>() < spec.town_share {
                let (cx, cy, r) = towns[rng.random_range(0..towns.len())];
                let n = Normal::new(0.0, r).expect("finite");
                (cx + n.sample(&mut rng), cy + n.sample(&mut rng))
            } else {
                (rng.random_range(0.0..extent), rng.random_range(0.0..extent))
            };
            if (0.0..extent).contains(&x) && (0.0..extent).contains(&y) {
                break (x.round(), y.round());
            }
        };
        let t = TYPE_WEIGHTS[type_dist.sample(&mut rng)].0;
        let (households, floors) = households_and_floors(t, &mut rng);
        let inhabitants: u32 = (0..households).map(|_| rng.random_range(1..=4)).sum();
        let age = AgeClass::ALL[rng.random_range(0..5)];
        let pick = rng.random_range(0..8);
        let age_missing = rng.random::<f64>() < spec.missing_age;
        let floors_missing = rng.random::<f64>() < spec.missing_floors;
        let type_missing = rng.random::<f64>() < spec.missing_type;
        let age_class = if age_missing { AgeClass::Unknown } else { age };
        labels.push(raw_label(&STOCK_AGE_CLASSES, age_class, pick).unwrap_or("").to_string());
        true_floors.push(floors);
        true_types.push(t);
        stock.push(BuildingRecord {
            id: format!("B{i:07}"),
            x,
            y,
            ags: ags_at(spec, x, y),
            households,
            inhabitants,
            floors: (!floors_missing).then_some(floors),
            age_class,
            building_type: (!type_missing).then_some(t),
        });
    }

    // survey: dwellings drawn proportional to inhabitants, optionally tilted
    // towards high soil radon
    let mut rng = rng::stream(seed, &[3]);
    let mut survey = Vec::with_capacity(sizes.survey);
    if sizes.survey > 0 {
        let weights: Vec<f64> = stock
            .iter()
            .map(|b| f64::from(b.inhabitants) * (spec.soil_bias * z_soil(b.x, b.y)).exp())
            .collect();
        let pick_building = WeightedIndex::new(&weights).map_err(|e| Error::InvalidInput(e.to_string()))?;
        for i in 0..sizes.survey {
            let k = pick_building.sample(&mut rng);
            let b = &stock[k];
            let floors = true_floors[k];
            let floor = if rng.random::<f64>() < spec.basement_share {
                -1
            } else {
                // ground floor counts double
                let slot = rng.random_range(0..=floors);
                slot.saturating_sub(1) as i32
            };
            let building_type = (rng.random::<f64>() >= spec.missing_type).then_some(true_types[k]);
            let params = truth
                .params_at(&stack, b.x, b.y, floor, b.age_class, building_type)
                .expect("buildings lie on the grid");
            let radon = params.draw(&mut rng);
            let pick = rng.random_range(0..8);
            survey.push(SurveyRecord {
                id: format!("S{i:06}"),
                x: b.x,
                y: b.y,
                radon_bq_m3: radon,
                floor,
                age_class: raw_label(&SURVEY_AGE_CLASSES, b.age_class, pick).map(str::to_string),
                building_type,
                living_units: b.households,
                duration_days: rng.random_range(340.0..390.0f64).round(),
            });
        }
    }

    Ok(SyntheticData {
        survey,
        stock,
        stock_age_labels: labels,
        true_floors,
        true_types,
        rasters: stack,
        truth,
    })
}
