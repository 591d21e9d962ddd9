//! Write a synthetic survey, stock and raster bundle, read it back and
//! summarize it the way `radonmap diagnose` does.

use radonmap::ingest::{self, generate_synthetic, read_stock, read_survey, GroundTruthSpec, SyntheticSizes};
use radonmap::population::{harmonize_age_class, AgeSource};

fn main() -> radonmap::Result<()> {
    let dir = std::env::temp_dir().join("radonmap-bundle-example");
    let data = generate_synthetic(&GroundTruthSpec::default(), SyntheticSizes { survey: 2000, buildings: 5000 }, 6)?;
    data.write_bundle(&dir)?;
    println!("bundle written to {}", dir.display());

    let survey = read_survey(&dir.join("survey.csv"))?;
    let stock = read_stock(&dir.join("stock.csv"))?;
    let values: Vec<f64> = survey.iter().map(|r| r.radon_bq_m3).collect();
    let d = ingest::descriptive_stats(&values, &[100.0, 300.0], &[0.5, 0.95])?;
    println!("survey n {} AM {:.1} GM {:.1} GSD {:.2}", d.n, d.am, d.gm, d.gsd);
    for (t, p) in &d.exceedance {
        println!("  share above {t}: {:.1}%", 100.0 * p);
    }

    let shares = ingest::representativeness_floor(&survey, &stock)?;
    println!("floor  survey  population");
    for (floor, s) in &shares.sample {
        let pop = shares.population.iter().find(|e| e.0 == *floor).map_or(0.0, |e| e.1);
        println!("{floor:>5}  {:>5.1}%  {:>5.1}%", 100.0 * s, 100.0 * pop);
    }

    for label in ["1919 – 1948", "1961 - 1970", "2016 and later", "NA"] {
        let class = harmonize_age_class(AgeSource::Stock, Some(label))?;
        println!("age label {label:?} -> {}", class.label());
    }
    Ok(())
}
