//! Expected inhabitants per floor and the resulting Monte Carlo sample sizes
//! under the three basement occupancy scenarios.

use radonmap::ags::Ags;
use radonmap::mc::sample_size;
use radonmap::population::{floor_population, AgeClass, BuildingRecord, BuildingType, Scenario};

fn main() -> radonmap::Result<()> {
    let buildings = [
        ("house", 2, 2, BuildingType::SingleTwoFamily),
        ("apartments", 5, 25, BuildingType::Apartment),
    ];
    for sc in Scenario::ALL {
        println!("scenario {sc}");
        for (id, floors, inhabitants, t) in buildings {
            let b = BuildingRecord {
                id: id.into(),
                x: 0.0,
                y: 0.0,
                ags: "01001001".parse::<Ags>()?,
                households: 1,
                inhabitants,
                floors: Some(floors),
                age_class: AgeClass::Unknown,
                building_type: Some(t),
            };
            let occ = floor_population(&b, &sc.occupancy())?;
            let cells: Vec<String> = occ
                .entries
                .iter()
                .map(|&(floor, e)| Ok(format!("{floor}:{e:.2}/n={}", sample_size(e, 10.0)?)))
                .collect::<radonmap::Result<_>>()?;
            println!("  {id:<10} {}", cells.join("  "));
        }
    }
    Ok(())
}
