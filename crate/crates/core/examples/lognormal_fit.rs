//! Recover shifted-lognormal parameters from nine predicted quantiles and
//! compare the fitted exceedance probabilities with the generating ones.

use radonmap::dist::{fit_shifted_lognormal, ShiftedLognormal, DEFAULT_FIT_WEIGHTS};
use radonmap::qrf::DEFAULT_LEVELS;

fn main() -> radonmap::Result<()> {
    let truth = ShiftedLognormal::new(3.9, 0.85, 9.0)?;
    // jitter the quantiles a little, as a forest would
    let q: Vec<f64> = DEFAULT_LEVELS
        .iter()
        .enumerate()
        .map(|(i, &p)| truth.quantile(p) * (1.0 + 0.03 * ((i as f64) * 1.7).sin()))
        .collect();
    let fit = fit_shifted_lognormal(&DEFAULT_LEVELS, &q, truth.offset, &DEFAULT_FIT_WEIGHTS)?;
    println!("true   meanlog {:.3} sdlog {:.3} offset {:.1}", truth.meanlog, truth.sdlog, truth.offset);
    println!("fitted meanlog {:.3} sdlog {:.3} offset {:.1}", fit.dist.meanlog, fit.dist.sdlog, fit.dist.offset);
    for t in [100.0, 300.0, 600.0, 1000.0] {
        println!("P(> {t:>4}) true {:.4} fitted {:.4}", truth.exceedance(t), fit.dist.exceedance(t));
    }
    Ok(())
}
