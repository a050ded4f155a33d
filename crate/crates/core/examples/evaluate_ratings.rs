//! Reproduces the descriptive tables and sign tests on the embedded ratings.

use knowloop::eval::{embedded_ratings, emit_report, evaluate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records = embedded_ratings();
    let report = emit_report(&evaluate(&records)?);
    print!("{}", report.text);
    Ok(())
}
