//! Writes a synthetic survey-like CSV to stdout.
//!
//! cargo run --example make_synthetic -- [seed] > survey.csv

use mdpipe::dataset::{synthetic_survey, write_csv};
use mdpipe::numerics::RandomStream;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let ds = synthetic_survey(52, 97, 12, 4, 0.1, &mut RandomStream::new(seed)).expect("generator");
    write_csv(&ds, std::io::stdout().lock(), "NA").expect("write");
}
