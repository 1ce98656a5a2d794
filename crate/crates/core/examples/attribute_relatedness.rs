//! Attribute relatedness from majority-vote agreement, printed in order of
//! row total.
//!
//! ```text
//! cargo run --release --example attribute_relatedness -- [bias]
//! ```

use yesrate::relatedness::{dataset_relatedness, sort_by_total, write_csv, DEFAULT_BIAS};
use yesrate::world::{generate, WorldConfig};

fn main() -> yesrate::Result<()> {
    let bias = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_BIAS);
    let world = generate(&WorldConfig {
        locations: 20_000,
        ..WorldConfig::default()
    })?;
    let data = &world.data;
    let m = dataset_relatedness(data, bias)?;
    let order = sort_by_total(&m);

    let ids = data.attributes();
    let (lo, hi) = (order[0], order[order.len() - 1]);
    println!(
        "least related overall: {} (row total {:+.5})",
        ids[lo],
        m.row_total(lo)
    );
    println!(
        "most related overall:  {} (row total {:+.5})",
        ids[hi],
        m.row_total(hi)
    );

    let mut best = (0, 1);
    for i in 0..m.size() {
        for j in i + 1..m.size() {
            if m.get(i, j).abs() > m.get(best.0, best.1).abs() {
                best = (i, j);
            }
        }
    }
    println!(
        "strongest pair: {} / {}: {:+.5}",
        ids[best.0],
        ids[best.1],
        m.get(best.0, best.1)
    );

    write_csv(std::io::stdout().lock(), &m, ids, &order)
}
