//! Runs the full cross-validated horse race on a synthetic panel and prints
//! the ranking. Usage:
//!
//! ```text
//! cargo run --release --example synthetic_race -- [countries] [quarters] [strength]
//! ```

use std::time::Instant;

use ews_core::classify::MethodSpec;
use ews_core::ensemble::AggregateKind;
use ews_core::eval::Preference;
use ews_core::experiment::kfold_race;
use ews_core::panel::Horizon;
use ews_core::synth::synth_panel;

fn main() {
    let mut args = std::env::args().skip(1);
    let countries: usize = args.next().map_or(15, |a| a.parse().expect("countries"));
    let quarters: usize = args.next().map_or(120, |a| a.parse().expect("quarters"));
    let strength: f64 = args.next().map_or(1.5, |a| a.parse().expect("strength"));

    let (raw, events) = synth_panel(7, countries, quarters, countries, strength).expect("panel");
    let panel = raw
        .label_and_filter(&events, Horizon::benchmark(), 8)
        .expect("labeling");
    let usable = panel.usable_indices().len();
    println!(
        "panel: {} observations, {usable} usable, {} features",
        panel.observations.len(),
        panel.n_features()
    );

    let methods = MethodSpec::benchmark_race(0);
    let aggregates = AggregateKind::all();
    let started = Instant::now();
    let race = kfold_race(&methods, &aggregates, &panel, Preference::benchmark(), 10, 42)
        .expect("race");
    let elapsed = started.elapsed();

    let mut ranked: Vec<_> = race.methods.iter().collect();
    ranked.sort_by(|a, b| b.result.usefulness_relative.total_cmp(&a.result.usefulness_relative));
    println!("{:<18} {:>8} {:>8} {:>8}", "method", "Ur", "AUC", "tau");
    for m in ranked {
        println!(
            "{:<18} {:>8.4} {:>8.4} {:>8.4}",
            m.name, m.result.usefulness_relative, m.result.auc, m.result.tau
        );
    }
    for w in &race.warnings {
        println!("warning: {w}");
    }
    println!("elapsed: {:.2?}", elapsed);
}
