//! Scratch calibration runs; not part of the project.

use std::time::Instant;

use ews_core::classify::MethodSpec;
use ews_core::ensemble::AggregateKind;
use ews_core::eval::Preference;
use ews_core::experiment::{kfold_race, RecursiveConfig};
use ews_core::panel::Horizon;
use ews_core::synth::synth_panel;
use ews_core::uncertainty::{bootstrap_recursive, significant_only_evaluation, OutputBand};

fn table8(seeds: u64, countries: usize, quarters: usize, strength: f64, reps: usize, mu: f64) {
    let pref = Preference::new(mu).unwrap();
    let methods = vec![
        MethodSpec::Logit,
        MethodSpec::Lda,
        MethodSpec::Knn { k: 2, distance: 1.0 },
    ];
    let aggs = [AggregateKind::WeightedMean];
    let mut wins = vec![0usize; 4];
    let mut names: Vec<String> = Vec::new();
    for seed in 0..seeds {
        let started = Instant::now();
        let (raw, events) =
            synth_panel(seed, countries, quarters, 2 * countries, strength).unwrap();
        let lagged = raw.apply_publication_lags().unwrap();
        let panel = lagged.label_and_filter(&events, Horizon::benchmark(), 8).unwrap();
        let first = events.iter().map(|e| e.start).min().unwrap();
        let last = events.iter().map(|e| e.start).max().unwrap();
        let start = last.offset(-28).max(first.offset(12));
        let cfg = RecursiveConfig { start, qda_start: start.offset(4), end: None };
        let unc = bootstrap_recursive(&methods, &aggs, &panel, pref, &cfg, reps, 0.1, seed)
            .unwrap();
        names = unc.names.clone();
        print!("seed {seed}:");
        for i in 0..unc.names.len() {
            let full = unc.robust[i].as_ref().map(|r| r.usefulness_relative);
            let bands = unc.bands[i].as_ref().unwrap();
            let mut kept: Vec<OutputBand> = Vec::new();
            let mut labels: Vec<bool> = Vec::new();
            for (t, b) in unc.targets.iter().zip(&bands.per_target) {
                if !t.usable {
                    continue;
                }
                if let Some(b) = b {
                    kept.push(b.clone());
                    labels.push(t.label);
                }
            }
            let n_sig = kept.iter().filter(|b| b.flag.is_significant()).count();
            let pos_sig = kept
                .iter()
                .zip(&labels)
                .filter(|(b, &l)| b.flag.is_significant() && l)
                .count();
            let sig = significant_only_evaluation(&kept, &labels, pref);
            let detail = sig
                .as_ref()
                .map(|e| format!("{:?}", e.counts))
                .unwrap_or_else(|e| e.to_string());
            let s = sig.map(|e| e.usefulness_relative).unwrap_or(f64::NAN);
            let f = full.unwrap_or(f64::NAN);
            if s >= f {
                wins[i] += 1;
            }
            print!(
                "  {} {f:.3}->{s:.3} [kept {n_sig}/{} pos {pos_sig}/{} | {detail}]",
                unc.names[i],
                kept.len(),
                labels.iter().filter(|&&l| l).count()
            );
        }
        println!("  ({:.1?})", started.elapsed());
    }
    for (i, n) in names.iter().enumerate() {
        println!("{n}: {}/{seeds}", wins[i]);
    }
}

fn scale(countries: usize, quarters: usize) {
    let (raw, events) = synth_panel(5, countries, quarters, 2 * countries, 1.5).unwrap();
    let panel = raw.label_and_filter(&events, Horizon::benchmark(), 8).unwrap();
    println!("usable: {}", panel.usable_indices().len());
    let methods = MethodSpec::benchmark_race(0);
    let aggs = [AggregateKind::BestOf, AggregateKind::Mean, AggregateKind::WeightedMean];
    let started = Instant::now();
    let race = kfold_race(&methods, &aggs, &panel, Preference::benchmark(), 10, 42).unwrap();
    println!("one race: {:.2?}  (methods {})", started.elapsed(), race.methods.len());
}

fn permethod(countries: usize, quarters: usize) {
    let (raw, events) = synth_panel(5, countries, quarters, 2 * countries, 1.5).unwrap();
    let panel = raw.label_and_filter(&events, Horizon::benchmark(), 8).unwrap();
    for spec in MethodSpec::benchmark_race(0) {
        let started = Instant::now();
        kfold_race(
            std::slice::from_ref(&spec),
            &[],
            &panel,
            Preference::benchmark(),
            10,
            42,
        )
        .unwrap();
        println!("{:<18} {:.2?}", spec.name(), started.elapsed());
    }
}

fn bands_debug(countries: usize, quarters: usize, strength: f64, reps: usize, mu: f64) {
    let pref = Preference::new(mu).unwrap();
    let methods = vec![MethodSpec::Knn { k: 2, distance: 1.0 }];
    let (raw, events) = synth_panel(0, countries, quarters, 2 * countries, strength).unwrap();
    let lagged = raw.apply_publication_lags().unwrap();
    let panel = lagged.label_and_filter(&events, Horizon::benchmark(), 8).unwrap();
    let first = events.iter().map(|e| e.start).min().unwrap();
    let last = events.iter().map(|e| e.start).max().unwrap();
    let start = last.offset(-28).max(first.offset(12));
    let cfg = RecursiveConfig { start, qda_start: start.offset(4), end: None };
    let unc = bootstrap_recursive(&methods, &[], &panel, pref, &cfg, reps, 0.1, 0).unwrap();
    let bands = unc.bands[0].as_ref().unwrap();
    let mut shown = 0;
    for (t, b) in unc.targets.iter().zip(&bands.per_target) {
        if !t.usable {
            continue;
        }
        let Some(b) = b else { continue };
        if shown < 40 {
            println!(
                "{} {} label {} | p {:.3} se {:.3} t* {:.2} | tau {:.3} se {:.3} t* {:.2} | {:?}",
                t.quarter,
                t.country,
                t.label as u8,
                b.prob.mean,
                b.prob.se,
                b.prob.t_star,
                b.threshold.mean,
                b.threshold.se,
                b.threshold.t_star,
                b.flag
            );
            shown += 1;
        }
    }
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_default();
    if mode == "scale" {
        scale(17, 120);
    } else if mode == "permethod" {
        permethod(17, 120);
    } else if mode == "debug" {
        let strength: f64 = std::env::args().nth(2).map_or(2.0, |a| a.parse().unwrap());
        let mu: f64 = std::env::args().nth(3).map_or(0.8, |a| a.parse().unwrap());
        bands_debug(12, 120, strength, 20, mu);
    } else {
        let seeds: u64 = std::env::args().nth(2).map_or(6, |a| a.parse().unwrap());
        let strength: f64 = std::env::args().nth(3).map_or(1.2, |a| a.parse().unwrap());
        let reps: usize = std::env::args().nth(4).map_or(20, |a| a.parse().unwrap());
        let countries: usize = std::env::args().nth(5).map_or(8, |a| a.parse().unwrap());
        let quarters: usize = std::env::args().nth(6).map_or(100, |a| a.parse().unwrap());
        let mu: f64 = std::env::args().nth(7).map_or(0.8, |a| a.parse().unwrap());
        table8(seeds, countries, quarters, strength, reps, mu);
    }
}
