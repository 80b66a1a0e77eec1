//! Shared fixtures and brute-force oracles for integration tests.
#![allow(dead_code)]

use marginbn::catalog::{CatalogMode, ParentSetCatalog, Structure};
use marginbn::coefficients::{CoefficientBank, ScoreKind};
use marginbn::data::Dataset;
use marginbn::milp::MilpModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random samples, redrawn until every class value occurs.
pub fn random_dataset(rng: &mut ChaCha8Rng, cards: &[usize], m: usize) -> Dataset {
    loop {
        let rows: Vec<Vec<u32>> = (0..m)
            .map(|_| cards.iter().map(|&c| rng.random_range(0..c as u32)).collect())
            .collect();
        if let Ok(ds) = Dataset::new(cards.to_vec(), rows) {
            return ds;
        }
    }
}

/// Samples with features noisily copied from the class or an earlier
/// feature, so that non-trivial structures score well.
pub fn correlated_dataset(rng: &mut ChaCha8Rng, cards: &[usize], m: usize, noise: f64) -> Dataset {
    loop {
        let rows: Vec<Vec<u32>> = (0..m)
            .map(|_| {
                let mut x: Vec<u32> = Vec::with_capacity(cards.len());
                for (i, &c) in cards.iter().enumerate() {
                    let v = if i > 0 && rng.random::<f64>() > noise {
                        let src = rng.random_range(0..i);
                        x[src] % c as u32
                    } else {
                        rng.random_range(0..c as u32)
                    };
                    x.push(v);
                }
                x
            })
            .collect();
        if let Ok(ds) = Dataset::new(cards.to_vec(), rows) {
            return ds;
        }
    }
}

pub fn catalog_for(kind: ScoreKind, n: usize, k: usize) -> ParentSetCatalog {
    let mode = if kind == ScoreKind::Mdl {
        CatalogMode::Generative
    } else {
        CatalogMode::Margin
    };
    ParentSetCatalog::enumerate(n, k, mode).unwrap()
}

pub fn build_model(kind: ScoreKind, ds: &Dataset, k: usize, gamma: f64) -> MilpModel {
    let cat = catalog_for(kind, ds.num_vars(), k);
    let bank = CoefficientBank::build(kind, ds, &cat, gamma).unwrap();
    MilpModel::build(bank, &cat, 1.0).unwrap()
}

/// Every block-valid selection of the catalog.
pub fn all_selections(cat: &ParentSetCatalog) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..cat.num_vars() {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..cat.num_sets(i)).map(move |k| {
                    let mut s = prefix.clone();
                    s.push(k);
                    s
                })
            })
            .collect();
    }
    out
}

/// Cycle check by depth-first colouring, independent of the library's sort.
pub fn has_cycle(st: &Structure) -> bool {
    fn visit(v: usize, parents: &[Vec<usize>], colour: &mut [u8]) -> bool {
        colour[v] = 1;
        for &p in &parents[v] {
            if colour[p] == 1 || (colour[p] == 0 && visit(p, parents, colour)) {
                return true;
            }
        }
        colour[v] = 2;
        false
    }
    let mut colour = vec![0u8; st.parents.len()];
    (0..st.parents.len()).any(|v| colour[v] == 0 && visit(v, &st.parents, &mut colour))
}

/// Best score over all acyclic structures of the bank's catalog.
pub fn exhaustive_optimum(bank: &CoefficientBank, cat: &ParentSetCatalog) -> (f64, Structure) {
    let mut best: Option<(f64, Structure)> = None;
    for sel in all_selections(cat) {
        let st = cat.structure(sel).unwrap();
        if has_cycle(&st) {
            continue;
        }
        let score = bank.score_structure(&cat.eta(&st)).unwrap();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, st));
        }
    }
    best.unwrap()
}
