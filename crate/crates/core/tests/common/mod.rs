#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsmom::ising::{calibrate, CalibrationTarget, Edge, IsingModel};

pub const F1_ACCURACIES: [f64; 10] = [
    0.6893, 0.6072, 0.5954, 0.6603, 0.6939, 0.6346, 0.7462, 0.6870, 0.6462, 0.6284,
];

pub fn f1_target(d: usize) -> CalibrationTarget {
    let edges: Vec<(usize, usize)> = (0..d).map(|k| (2 * k, 2 * k + 1)).collect();
    CalibrationTarget {
        accuracies: F1_ACCURACIES.to_vec(),
        eps: vec![0.1; edges.len()],
        edges,
        class_balance: 0.5,
    }
}

pub fn f1_model(d: usize) -> IsingModel {
    calibrate(&f1_target(d)).expect("F.1 calibration")
}

/// Random model with `d` disjoint edges and positive potentials.
pub fn random_model(rng: &mut ChaCha8Rng, m: usize, d: usize) -> IsingModel {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    let edges = (0..d)
        .map(|k| Edge {
            i: idx[2 * k],
            j: idx[2 * k + 1],
            theta_ij: rng.random_range(0.05..0.6),
        })
        .collect();
    let theta = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    IsingModel::new(rng.random_range(-0.4..0.4), theta, edges).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
