//! Seeded random fixtures shared by the unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channels::ChannelParams;
use crate::matrix::Matrix;
use crate::mjls::{assemble, JumpModel, PlantModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_row_major(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect())
}

/// `G Gᵀ` with `G` of size `n × rank`.
pub fn random_psd(r: &mut ChaCha8Rng, n: usize, rank: usize) -> Matrix {
    let g = random_matrix(r, n, rank);
    (&g * &g.transpose()).symmetrize()
}

pub fn random_psd_tuple(r: &mut ChaCha8Rng, count: usize, n: usize) -> Vec<Matrix> {
    (0..count).map(|_| random_psd(r, n, n)).collect()
}

pub fn random_channel(r: &mut ChaCha8Rng) -> ChannelParams {
    ChannelParams::new(r.random_range(0.05..0.95), r.random_range(0.05..0.95)).unwrap()
}

/// Random `n`-state plant with `m` sensors, unit-ish noise, random channels.
pub fn random_jump_model(r: &mut ChaCha8Rng, n: usize, m: usize) -> JumpModel {
    let plant = PlantModel::new(
        random_matrix(r, n, n),
        random_matrix(r, m, n),
        &random_psd(r, n, n) + &Matrix::identity(n).scale(0.1),
        (0..m).map(|_| r.random_range(0.1..2.0)).collect(),
    )
    .unwrap();
    let chs: Vec<ChannelParams> = (0..m).map(|_| random_channel(r)).collect();
    assemble(&plant, &chs).unwrap()
}
