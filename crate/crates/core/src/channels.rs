//! Two-state Markov packet-drop channels and the joint mode chain.
//!
//! Each channel `i` carries a bit `γ_i ∈ {0, 1}` (1 = packet received) that
//! evolves by the TPM
//!
//! ```text
//! P_i = [[1 − q, q],
//!        [p,     1 − p]]
//! ```
//!
//! over the states (dropped, received). The joint mode is
//! `θ = 1 + Σ_i 2^(i−1) γ_i`, so bit `i − 1` of `θ − 1` is `γ_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{kron, Matrix};

/// Default cap on the number of channels in a joint chain (`N = 2^m` modes).
pub const DEFAULT_CHANNEL_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Failure rate: probability of moving from received to dropped.
    pub p: f64,
    /// Recovery rate: probability of moving from dropped to received.
    pub q: f64,
}

impl ChannelParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let ch = Self { p, q };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x < 1.0;
        if ok(self.p) && ok(self.q) {
            Ok(())
        } else {
            Err(Error::InvalidChannel { p: self.p, q: self.q })
        }
    }

    /// 2×2 TPM over (dropped, received).
    pub fn tpm(&self) -> Matrix {
        Matrix::from_rows(&[[1.0 - self.q, self.q], [self.p, 1.0 - self.p]])
    }

    /// Probability of `to` given `from`.
    pub fn transition(&self, from: bool, to: bool) -> f64 {
        match (from, to) {
            (false, false) => 1.0 - self.q,
            (false, true) => self.q,
            (true, false) => self.p,
            (true, true) => 1.0 - self.p,
        }
    }

    /// Long-run probability that a packet gets through.
    pub fn arrival_rate(&self) -> f64 {
        stationary_dist(self).1
    }
}

/// Stationary distribution `(π_dropped, π_received) = (p, q) / (p + q)`.
pub fn stationary_dist(ch: &ChannelParams) -> (f64, f64) {
    let s = ch.p + ch.q;
    (ch.p / s, ch.q / s)
}

/// The joint `2^m`-mode chain of `m` independent channels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointChain {
    pub channels: Vec<ChannelParams>,
    /// `N × N` row-stochastic TPM, `P = P_m ⊗ … ⊗ P_1`.
    pub tpm: Matrix,
    /// Stationary distribution, `μ = π_m ⊗ … ⊗ π_1`.
    pub mu: Vec<f64>,
}

impl JointChain {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn mode_count(&self) -> usize {
        self.mu.len()
    }

    /// `p_ij` with zero-based mode indices.
    #[inline]
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.tpm[(i, j)]
    }
}

pub fn joint_tpm(chs: &[ChannelParams]) -> Result<JointChain> {
    joint_tpm_capped(chs, DEFAULT_CHANNEL_CAP)
}

pub fn joint_tpm_capped(chs: &[ChannelParams], cap: usize) -> Result<JointChain> {
    if chs.is_empty() {
        return Err(Error::InvalidModel("at least one channel is required".into()));
    }
    if chs.len() > cap {
        return Err(Error::TooManyChannels { count: chs.len(), cap });
    }
    for ch in chs {
        ch.validate()?;
    }
    let mut tpm = Matrix::identity(1);
    let mut mu = Matrix::identity(1);
    for ch in chs {
        let (d, r) = stationary_dist(ch);
        tpm = kron(&ch.tpm(), &tpm);
        mu = kron(&Matrix::row_vector(&[d, r]), &mu);
    }
    Ok(JointChain {
        channels: chs.to_vec(),
        tpm,
        mu: mu.as_slice().to_vec(),
    })
}

/// `θ = 1 + Σ_i 2^(i−1) γ_i`.
pub fn mode_index(gamma: &[bool]) -> usize {
    1 + gamma
        .iter()
        .enumerate()
        .filter(|(_, &g)| g)
        .map(|(i, _)| 1usize << i)
        .sum::<usize>()
}

/// Inverse of [`mode_index`].
pub fn mode_gamma(mode: usize, m: usize) -> Result<Vec<bool>> {
    let max = 1usize << m;
    if mode == 0 || mode > max {
        return Err(Error::OutOfRange { mode, max });
    }
    Ok((0..m).map(|i| ((mode - 1) >> i) & 1 == 1).collect())
}

/// How `γ(0)` is chosen when sampling a path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    /// Each `γ_i(0)` drawn from its stationary distribution.
    #[default]
    Stationary,
    Fixed(Vec<bool>),
}

/// Generator for channel `channel` under `seed`. Every channel gets its own
/// ChaCha stream, so paths don't depend on how many channels are sampled.
pub fn channel_rng(seed: u64, channel: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(channel as u64);
    r
}

/// One path of `γ(0..horizon)`, each channel evolved independently.
///
/// Panics if `init` is `Fixed` with the wrong length.
pub fn sample_path(chs: &[ChannelParams], horizon: usize, seed: u64, init: &InitRule) -> Vec<Vec<bool>> {
    if let InitRule::Fixed(bits) = init {
        assert_eq!(bits.len(), chs.len(), "fixed initial bits must match channel count");
    }
    let mut path = vec![vec![false; chs.len()]; horizon];
    for (c, ch) in chs.iter().enumerate() {
        let mut r = channel_rng(seed, c);
        let mut g = match init {
            InitRule::Stationary => r.random_bool(ch.arrival_rate()),
            InitRule::Fixed(bits) => bits[c],
        };
        for (k, step) in path.iter_mut().enumerate() {
            if k > 0 {
                let flip = if g { ch.p } else { ch.q };
                if r.random_bool(flip) {
                    g = !g;
                }
            }
            step[c] = g;
        }
    }
    path
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::testutil::rng;

    fn ch(p: f64, q: f64) -> ChannelParams {
        ChannelParams::new(p, q).unwrap()
    }

    fn brute_force_entry(chs: &[ChannelParams], i: usize, j: usize) -> f64 {
        let gi = mode_gamma(i + 1, chs.len()).unwrap();
        let gj = mode_gamma(j + 1, chs.len()).unwrap();
        chs.iter().enumerate().map(|(c, ch)| ch.transition(gi[c], gj[c])).product()
    }

    #[test]
    fn rejects_out_of_range_rates() {
        assert!(ChannelParams::new(0.0, 0.5).is_err());
        assert!(ChannelParams::new(0.5, 1.0).is_err());
        assert!(ChannelParams::new(0.2, 0.3).is_ok());
    }

    #[test]
    fn stationary_distribution_examples() {
        assert_eq!(stationary_dist(&ch(0.3, 0.3)), (0.5, 0.5));
        let (a, b) = stationary_dist(&ch(0.5, 0.2));
        assert!((a - 0.714286).abs() < 1e-6 && (b - 0.285714).abs() < 1e-6);
    }

    #[test]
    fn stationary_distribution_is_left_fixed_vector() {
        let mut r = rng(11);
        for _ in 0..50 {
            let c = ch(r.random_range(0.01..0.99), r.random_range(0.01..0.99));
            let (a, b) = stationary_dist(&c);
            let pi = &Matrix::row_vector(&[a, b]) * &c.tpm();
            assert!((pi[(0, 0)] - a).abs() < 1e-15 && (pi[(0, 1)] - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_channel_chain_is_the_channel() {
        let c = ch(0.5, 0.2);
        let j = joint_tpm(&[c]).unwrap();
        assert_eq!(j.tpm, c.tpm());
        let (a, b) = stationary_dist(&c);
        assert_eq!(j.mu, vec![a, b]);
    }

    #[test]
    fn two_channel_entries_match_enumeration() {
        let chs = [ch(0.2, 0.6), ch(0.3, 0.7)];
        let j = joint_tpm(&chs).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!((j.p(a, b) - brute_force_entry(&chs, a, b)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn three_channel_chain_is_stochastic_with_fixed_mu() {
        let chs = [ch(0.5, 0.2), ch(0.6, 0.32), ch(0.7, 0.51)];
        let j = joint_tpm(&chs).unwrap();
        assert_eq!(j.mode_count(), 8);
        for i in 0..8 {
            let s: f64 = (0..8).map(|k| j.p(i, k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let mu_p = &Matrix::row_vector(&j.mu) * &j.tpm;
        for i in 0..8 {
            assert!((mu_p[(0, i)] - j.mu[i]).abs() < 1e-10);
            assert!(j.mu[i] > 0.0);
        }
        assert!((j.mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_cap_enforced() {
        let chs = vec![ch(0.5, 0.5); 3];
        assert!(matches!(joint_tpm_capped(&chs, 2), Err(Error::TooManyChannels { count: 3, cap: 2 })));
        assert!(joint_tpm(&[]).is_err());
    }

    #[test]
    fn mode_index_examples() {
        assert_eq!(mode_index(&[false, false, false]), 1);
        assert_eq!(mode_index(&[true, false, true]), 6);
        assert_eq!(mode_index(&[true, true, true]), 8);
        assert_eq!(mode_gamma(1, 3).unwrap(), vec![false, false, false]);
        assert_eq!(mode_gamma(6, 3).unwrap(), vec![true, false, true]);
        assert!(matches!(mode_gamma(9, 3), Err(Error::OutOfRange { .. })));
        assert!(matches!(mode_gamma(0, 3), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn mode_index_is_a_bijection() {
        for m in 1..=5 {
            let n = 1 << m;
            let mut seen = vec![false; n];
            for theta in 1..=n {
                let g = mode_gamma(theta, m).unwrap();
                assert_eq!(mode_index(&g), theta);
                seen[theta - 1] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn mu_is_the_attractor_of_the_chain() {
        let chs = [ch(0.15, 0.4), ch(0.7, 0.1), ch(0.3, 0.9)];
        let j = joint_tpm(&chs).unwrap();
        let mut d = Matrix::row_vector(&[0.3, 0.0, 0.1, 0.05, 0.25, 0.1, 0.1, 0.1]);
        for _ in 0..10_000 {
            d = &d * &j.tpm;
        }
        for i in 0..8 {
            assert!((d[(0, i)] - j.mu[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn reliable_channel_delivers_almost_always() {
        let c = ch(0.001, 0.999);
        let n = 100_000;
        let path = sample_path(&[c], n, 5, &InitRule::Stationary);
        let hits = path.iter().filter(|g| g[0]).count() as f64 / n as f64;
        let rate = c.arrival_rate();
        // lag-one correlation is 1 − p − q ≈ 0, so the iid standard error applies
        let se = (rate * (1.0 - rate) / n as f64).sqrt();
        assert!((hits - rate).abs() <= 3.0 * se + 1e-12, "{hits} vs {rate}");
    }

    #[test]
    fn transition_frequencies_match_tpm() {
        let c = ch(0.3, 0.2);
        let n = 100_000;
        let path = sample_path(&[c], n, 17, &InitRule::Stationary);
        let mut counts = [[0usize; 2]; 2];
        for w in path.windows(2) {
            counts[w[0][0] as usize][w[1][0] as usize] += 1;
        }
        let tpm = c.tpm();
        for from in 0..2 {
            let total = (counts[from][0] + counts[from][1]) as f64;
            let freq = counts[from][1] as f64 / total;
            let want = tpm[(from, 1)];
            let se = (want * (1.0 - want) / total).sqrt();
            assert!((freq - want).abs() <= 3.0 * se, "row {from}: {freq} vs {want}");
        }
    }

    #[test]
    fn paths_are_reproducible_and_channel_independent() {
        let chs = [ch(0.3, 0.4), ch(0.2, 0.6)];
        let a = sample_path(&chs, 200, 99, &InitRule::Stationary);
        assert_eq!(a, sample_path(&chs, 200, 99, &InitRule::Stationary));
        let solo = sample_path(&chs[..1], 200, 99, &InitRule::Stationary);
        assert!(a.iter().zip(&solo).all(|(x, y)| x[0] == y[0]));
        let fixed = sample_path(&chs, 3, 1, &InitRule::Fixed(vec![true, false]));
        assert_eq!(fixed[0], vec![true, false]);
    }

    fn channel_strategy() -> impl Strategy<Value = ChannelParams> {
        (0.01..0.99f64, 0.01..0.99f64).prop_map(|(p, q)| ChannelParams { p, q })
    }

    proptest! {
        #[test]
        fn joint_tpm_matches_enumeration(chs in prop::collection::vec(channel_strategy(), 1..=4)) {
            let j = joint_tpm(&chs).unwrap();
            let n = j.mode_count();
            for a in 0..n {
                for b in 0..n {
                    prop_assert!((j.p(a, b) - brute_force_entry(&chs, a, b)).abs() <= 1e-14);
                }
            }
        }
    }
}
