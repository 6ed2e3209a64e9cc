use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::montecarlo::RawKeyPair;
use crate::sns::AoppMeasurement;
use crate::{Error, Result};

/// Bit-level actively odd-parity pairing on a raw key.
///
/// * `n_odd`: user j groups its bits two by two at random and counts the
///   odd-parity groups.
/// * `n_g`: user j actively pairs each 0-bit with a 1-bit, so every formed
///   pair has odd parity on its side.
/// * A pair survives when user i's parity on the same positions is also
///   odd; it keeps the bit at the 0-bit position of user j.
pub fn aopp_bitlevel(raw: &RawKeyPair, seed: u64) -> Result<AoppMeasurement> {
    if raw.bits_i.len() != raw.bits_j.len() {
        return Err(Error::InvalidParams(format!(
            "raw key halves differ in length: {} vs {}",
            raw.bits_i.len(),
            raw.bits_j.len()
        )));
    }
    let n = raw.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let n_odd = order
        .chunks_exact(2)
        .filter(|g| raw.bits_j[g[0] as usize] != raw.bits_j[g[1] as usize])
        .count();

    let (mut zeros, mut ones): (Vec<u32>, Vec<u32>) = (Vec::new(), Vec::new());
    for (k, &b) in raw.bits_j.iter().enumerate() {
        if b {
            ones.push(k as u32)
        } else {
            zeros.push(k as u32)
        }
    }
    zeros.shuffle(&mut rng);
    ones.shuffle(&mut rng);
    let n_g = zeros.len().min(ones.len());

    let (mut kept, mut errors) = (0usize, 0usize);
    for (&z, &o) in zeros.iter().zip(&ones) {
        let (z, o) = (z as usize, o as usize);
        if raw.bits_i[z] != raw.bits_i[o] {
            kept += 1;
            errors += (raw.bits_i[z] != raw.bits_j[z]) as usize;
        }
    }

    Ok(AoppMeasurement {
        n_t: n as f64,
        n_g: n_g as f64,
        n_odd: n_odd as f64,
        n_t_prime: kept as f64,
        e_prime: if kept > 0 { errors as f64 / kept as f64 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn correlated(n: usize, flip: f64, seed: u64) -> RawKeyPair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits_i: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let bits_j = bits_i.iter().map(|&b| b ^ (rng.random::<f64>() < flip)).collect();
        RawKeyPair { bits_i, bits_j }
    }

    #[test]
    fn constant_bits_on_j_side_form_no_pairs() {
        let raw = RawKeyPair {
            bits_i: vec![true, false, true, true],
            bits_j: vec![false; 4],
        };
        let m = aopp_bitlevel(&raw, 0).unwrap();
        assert_eq!(m.n_g, 0.0);
        assert_eq!(m.n_odd, 0.0);
        assert_eq!(m.n_t_prime, 0.0);
    }

    #[test]
    fn error_free_keys_keep_every_pair() {
        let raw = correlated(10_000, 0.0, 1);
        let m = aopp_bitlevel(&raw, 2).unwrap();
        assert_eq!(m.e_prime, 0.0);
        assert_eq!(m.n_t_prime, m.n_g);
    }

    #[test]
    fn pairing_suppresses_bit_flips() {
        // Independent flips at rate e survive with rate e^2 / (e^2 + (1-e)^2).
        let e: f64 = 0.25;
        let raw = correlated(400_000, e, 3);
        let m = aopp_bitlevel(&raw, 4).unwrap();
        let expected = e * e / (e * e + (1.0 - e) * (1.0 - e));
        assert!((m.e_prime - expected).abs() < 0.01, "{}", m.e_prime);
        assert!(m.n_g / (2.0 * m.n_odd) <= 1.0 + 1e-2);
    }

    #[test]
    fn deterministic_for_seed() {
        let raw = correlated(5_000, 0.2, 5);
        assert_eq!(aopp_bitlevel(&raw, 9).unwrap(), aopp_bitlevel(&raw, 9).unwrap());
    }
}
