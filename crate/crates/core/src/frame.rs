//! Transmit-side assembly of one frame: information bits through the
//! coded chain onto the subcarrier grid, pilots inserted, silence at other
//! users' pilot positions.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand_core::RngCore;

use crate::phy::pilot_symbol;
use crate::rng::random_bit;
use crate::system::SystemConfig;
use crate::txchain::map_symbols;

/// One frame's transmitted truth.
#[derive(Debug, Clone)]
pub struct TxFrame {
    /// Information bits per user.
    pub info_bits: Vec<Vec<u8>>,
    /// Full symbol grid per user over all subcarriers (pilots included,
    /// zeros at other users' pilot positions).
    pub symbols: Vec<Vec<Complex64>>,
}

/// Draw information bits (user by user) and build the symbol grids.
pub fn build_frame(cfg: &SystemConfig, rng: &mut impl RngCore) -> TxFrame {
    let info_len = cfg.info_bits_per_user();
    let data_k = cfg.data_subcarriers();
    let mut info_bits = Vec::with_capacity(cfg.n_users);
    let mut symbols = Vec::with_capacity(cfg.n_users);
    for user in 0..cfg.n_users {
        let info: Vec<u8> = (0..info_len).map(|_| random_bit(rng)).collect();
        let mut grid = vec![Complex64::new(0.0, 0.0); cfg.k_subcarriers];
        if info_len > 0 {
            let coded = cfg.code.encode(&info);
            let permuted = cfg.interleaver(user).interleave(&coded);
            let data_symbols =
                map_symbols(&permuted, &cfg.constellation).expect("coded length divides symbols");
            for (&k, &s) in data_k.iter().zip(&data_symbols) {
                grid[k] = s;
            }
        }
        for &k in &cfg.pattern.sets()[user] {
            grid[k] = pilot_symbol();
        }
        info_bits.push(info);
        symbols.push(grid);
    }
    TxFrame { info_bits, symbols }
}

/// Count bit disagreements between two equal-length bit slices.
pub fn bit_errors(a: &[u8], b: &[u8]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}
