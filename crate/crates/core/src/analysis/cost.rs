//! Floating-point operation counts per time step for the reduced models.

use serde::{Deserialize, Serialize};

/// Problem sizes entering the operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    /// Full-order dimension.
    pub n: u64,
    /// Reduced dimension.
    pub k: u64,
    /// FLOPs per right-hand side evaluation divided by `n`.
    pub omega: u64,
    /// GMRES iterations per Newton step.
    pub eta: u64,
}

/// Per-step algorithms with tabulated counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    GalerkinExplicit,
    ApgExplicit,
    GalerkinImplicit,
    ApgImplicit,
    Lspg,
    ApgJfnk,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::GalerkinExplicit,
        Algorithm::ApgExplicit,
        Algorithm::GalerkinImplicit,
        Algorithm::ApgImplicit,
        Algorithm::Lspg,
        Algorithm::ApgJfnk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GalerkinExplicit => "galerkin-explicit",
            Algorithm::ApgExplicit => "apg-explicit",
            Algorithm::GalerkinImplicit => "galerkin-implicit",
            Algorithm::ApgImplicit => "apg-implicit",
            Algorithm::Lspg => "lspg",
            Algorithm::ApgJfnk => "apg-jfnk",
        }
    }
}

/// FLOPs for one step (explicit Euler) or one Newton iteration (implicit).
pub fn flop_estimate(m: &CostModel, alg: Algorithm) -> i128 {
    let n = i128::from(m.n);
    let k = i128::from(m.k);
    let w = i128::from(m.omega);
    let eta = i128::from(m.eta);
    match alg {
        Algorithm::GalerkinExplicit => 4 * n * k + (w - 1) * n + k,
        Algorithm::ApgExplicit => 8 * n * k + (2 * w + 5) * n,
        Algorithm::GalerkinImplicit => (w - 1) * n + 3 * k + (w + 3) * n * k + 2 * k * k + 4 * n * k * k + k * k * k,
        Algorithm::ApgImplicit => {
            (2 * w + 5) * n + 2 * k + (2 * w + 13) * n * k + k * k + 8 * n * k * k + k * k * k
        }
        Algorithm::Lspg => (w + 2) * n + (w + 6) * n * k - k * k + 4 * n * k * k + k * k * k,
        Algorithm::ApgJfnk => {
            ((2 * eta + 2) * w + 5 * eta + 5) * n + (eta * eta + eta + 2) * k + (8 * eta + 8) * n * k
        }
    }
}

/// Cost of `alg` relative to the Galerkin method with the same time integration.
pub fn relative_cost(m: &CostModel, alg: Algorithm) -> f64 {
    let base = match alg {
        Algorithm::GalerkinExplicit | Algorithm::ApgExplicit => Algorithm::GalerkinExplicit,
        _ => Algorithm::GalerkinImplicit,
    };
    flop_estimate(m, alg) as f64 / flop_estimate(m, base) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(k: u64, eta: u64) -> CostModel {
        CostModel { n: 1000, k, omega: 50, eta }
    }

    #[test]
    fn explicit_counts() {
        let m = model(10, 0);
        assert_eq!(flop_estimate(&m, Algorithm::GalerkinExplicit), 89_010);
        assert_eq!(flop_estimate(&m, Algorithm::ApgExplicit), 185_000);
        let ratio = relative_cost(&m, Algorithm::ApgExplicit);
        assert!((ratio - 185_000.0 / 89_010.0).abs() < 1e-15);
    }

    #[test]
    fn implicit_counts_snapshot() {
        // Hand evaluation of each formula at N=1000, K=10, ω=50, η=5.
        let m = CostModel { n: 1000, k: 10, omega: 50, eta: 5 };
        assert_eq!(flop_estimate(&m, Algorithm::GalerkinImplicit), 49_000 + 30 + 530_000 + 200 + 400_000 + 1_000);
        assert_eq!(flop_estimate(&m, Algorithm::ApgImplicit), 105_000 + 20 + 1_130_000 + 100 + 800_000 + 1_000);
        assert_eq!(flop_estimate(&m, Algorithm::Lspg), 52_000 + 560_000 - 100 + 400_000 + 1_000);
        assert_eq!(flop_estimate(&m, Algorithm::ApgJfnk), 630_000 + 320 + 480_000);
        let all: Vec<i128> = Algorithm::ALL.iter().map(|&a| flop_estimate(&m, a)).collect();
        assert_eq!(all, vec![89_010, 185_000, 980_230, 2_036_120, 1_012_900, 1_110_320]);
    }

    #[test]
    fn jfnk_with_eta_equal_k_tracks_direct_solve() {
        for k in [20, 100] {
            let m = model(k, k);
            let r = flop_estimate(&m, Algorithm::ApgJfnk) as f64 / flop_estimate(&m, Algorithm::ApgImplicit) as f64;
            assert!((0.8..=1.2).contains(&r), "K={k}: {r}");
        }
        assert_eq!(flop_estimate(&model(20, 20), Algorithm::ApgJfnk), 5_573_440);
        assert_eq!(flop_estimate(&model(20, 20), Algorithm::ApgImplicit), 5_573_440);
    }

    proptest! {
        #[test]
        fn apg_explicit_is_about_twice_galerkin(k in 1u64..=100) {
            let r = relative_cost(&model(k, 0), Algorithm::ApgExplicit);
            prop_assert!((1.9..=2.2).contains(&r), "K={} ratio {}", k, r);
        }

        #[test]
        fn counts_grow_with_k(k in 1u64..300, eta in 1u64..50) {
            for alg in Algorithm::ALL {
                prop_assert!(flop_estimate(&model(k + 1, eta), alg) > flop_estimate(&model(k, eta), alg));
            }
        }
    }
}
