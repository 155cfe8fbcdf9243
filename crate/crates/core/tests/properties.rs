use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use sparse_scatter::opcore::{assemble_f, block_split, hs_norm, op_norm, NystromGrid};
use sparse_scatter::potential::{choose_truncation_n, gen_sparse_centers, Bump, Profile, SparsePotential};
use sparse_scatter::specfun::SpectralPoint;

fn small(count: usize, seed: u64, amp: f64) -> (SparsePotential, Arc<NystromGrid>) {
    let b = Bump::new(Profile::SmoothBump, amp, 0.5).unwrap();
    let p = SparsePotential::generated(3, 0.5, 1.0, 2.0, count, seed, b).unwrap();
    let g = Arc::new(NystromGrid::build(&p, 0.5, 2).unwrap());
    (p, g)
}

// supports of radius `radius` more than `2 radius` apart
fn brute_truncation(centers: &[[f64; 3]], radius: f64) -> usize {
    let apart = |from: usize| {
        (from..centers.len()).all(|n| {
            (from..centers.len()).all(|m| {
                m == n || {
                    let d: f64 = (0..3).map(|k| (centers[n][k] - centers[m][k]).powi(2)).sum::<f64>().sqrt();
                    d - 2.0 * radius > 2.0 * radius
                }
            })
        })
    };
    (0..centers.len()).find(|&i| apart(i)).map_or(centers.len() + 1, |i| i + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn block_split_reassembles_exactly(seed in 0u64..1000, count in 2usize..5, lambda in 1.0f64..4.0, eps in 0.0f64..1.0) {
        let (p, g) = small(count, seed, 1.5);
        let f = assemble_f(&p, &g, SpectralPoint::new(lambda, eps).unwrap()).unwrap();
        let (diag, off) = block_split(&f).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                let (a, b) = (diag.entries[(i, j)], off.entries[(i, j)]);
                prop_assert!(a == Complex64::from(0.0) || b == Complex64::from(0.0));
                prop_assert_eq!(a + b, f.entries[(i, j)]);
            }
        }
    }

    #[test]
    fn kernel_is_complex_symmetric(seed in 0u64..1000, lambda in 1.0f64..4.0, eps in 0.0f64..1.0) {
        let (p, g) = small(3, seed, 2.0);
        let f = assemble_f(&p, &g, SpectralPoint::new(lambda, eps).unwrap()).unwrap();
        let scale = f.entries.norm();
        for i in 0..g.len() {
            for j in 0..i {
                prop_assert!((f.entries[(i, j)] - f.entries[(j, i)]).norm() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn hilbert_schmidt_dominates_operator_norm(seed in 0u64..1000, amp in -3.0f64..3.0, lambda in 1.0f64..4.0, eps in 0.0f64..1.0) {
        let (p, g) = small(2, seed, amp);
        let f = assemble_f(&p, &g, SpectralPoint::new(lambda, eps).unwrap()).unwrap();
        prop_assert!(op_norm(&f) <= hs_norm(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn truncation_matches_brute_force(seed in 0u64..1000, c in 0.05f64..2.0, gamma in 1.05f64..2.5, radius in 0.1f64..3.0, count in 1usize..7) {
        let centers = gen_sparse_centers(3, c, gamma, count, seed).unwrap();
        let bump = Bump::new(Profile::ConstantBall, 1.0, radius).unwrap();
        let p = SparsePotential::new(3, radius, vec![bump; count], centers.clone(), c, gamma).unwrap();
        prop_assert_eq!(choose_truncation_n(&p), brute_truncation(&centers, radius));
    }

    #[test]
    fn spectral_point_validation(lambda in -2.0f64..5.0, eps in -0.5f64..1.5) {
        let ok = lambda > 0.0 && (0.0..=1.0).contains(&eps);
        prop_assert_eq!(SpectralPoint::new(lambda, eps).is_ok(), ok);
    }
}
