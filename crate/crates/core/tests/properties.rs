use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wstar::generate::{random_instance, Instance};
use wstar::numerics::{identity, random_unitary, Matrix};
use wstar::standard_form::is_standard;
use wstar::vn_algebra::generate_algebra;
use wstar::Tolerance;

fn instance(seed: u64) -> (Instance, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_instance(&mut rng, 8, Tolerance::default()).unwrap();
    (inst, rng)
}

fn subset_sums(central: &[Matrix]) -> Vec<Matrix> {
    let n = central[0].nrows();
    (0..1usize << central.len())
        .map(|mask| {
            let mut s = Matrix::zeros(n, n);
            for (k, z) in central.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    s += z;
                }
            }
            s
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bicommutant_recovers_the_algebra(seed in any::<u64>()) {
        let (inst, _) = instance(seed);
        let back = inst.algebra.commutant().unwrap().commutant().unwrap();
        prop_assert!(back.distance(&inst.algebra) < 1e-8);
    }

    #[test]
    fn central_support_is_the_least_central_cover(seed in any::<u64>(), mask in any::<u8>()) {
        let (inst, mut rng) = instance(seed);
        let m = &inst.algebra;
        let central = m.minimal_central_projections().unwrap();
        let sums = subset_sums(&central);
        let cover = &sums[mask as usize % sums.len()];
        let x = cover * m.random_element(&mut rng);
        let support = m.central_support(&x).unwrap();
        prop_assert!((&support * &x - &x).norm() < 1e-8 * x.norm().max(1.0));
        for s in &sums {
            if (s * &x - &x).norm() < 1e-8 * x.norm().max(1.0) {
                prop_assert!((s * &support - &support).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn abelian_corner_counts_central_projections(seed in any::<u64>()) {
        let (inst, _) = instance(seed);
        let m = &inst.algebra;
        let e = m.abelian_projection_full(seed).unwrap();
        prop_assert!(m.is_abelian_projection(&e));
        let support = m.central_support(&e).unwrap();
        prop_assert!((support - identity(m.ambient_dim())).norm() < 1e-8);
        prop_assert_eq!(
            m.corner_dim(&e).unwrap(),
            m.minimal_central_projections().unwrap().len()
        );
    }

    #[test]
    fn relative_double_commutant_between_centre_and_algebra(seed in any::<u64>()) {
        let (inst, mut rng) = instance(seed);
        let n = &inst.algebra;
        let mut gens = n.center().unwrap().basis().to_vec();
        gens.push(n.random_hermitian(&mut rng));
        let m = generate_algebra(&gens, n.ambient_dim(), *n.tolerance()).unwrap();
        prop_assert!(m.is_subalgebra_of(n));
        let back = n.relative_double_commutant(&m).unwrap();
        prop_assert!(back.distance(&m) < 1e-8);
    }

    #[test]
    fn standard_verdict_matches_multiplicities(seed in any::<u64>()) {
        let (inst, _) = instance(seed);
        let report = is_standard(&inst.algebra).unwrap();
        let mut expected: Vec<(usize, usize)> = inst.blocks.clone();
        let mut found = report.blocks.clone();
        expected.sort_unstable();
        found.sort_unstable();
        prop_assert_eq!(found, expected);
        prop_assert_eq!(report.standard, inst.blocks.iter().all(|(n, m)| n == m));
    }

    #[test]
    fn standard_verdict_survives_unitary_conjugation(seed in any::<u64>()) {
        let (inst, mut rng) = instance(seed);
        let m = &inst.algebra;
        let u = random_unitary(&mut rng, m.ambient_dim());
        let moved: Vec<Matrix> = m.generators().iter().map(|g| &u * g * u.adjoint()).collect();
        let conjugated = generate_algebra(&moved, m.ambient_dim(), *m.tolerance()).unwrap();
        prop_assert_eq!(
            is_standard(&conjugated).unwrap().standard,
            is_standard(m).unwrap().standard
        );
    }
}
