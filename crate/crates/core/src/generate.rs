//! Seeded random instances for property suites and the command line.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::Result;
use crate::numerics::{block_diag, identity, kron, random_complex_matrix, random_unitary, Matrix, Tolerance};
use crate::vn_algebra::{generate_algebra, VNAlgebra};

/// A generated algebra together with the data it was built from.
#[derive(Debug, Clone)]
pub struct Instance {
    pub algebra: VNAlgebra,
    pub blocks: Vec<(usize, usize)>,
    /// `algebra = U (⊕ M_{n_k} ⊗ I_{m_k}) U*`.
    pub unitary: Matrix,
}

/// Random block pattern `(n_k, m_k)` with `Σ n_k m_k ≤ max_dim`.
pub fn random_blocks<R: Rng>(rng: &mut R, max_dim: usize, max_blocks: usize) -> Vec<(usize, usize)> {
    let count = rng.random_range(1..=max_blocks.max(1));
    let mut blocks = Vec::new();
    let mut used = 0;
    for _ in 0..count {
        let room = max_dim - used;
        if room == 0 {
            break;
        }
        let n = rng.random_range(1..=room.min(4));
        let m = rng.random_range(1..=(room / n).min(3));
        used += n * m;
        blocks.push((n, m));
    }
    blocks
}

/// Random standard block pattern (`n_k = m_k`).
pub fn random_standard_blocks<R: Rng>(rng: &mut R, max_dim: usize, max_blocks: usize) -> Vec<(usize, usize)> {
    let count = rng.random_range(1..=max_blocks.max(1));
    let mut blocks = Vec::new();
    let mut used = 0;
    for _ in 0..count {
        let options: Vec<usize> = (1..=3).filter(|n| used + n * n <= max_dim).collect();
        let Some(&n) = options.choose(rng) else {
            break;
        };
        used += n * n;
        blocks.push((n, n));
    }
    blocks
}

/// One element of `⊕ M_{n_k} ⊗ I_{m_k}` with independent Gaussian blocks.
pub fn random_canonical_element<R: Rng>(rng: &mut R, blocks: &[(usize, usize)]) -> Matrix {
    let parts: Vec<Matrix> = blocks
        .iter()
        .map(|&(n, m)| kron(&random_complex_matrix(rng, n, n), &identity(m)))
        .collect();
    block_diag(&parts)
}

/// Algebra with the given block pattern in a random orthonormal frame.
pub fn instance_from_blocks<R: Rng>(
    rng: &mut R,
    blocks: &[(usize, usize)],
    tol: Tolerance,
) -> Result<Instance> {
    let n: usize = blocks.iter().map(|&(b, m)| b * m).sum();
    let u = random_unitary(rng, n);
    let gens: Vec<Matrix> = (0..2)
        .map(|_| &u * random_canonical_element(rng, blocks) * u.adjoint())
        .collect();
    let algebra = generate_algebra(&gens, n, tol)?;
    Ok(Instance {
        algebra,
        blocks: blocks.to_vec(),
        unitary: u,
    })
}

pub fn random_instance<R: Rng>(rng: &mut R, max_dim: usize, tol: Tolerance) -> Result<Instance> {
    let blocks = random_blocks(rng, max_dim, 3);
    instance_from_blocks(rng, &blocks, tol)
}

pub fn random_standard_instance<R: Rng>(rng: &mut R, max_dim: usize, tol: Tolerance) -> Result<Instance> {
    let blocks = random_standard_blocks(rng, max_dim, 3);
    instance_from_blocks(rng, &blocks, tol)
}

/// Coarsening of the centre: the projections `Σ_{k ∈ S} z_k` over a random
/// partition of the blocks generate a unital subalgebra of `Z(M)`.
pub fn random_central_subalgebra<R: Rng>(
    rng: &mut R,
    central: &[Matrix],
    tol: Tolerance,
) -> Result<VNAlgebra> {
    let n = central.first().map_or(0, |z| z.nrows());
    let groups = rng.random_range(1..=central.len().max(1));
    let mut sums = vec![Matrix::zeros(n, n); groups];
    for z in central {
        let g = rng.random_range(0..groups);
        sums[g] += z;
    }
    let gens: Vec<Matrix> = sums.into_iter().filter(|s| s.norm() > 0.0).collect();
    generate_algebra(&gens, n, tol)
}
