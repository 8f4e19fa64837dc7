//! Finite-dimensional von Neumann algebras as subspaces of `M_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{
    self, c, cluster_eigenvalues, column_span, extend_orthonormal, hermitian_eig, hermitian_part,
    hs_inner, identity, is_projection, kron, op_norm, polar_decompose, psd_kernel, re,
    span_distance, stack_columns, unvec, zeros, Matrix, Tolerance,
};

const MAX_RETRIES: usize = 16;

/// A unital *-subalgebra of `M_n`, stored as a Hilbert–Schmidt orthonormal
/// basis of its underlying subspace.
#[derive(Debug, Clone)]
pub struct VNAlgebra {
    n: usize,
    basis: Vec<Matrix>,
    generators: Vec<Matrix>,
    tol: Tolerance,
}

/// Wedderburn data: `W A W*` is `⊕_k M_{n_k} ⊗ I_{m_k}`.
#[derive(Debug, Clone)]
pub struct StructureData {
    pub central_projections: Vec<Matrix>,
    pub block_dims: Vec<usize>,
    pub multiplicities: Vec<usize>,
    /// Rows of block `k` are indexed by `i * m_k + s`.
    pub canonical_unitary: Matrix,
    /// `matrix_units[k][i][j]` is the preimage of `E_ij ⊗ I_{m_k}`.
    pub matrix_units: Vec<Vec<Vec<Matrix>>>,
}

impl StructureData {
    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn blocks(&self) -> Vec<(usize, usize)> {
        self.block_dims
            .iter()
            .copied()
            .zip(self.multiplicities.iter().copied())
            .collect()
    }

    /// Minimal projection `e_11` of block `k`.
    pub fn minimal_projection(&self, k: usize) -> &Matrix {
        &self.matrix_units[k][0][0]
    }

    /// Number of copies of the minimal projection of block `k` inside `p`.
    pub fn block_rank(&self, k: usize, p: &Matrix, tol: &Tolerance) -> usize {
        let zp = &self.central_projections[k] * p;
        let rank = numerics::numerical_rank(&zp, tol);
        (rank + self.multiplicities[k] / 2) / self.multiplicities[k]
    }

    pub fn block_ranks(&self, p: &Matrix, tol: &Tolerance) -> Vec<usize> {
        (0..self.num_blocks()).map(|k| self.block_rank(k, p, tol)).collect()
    }
}

/// Subspace spanned by `⊕_k M_{n_k} ⊗ I_{m_k}` in block order.
pub fn canonical_algebra(blocks: &[(usize, usize)], tol: Tolerance) -> VNAlgebra {
    let n: usize = blocks.iter().map(|&(b, m)| b * m).sum();
    let mut basis = Vec::new();
    let mut offset = 0;
    for &(bn, m) in blocks {
        let scale = re(1.0 / (m as f64).sqrt());
        for i in 0..bn {
            for j in 0..bn {
                let mut x = zeros(n, n);
                for s in 0..m {
                    x[(offset + i * m + s, offset + j * m + s)] = scale;
                }
                basis.push(x);
            }
        }
        offset += bn * m;
    }
    VNAlgebra {
        n,
        generators: basis.clone(),
        basis,
        tol,
    }
}

/// Residual of `x` against the canonical block form `⊕ X_k ⊗ I_{m_k}`.
pub fn canonical_form_residual(x: &Matrix, blocks: &[(usize, usize)]) -> f64 {
    let mut proj = zeros(x.nrows(), x.ncols());
    let mut offset = 0;
    for &(bn, m) in blocks {
        for i in 0..bn {
            for j in 0..bn {
                let mut avg = numerics::ZERO;
                for s in 0..m {
                    avg += x[(offset + i * m + s, offset + j * m + s)];
                }
                avg /= re(m as f64);
                for s in 0..m {
                    proj[(offset + i * m + s, offset + j * m + s)] = avg;
                }
            }
        }
        offset += bn * m;
    }
    (x - proj).norm()
}

fn check_square(m: &Matrix, n: usize) -> Result<()> {
    if m.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.nrows(),
        });
    }
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    numerics::check_finite(m)
}

/// Smallest unital *-subalgebra of `M_n` containing `generators`.
///
/// Closure by words: starting from `{1} ∪ S` with `S = gens ∪ gens*`, the
/// newly added directions are multiplied on the left by every letter of `S`
/// until nothing new appears.
pub fn generate_algebra(generators: &[Matrix], n: usize, tol: Tolerance) -> Result<VNAlgebra> {
    for g in generators {
        check_square(g, n)?;
    }
    let mut letters: Vec<Matrix> = Vec::new();
    for g in generators {
        crate::numerics::check_finite(g)?;
        let peak = g.iter().fold(0.0f64, |a, z| a.max(z.re.abs()).max(z.im.abs()));
        if peak == 0.0 {
            continue;
        }
        let g = g.unscale(peak);
        let norm = op_norm(&g);
        if norm * peak > tol.abs_eps {
            let g = g.unscale(norm);
            letters.push(g.adjoint());
            letters.push(g);
        }
    }
    let mut basis = Vec::new();
    let mut seed = vec![identity(n)];
    seed.extend(letters.iter().cloned());
    extend_orthonormal(&mut basis, &seed, 1.0, &tol)?;
    let mut frontier_start = 0;
    while frontier_start < basis.len() {
        let frontier_end = basis.len();
        let mut candidates = Vec::new();
        for b in &basis[frontier_start..frontier_end] {
            for g in &letters {
                candidates.push(g * b);
            }
        }
        extend_orthonormal(&mut basis, &candidates, 1.0, &tol)?;
        frontier_start = frontier_end;
        if basis.len() > n * n {
            return Err(Error::NonConvergence("algebra generation"));
        }
    }
    Ok(VNAlgebra {
        n,
        basis,
        generators: generators.to_vec(),
        tol,
    })
}

impl VNAlgebra {
    /// Wraps an explicit spanning set, rejecting non-unital or non-closed
    /// spans.
    pub fn from_spanning_set(mats: &[Matrix], n: usize, tol: Tolerance) -> Result<Self> {
        for m in mats {
            check_square(m, n)?;
        }
        let scale = mats.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let mut basis = Vec::new();
        extend_orthonormal(&mut basis, mats, scale, &tol)?;
        let alg = VNAlgebra {
            n,
            basis,
            generators: mats.to_vec(),
            tol,
        };
        let one = identity(n);
        let r = alg.membership_residual(&one);
        if !tol.accepts(r, one.norm()) {
            return Err(Error::NotUnital);
        }
        let mut worst: f64 = 0.0;
        for a in &alg.basis {
            worst = worst.max(alg.membership_residual(&a.adjoint()));
            for b in &alg.basis {
                worst = worst.max(alg.membership_residual(&(a * b)));
            }
        }
        if !tol.accepts(worst, 1.0) {
            return Err(Error::NotClosed { residual: worst });
        }
        Ok(alg)
    }

    /// Builds an algebra from an already orthonormal basis known to be
    /// closed (commutants, centres, relative commutants).
    fn from_orthonormal(n: usize, basis: Vec<Matrix>, tol: Tolerance) -> Self {
        VNAlgebra {
            n,
            generators: basis.clone(),
            basis,
            tol,
        }
    }

    pub fn scalars(n: usize, tol: Tolerance) -> Self {
        let b = identity(n) / re((n as f64).sqrt());
        Self::from_orthonormal(n, vec![b], tol)
    }

    pub fn full(n: usize, tol: Tolerance) -> Self {
        let basis = (0..n)
            .flat_map(|j| (0..n).map(move |i| numerics::unit(n, i, j)))
            .collect();
        Self::from_orthonormal(n, basis, tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Matrix] {
        &self.basis
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    pub fn tolerance(&self) -> &Tolerance {
        &self.tol
    }

    pub fn unit(&self) -> Matrix {
        identity(self.n)
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    /// Vectorized basis as columns of an `n² x dim` matrix.
    pub fn basis_matrix(&self) -> Matrix {
        if self.basis.is_empty() {
            return zeros(self.n * self.n, 0);
        }
        stack_columns(&self.basis)
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, x: &Matrix) -> Matrix {
        let mut out = zeros(self.n, self.n);
        for b in &self.basis {
            out += b * hs_inner(x, b);
        }
        out
    }

    pub fn membership_residual(&self, x: &Matrix) -> f64 {
        (x - self.project(x)).norm()
    }

    pub fn contains(&self, x: &Matrix) -> bool {
        x.shape() == (self.n, self.n)
            && self.tol.accepts(self.membership_residual(x), x.norm().max(1.0))
    }

    pub fn require(&self, x: &Matrix) -> Result<()> {
        check_square(x, self.n)?;
        let residual = self.membership_residual(x);
        if self.tol.accepts(residual, x.norm().max(1.0)) {
            Ok(())
        } else {
            Err(Error::NotInAlgebra { residual })
        }
    }

    /// Largest membership residual of `self`'s basis in `other`.
    pub fn inclusion_residual(&self, other: &VNAlgebra) -> f64 {
        self.basis
            .iter()
            .map(|b| other.membership_residual(b))
            .fold(0.0, f64::max)
    }

    pub fn is_subalgebra_of(&self, other: &VNAlgebra) -> bool {
        self.n == other.n && self.tol.accepts(self.inclusion_residual(other), 1.0)
    }

    /// Operator-norm distance between the orthogonal projections onto the
    /// two spans.
    pub fn distance(&self, other: &VNAlgebra) -> f64 {
        span_distance(&self.basis_matrix(), &other.basis_matrix())
    }

    pub fn is_abelian(&self) -> bool {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for b in &self.basis[i + 1..] {
                worst = worst.max((a * b - b * a).norm());
            }
        }
        self.tol.accepts(worst, 1.0)
    }

    /// Positive operator on `vec(M_n)` whose kernel is the commutant:
    /// `Σ_b S_b* S_b` with `S_b x = bx − xb` over the orthonormal basis.
    pub fn commutation_gram(&self) -> Matrix {
        let n = self.n;
        let one = identity(n);
        let mut left = zeros(n, n);
        let mut right = zeros(n, n);
        let mut cross = zeros(n * n, n * n);
        for b in &self.basis {
            left += b.adjoint() * b;
            right += b * b.adjoint();
            cross += kron(&numerics::conj(b), b);
        }
        kron(&one, &left) - &cross - cross.adjoint() + kron(&numerics::conj(&right), &one)
    }

    pub fn commutant(&self) -> Result<VNAlgebra> {
        let kernel = psd_kernel(&self.commutation_gram(), &self.tol)?;
        let basis = (0..kernel.ncols())
            .map(|j| unvec(&kernel.column(j).into_owned(), self.n, self.n))
            .collect();
        Ok(Self::from_orthonormal(self.n, basis, self.tol))
    }

    /// `S′ ∩ self` for a subalgebra `S` of the same ambient space.
    pub fn relative_commutant(&self, s: &VNAlgebra) -> Result<VNAlgebra> {
        if s.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: s.n,
            });
        }
        let q = self.basis_matrix();
        let gram = q.adjoint() * s.commutation_gram() * &q;
        let gram = hermitian_part(&gram);
        let kernel = psd_kernel(&gram, &self.tol)?;
        let mut basis = Vec::with_capacity(kernel.ncols());
        for j in 0..kernel.ncols() {
            let mut x = zeros(self.n, self.n);
            for (i, b) in self.basis.iter().enumerate() {
                x += b * kernel[(i, j)];
            }
            basis.push(x);
        }
        Ok(Self::from_orthonormal(self.n, basis, self.tol))
    }

    pub fn center(&self) -> Result<VNAlgebra> {
        self.relative_commutant(self)
    }

    /// `(M′ ∩ self)′ ∩ self` for `Z(self) ⊆ M ⊆ self`.
    pub fn relative_double_commutant(&self, m: &VNAlgebra) -> Result<VNAlgebra> {
        if !m.is_subalgebra_of(self) {
            return Err(Error::InclusionViolated(
                "M is not contained in N".to_string(),
            ));
        }
        if !self.center()?.is_subalgebra_of(m) {
            return Err(Error::InclusionViolated(
                "centre of N is not contained in M".to_string(),
            ));
        }
        let inner = self.relative_commutant(m)?;
        self.relative_commutant(&inner)
    }

    /// Minimal projections of an abelian algebra by joint diagonalization of
    /// the Hermitian parts of its basis, sorted by the first standard basis
    /// direction they reach, then by rank.
    pub fn minimal_projections_abelian(&self) -> Result<Vec<Matrix>> {
        let tol = &self.tol;
        let mut hermitians = Vec::with_capacity(2 * self.dim());
        for b in &self.basis {
            hermitians.push(hermitian_part(b));
            hermitians.push(hermitian_part(&(b * c(0.0, -1.0))));
        }
        // Each part is a list of orthonormal columns spanning one projection.
        let mut parts: Vec<Matrix> = vec![identity(self.n)];
        for h in &hermitians {
            if parts.len() == self.dim() {
                break;
            }
            let mut next = Vec::with_capacity(parts.len());
            for q in &parts {
                let compressed = hermitian_part(&(q.adjoint() * h * q));
                let eig = hermitian_eig(&compressed, tol)?;
                let clusters = cluster_eigenvalues(&eig.eigenvalues, tol);
                for range in clusters {
                    let v = eig.eigenvectors.columns(range.start, range.len());
                    next.push(q * v);
                }
            }
            parts = next;
        }
        if parts.len() != self.dim() {
            return Err(Error::NotAbelian);
        }
        let mut projections: Vec<Matrix> = parts.iter().map(|q| q * q.adjoint()).collect();
        let threshold = 1e3 * tol.cutoff(1.0);
        let key = |p: &Matrix| -> (usize, usize) {
            let first = (0..p.nrows())
                .find(|&i| p[(i, i)].re > threshold)
                .unwrap_or(p.nrows());
            let rank = p.trace().re.round() as usize;
            (first, rank)
        };
        projections.sort_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.cmp(&kb).then_with(|| {
                let i = ka.0.min(a.nrows().saturating_sub(1));
                b[(i, i)].re.total_cmp(&a[(i, i)].re)
            })
        });
        for p in &projections {
            if !is_projection(p, tol) {
                return Err(Error::NotAbelian);
            }
        }
        Ok(projections)
    }

    pub fn minimal_central_projections(&self) -> Result<Vec<Matrix>> {
        self.center()?.minimal_projections_abelian()
    }

    pub fn random_element<R: Rng>(&self, rng: &mut R) -> Matrix {
        let mut x = zeros(self.n, self.n);
        for b in &self.basis {
            let a: f64 = rng.sample(StandardNormal);
            let d: f64 = rng.sample(StandardNormal);
            x += b * c(a, d);
        }
        x
    }

    pub fn random_hermitian<R: Rng>(&self, rng: &mut R) -> Matrix {
        hermitian_part(&self.random_element(rng))
    }

    /// Wedderburn decomposition with verified matrix units.
    pub fn structure(&self, seed: u64) -> Result<StructureData> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let central = self.minimal_central_projections()?;
        for _ in 0..MAX_RETRIES {
            if let Some(data) = self.try_structure(&central, &mut rng)? {
                return Ok(data);
            }
        }
        Err(Error::StructureRecoveryFailed {
            attempts: MAX_RETRIES,
        })
    }

    fn try_structure(
        &self,
        central: &[Matrix],
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<StructureData>> {
        let tol = &self.tol;
        let n = self.n;
        let mut block_dims = Vec::new();
        let mut multiplicities = Vec::new();
        let mut matrix_units = Vec::new();
        let mut frame_columns: Vec<numerics::Vector> = Vec::new();
        for z in central {
            let range = column_span(z, tol)?;
            let rank = range.ncols();
            let block: Vec<Matrix> = self.basis.iter().map(|b| b * z).collect();
            let block_basis = numerics::hs_orthonormalize(&block, tol)?;
            let d = block_basis.len();
            let bn = (d as f64).sqrt().round() as usize;
            if bn == 0 || bn * bn != d || rank % bn != 0 {
                return Err(Error::StructureRecoveryFailed { attempts: 1 });
            }
            let m = rank / bn;
            let random_in_block = |rng: &mut ChaCha8Rng| {
                let mut x = zeros(n, n);
                for b in &block_basis {
                    let a: f64 = rng.sample(StandardNormal);
                    let d: f64 = rng.sample(StandardNormal);
                    x += b * c(a, d);
                }
                x
            };
            let h = hermitian_part(&random_in_block(rng));
            let compressed = hermitian_part(&(range.adjoint() * &h * &range));
            let eig = hermitian_eig(&compressed, tol)?;
            let clusters = cluster_eigenvalues(&eig.eigenvalues, tol);
            if clusters.len() != bn || clusters.iter().any(|r| r.len() != m) {
                return Ok(None);
            }
            let frames: Vec<Matrix> = clusters
                .iter()
                .map(|r| &range * eig.eigenvectors.columns(r.start, r.len()))
                .collect();
            let projections: Vec<Matrix> = frames.iter().map(|f| f * f.adjoint()).collect();
            let a = random_in_block(rng);
            let mut column = vec![projections[0].clone()];
            for p in &projections[1..] {
                let polar = polar_decompose(&(p * &a * &projections[0]), tol)?;
                let v = polar.isometry;
                let r1 = (v.adjoint() * &v - &projections[0]).norm();
                let r2 = (&v * v.adjoint() - p).norm();
                if !tol.accepts(r1.max(r2), 1.0) {
                    return Ok(None);
                }
                column.push(v);
            }
            let units: Vec<Vec<Matrix>> = (0..bn)
                .map(|i| (0..bn).map(|j| &column[i] * column[j].adjoint()).collect())
                .collect();
            for i in 0..bn {
                for s in 0..m {
                    let f = frames[0].column(s);
                    frame_columns.push(&column[i] * f);
                }
            }
            block_dims.push(bn);
            multiplicities.push(m);
            matrix_units.push(units);
        }
        if frame_columns.len() != n {
            return Ok(None);
        }
        let w = Matrix::from_columns(&frame_columns).adjoint();
        let data = StructureData {
            central_projections: central.to_vec(),
            block_dims,
            multiplicities,
            canonical_unitary: w,
            matrix_units,
        };
        if !tol.accepts(self.structure_residual(&data), (self.dim() as f64).sqrt()) {
            return Ok(None);
        }
        Ok(Some(data))
    }

    /// Worst residual among unitarity of `W`, matrix-unit relations and
    /// the conjugated basis leaving the canonical form.
    pub fn structure_residual(&self, data: &StructureData) -> f64 {
        let w = &data.canonical_unitary;
        let mut worst = (w * w.adjoint() - identity(self.n)).norm();
        for units in &data.matrix_units {
            let bn = units.len();
            for i in 0..bn {
                for j in 0..bn {
                    worst = worst.max((units[i][j].adjoint() - &units[j][i]).norm());
                    for k in 0..bn {
                        for l in 0..bn {
                            let lhs = &units[i][j] * &units[k][l];
                            let r = if j == k {
                                (lhs - &units[i][l]).norm()
                            } else {
                                lhs.norm()
                            };
                            worst = worst.max(r);
                        }
                    }
                }
            }
        }
        let blocks = data.blocks();
        for b in &self.basis {
            worst = worst.max(canonical_form_residual(&(w * b * w.adjoint()), &blocks));
        }
        let dims: usize = data.block_dims.iter().map(|d| d * d).sum();
        if dims != self.dim() {
            return f64::INFINITY;
        }
        worst
    }

    /// Smallest central projection `z` with `zx = x`.
    pub fn central_support(&self, x: &Matrix) -> Result<Matrix> {
        self.require(x)?;
        let central = self.minimal_central_projections()?;
        Ok(self.central_support_with(&central, x))
    }

    pub fn central_support_with(&self, central: &[Matrix], x: &Matrix) -> Matrix {
        let scale = x.norm();
        let mut out = zeros(self.n, self.n);
        for z in central {
            if !self.tol.accepts((z * x).norm(), scale) {
                out += z;
            }
        }
        out
    }

    /// Whether `e` is a projection in the algebra with `eAe` abelian.
    pub fn is_abelian_projection(&self, e: &Matrix) -> bool {
        if !self.contains(e) || !is_projection(e, &self.tol) {
            return false;
        }
        let corner: Vec<Matrix> = self.basis.iter().map(|b| e * b * e).collect();
        match numerics::hs_orthonormalize(&corner, &self.tol) {
            Ok(basis) => {
                let mut worst: f64 = 0.0;
                for (i, a) in basis.iter().enumerate() {
                    for b in &basis[i + 1..] {
                        worst = worst.max((a * b - b * a).norm());
                    }
                }
                self.tol.accepts(worst, 1.0)
            }
            Err(_) => false,
        }
    }

    /// Dimension of the corner `eAe`.
    pub fn corner_dim(&self, e: &Matrix) -> Result<usize> {
        let corner: Vec<Matrix> = self.basis.iter().map(|b| e * b * e).collect();
        Ok(numerics::hs_orthonormalize(&corner, &self.tol)?.len())
    }

    /// `Σ_k e_11^(k)`: an abelian projection of full central support.
    pub fn abelian_projection_full(&self, seed: u64) -> Result<Matrix> {
        let data = self.structure(seed)?;
        let e = abelian_projection_from_structure(&data, self.n);
        if self.corner_dim(&e)? != data.num_blocks() || !self.is_abelian_projection(&e) {
            return Err(Error::StructureRecoveryFailed { attempts: 1 });
        }
        Ok(e)
    }

    /// Extends an abelian projection `f` of `pAp` with central support `p`
    /// to an abelian projection of full central support in the algebra.
    pub fn extend_abelian_projection(&self, p: &Matrix, f: &Matrix, seed: u64) -> Result<Matrix> {
        let tol = &self.tol;
        if !self.contains(p) || !is_projection(p, tol) {
            return Err(Error::PreconditionViolated(
                "p is not a projection of the algebra".to_string(),
            ));
        }
        if !self.contains(f) || !is_projection(f, tol) || !tol.accepts((p * f - f).norm(), 1.0) {
            return Err(Error::PreconditionViolated(
                "f is not a subprojection of p in the algebra".to_string(),
            ));
        }
        if !self.is_abelian_projection(f) {
            return Err(Error::PreconditionViolated(
                "f is not abelian in pNp".to_string(),
            ));
        }
        let data = self.structure(seed)?;
        let support_f = self.central_support_with(&data.central_projections, f);
        if !tol.accepts((&support_f * p - p).norm(), 1.0) {
            return Err(Error::PreconditionViolated(
                "central support of f in pNp differs from p".to_string(),
            ));
        }
        let mut e = f.clone();
        for (k, z) in data.central_projections.iter().enumerate() {
            if tol.accepts((z * f).norm(), 1.0) {
                e += data.minimal_projection(k);
            }
        }
        Ok(e)
    }

    /// A partial isometry `v` in the algebra with `v*v = e`, `vv* = f`.
    pub fn mvn_partial_isometry(&self, e: &Matrix, f: &Matrix, seed: u64) -> Result<Matrix> {
        let tol = &self.tol;
        for p in [e, f] {
            if !self.contains(p) || !is_projection(p, tol) {
                return Err(Error::PreconditionViolated(
                    "argument is not a projection of the algebra".to_string(),
                ));
            }
        }
        let data = self.structure(seed)?;
        if !ranks_agree(&data, e, f, tol) {
            return Err(Error::NotEquivalent);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        for _ in 0..MAX_RETRIES {
            let a = self.random_element(&mut rng);
            let v = polar_decompose(&(f * a * e), tol)?.isometry;
            let r = (v.adjoint() * &v - e).norm().max((&v * v.adjoint() - f).norm());
            if tol.accepts(r, 1.0) {
                return Ok(v);
            }
        }
        Err(Error::StructureRecoveryFailed {
            attempts: MAX_RETRIES,
        })
    }
}

pub fn abelian_projection_from_structure(data: &StructureData, n: usize) -> Matrix {
    let mut e = zeros(n, n);
    for k in 0..data.num_blocks() {
        e += data.minimal_projection(k);
    }
    e
}

/// Murray–von Neumann comparison via blockwise rank counts.
pub fn ranks_agree(data: &StructureData, e: &Matrix, f: &Matrix, tol: &Tolerance) -> bool {
    (0..data.num_blocks()).all(|k| {
        let ze = &data.central_projections[k] * e;
        let zf = &data.central_projections[k] * f;
        numerics::numerical_rank(&ze, tol) == numerics::numerical_rank(&zf, tol)
    })
}

/// `x ⊗ 1_m` placed in `M_{n m}` with the tensor factor of `x` first.
pub fn ampliate(x: &Matrix, m: usize) -> Matrix {
    kron(x, &identity(m))
}

/// Scalar matrix `λ·1_n`.
pub fn scalar(n: usize, lambda: f64) -> Matrix {
    identity(n) * re(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{block_diag, diag_real, unit};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    /// Brute-force closure: all products of pairs of span elements until the
    /// rank of the vectorized stack stops growing.
    fn brute_force_dim(gens: &[Matrix], n: usize) -> usize {
        let mut mats = vec![identity(n)];
        for g in gens {
            mats.push(g.clone());
            mats.push(g.adjoint());
        }
        let mut rank = numerics::numerical_rank(&stack_columns(&mats), &tol());
        loop {
            let mut next = mats.clone();
            for a in &mats {
                for b in &mats {
                    next.push(a * b);
                }
            }
            let span = numerics::column_span(&stack_columns(&next), &tol()).unwrap();
            let new_rank = span.ncols();
            mats = (0..new_rank)
                .map(|j| unvec(&span.column(j).into_owned(), n, n))
                .collect();
            if new_rank == rank {
                return rank;
            }
            rank = new_rank;
        }
    }

    #[test]
    fn generate_examples() {
        let a = generate_algebra(&[], 2, tol()).unwrap();
        assert_eq!(a.dim(), 1);
        let a = generate_algebra(&[unit(2, 0, 1)], 2, tol()).unwrap();
        assert_eq!(a.dim(), 4);
        assert_eq!(brute_force_dim(&[unit(2, 0, 1)], 2), 4);
        let d = diag_real(&[1.0, 2.0, 3.0]);
        let a = generate_algebra(&[d.clone()], 3, tol()).unwrap();
        assert_eq!(a.dim(), 3);
        assert_eq!(brute_force_dim(&[d], 3), 3);
    }

    #[test]
    fn from_spanning_set_rejects_non_unital() {
        let err = VNAlgebra::from_spanning_set(&[unit(2, 0, 0)], 2, tol()).unwrap_err();
        assert_eq!(err, Error::NotUnital);
        let err =
            VNAlgebra::from_spanning_set(&[identity(2), unit(2, 0, 1)], 2, tol()).unwrap_err();
        assert!(matches!(err, Error::NotClosed { .. }));
    }

    #[test]
    fn commutant_examples() {
        let full = VNAlgebra::full(2, tol());
        assert_eq!(full.commutant().unwrap().dim(), 1);
        let scal = VNAlgebra::scalars(3, tol());
        assert_eq!(scal.commutant().unwrap().dim(), 9);
        let diag = generate_algebra(&[diag_real(&[1.0, 2.0, 3.0])], 3, tol()).unwrap();
        let comm = diag.commutant().unwrap();
        assert!(comm.distance(&diag) < 1e-8);
    }

    #[test]
    fn commutant_matches_direct_sylvester_nullspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = numerics::random_complex_matrix(&mut rng, 2, 2);
        let g = block_diag(&[x.clone(), x]);
        let a = generate_algebra(&[g.clone()], 4, tol()).unwrap();
        // Oracle: stacked Sylvester maps of the generator and its adjoint.
        let n = 4;
        let one = identity(n);
        let mut rows = Vec::new();
        for h in [g.clone(), g.adjoint()] {
            rows.push(kron(&one, &h) - kron(&h.transpose(), &one));
        }
        let mut stacked = zeros(2 * n * n, n * n);
        stacked.view_mut((0, 0), (n * n, n * n)).copy_from(&rows[0]);
        stacked.view_mut((n * n, 0), (n * n, n * n)).copy_from(&rows[1]);
        let ns = numerics::nullspace(&stacked, &tol()).unwrap();
        let comm = a.commutant().unwrap();
        assert_eq!(comm.dim(), ns.ncols());
        assert!(span_distance(&comm.basis_matrix(), &ns) < 1e-8);
    }

    #[test]
    fn center_examples() {
        assert_eq!(VNAlgebra::full(2, tol()).center().unwrap().dim(), 1);
        let a = generate_algebra(&[unit(5, 0, 1), unit(5, 2, 3), unit(5, 3, 4)], 5, tol()).unwrap();
        assert_eq!(a.dim(), 4 + 9);
        let z = a.center().unwrap();
        assert_eq!(z.dim(), 2);
        let p1 = block_diag(&[identity(2), zeros(3, 3)]);
        let p2 = block_diag(&[zeros(2, 2), identity(3)]);
        assert!(z.contains(&p1) && z.contains(&p2));
        let diag = generate_algebra(&[diag_real(&[1.0, 2.0, 3.0])], 3, tol()).unwrap();
        assert!(diag.center().unwrap().distance(&diag) < 1e-8);
    }

    #[test]
    fn structure_examples() {
        let s = VNAlgebra::full(3, tol()).structure(1).unwrap();
        assert_eq!(s.blocks(), vec![(3, 1)]);
        let s = VNAlgebra::scalars(4, tol()).structure(1).unwrap();
        assert_eq!(s.blocks(), vec![(1, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = numerics::random_complex_matrix(&mut rng, 2, 2);
        let y = numerics::random_complex_matrix(&mut rng, 2, 2);
        let a = generate_algebra(
            &[block_diag(&[x.clone(), x]), block_diag(&[y.clone(), y])],
            4,
            tol(),
        )
        .unwrap();
        assert_eq!(a.dim(), 4);
        let s = a.structure(3).unwrap();
        assert_eq!(s.blocks(), vec![(2, 2)]);
        assert!(a.structure_residual(&s) < 1e-8);
    }

    #[test]
    fn central_support_examples() {
        let m2 = VNAlgebra::full(2, tol());
        let z = m2.central_support(&unit(2, 0, 0)).unwrap();
        assert!((z - identity(2)).norm() < 1e-12);
        let a = generate_algebra(&[unit(4, 0, 1), unit(4, 2, 3)], 4, tol()).unwrap();
        let x = unit(4, 0, 0);
        let z = a.central_support(&x).unwrap();
        let expect = block_diag(&[identity(2), zeros(2, 2)]);
        assert!((z - expect).norm() < 1e-10);
        assert!(a.central_support(&zeros(4, 4)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn abelian_projection_examples() {
        let m2 = VNAlgebra::full(2, tol());
        let e = m2.abelian_projection_full(0).unwrap();
        assert!((e.trace().re - 1.0).abs() < 1e-10);
        let diag = generate_algebra(&[diag_real(&[1.0, 2.0, 3.0])], 3, tol()).unwrap();
        let e = diag.abelian_projection_full(0).unwrap();
        assert!((e - identity(3)).norm() < 1e-10);
        let a = generate_algebra(&[unit(5, 0, 1), unit(5, 2, 3), unit(5, 3, 4)], 5, tol()).unwrap();
        let e = a.abelian_projection_full(0).unwrap();
        assert_eq!(a.corner_dim(&e).unwrap(), 2);
        assert!((e.trace().re - 2.0).abs() < 1e-10);
    }

    #[test]
    fn extend_abelian_projection_examples() {
        let m2 = VNAlgebra::full(2, tol());
        let e = m2
            .extend_abelian_projection(&identity(2), &unit(2, 0, 0), 0)
            .unwrap();
        assert!((e - unit(2, 0, 0)).norm() < 1e-12);

        let a = generate_algebra(&[unit(4, 0, 1), unit(4, 2, 3)], 4, tol()).unwrap();
        let p = block_diag(&[identity(2), zeros(2, 2)]);
        let f = unit(4, 0, 0);
        let e = a.extend_abelian_projection(&p, &f, 0).unwrap();
        assert!((&e * &p - &f).norm() < 1e-10);
        assert!((&p * &e - &f).norm() < 1e-10);
        assert!(a.is_abelian_projection(&e));
        assert!((a.central_support(&e).unwrap() - identity(4)).norm() < 1e-10);

        let e = m2
            .extend_abelian_projection(&unit(2, 0, 0), &unit(2, 0, 0), 0)
            .unwrap();
        assert!((&e * unit(2, 0, 0) - unit(2, 0, 0)).norm() < 1e-12);
        assert!(m2.is_abelian_projection(&e));

        let err = m2
            .extend_abelian_projection(&identity(2), &identity(2), 0)
            .unwrap_err();
        assert!(matches!(err, Error::PreconditionViolated(_)));
    }

    #[test]
    fn mvn_examples() {
        let m2 = VNAlgebra::full(2, tol());
        let v = m2.mvn_partial_isometry(&unit(2, 0, 0), &unit(2, 1, 1), 0).unwrap();
        assert!((v.adjoint() * &v - unit(2, 0, 0)).norm() < 1e-10);
        assert!((&v * v.adjoint() - unit(2, 1, 1)).norm() < 1e-10);

        let a = generate_algebra(&[unit(4, 0, 1), unit(4, 2, 3)], 4, tol()).unwrap();
        let e = unit(4, 0, 0) + unit(4, 2, 2);
        let f = unit(4, 1, 1) + unit(4, 2, 2);
        let v = a.mvn_partial_isometry(&e, &f, 0).unwrap();
        assert!(a.contains(&v));
        assert!((v.adjoint() * &v - &e).norm() < 1e-10);
        assert!((&v * v.adjoint() - &f).norm() < 1e-10);

        let g = block_diag(&[identity(2), zeros(2, 2)]);
        assert_eq!(
            a.mvn_partial_isometry(&unit(4, 0, 0), &g, 0).unwrap_err(),
            Error::NotEquivalent
        );
    }

    #[test]
    fn relative_double_commutant_examples() {
        let m3 = VNAlgebra::full(3, tol());
        assert!(m3.relative_double_commutant(&m3).unwrap().distance(&m3) < 1e-8);

        let n = generate_algebra(&[unit(4, 0, 1), unit(4, 2, 3)], 4, tol()).unwrap();
        let z = n.center().unwrap();
        assert!(n.relative_double_commutant(&z).unwrap().distance(&z) < 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = numerics::random_complex_matrix(&mut rng, 2, 2);
        let y = numerics::random_complex_matrix(&mut rng, 2, 2);
        let mut gens = vec![block_diag(&[x.clone(), x]), block_diag(&[y.clone(), y])];
        gens.extend(z.basis().iter().cloned());
        let m = generate_algebra(&gens, 4, tol()).unwrap();
        let r = n.relative_double_commutant(&m).unwrap();
        assert!(r.distance(&m) < 1e-8);

        let bad = VNAlgebra::full(4, tol());
        assert!(matches!(
            n.relative_double_commutant(&bad),
            Err(Error::InclusionViolated(_))
        ));
    }
}
