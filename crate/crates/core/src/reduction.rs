//! Decomposition over the characters of a central subalgebra.
//!
//! The spectrum of an abelian algebra `Z` is the finite set of its minimal
//! projections `z_k`, with `ω_k(z) z_k = z z_k`. For the module `Ne` the
//! fiber over `ω_k` is `z_k Ne` with the inner product `ω_k((x|y))`, and
//! `π_k(a)` is the compression of left multiplication to it.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert_module::{HilbertModule, ModuleMap, Submodule};
use crate::numerics::{
    self, c, column_span, extend_orthonormal_with, identity, kron, least_squares, nullspace,
    op_norm, re, zeros, Matrix, Tolerance, Vector,
};
use crate::vn_algebra::{generate_algebra, VNAlgebra};

/// Characters of an abelian algebra.
#[derive(Debug, Clone)]
pub struct CharacterSet {
    pub projections: Vec<Matrix>,
}

impl CharacterSet {
    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    /// `ω_k(z)` for every `k`.
    pub fn evaluate(&self, z: &Matrix) -> Vec<Complex64> {
        self.projections
            .iter()
            .map(|p| (z * p).trace() / p.trace())
            .collect()
    }

    pub fn synthesize(&self, values: &[Complex64]) -> Matrix {
        let n = self.projections.first().map_or(0, |p| p.nrows());
        let mut z = zeros(n, n);
        for (p, v) in self.projections.iter().zip(values) {
            z += p * *v;
        }
        z
    }
}

pub fn characters(z: &VNAlgebra) -> Result<CharacterSet> {
    if !z.is_abelian() {
        return Err(Error::NotAbelian);
    }
    Ok(CharacterSet {
        projections: z.minimal_projections_abelian()?,
    })
}

/// The Hilbert space `H_{e,ω_k}` realized inside `z_k Ne`.
#[derive(Debug, Clone)]
pub struct Fiber {
    pub character: usize,
    /// Orthonormal for `(x|y)_k = ω_k(Φ_e(y* x))`.
    pub basis: Vec<Matrix>,
}

impl Fiber {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// One matrix per character.
#[derive(Debug, Clone)]
pub struct FiberedOperator {
    pub blocks: Vec<Matrix>,
}

impl FiberedOperator {
    pub fn max_norm(&self) -> f64 {
        self.blocks.iter().map(op_norm).fold(0.0, f64::max)
    }
}

fn fiber_inner(module: &HilbertModule, k: usize) -> impl Fn(&Matrix, &Matrix) -> Complex64 + '_ {
    let z = &module.central_projections()[k];
    let w = module.weights()[k];
    move |x: &Matrix, y: &Matrix| (z * y.adjoint() * x).trace() / re(w)
}

pub fn fiber_spaces(module: &HilbertModule) -> Result<Vec<Fiber>> {
    let tol = module.tolerance();
    (0..module.num_characters())
        .map(|k| {
            let z = &module.central_projections()[k];
            let parts: Vec<Matrix> = module.basis().iter().map(|b| z * b).collect();
            let mut basis = Vec::new();
            let scale = parts.iter().map(|p| p.norm()).fold(0.0, f64::max);
            extend_orthonormal_with(&mut basis, &parts, scale, tol, fiber_inner(module, k))?;
            Ok(Fiber { character: k, basis })
        })
        .collect()
}

/// `x ↦ (x_ω)_ω`: coordinates of each fiber component.
pub fn project_vector(module: &HilbertModule, fibers: &[Fiber], x: &Matrix) -> Vec<Vector> {
    fibers
        .iter()
        .map(|f| {
            let inner = fiber_inner(module, f.character);
            Vector::from_iterator(f.dim(), f.basis.iter().map(|b| inner(x, b)))
        })
        .collect()
}

/// The unique `x ∈ Ne` with prescribed fiber components.
pub fn synthesize_vector(module: &HilbertModule, fibers: &[Fiber], family: &[Vector]) -> Matrix {
    let n = module.ambient_dim();
    let mut x = zeros(n, n);
    for (f, v) in fibers.iter().zip(family) {
        for (b, c) in f.basis.iter().zip(v.iter()) {
            x += b * *c;
        }
    }
    x
}

/// `π_{e,ω_k}(a)` for every `k`.
pub fn pi_fiber(module: &HilbertModule, fibers: &[Fiber], a: &Matrix) -> Result<FiberedOperator> {
    module.algebra().require(a)?;
    Ok(compress(module, fibers, a))
}

fn compress(module: &HilbertModule, fibers: &[Fiber], a: &Matrix) -> FiberedOperator {
    let blocks = fibers
        .iter()
        .map(|f| {
            let inner = fiber_inner(module, f.character);
            let images: Vec<Matrix> = f.basis.iter().map(|b| a * b).collect();
            Matrix::from_fn(f.dim(), f.dim(), |i, j| inner(&images[j], &f.basis[i]))
        })
        .collect();
    FiberedOperator { blocks }
}

/// The unique `a ∈ N` with `π_{e,ω_k}(a) = family[k]`:
/// `a = Σ_k Σ_{ij} T_k[i,j] u_{ki} u_{kj}*` over the fiber bases.
pub fn synthesize_operator(module: &HilbertModule, fibers: &[Fiber], family: &FiberedOperator) -> Matrix {
    let n = module.ambient_dim();
    let mut a = zeros(n, n);
    for (f, t) in fibers.iter().zip(&family.blocks) {
        for i in 0..f.dim() {
            for j in 0..f.dim() {
                a += &f.basis[i] * f.basis[j].adjoint() * t[(i, j)];
            }
        }
    }
    a
}

/// Per-character pair `(π_ω(M)″, π_ω(M′ ∩ N)′)`.
#[derive(Debug, Clone)]
pub struct FiberAlgebras {
    pub character: usize,
    pub fiber_dim: usize,
    pub bicommutant: VNAlgebra,
    pub relative: VNAlgebra,
}

fn check_reduction_inputs(m: &VNAlgebra, z: &VNAlgebra, module: &HilbertModule) -> Result<()> {
    let n = module.algebra();
    if !m.is_subalgebra_of(n) {
        return Err(Error::InclusionViolated(
            "M is not contained in N".to_string(),
        ));
    }
    if !z.is_subalgebra_of(&m.center()?) {
        return Err(Error::InclusionViolated(
            "Z is not contained in the centre of M".to_string(),
        ));
    }
    if !module.center().is_subalgebra_of(z) || !z.is_subalgebra_of(module.center()) {
        return Err(Error::InclusionViolated(
            "centre of N differs from Z".to_string(),
        ));
    }
    Ok(())
}

fn fiber_image_algebra(
    module: &HilbertModule,
    fiber: &Fiber,
    alg: &VNAlgebra,
    tol: Tolerance,
) -> Result<VNAlgebra> {
    let gens: Vec<Matrix> = alg
        .basis()
        .iter()
        .map(|b| compress(module, std::slice::from_ref(fiber), b).blocks.remove(0))
        .collect();
    generate_algebra(&gens, fiber.dim(), tol)
}

pub fn decompose_along(m: &VNAlgebra, z: &VNAlgebra, module: &HilbertModule) -> Result<Vec<FiberAlgebras>> {
    check_reduction_inputs(m, z, module)?;
    let tol = *module.tolerance();
    let fibers = fiber_spaces(module)?;
    let relative = module.algebra().relative_commutant(m)?;
    fibers
        .iter()
        .map(|f| {
            let image = fiber_image_algebra(module, f, m, tol)?;
            let bicommutant = image.commutant()?.commutant()?;
            let rel_image = fiber_image_algebra(module, f, &relative, tol)?;
            let relative = rel_image.commutant()?;
            Ok(FiberAlgebras {
                character: f.character,
                fiber_dim: f.dim(),
                bicommutant,
                relative,
            })
        })
        .collect()
}

/// Whether `a ∈ N` lies in `M`, decided fiberwise: `π_ω(a) ∈ π_ω(M)″` for
/// every character.
pub fn fiber_membership(module: &HilbertModule, decomposition: &[FiberAlgebras], a: &Matrix) -> Result<bool> {
    let fibers = fiber_spaces(module)?;
    let pieces = pi_fiber(module, &fibers, a)?;
    Ok(decomposition
        .iter()
        .zip(&pieces.blocks)
        .all(|(d, block)| d.fiber_dim == 0 || d.bicommutant.contains(block)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub character: usize,
    pub fiber_dim: usize,
    pub bicommutant_dim: usize,
    pub relative_dim: usize,
    pub distance: f64,
    pub equal: bool,
}

/// Compares `π_ω(M)″` with `π_ω(M′ ∩ N)′` in every fiber. Reports only.
pub fn fiber_bicommutant_gap(m: &VNAlgebra, z: &VNAlgebra, module: &HilbertModule) -> Result<Vec<GapReport>> {
    let decomposition = decompose_along(m, z, module)?;
    Ok(decomposition
        .iter()
        .map(|d| {
            let distance = d.bicommutant.distance(&d.relative);
            GapReport {
                character: d.character,
                fiber_dim: d.fiber_dim,
                bicommutant_dim: d.bicommutant.dim(),
                relative_dim: d.relative.dim(),
                distance,
                equal: d.bicommutant.dim() == d.relative.dim() && distance < 1e-8,
            }
        })
        .collect())
}

/// `ρ(x) = R x R*` keeping one copy of every irreducible block, so that
/// `ρ(N)′ = ρ(Z(N))`.
#[derive(Debug, Clone)]
pub struct MasaRepresentation {
    /// `copies[k][s]` maps onto copy `s` of block `k` (`n_k x n`).
    copies: Vec<Vec<Matrix>>,
    pub isometry: Matrix,
}

impl MasaRepresentation {
    pub fn dim(&self) -> usize {
        self.isometry.nrows()
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        &self.isometry * x * self.isometry.adjoint()
    }

    /// Offsets of each block inside the representation space.
    fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for copies in &self.copies {
            let len = copies[0].nrows();
            out.push(start..start + len);
            start += len;
        }
        out
    }

    /// Preimage of `y ∈ ρ(N)`: `Σ_k Σ_s R_{ks}* y_k R_{ks}`.
    pub fn invert(&self, y: &Matrix) -> Matrix {
        let n = self.isometry.ncols();
        let mut x = zeros(n, n);
        for (copies, range) in self.copies.iter().zip(self.block_ranges()) {
            let yk = y.view((range.start, range.start), (range.len(), range.len()));
            for r in copies {
                x += r.adjoint() * yk * r;
            }
        }
        x
    }
}

pub fn spatial_masa_representation(module: &HilbertModule) -> MasaRepresentation {
    let data = module.structure();
    let w = &data.canonical_unitary;
    let mut copies = Vec::new();
    let mut rows = Vec::new();
    let mut offset = 0;
    for (&bn, &m) in data.block_dims.iter().zip(&data.multiplicities) {
        let mut per_copy = Vec::new();
        for s in 0..m {
            let idx: Vec<usize> = (0..bn).map(|i| offset + i * m + s).collect();
            let r = w.select_rows(idx.iter());
            per_copy.push(r);
        }
        rows.push(per_copy[0].clone());
        copies.push(per_copy);
        offset += bn * m;
    }
    let d: usize = data.block_dims.iter().sum();
    let n = module.ambient_dim();
    let mut isometry = zeros(d, n);
    let mut r0 = 0;
    for r in rows {
        isometry.view_mut((r0, 0), (r.nrows(), n)).copy_from(&r);
        r0 += r.nrows();
    }
    MasaRepresentation { copies, isometry }
}

/// The data of the doubled algebra `N = π(Z)′` on `H₁ ⊕ H₂`.
#[derive(Debug, Clone)]
pub struct DoubledAlgebra {
    pub module1: Arc<HilbertModule>,
    pub module2: Arc<HilbertModule>,
    pub rho1: MasaRepresentation,
    pub rho2: MasaRepresentation,
    /// Character `k` of the first centre matches `pairing[k]` of the second.
    pub pairing: Vec<usize>,
    /// `V: H₁ → H₂` with `V*V = ρ₁(e₁)`, `VV* = ρ₂(e₂)`.
    pub v: Matrix,
    /// `π(z_k) = ρ₁(z¹_k) ⊕ ρ₂(z²_{σk})`.
    pub central_action: Vec<Matrix>,
    pub algebra: VNAlgebra,
    pub e: Matrix,
    intertwiners: OnceLock<Vec<Matrix>>,
}

fn phase_normalized(v: &Matrix, tol: &Tolerance) -> Matrix {
    let threshold = 1e3 * tol.cutoff(1.0);
    for i in 0..v.nrows() {
        let a = v[(i, 0)];
        if a.norm() > threshold {
            return v * (a.conj() / re(a.norm()));
        }
    }
    v.clone()
}

pub fn doubled_algebra(
    module1: Arc<HilbertModule>,
    module2: Arc<HilbertModule>,
    pairing: &[usize],
) -> Result<DoubledAlgebra> {
    let tol = *module1.tolerance();
    let count = module1.num_characters();
    let mut seen = vec![false; module2.num_characters()];
    if count != module2.num_characters() || pairing.len() != count {
        return Err(Error::CharacterMismatch);
    }
    for &s in pairing {
        if s >= seen.len() || seen[s] {
            return Err(Error::CharacterMismatch);
        }
        seen[s] = true;
    }
    let rho1 = spatial_masa_representation(&module1);
    let rho2 = spatial_masa_representation(&module2);
    let (d1, d2) = (rho1.dim(), rho2.dim());
    let mut v = zeros(d2, d1);
    let mut central_action = Vec::with_capacity(count);
    for (k, &sk) in pairing.iter().enumerate() {
        let z1 = &module1.central_projections()[k];
        let z2 = &module2.central_projections()[sk];
        let r1 = rho1.apply(&(z1 * module1.e()));
        let r2 = rho2.apply(&(z2 * module2.e()));
        let xi1 = column_span(&r1, &tol)?;
        let xi2 = column_span(&r2, &tol)?;
        if xi1.ncols() != 1 || xi2.ncols() != 1 {
            return Err(Error::CharacterMismatch);
        }
        let xi1 = phase_normalized(&xi1, &tol);
        let xi2 = phase_normalized(&xi2, &tol);
        v += &xi2 * xi1.adjoint();
        central_action.push(numerics::block_diag(&[rho1.apply(z1), rho2.apply(z2)]));
    }
    let algebra = generate_algebra(&central_action, d1 + d2, tol)?.commutant()?;
    let e = numerics::block_diag(&[rho1.apply(module1.e()), rho2.apply(module2.e())]);
    let mut e = e;
    e.view_mut((d1, 0), (d2, d1)).copy_from(&v);
    e.view_mut((0, d1), (d1, d2)).copy_from(&v.adjoint());
    let e = e * re(0.5);
    let doubled = DoubledAlgebra {
        module1,
        module2,
        rho1,
        rho2,
        pairing: pairing.to_vec(),
        v,
        central_action,
        algebra,
        e,
        intertwiners: OnceLock::new(),
    };
    let r = doubled.projection_residual();
    if !tol.accepts(r, 1.0) || !doubled.algebra.is_abelian_projection(&doubled.e) {
        return Err(Error::HypothesisFailed {
            name: "doubled abelian projection".to_string(),
            residual: r,
        });
    }
    Ok(doubled)
}

impl DoubledAlgebra {
    pub fn dims(&self) -> (usize, usize) {
        (self.rho1.dim(), self.rho2.dim())
    }

    /// `max(‖e² − e‖, ‖e − e*‖)`.
    pub fn projection_residual(&self) -> f64 {
        (&self.e * &self.e - &self.e)
            .norm()
            .max((&self.e - self.e.adjoint()).norm())
    }

    /// Residual of `eNe` being abelian.
    pub fn abelian_residual(&self) -> f64 {
        let corner: Vec<Matrix> = self
            .algebra
            .basis()
            .iter()
            .map(|b| &self.e * b * &self.e)
            .collect();
        let Ok(corner) = numerics::hs_orthonormalize(&corner, self.module1.tolerance()) else {
            return f64::INFINITY;
        };
        let mut worst: f64 = 0.0;
        for (i, a) in corner.iter().enumerate() {
            for b in &corner[i + 1..] {
                worst = worst.max((a * b - b * a).norm());
            }
        }
        worst
    }

    /// Distance of the central support of `e` from the identity.
    pub fn support_residual(&self) -> f64 {
        let d = self.e.nrows();
        let mut support = zeros(d, d);
        for z in &self.central_action {
            if (z * &self.e).norm() > 1e-6 {
                support += z;
            }
        }
        (support - identity(d)).norm()
    }

    /// `[[ρ₁(x₁), ρ₁(x₁)V*], [ρ₂(x₂)V, ρ₂(x₂)]]`.
    pub fn block_element(&self, x1: &Matrix, x2: &Matrix) -> Matrix {
        let (d1, d2) = self.dims();
        let r1 = self.rho1.apply(x1);
        let r2 = self.rho2.apply(x2);
        let mut out = zeros(d1 + d2, d1 + d2);
        out.view_mut((0, 0), (d1, d1)).copy_from(&r1);
        out.view_mut((0, d1), (d1, d2)).copy_from(&(&r1 * self.v.adjoint()));
        out.view_mut((d1, 0), (d2, d1)).copy_from(&(&r2 * &self.v));
        out.view_mut((d1, d1), (d2, d2)).copy_from(&r2);
        out
    }

    /// `√2 ‖z₁ + z₂‖^{1/2}` where `x_j* x_j = π_j(z_j) e_j`.
    pub fn block_norm_formula(&self, x1: &Matrix, x2: &Matrix) -> f64 {
        let a = self.module1.inner_values(x1, x1);
        let b = self.module2.inner_values(x2, x2);
        let top = self
            .pairing
            .iter()
            .enumerate()
            .map(|(k, &sk)| (a[k].re + b[sk].re).max(0.0))
            .fold(0.0, f64::max);
        std::f64::consts::SQRT_2 * top.sqrt()
    }

    /// Basis of `(N₁,π₁; N₂,π₂)`: operators `T: H₁ → H₂` intertwining the
    /// two central actions.
    pub fn intertwiner_basis(&self) -> Result<Vec<Matrix>> {
        if let Some(basis) = self.intertwiners.get() {
            return Ok(basis.clone());
        }
        let basis = self.compute_intertwiner_basis()?;
        Ok(self.intertwiners.get_or_init(|| basis).clone())
    }

    fn compute_intertwiner_basis(&self) -> Result<Vec<Matrix>> {
        let tol = *self.module1.tolerance();
        let (d1, d2) = self.dims();
        let block = d1 * d2;
        let count = self.pairing.len();
        let mut system = zeros(block * count, block);
        for (k, &sk) in self.pairing.iter().enumerate() {
            let p1 = self.rho1.apply(&self.module1.central_projections()[k]);
            let p2 = self.rho2.apply(&self.module2.central_projections()[sk]);
            let op = kron(&p1.transpose(), &identity(d2)) - kron(&identity(d1), &p2);
            system.view_mut((k * block, 0), (block, block)).copy_from(&op);
        }
        let ns = nullspace(&system, &tol)?;
        Ok((0..ns.ncols())
            .map(|j| Matrix::from_column_slice(d2, d1, ns.column(j).as_slice()))
            .collect())
    }

    pub fn intertwiner_residual(&self, t: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &sk) in self.pairing.iter().enumerate() {
            let p1 = self.rho1.apply(&self.module1.central_projections()[k]);
            let p2 = self.rho2.apply(&self.module2.central_projections()[sk]);
            worst = worst.max((t * p1 - p2 * t).norm());
        }
        worst
    }

    fn require_intertwiner(&self, t: &Matrix) -> Result<()> {
        let (d1, d2) = self.dims();
        if t.shape() != (d2, d1) {
            return Err(Error::DimensionMismatch {
                expected: d2,
                found: t.nrows(),
            });
        }
        let residual = self.intertwiner_residual(t);
        if !self.module1.tolerance().accepts(residual, t.norm().max(1.0)) {
            return Err(Error::NotIntertwiner { residual });
        }
        Ok(())
    }

    /// `ℒ(T)` with `ρ₂(ℒ(T) x₁) = T ρ₁(x₁) V*`, between the full modules.
    pub fn module_map_from_intertwiner(&self, t: &Matrix) -> Result<ModuleMap> {
        let s1 = Arc::new(self.module1.full_submodule());
        let s2 = Arc::new(self.module2.full_submodule());
        self.module_map_between_submodules(t, &s1, &s2)
    }

    /// Restricted version `𝔛₁ → 𝔛₂` for `T ∈ ρ₂(p₂)(N₁,π₁;N₂,π₂)ρ₁(p₁)`.
    pub fn module_map_between_submodules(
        &self,
        t: &Matrix,
        sub1: &Arc<Submodule>,
        sub2: &Arc<Submodule>,
    ) -> Result<ModuleMap> {
        self.require_intertwiner(t)?;
        let vstar = self.v.adjoint();
        Ok(ModuleMap::from_fn(sub1.clone(), sub2.clone(), false, |x1| {
            self.rho2.invert(&(t * self.rho1.apply(x1) * &vstar))
        })
        .with_pairing(self.pairing.clone()))
    }

    /// `ℒ*(S)` with `ρ₁(ℒ*(S) x₂) = S ρ₂(x₂) V` for `S ∈ (N₂,π₂; N₁,π₁)`.
    pub fn reverse_module_map(&self, s: &Matrix) -> Result<ModuleMap> {
        self.require_intertwiner(&s.adjoint())?;
        let s1 = Arc::new(self.module1.full_submodule());
        let s2 = Arc::new(self.module2.full_submodule());
        let inverse_pairing = {
            let mut inv = vec![0; self.pairing.len()];
            for (k, &sk) in self.pairing.iter().enumerate() {
                inv[sk] = k;
            }
            inv
        };
        Ok(ModuleMap::from_fn(s2, s1, false, |x2| {
            self.rho1.invert(&(s * self.rho2.apply(x2) * &self.v))
        })
        .with_pairing(inverse_pairing))
    }

    /// The intertwiner `T` with `ℒ(T) = map`, by a linear solve over the
    /// intertwiner basis.
    pub fn intertwiner_from_module_map(&self, map: &ModuleMap) -> Result<Matrix> {
        let tol = *self.module1.tolerance();
        let basis = self.intertwiner_basis()?;
        let (d1, d2) = self.dims();
        if basis.is_empty() {
            return Ok(zeros(d2, d1));
        }
        let vstar = self.v.adjoint();
        let src = map.source.basis();
        let rows = d2 * d2 * src.len();
        let mut system = zeros(rows, basis.len());
        let mut rhs = zeros(rows, 1);
        for (j, x1) in src.iter().enumerate() {
            let r1 = self.rho1.apply(x1);
            for (l, t) in basis.iter().enumerate() {
                let col = t * &r1 * &vstar;
                system
                    .view_mut((j * d2 * d2, l), (d2 * d2, 1))
                    .copy_from_slice(col.as_slice());
            }
            let image = self.rho2.apply(&map.apply(x1));
            rhs.view_mut((j * d2 * d2, 0), (d2 * d2, 1))
                .copy_from_slice(image.as_slice());
        }
        let (alpha, residual) = least_squares(&system, &rhs, &tol)?;
        if !tol.accepts(residual, rhs.norm().max(1.0)) {
            return Err(Error::NotIntertwiner { residual });
        }
        let mut t = zeros(d2, d1);
        for (l, b) in basis.iter().enumerate() {
            t += b * alpha[(l, 0)];
        }
        Ok(t)
    }

    /// Splits a block operator on `H₁ ⊕ H₂` into its four corners.
    pub fn corners(&self, x: &Matrix) -> [[Matrix; 2]; 2] {
        let (d1, d2) = self.dims();
        [
            [
                x.view((0, 0), (d1, d1)).into_owned(),
                x.view((0, d1), (d1, d2)).into_owned(),
            ],
            [
                x.view((d1, 0), (d2, d1)).into_owned(),
                x.view((d1, d1), (d2, d2)).into_owned(),
            ],
        ]
    }

    /// Residual of each corner `T_jk` intertwining `π_k` with `π_j`.
    pub fn corner_intertwining_residual(&self, x: &Matrix) -> f64 {
        let [[t11, t12], [t21, t22]] = self.corners(x);
        let mut worst: f64 = 0.0;
        for (k, &sk) in self.pairing.iter().enumerate() {
            let p1 = self.rho1.apply(&self.module1.central_projections()[k]);
            let p2 = self.rho2.apply(&self.module2.central_projections()[sk]);
            worst = worst
                .max((&t11 * &p1 - &p1 * &t11).norm())
                .max((&t12 * &p2 - &p1 * &t12).norm())
                .max((&t21 * &p1 - &p2 * &t21).norm())
                .max((&t22 * &p2 - &p2 * &t22).norm());
        }
        worst
    }
}

/// Character values as a complex vector, for reporting.
pub fn values_real(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| v.re).collect()
}

pub fn imaginary_unit() -> Complex64 {
    c(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{block_diag, diag_real, unit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn m2_plus_m3() -> VNAlgebra {
        generate_algebra(&[unit(5, 0, 1), unit(5, 2, 3), unit(5, 3, 4)], 5, tol()).unwrap()
    }

    #[test]
    fn character_examples() {
        let chars = characters(&VNAlgebra::scalars(3, tol())).unwrap();
        assert_eq!(chars.len(), 1);
        assert!((chars.evaluate(&(identity(3) * c(2.0, 1.0)))[0] - c(2.0, 1.0)).norm() < 1e-12);
        let diag = generate_algebra(&[diag_real(&[1.0, 2.0, 3.0])], 3, tol()).unwrap();
        let chars = characters(&diag).unwrap();
        assert_eq!(chars.len(), 3);
        let vals = chars.evaluate(&diag_real(&[5.0, 6.0, 7.0]));
        let mut got: Vec<f64> = values_real(&vals);
        got.sort_by(f64::total_cmp);
        assert!((got[0] - 5.0).abs() < 1e-10 && (got[2] - 7.0).abs() < 1e-10);

        let z = m2_plus_m3().center().unwrap();
        let chars = characters(&z).unwrap();
        let x = block_diag(&[identity(2), identity(3) * re(2.0)]);
        let vals = values_real(&chars.evaluate(&x));
        assert!((vals[0] - 1.0).abs() < 1e-10);
        assert!((vals[1] - 2.0).abs() < 1e-10);
        assert_eq!(characters(&VNAlgebra::full(2, tol())).unwrap_err(), Error::NotAbelian);
    }

    #[test]
    fn fiber_examples() {
        let module = HilbertModule::with_canonical_projection(VNAlgebra::full(2, tol()), 0).unwrap();
        let fibers = fiber_spaces(&module).unwrap();
        assert_eq!(fibers.len(), 1);
        assert_eq!(fibers[0].dim(), 2);

        let module = HilbertModule::with_canonical_projection(m2_plus_m3(), 0).unwrap();
        let fibers = fiber_spaces(&module).unwrap();
        let dims: Vec<usize> = fibers.iter().map(|f| f.dim()).collect();
        assert_eq!(dims, vec![2, 3]);
        let parts = project_vector(&module, &fibers, module.e());
        for p in parts {
            assert!((p.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pi_fiber_examples() {
        let module = HilbertModule::with_canonical_projection(m2_plus_m3(), 0).unwrap();
        let fibers = fiber_spaces(&module).unwrap();
        let id = pi_fiber(&module, &fibers, &identity(5)).unwrap();
        for b in &id.blocks {
            assert!((b - identity(b.nrows())).norm() < 1e-10);
        }
        let z = block_diag(&[identity(2) * re(3.0), identity(3) * re(-1.0)]);
        let pz = pi_fiber(&module, &fibers, &z).unwrap();
        assert!((&pz.blocks[0] - identity(2) * re(3.0)).norm() < 1e-10);
        assert!((&pz.blocks[1] + identity(3)).norm() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = module.algebra().random_element(&mut rng);
        let pa = pi_fiber(&module, &fibers, &a).unwrap();
        assert!((pa.max_norm() - op_norm(&a)).abs() < 1e-8);
    }

    #[test]
    fn synthesis_examples() {
        let module = HilbertModule::with_canonical_projection(m2_plus_m3(), 0).unwrap();
        let fibers = fiber_spaces(&module).unwrap();
        let zero: Vec<Vector> = fibers.iter().map(|f| Vector::zeros(f.dim())).collect();
        assert!(synthesize_vector(&module, &fibers, &zero).norm() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let full = Arc::new(module.clone()).full_submodule();
        let x = full.random_element(&mut rng);
        let parts = project_vector(&module, &fibers, &x);
        assert!((synthesize_vector(&module, &fibers, &parts) - &x).norm() < 1e-9);
        let mut single: Vec<Vector> = zero.clone();
        single[1][0] = numerics::ONE;
        let y = synthesize_vector(&module, &fibers, &single);
        let z0 = &module.central_projections()[0];
        assert!((z0 * &y).norm() < 1e-12);

        let a = module.algebra().random_element(&mut rng);
        let pa = pi_fiber(&module, &fibers, &a).unwrap();
        assert!((synthesize_operator(&module, &fibers, &pa) - &a).norm() < 1e-8);
        let ones = FiberedOperator {
            blocks: fibers.iter().map(|f| identity(f.dim())).collect(),
        };
        assert!((synthesize_operator(&module, &fibers, &ones) - identity(5)).norm() < 1e-9);
        let scal = FiberedOperator {
            blocks: vec![identity(2) * re(2.0), identity(3) * re(5.0)],
        };
        let expect = block_diag(&[identity(2) * re(2.0), identity(3) * re(5.0)]);
        assert!((synthesize_operator(&module, &fibers, &scal) - expect).norm() < 1e-9);
    }

    #[test]
    fn decompose_examples() {
        let m = m2_plus_m3();
        let z = m.center().unwrap();
        let module = HilbertModule::with_canonical_projection(z.commutant().unwrap(), 0).unwrap();
        let parts = decompose_along(&m, &z, &module).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].bicommutant.dim(), 4);
        assert_eq!(parts[1].bicommutant.dim(), 9);
        let gaps = fiber_bicommutant_gap(&m, &z, &module).unwrap();
        assert!(gaps.iter().all(|g| g.equal));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = m.random_element(&mut rng);
        assert!(fiber_membership(&module, &parts, &a).unwrap());
    }

    #[test]
    fn masa_representation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = numerics::random_complex_matrix(&mut rng, 3, 3);
        let y = numerics::random_complex_matrix(&mut rng, 3, 3);
        let n = generate_algebra(
            &[kron(&x, &identity(2)), kron(&y, &identity(2))],
            6,
            tol(),
        )
        .unwrap();
        let module = HilbertModule::with_canonical_projection(n.clone(), 0).unwrap();
        let rho = spatial_masa_representation(&module);
        assert_eq!(rho.dim(), 3);
        let image: Vec<Matrix> = n.basis().iter().map(|b| rho.apply(b)).collect();
        let img = generate_algebra(&image, 3, tol()).unwrap();
        assert_eq!(img.commutant().unwrap().dim(), 1);
        let a = n.random_element(&mut rng);
        assert!((rho.invert(&rho.apply(&a)) - &a).norm() < 1e-9);
        let b = n.random_element(&mut rng);
        assert!((rho.apply(&(&a * &b)) - rho.apply(&a) * rho.apply(&b)).norm() < 1e-9);
    }

    #[test]
    fn doubled_algebra_examples() {
        let n = VNAlgebra::full(2, tol());
        let m1 = Arc::new(HilbertModule::new(n.clone(), unit(2, 0, 0), 0).unwrap());
        let m2 = Arc::new(HilbertModule::new(n, unit(2, 1, 1), 0).unwrap());
        let d = doubled_algebra(m1.clone(), m2.clone(), &[0]).unwrap();
        assert_eq!(d.algebra.dim(), 16);
        assert!(d.projection_residual() < 1e-12);
        assert!((d.e.trace().re - 1.0).abs() < 1e-12);
        assert!(d.abelian_residual() < 1e-10);
        assert!(d.support_residual() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x1 = Arc::new(m1.as_ref().clone()).full_submodule().random_element(&mut rng);
        let x2 = zeros(2, 2);
        let block = d.block_element(&x1, &x2);
        let expect = std::f64::consts::SQRT_2 * op_norm(&x1);
        assert!((op_norm(&block) - expect).abs() < 1e-9);
        assert!((d.block_norm_formula(&x1, &x2) - expect).abs() < 1e-9);

        let t = d.v.clone();
        let map = d.module_map_from_intertwiner(&t).unwrap();
        assert!((map.norm() - 1.0).abs() < 1e-9);
        let zero = d.module_map_from_intertwiner(&zeros(2, 2)).unwrap();
        assert!(zero.action.norm() < 1e-14);
        assert_eq!(
            doubled_algebra(m1.clone(), m2, &[1]).unwrap_err(),
            Error::CharacterMismatch
        );
    }
}
