//! The Hilbert `Z`-module `Ne` and its module maps.
//!
//! `N` is any finite-dimensional von Neumann algebra (always type I), `Z` its
//! centre and `e` an abelian projection of full central support. The
//! `Z`-valued inner product is `(x|y) = Φ_e(y* x)` where `exe = Φ_e(x) e`.
//! Module maps are stored as matrices over Hilbert–Schmidt orthonormal bases;
//! antilinear maps act on conjugated coordinates.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    self, column_span, conj, hs_inner, hs_orthonormalize, identity, is_projection, least_squares,
    nullspace, op_norm, polar_decompose, re, stack_columns, zeros, Matrix, Tolerance, Vector,
};
use crate::vn_algebra::{ranks_agree, StructureData, VNAlgebra};

const MAX_RETRIES: usize = 16;

#[derive(Debug, Clone)]
pub struct HilbertModule {
    algebra: VNAlgebra,
    center: VNAlgebra,
    structure: StructureData,
    e: Matrix,
    /// `tr(z_k e)` per character.
    weights: Vec<f64>,
    basis: Vec<Matrix>,
    /// Partial isometries `v` with `v*v = z_k e` and `Σ v v* = 1`.
    frame: Vec<Matrix>,
    tol: Tolerance,
}

impl HilbertModule {
    pub fn new(algebra: VNAlgebra, e: Matrix, seed: u64) -> Result<Self> {
        let tol = *algebra.tolerance();
        if !algebra.is_abelian_projection(&e) {
            return Err(Error::PreconditionViolated(
                "e is not an abelian projection of N".to_string(),
            ));
        }
        let structure = algebra.structure(seed)?;
        let n = algebra.ambient_dim();
        let support = algebra.central_support_with(&structure.central_projections, &e);
        if !tol.accepts((support - identity(n)).norm(), 1.0) {
            return Err(Error::PreconditionViolated(
                "e does not have full central support".to_string(),
            ));
        }
        let center = algebra.center()?;
        let weights: Vec<f64> = structure
            .central_projections
            .iter()
            .map(|z| (z * &e).trace().re)
            .collect();
        let right: Vec<Matrix> = algebra.basis().iter().map(|b| b * &e).collect();
        let basis = hs_orthonormalize(&right, &tol)?;
        let expected: usize = structure.block_dims.iter().sum();
        if basis.len() != expected {
            return Err(Error::StructureRecoveryFailed { attempts: 1 });
        }
        let frame = build_frame(&algebra, &structure, &e, seed)?;
        Ok(HilbertModule {
            algebra,
            center,
            structure,
            e,
            weights,
            basis,
            frame,
            tol,
        })
    }

    /// Module over `N` built on the abelian projection `Σ_k e_11^(k)`.
    pub fn with_canonical_projection(algebra: VNAlgebra, seed: u64) -> Result<Self> {
        let e = algebra.abelian_projection_full(seed)?;
        Self::new(algebra, e, seed)
    }

    pub fn algebra(&self) -> &VNAlgebra {
        &self.algebra
    }

    pub fn center(&self) -> &VNAlgebra {
        &self.center
    }

    pub fn structure(&self) -> &StructureData {
        &self.structure
    }

    pub fn central_projections(&self) -> &[Matrix] {
        &self.structure.central_projections
    }

    pub fn num_characters(&self) -> usize {
        self.weights.len()
    }

    pub fn e(&self) -> &Matrix {
        &self.e
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> &[Matrix] {
        &self.basis
    }

    pub fn frame(&self) -> &[Matrix] {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.algebra.ambient_dim()
    }

    pub fn tolerance(&self) -> &Tolerance {
        &self.tol
    }

    pub fn coords(&self, x: &Matrix) -> Vector {
        coords_in(&self.basis, x)
    }

    pub fn element(&self, coords: &Vector) -> Matrix {
        element_of(&self.basis, coords, self.ambient_dim())
    }

    pub fn membership_residual(&self, x: &Matrix) -> f64 {
        (x - self.element(&self.coords(x))).norm()
    }

    pub fn contains(&self, x: &Matrix) -> bool {
        x.shape() == (self.ambient_dim(), self.ambient_dim())
            && self.tol.accepts(self.membership_residual(x), x.norm().max(1.0))
    }

    pub fn require(&self, x: &Matrix) -> Result<()> {
        let residual = if x.shape() == (self.ambient_dim(), self.ambient_dim()) {
            self.membership_residual(x)
        } else {
            f64::INFINITY
        };
        if self.tol.accepts(residual, x.norm().max(1.0)) {
            Ok(())
        } else {
            Err(Error::NotInModule { residual })
        }
    }

    /// `ω_k(z)` for each character: the scalar with `z z_k = ω_k(z) z_k`.
    pub fn character_values(&self, z: &Matrix) -> Vec<Complex64> {
        self.central_projections()
            .iter()
            .map(|p| (z * p).trace() / p.trace())
            .collect()
    }

    pub fn central_element(&self, values: &[Complex64]) -> Matrix {
        let n = self.ambient_dim();
        let mut z = zeros(n, n);
        for (p, v) in self.central_projections().iter().zip(values) {
            z += p * *v;
        }
        z
    }

    /// The unique `z ∈ Z` with `exe = ze`.
    pub fn conditional_expectation(&self, x: &Matrix) -> Result<Matrix> {
        self.algebra.require(x)?;
        let exe = &self.e * x * &self.e;
        let values: Vec<Complex64> = self
            .central_projections()
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| (z * &exe).trace() / re(*w))
            .collect();
        Ok(self.central_element(&values))
    }

    /// `ω_k((x|y))` for each character.
    pub fn inner_values(&self, x: &Matrix, y: &Matrix) -> Vec<Complex64> {
        let yx = y.adjoint() * x;
        self.central_projections()
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| (z * &yx).trace() / re(*w))
            .collect()
    }

    /// `(x|y) = Φ_e(y* x) ∈ Z`.
    pub fn inner(&self, x: &Matrix, y: &Matrix) -> Result<Matrix> {
        self.require(x)?;
        self.require(y)?;
        Ok(self.central_element(&self.inner_values(x, y)))
    }

    /// `‖(x|x)‖^{1/2}`.
    pub fn module_norm(&self, x: &Matrix) -> f64 {
        self.inner_values(x, x)
            .iter()
            .map(|v| v.re.max(0.0))
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn full_submodule(self: &Arc<Self>) -> Submodule {
        let n = self.ambient_dim();
        Submodule::from_parts(self.clone(), identity(n), self.basis.clone())
    }

    /// `p_𝔛` and `𝔛 = p_𝔛 Ne` for the `Z`-span `𝔛` of `elements`.
    pub fn submodule_projection(self: &Arc<Self>, elements: &[Matrix]) -> Result<Submodule> {
        let tol = &self.tol;
        for x in elements {
            self.require(x)?;
        }
        let n = self.ambient_dim();
        let zspan: Vec<Matrix> = elements
            .iter()
            .flat_map(|x| self.central_projections().iter().map(move |z| z * x))
            .collect();
        let span = hs_orthonormalize(&zspan, tol)?;
        let p = if zspan.is_empty() {
            zeros(n, n)
        } else {
            let mut cols = zeros(n, n * zspan.len());
            for (i, x) in zspan.iter().enumerate() {
                cols.view_mut((0, i * n), (n, n)).copy_from(x);
            }
            let q = column_span(&cols, tol)?;
            &q * q.adjoint()
        };
        let residual_n = self.algebra.membership_residual(&p);
        if !tol.accepts(residual_n, 1.0) {
            return Err(Error::NotASubmodule {
                residual: residual_n,
            });
        }
        let compressed: Vec<Matrix> = self.basis.iter().map(|b| &p * b).collect();
        let pne = hs_orthonormalize(&compressed, tol)?;
        let distance = span_distance_of(&pne, &span, n);
        if !tol.accepts(distance, 1.0) {
            return Err(Error::NotASubmodule { residual: distance });
        }
        Ok(Submodule::from_parts(self.clone(), p, pne))
    }

    /// Submodule `pNe` for a projection `p ∈ N`.
    pub fn submodule_of_projection(self: &Arc<Self>, p: &Matrix) -> Result<Submodule> {
        self.algebra.require(p)?;
        if !is_projection(p, &self.tol) {
            return Err(Error::PreconditionViolated(
                "p is not a projection".to_string(),
            ));
        }
        let compressed: Vec<Matrix> = self.basis.iter().map(|b| p * b).collect();
        let basis = hs_orthonormalize(&compressed, &self.tol)?;
        Ok(Submodule::from_parts(self.clone(), p.clone(), basis))
    }

    /// Left multiplication `x ↦ ax` on `Ne`.
    pub fn l_rep(self: &Arc<Self>, a: &Matrix) -> Result<ModuleMap> {
        self.algebra.require(a)?;
        let full = Arc::new(self.full_submodule());
        Ok(ModuleMap::from_fn(full.clone(), full, false, |x| a * x))
    }

    /// The unique `a ∈ N` with `T = L(a)`, by a linear solve over the
    /// module basis; cross-checked against `Σ_v T(v) v*` over the frame.
    pub fn l_inverse(self: &Arc<Self>, map: &ModuleMap) -> Result<Matrix> {
        let a = self.l_inverse_solve(map)?;
        let b = self.l_inverse_frame(map)?;
        let scale = a.norm().max(1.0);
        let gap = (&a - &b).norm();
        if !self.tol.accepts(gap, scale) {
            return Err(Error::NotLeftMultiplication { residual: gap });
        }
        Ok(a)
    }

    fn check_endomorphism(&self, map: &ModuleMap) -> Result<()> {
        if map.antilinear
            || map.source.dim() != self.dim()
            || map.target.dim() != self.dim()
            || !Arc::ptr_eq(&map.source.parent, &map.target.parent)
            || map.source.parent.ambient_dim() != self.ambient_dim()
        {
            return Err(Error::IncompatibleModules);
        }
        let residual = map.z_linearity_residual();
        if !self.tol.accepts(residual, map.action.norm().max(1.0)) {
            return Err(Error::NotZLinear { residual });
        }
        Ok(())
    }

    pub fn l_inverse_solve(&self, map: &ModuleMap) -> Result<Matrix> {
        self.check_endomorphism(map)?;
        let n = self.ambient_dim();
        let nb = self.algebra.basis();
        let rows = n * n * self.dim();
        let mut system = zeros(rows, nb.len());
        let mut rhs = zeros(rows, 1);
        for (j, b) in self.basis.iter().enumerate() {
            let image = map.apply(b);
            for (l, x) in nb.iter().enumerate() {
                let col = x * b;
                system
                    .view_mut((j * n * n, l), (n * n, 1))
                    .copy_from_slice(col.as_slice());
            }
            rhs.view_mut((j * n * n, 0), (n * n, 1))
                .copy_from_slice(image.as_slice());
        }
        let (alpha, residual) = least_squares(&system, &rhs, &self.tol)?;
        if !self.tol.accepts(residual, rhs.norm().max(1.0)) {
            return Err(Error::NotLeftMultiplication { residual });
        }
        let mut a = zeros(n, n);
        for (l, x) in nb.iter().enumerate() {
            a += x * alpha[(l, 0)];
        }
        Ok(a)
    }

    /// `a = Σ_v T(v) v*` over the frame.
    pub fn l_inverse_frame(&self, map: &ModuleMap) -> Result<Matrix> {
        self.check_endomorphism(map)?;
        let n = self.ambient_dim();
        let mut a = zeros(n, n);
        for v in &self.frame {
            a += map.apply(v) * v.adjoint();
        }
        Ok(a)
    }
}

fn build_frame(
    algebra: &VNAlgebra,
    structure: &StructureData,
    e: &Matrix,
    seed: u64,
) -> Result<Vec<Matrix>> {
    let tol = algebra.tolerance();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut frame = Vec::new();
    for k in 0..structure.num_blocks() {
        let ze = &structure.central_projections[k] * e;
        let e11 = structure.minimal_projection(k);
        let mut link = None;
        for _ in 0..MAX_RETRIES {
            let a = algebra.random_element(&mut rng);
            let u = polar_decompose(&(e11 * a * &ze), tol)?.isometry;
            let r = (u.adjoint() * &u - &ze)
                .norm()
                .max((&u * u.adjoint() - e11).norm());
            if tol.accepts(r, 1.0) {
                link = Some(u);
                break;
            }
        }
        let u = link.ok_or(Error::StructureRecoveryFailed {
            attempts: MAX_RETRIES,
        })?;
        for i in 0..structure.block_dims[k] {
            frame.push(&structure.matrix_units[k][i][0] * &u);
        }
    }
    Ok(frame)
}

fn coords_in(basis: &[Matrix], x: &Matrix) -> Vector {
    Vector::from_iterator(basis.len(), basis.iter().map(|b| hs_inner(x, b)))
}

fn element_of(basis: &[Matrix], coords: &Vector, n: usize) -> Matrix {
    let mut out = zeros(n, n);
    for (b, c) in basis.iter().zip(coords.iter()) {
        out += b * *c;
    }
    out
}

fn span_distance_of(a: &[Matrix], b: &[Matrix], n: usize) -> f64 {
    let qa = if a.is_empty() { zeros(n * n, 0) } else { stack_columns(a) };
    let qb = if b.is_empty() { zeros(n * n, 0) } else { stack_columns(b) };
    numerics::span_distance(&qa, &qb)
}

/// A `Z`-submodule `pNe` with a Hilbert–Schmidt orthonormal basis.
#[derive(Debug, Clone)]
pub struct Submodule {
    parent: Arc<HilbertModule>,
    p: Matrix,
    basis: Vec<Matrix>,
}

impl Submodule {
    fn from_parts(parent: Arc<HilbertModule>, p: Matrix, basis: Vec<Matrix>) -> Self {
        Submodule { parent, p, basis }
    }

    pub fn parent(&self) -> &Arc<HilbertModule> {
        &self.parent
    }

    pub fn projection(&self) -> &Matrix {
        &self.p
    }

    pub fn basis(&self) -> &[Matrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.parent.ambient_dim()
    }

    pub fn coords(&self, x: &Matrix) -> Vector {
        coords_in(&self.basis, x)
    }

    pub fn element(&self, coords: &Vector) -> Matrix {
        element_of(&self.basis, coords, self.ambient_dim())
    }

    pub fn membership_residual(&self, x: &Matrix) -> f64 {
        (x - self.element(&self.coords(x))).norm()
    }

    /// Span distance between this submodule and `p · (parent)`.
    pub fn span_residual(&self) -> f64 {
        let compressed: Vec<Matrix> = self.parent.basis.iter().map(|b| &self.p * b).collect();
        match hs_orthonormalize(&compressed, &self.parent.tol) {
            Ok(pne) => span_distance_of(&pne, &self.basis, self.ambient_dim()),
            Err(_) => f64::INFINITY,
        }
    }

    /// Matrix of `x ↦ z_k x` in the basis.
    pub fn central_action(&self, k: usize) -> Matrix {
        let z = &self.parent.central_projections()[k];
        let d = self.dim();
        Matrix::from_fn(d, d, |i, j| hs_inner(&(z * &self.basis[j]), &self.basis[i]))
    }

    /// Orthonormal basis (Hilbert–Schmidt) of `z_k 𝔛`.
    pub fn fiber_basis(&self, k: usize) -> Vec<Matrix> {
        let z = &self.parent.central_projections()[k];
        let parts: Vec<Matrix> = self.basis.iter().map(|b| z * b).collect();
        hs_orthonormalize(&parts, &self.parent.tol).unwrap_or_default()
    }

    /// Random element of the submodule.
    pub fn random_element<R: rand::Rng>(&self, rng: &mut R) -> Matrix {
        let c = numerics::random_vector(rng, self.dim());
        self.element(&c)
    }
}

/// A `Z`-linear or `Z`-antilinear map between submodules.
#[derive(Debug, Clone)]
pub struct ModuleMap {
    pub source: Arc<Submodule>,
    pub target: Arc<Submodule>,
    pub antilinear: bool,
    /// `target.dim() x source.dim()`; applied to conjugated coordinates when
    /// the map is antilinear.
    pub action: Matrix,
    /// Source character `k` corresponds to target character `pairing[k]`.
    pub pairing: Vec<usize>,
}

impl ModuleMap {
    pub fn new(source: Arc<Submodule>, target: Arc<Submodule>, antilinear: bool, action: Matrix) -> Self {
        let pairing = (0..source.parent.num_characters()).collect();
        ModuleMap {
            source,
            target,
            antilinear,
            action,
            pairing,
        }
    }

    pub fn with_pairing(mut self, pairing: Vec<usize>) -> Self {
        self.pairing = pairing;
        self
    }

    /// Map given by its values on source basis elements. For antilinear
    /// maps `f` must be the antilinear function itself.
    pub fn from_fn(
        source: Arc<Submodule>,
        target: Arc<Submodule>,
        antilinear: bool,
        f: impl Fn(&Matrix) -> Matrix,
    ) -> Self {
        let mut action = zeros(target.dim(), source.dim());
        for (j, b) in source.basis.iter().enumerate() {
            let image = target.coords(&f(b));
            action.set_column(j, &image);
        }
        ModuleMap::new(source, target, antilinear, action)
    }

    pub fn identity(space: Arc<Submodule>) -> Self {
        let d = space.dim();
        ModuleMap::new(space.clone(), space, false, identity(d))
    }

    pub fn apply_coords(&self, c: &Vector) -> Vector {
        if self.antilinear {
            &self.action * c.map(|z| z.conj())
        } else {
            &self.action * c
        }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        self.target
            .element(&self.apply_coords(&self.source.coords(x)))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &ModuleMap) -> Result<ModuleMap> {
        if other.target.dim() != self.source.dim()
            || !Arc::ptr_eq(&other.target.parent, &self.source.parent)
        {
            return Err(Error::IncompatibleModules);
        }
        let inner = if self.antilinear {
            conj(&other.action)
        } else {
            other.action.clone()
        };
        let pairing = other.pairing.iter().map(|&k| self.pairing[k]).collect();
        Ok(ModuleMap {
            source: other.source.clone(),
            target: self.target.clone(),
            antilinear: self.antilinear != other.antilinear,
            action: &self.action * inner,
            pairing,
        })
    }

    pub fn inverse(&self) -> Option<ModuleMap> {
        let inv = self.action.clone().try_inverse()?;
        let action = if self.antilinear { conj(&inv) } else { inv };
        Some(ModuleMap {
            source: self.target.clone(),
            target: self.source.clone(),
            antilinear: self.antilinear,
            action,
            pairing: invert_pairing(&self.pairing),
        })
    }

    /// `T(z_k x) = z_{σk} T(x)` residual over all characters.
    pub fn z_linearity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &sk) in self.pairing.iter().enumerate() {
            let zs = self.source.central_action(k);
            let zt = self.target.central_action(sk);
            let zs = if self.antilinear { conj(&zs) } else { zs };
            worst = worst.max((&self.action * zs - zt * &self.action).norm());
        }
        worst
    }

    /// Matrices of the map between fibers `z_k 𝔛₁ → z_{σk} 𝔛₂`, in the
    /// fiber-orthonormal bases of the module inner products.
    pub fn fiber_blocks(&self) -> Vec<Matrix> {
        let ws = self.source.parent.weights();
        let wt = self.target.parent.weights();
        self.pairing
            .iter()
            .enumerate()
            .map(|(k, &sk)| {
                let src = self.source.fiber_basis(k);
                let dst = self.target.fiber_basis(sk);
                let scale = (ws[k] / wt[sk]).sqrt();
                Matrix::from_fn(dst.len(), src.len(), |i, j| {
                    hs_inner(&self.apply(&src[j]), &dst[i]) * re(scale)
                })
            })
            .collect()
    }

    /// Operator norm with respect to the module norms.
    pub fn norm(&self) -> f64 {
        self.fiber_blocks()
            .iter()
            .map(op_norm)
            .fold(0.0, f64::max)
    }

    /// The adjoint: `(Tx|y) = (x|T*y)` for linear maps and
    /// `(Tx|y) = (T*y|x)` for antilinear ones.
    pub fn adjoint(&self) -> Result<ModuleMap> {
        let tol = self.source.parent.tolerance();
        let ds = self.source.dim();
        let dt = self.target.dim();
        let ws = self.source.parent.weights();
        let wt = self.target.parent.weights();
        let kcount = self.pairing.len();
        let mut lhs = zeros(ds * kcount, ds);
        let mut rhs = zeros(ds * kcount, dt);
        for (k, &sk) in self.pairing.iter().enumerate() {
            let g = self.source.central_action(k) / re(ws[k]);
            let h = self.target.central_action(sk) / re(wt[sk]);
            let r = if self.antilinear {
                self.action.transpose() * h.transpose()
            } else {
                self.action.adjoint() * h
            };
            lhs.view_mut((k * ds, 0), (ds, ds)).copy_from(&g);
            rhs.view_mut((k * ds, 0), (ds, dt)).copy_from(&r);
        }
        let (action, _) = least_squares(&lhs, &rhs, tol)?;
        Ok(ModuleMap {
            source: self.target.clone(),
            target: self.source.clone(),
            antilinear: self.antilinear,
            action,
            pairing: invert_pairing(&self.pairing),
        })
    }

    /// Largest residual of the defining identity of the adjoint over all
    /// pairs of basis elements and all characters.
    pub fn adjoint_residual(&self, adj: &ModuleMap) -> f64 {
        let mut worst: f64 = 0.0;
        let src = &self.source;
        let dst = &self.target;
        for x in &src.basis {
            let tx = self.apply(x);
            for y in &dst.basis {
                let ty = adj.apply(y);
                let left = dst.parent.inner_values(&tx, y);
                let right = if self.antilinear {
                    src.parent.inner_values(&ty, x)
                } else {
                    src.parent.inner_values(x, &ty)
                };
                for (k, &sk) in self.pairing.iter().enumerate() {
                    worst = worst.max((left[sk] - right[k]).norm());
                }
            }
        }
        worst
    }

    pub fn scaled(&self, s: Complex64) -> ModuleMap {
        let mut out = self.clone();
        out.action *= s;
        out
    }
}

fn invert_pairing(pairing: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; pairing.len()];
    for (k, &s) in pairing.iter().enumerate() {
        if s < inv.len() {
            inv[s] = k;
        }
    }
    inv
}

/// Basis of all `Z`-linear maps `𝔛₁ → 𝔛₂` (same centre, same pairing).
pub fn z_linear_maps(
    source: &Arc<Submodule>,
    target: &Arc<Submodule>,
    pairing: &[usize],
) -> Result<Vec<ModuleMap>> {
    let tol = *source.parent.tolerance();
    let ds = source.dim();
    let dt = target.dim();
    if ds == 0 || dt == 0 {
        return Ok(Vec::new());
    }
    let kcount = pairing.len();
    let block = ds * dt;
    let mut system = zeros(block * kcount, block);
    for (k, &sk) in pairing.iter().enumerate() {
        let zs = source.central_action(k);
        let zt = target.central_action(sk);
        let op = numerics::kron(&zs.transpose(), &identity(dt)) - numerics::kron(&identity(ds), &zt);
        system.view_mut((k * block, 0), (block, block)).copy_from(&op);
    }
    let ns = nullspace(&system, &tol)?;
    Ok((0..ns.ncols())
        .map(|j| {
            let action = Matrix::from_column_slice(dt, ds, ns.column(j).as_slice());
            ModuleMap::new(source.clone(), target.clone(), false, action)
                .with_pairing(pairing.to_vec())
        })
        .collect())
}

/// Right multiplication `Nf ∋ y ↦ yv ∈ Ne` for `v*v = e`, `vv* = f`.
pub fn u_v(
    module_f: &Arc<HilbertModule>,
    module_e: &Arc<HilbertModule>,
    v: &Matrix,
) -> Result<ModuleMap> {
    let tol = module_e.tolerance();
    check_link(module_e.algebra(), v, module_e.e(), module_f.e(), tol)?;
    let source = Arc::new(module_f.full_submodule());
    let target = Arc::new(module_e.full_submodule());
    Ok(ModuleMap::from_fn(source, target, false, |y| y * v))
}

fn check_link(algebra: &VNAlgebra, v: &Matrix, initial: &Matrix, fin: &Matrix, tol: &Tolerance) -> Result<()> {
    let residual = algebra
        .membership_residual(v)
        .max((v.adjoint() * v - initial).norm())
        .max((v * v.adjoint() - fin).norm());
    if tol.accepts(residual, 1.0) {
        Ok(())
    } else {
        Err(Error::NotAPartialIsometry { residual })
    }
}

/// `x₁ ↦ a x₁ v*` from `𝔛₁ = p₁Ne₁` to `𝔛₂ = p₂Ne₂`.
pub fn module_map_between(
    sub1: &Arc<Submodule>,
    sub2: &Arc<Submodule>,
    v: &Matrix,
    a: &Matrix,
) -> Result<ModuleMap> {
    let m1 = &sub1.parent;
    let m2 = &sub2.parent;
    let tol = m1.tolerance();
    check_link(m1.algebra(), v, m1.e(), m2.e(), tol)?;
    m1.algebra().require(a)?;
    let compressed = &sub2.p * a * &sub1.p;
    if !tol.accepts((&compressed - a).norm(), a.norm().max(1.0)) {
        return Err(Error::NotCompressed);
    }
    let vstar = v.adjoint();
    Ok(ModuleMap::from_fn(sub1.clone(), sub2.clone(), false, |x| {
        a * x * &vstar
    }))
}

/// Recovers `a ∈ p₂Np₁` from a `Z`-linear map `𝔛₁ → 𝔛₂` of the form
/// `x ↦ a x v*`.
pub fn map_to_element(map: &ModuleMap, v: &Matrix) -> Result<Matrix> {
    let m1 = &map.source.parent;
    let tol = m1.tolerance();
    let residual = map.z_linearity_residual();
    if !tol.accepts(residual, map.action.norm().max(1.0)) {
        return Err(Error::NotZLinear { residual });
    }
    let n = m1.ambient_dim();
    let p1 = &map.source.p;
    let p2 = &map.target.p;
    let corner: Vec<Matrix> = m1.algebra().basis().iter().map(|b| p2 * b * p1).collect();
    let corner = hs_orthonormalize(&corner, tol)?;
    let vstar = v.adjoint();
    let d = map.source.dim();
    let rows = n * n * d;
    let mut system = zeros(rows, corner.len());
    let mut rhs = zeros(rows, 1);
    for (j, x) in map.source.basis.iter().enumerate() {
        let image = map.apply(x);
        for (l, c) in corner.iter().enumerate() {
            let col = c * x * &vstar;
            system
                .view_mut((j * n * n, l), (n * n, 1))
                .copy_from_slice(col.as_slice());
        }
        rhs.view_mut((j * n * n, 0), (n * n, 1))
            .copy_from_slice(image.as_slice());
    }
    if corner.is_empty() {
        return Ok(zeros(n, n));
    }
    let (alpha, residual) = least_squares(&system, &rhs, tol)?;
    if !tol.accepts(residual, rhs.norm().max(1.0)) {
        return Err(Error::NotLeftMultiplication { residual });
    }
    let mut a = zeros(n, n);
    for (l, c) in corner.iter().enumerate() {
        a += c * alpha[(l, 0)];
    }
    Ok(a)
}

/// `u ∈ p₂Np₁` with `u*u = p₁`, `uu* = p₂` when the blockwise ranks agree.
pub fn z_unitary_equivalence(sub1: &Submodule, sub2: &Submodule, seed: u64) -> Result<Option<Matrix>> {
    let module = &sub1.parent;
    let tol = module.tolerance();
    if !ranks_agree(module.structure(), &sub1.p, &sub2.p, tol) {
        return Ok(None);
    }
    let u = module.algebra().mvn_partial_isometry(&sub1.p, &sub2.p, seed)?;
    Ok(Some(u))
}

/// Dimension of the corner `p₂ N p₁`.
pub fn corner_dim(algebra: &VNAlgebra, p2: &Matrix, p1: &Matrix) -> Result<usize> {
    let corner: Vec<Matrix> = algebra.basis().iter().map(|b| p2 * b * p1).collect();
    Ok(hs_orthonormalize(&corner, algebra.tolerance())?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{block_diag, random_complex_matrix, unit};
    use crate::vn_algebra::generate_algebra;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn m2_module() -> Arc<HilbertModule> {
        Arc::new(HilbertModule::new(VNAlgebra::full(2, tol()), unit(2, 0, 0), 0).unwrap())
    }

    fn m2m2() -> VNAlgebra {
        generate_algebra(&[unit(4, 0, 1), unit(4, 2, 3)], 4, tol()).unwrap()
    }

    #[test]
    fn conditional_expectation_examples() {
        let module = m2_module();
        let x = Matrix::from_fn(2, 2, |i, j| numerics::c(i as f64 + 1.0, j as f64));
        let z = module.conditional_expectation(&x).unwrap();
        assert!((z - identity(2) * x[(0, 0)]).norm() < 1e-12);
        let z = module.conditional_expectation(&identity(2)).unwrap();
        assert!((z - identity(2)).norm() < 1e-12);

        let e = unit(4, 0, 0) + unit(4, 2, 2);
        let module = HilbertModule::new(m2m2(), e.clone(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = module.algebra().random_element(&mut rng);
        let z = module.conditional_expectation(&x).unwrap();
        assert!((&e * &x * &e - &z * &e).norm() < 1e-10);
        assert!((z[(0, 0)] - x[(0, 0)]).norm() < 1e-10);
        assert!((z[(2, 2)] - x[(2, 2)]).norm() < 1e-10);
    }

    #[test]
    fn inner_examples() {
        let module = m2_module();
        let e = module.e().clone();
        assert!((module.inner(&e, &e).unwrap() - identity(2)).norm() < 1e-12);
        assert!(module.inner(&unit(2, 0, 0), &unit(2, 1, 0)).unwrap().norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let full = module.full_submodule();
        let x = full.random_element(&mut rng);
        let oracle = numerics::singular_values(&x)[0];
        assert!((module.module_norm(&x) - oracle).abs() < 1e-9);
        assert!(matches!(
            module.inner(&unit(2, 0, 1), &e),
            Err(Error::NotInModule { .. })
        ));
    }

    #[test]
    fn submodule_examples() {
        let module = m2_module();
        let sub = module.submodule_projection(&[module.e().clone()]).unwrap();
        assert!((sub.projection() - unit(2, 0, 0)).norm() < 1e-10);
        let sub = module.submodule_projection(module.basis()).unwrap();
        assert!((sub.projection() - identity(2)).norm() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = module.full_submodule().random_element(&mut rng);
        let sub = module.submodule_projection(&[x.clone()]).unwrap();
        assert_eq!(sub.dim(), 1);
        assert!((sub.projection().trace().re - 1.0).abs() < 1e-10);
        assert!(sub.membership_residual(&x) < 1e-10);
        assert!(sub.span_residual() < 1e-8);
    }

    #[test]
    fn l_rep_examples() {
        let module = m2_module();
        let id = module.l_rep(&identity(2)).unwrap();
        assert!((&id.action - identity(2)).norm() < 1e-12);
        let le = module.l_rep(&unit(2, 0, 0)).unwrap();
        // Module basis spans the first column; L(E11) keeps E11 and kills E21.
        let expect = module.full_submodule();
        let c11 = expect.coords(&unit(2, 0, 0));
        let c21 = expect.coords(&unit(2, 1, 0));
        assert!((le.apply_coords(&c11) - &c11).norm() < 1e-12);
        assert!(le.apply_coords(&c21).norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_complex_matrix(&mut rng, 2, 2);
        let la = module.l_rep(&a).unwrap();
        assert!((la.norm() - op_norm(&a)).abs() < 1e-8);
    }

    #[test]
    fn l_inverse_examples() {
        let n = m2m2();
        let module = Arc::new(HilbertModule::with_canonical_projection(n, 5).unwrap());
        let full = Arc::new(module.full_submodule());
        let id = ModuleMap::identity(full);
        assert!((module.l_inverse(&id).unwrap() - identity(4)).norm() < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = module.algebra().random_element(&mut rng);
        let la = module.l_rep(&a).unwrap();
        assert!((module.l_inverse(&la).unwrap() - &a).norm() < 1e-8);
        // Scaling by a central element.
        let z = block_diag(&[identity(2) * re(2.0), identity(2) * numerics::c(0.0, 3.0)]);
        let lz = module.l_rep(&z).unwrap();
        assert!((module.l_inverse(&lz).unwrap() - z).norm() < 1e-8);
    }

    #[test]
    fn adjoint_examples() {
        let module = Arc::new(HilbertModule::with_canonical_projection(m2m2(), 1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = module.algebra().random_element(&mut rng);
        let la = module.l_rep(&a).unwrap();
        let adj = la.adjoint().unwrap();
        let expect = module.l_rep(&a.adjoint()).unwrap();
        assert!((&adj.action - &expect.action).norm() < 1e-9);
        assert!(la.adjoint_residual(&adj) < 1e-9);
        // ‖T*T‖ = ‖T‖²
        let tt = adj.compose(&la).unwrap();
        assert!((tt.norm() - la.norm().powi(2)).abs() < 1e-8 * la.norm().powi(2).max(1.0));
    }

    #[test]
    fn u_v_examples() {
        let n = VNAlgebra::full(2, tol());
        let me = Arc::new(HilbertModule::new(n.clone(), unit(2, 0, 0), 0).unwrap());
        let mf = Arc::new(HilbertModule::new(n, unit(2, 1, 1), 0).unwrap());
        let u = u_v(&mf, &me, &unit(2, 1, 0)).unwrap();
        let back = u_v(&me, &mf, &unit(2, 0, 1)).unwrap();
        let adj = u.adjoint().unwrap();
        assert!((&adj.action - &back.action).norm() < 1e-10);
        let c = u.compose(&back).unwrap();
        assert!((c.action - identity(2)).norm() < 1e-10);
        let same = u_v(&me, &me, &unit(2, 0, 0)).unwrap();
        assert!((same.action - identity(2)).norm() < 1e-12);
        // intertwining
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_complex_matrix(&mut rng, 2, 2);
        let lhs = u.compose(&mf.l_rep(&a).unwrap()).unwrap();
        let rhs = me.l_rep(&a).unwrap().compose(&u).unwrap();
        assert!((lhs.action - rhs.action).norm() < 1e-9);
        assert!(matches!(
            u_v(&mf, &me, &unit(2, 0, 0)),
            Err(Error::NotAPartialIsometry { .. })
        ));
    }

    #[test]
    fn module_map_between_examples() {
        let n = m2m2();
        let module = Arc::new(HilbertModule::with_canonical_projection(n, 2).unwrap());
        let e = module.e().clone();
        let full = Arc::new(module.full_submodule());
        let map = module_map_between(&full, &full, &e, &e).unwrap();
        assert!((map.norm() - 1.0).abs() < 1e-10);
        let zero = module_map_between(&full, &full, &e, &zeros(4, 4)).unwrap();
        assert!(zero.action.norm() < 1e-14);

        let p1 = unit(4, 0, 0) + unit(4, 2, 2) + unit(4, 3, 3);
        let p2 = identity(4);
        let s1 = Arc::new(module.submodule_of_projection(&p1).unwrap());
        let s2 = Arc::new(module.submodule_of_projection(&p2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = &p2 * module.algebra().random_element(&mut rng) * &p1;
        let map = module_map_between(&s1, &s2, &e, &a).unwrap();
        assert!((map.norm() - op_norm(&a)).abs() < 1e-8);
        let back = map_to_element(&map, &e).unwrap();
        assert!((back - &a).norm() < 1e-8);
        let adj = map.adjoint().unwrap();
        let expect = module_map_between(&s2, &s1, &e, &a.adjoint()).unwrap();
        assert!((adj.action - expect.action).norm() < 1e-9);

        let outside = module.algebra().random_element(&mut rng);
        assert_eq!(
            module_map_between(&s1, &s2, &e, &(&outside - &p2 * &outside * &p1 + &outside)).unwrap_err(),
            Error::NotCompressed
        );
    }

    #[test]
    fn z_unitary_examples() {
        let module = Arc::new(HilbertModule::with_canonical_projection(m2m2(), 0).unwrap());
        let p = unit(4, 0, 0) + unit(4, 2, 2) + unit(4, 3, 3);
        let s = module.submodule_of_projection(&p).unwrap();
        let u = z_unitary_equivalence(&s, &s, 0).unwrap().unwrap();
        assert!((u.adjoint() * &u - &p).norm() < 1e-10);

        let q = unit(4, 1, 1) + unit(4, 2, 2) + unit(4, 3, 3);
        let t = module.submodule_of_projection(&q).unwrap();
        let u = z_unitary_equivalence(&s, &t, 0).unwrap().unwrap();
        assert!((u.adjoint() * &u - &p).norm() < 1e-10);
        assert!((&u * u.adjoint() - &q).norm() < 1e-10);

        let a = module.submodule_of_projection(&unit(4, 0, 0)).unwrap();
        let b = module
            .submodule_of_projection(&block_diag(&[identity(2), zeros(2, 2)]))
            .unwrap();
        assert!(z_unitary_equivalence(&a, &b, 0).unwrap().is_none());
    }

    #[test]
    fn z_linear_map_space_matches_corner() {
        let module = Arc::new(HilbertModule::with_canonical_projection(m2m2(), 0).unwrap());
        let p = unit(4, 0, 0) + unit(4, 2, 2) + unit(4, 3, 3);
        let s = Arc::new(module.submodule_of_projection(&p).unwrap());
        let maps = z_linear_maps(&s, &s, &[0, 1]).unwrap();
        let corner = corner_dim(module.algebra(), &p, &p).unwrap();
        assert_eq!(maps.len(), corner);
        assert_eq!(corner, 1 + 4);
    }
}
