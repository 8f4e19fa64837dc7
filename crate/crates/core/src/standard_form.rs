//! Standard forms: the structural multiplicity test, modular conjugations
//! of faithful states, abelian projections attached to cyclic vectors, and
//! certificates for standardness reduced along a central subalgebra.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hilbert_module::{u_v, HilbertModule, ModuleMap};
use crate::numerics::{
    self, column_span, conj, extend_orthonormal_with, hermitian_fn, hermitian_part,
    hs_orthonormalize, identity, nullspace, numerical_rank, re, singular_values, span_distance,
    stack_columns, unit, zeros, AntilinearOperator, Matrix, Tolerance, Vector,
};
use crate::vn_algebra::{generate_algebra, VNAlgebra};

const SEARCH_ATTEMPTS: usize = 32;

/// Residuals of a certificate must stay below this bound.
pub const CERTIFICATE_BOUND: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct StandardnessReport {
    pub standard: bool,
    /// `(n_k, m_k)` per block.
    pub blocks: Vec<(usize, usize)>,
    /// A conjugation with `JMJ = M'` and `JzJ = z*`, when standard.
    pub witness: Option<AntilinearOperator>,
    /// Every block with `n_k != m_k`, in block order.
    pub obstructions: Vec<(usize, usize)>,
    pub exchange_residual: Option<f64>,
    pub centre_residual: Option<f64>,
}

impl StandardnessReport {
    pub fn obstruction(&self) -> Option<(usize, usize)> {
        self.obstructions.first().copied()
    }
}

/// Distance between `span{T x T^{-1} : x ∈ M}` and `M'`.
pub fn exchange_residual(m: &VNAlgebra, t: &AntilinearOperator) -> Result<f64> {
    let mut images = Vec::with_capacity(m.dim());
    for b in m.basis() {
        match t.conjugate_linear(b) {
            Some(x) => images.push(x),
            None => return Ok(f64::INFINITY),
        }
    }
    let q = hs_orthonormalize(&images, m.tolerance())?;
    let commutant = m.commutant()?;
    Ok(span_distance(&stack_columns(&q), &commutant.basis_matrix()))
}

/// `max ‖T z T^{-1} − z*‖` over a basis of the centre.
pub fn centre_residual(m: &VNAlgebra, t: &AntilinearOperator) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in m.center()?.basis() {
        match t.conjugate_linear(z) {
            Some(x) => worst = worst.max((x - z.adjoint()).norm()),
            None => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

/// Multiplicity test `n_k = m_k`, with an explicit conjugation
/// `J = W* F conj(W)` where `F` swaps the tensor legs of every block.
pub fn is_standard(m: &VNAlgebra) -> Result<StandardnessReport> {
    let data = m.structure(0)?;
    let blocks = data.blocks();
    let obstructions: Vec<(usize, usize)> =
        blocks.iter().copied().filter(|(n, k)| n != k).collect();
    if !obstructions.is_empty() {
        return Ok(StandardnessReport {
            standard: false,
            blocks,
            witness: None,
            obstructions,
            exchange_residual: None,
            centre_residual: None,
        });
    }
    let dim = m.ambient_dim();
    let mut swap = zeros(dim, dim);
    let mut offset = 0;
    for &(n, _) in &blocks {
        for i in 0..n {
            for s in 0..n {
                swap[(offset + s * n + i, offset + i * n + s)] = numerics::ONE;
            }
        }
        offset += n * n;
    }
    let w = &data.canonical_unitary;
    let j = AntilinearOperator::new(w.adjoint() * swap * conj(w));
    let exchange = exchange_residual(m, &j)?;
    let centre = centre_residual(m, &j)?;
    Ok(StandardnessReport {
        standard: true,
        blocks,
        witness: Some(j),
        obstructions,
        exchange_residual: Some(exchange),
        centre_residual: Some(centre),
    })
}

/// Modular objects of a faithful state `φ(x) = tr(ρx)/tr(ρ)`.
#[derive(Debug, Clone)]
pub struct ModularData {
    pub gns_dim: usize,
    /// Orthonormal basis of `M` for `⟨x, y⟩ = φ(y* x)`.
    gns_basis: Vec<Matrix>,
    density: Matrix,
    pub cyclic_vector: Vector,
    pub delta: Matrix,
    pub conjugation: AntilinearOperator,
    pub represented: VNAlgebra,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularResiduals {
    pub involution: f64,
    pub isometry: f64,
    /// `‖JΔJ − Δ^{-1}‖`.
    pub delta_inversion: f64,
    /// Distance between `J π(M) J` and `π(M)'`.
    pub exchange: f64,
    pub centre: f64,
}

impl ModularResiduals {
    pub fn max(&self) -> f64 {
        self.involution
            .max(self.isometry)
            .max(self.delta_inversion)
            .max(self.exchange)
            .max(self.centre)
    }
}

impl ModularData {
    fn state_inner(&self, x: &Matrix, y: &Matrix) -> Complex64 {
        (&self.density * y.adjoint() * x).trace()
    }

    /// `x ↦ x̂`.
    pub fn embed(&self, x: &Matrix) -> Vector {
        Vector::from_iterator(
            self.gns_dim,
            self.gns_basis.iter().map(|u| self.state_inner(x, u)),
        )
    }

    /// `π_φ(a)`.
    pub fn represent(&self, a: &Matrix) -> Matrix {
        let images: Vec<Matrix> = self.gns_basis.iter().map(|u| a * u).collect();
        Matrix::from_fn(self.gns_dim, self.gns_dim, |i, j| {
            self.state_inner(&images[j], &self.gns_basis[i])
        })
    }

    pub fn residuals(&self) -> Result<ModularResiduals> {
        let j = &self.conjugation;
        let inverse = self
            .delta
            .clone()
            .try_inverse()
            .ok_or(Error::NonConvergence("modular operator not invertible"))?;
        Ok(ModularResiduals {
            involution: j.involution_residual(),
            isometry: j.isometry_residual(),
            delta_inversion: (j.sandwich(&self.delta) - inverse).norm(),
            exchange: exchange_residual(&self.represented, j)?,
            centre: centre_residual(&self.represented, j)?,
        })
    }
}

/// `(Δ, J)` for a cyclic and separating vector of `m`, from the polar
/// decomposition of `S: xξ ↦ x*ξ`.
pub fn modular_conjugation(m: &VNAlgebra, xi: &Vector) -> Result<(Matrix, AntilinearOperator)> {
    let tol = m.tolerance();
    let n = m.ambient_dim();
    if xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: xi.len(),
        });
    }
    let columns: Vec<Vector> = m.basis().iter().map(|b| b * xi).collect();
    let starred: Vec<Vector> = m.basis().iter().map(|b| b.adjoint() * xi).collect();
    let a = Matrix::from_columns(&columns);
    let rank = numerical_rank(&a, tol);
    if rank < n {
        return Err(Error::NotCyclic { span: rank, dim: n });
    }
    if rank < m.dim() {
        return Err(Error::NotFaithful);
    }
    let b = Matrix::from_columns(&starred);
    let conj_a_inv = conj(&a)
        .try_inverse()
        .ok_or(Error::NonConvergence("cyclic frame not invertible"))?;
    let s = b * conj_a_inv;
    let delta = hermitian_part(&(s.transpose() * conj(&s)));
    let inv_sqrt = hermitian_fn(&delta, tol, |x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt())?;
    let j = AntilinearOperator::new(&s * conj(&inv_sqrt));
    Ok((delta, j))
}

pub fn gns_modular(m: &VNAlgebra, rho: &Matrix) -> Result<ModularData> {
    let tol = *m.tolerance();
    let n = m.ambient_dim();
    if rho.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.nrows(),
        });
    }
    numerics::check_finite(rho)?;
    let residual = (rho - rho.adjoint()).norm();
    if !tol.accepts(residual, rho.norm().max(1.0)) {
        return Err(Error::NotHermitian { residual });
    }
    let eig = numerics::hermitian_eig(&hermitian_part(rho), &tol)?;
    let scale = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&v| v < -tol.cutoff(scale)) {
        return Err(Error::NotFaithful);
    }
    let trace = rho.trace().re;
    if trace <= tol.cutoff(scale) {
        return Err(Error::NotFaithful);
    }
    let density = hermitian_part(rho) / re(trace);
    let inner = |x: &Matrix, y: &Matrix| (&density * y.adjoint() * x).trace();
    let mut gns_basis = Vec::new();
    extend_orthonormal_with(&mut gns_basis, m.basis(), 1.0, &tol, inner)?;
    if gns_basis.len() < m.dim() {
        return Err(Error::NotFaithful);
    }
    let d = gns_basis.len();
    let mut data = ModularData {
        gns_dim: d,
        gns_basis,
        density,
        cyclic_vector: Vector::zeros(d),
        delta: identity(d),
        conjugation: AntilinearOperator::standard_conjugation(d),
        represented: VNAlgebra::scalars(d, tol),
    };
    let gens: Vec<Matrix> = m.basis().iter().map(|b| data.represent(b)).collect();
    data.represented = generate_algebra(&gens, d, tol)?;
    data.cyclic_vector = data.embed(&identity(n));
    let (delta, j) = modular_conjugation(&data.represented, &data.cyclic_vector)?;
    data.delta = delta;
    data.conjugation = j;
    Ok(data)
}

fn require_cyclic(m: &VNAlgebra, xi: &Vector) -> Result<()> {
    let n = m.ambient_dim();
    if xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: xi.len(),
        });
    }
    let columns: Vec<Vector> = m.basis().iter().map(|b| b * xi).collect();
    let span = numerical_rank(&Matrix::from_columns(&columns), m.tolerance());
    if span < n {
        return Err(Error::NotCyclic { span, dim: n });
    }
    Ok(())
}

/// The abelian projection of `Z'` onto `[Z ξ₀]`.
pub fn abelian_projection_from_cyclic(z: &VNAlgebra, xi0: &Vector) -> Result<Matrix> {
    if !z.is_abelian() {
        return Err(Error::NotAbelian);
    }
    let tol = z.tolerance();
    let n = z.ambient_dim();
    let big = z.commutant()?;
    require_cyclic(&big, xi0)?;
    let orbit: Vec<Vector> = z.basis().iter().map(|b| b * xi0).collect();
    let q = column_span(&Matrix::from_columns(&orbit), tol)?;
    let e = &q * q.adjoint();
    let fixed = (&e * xi0 - xi0).norm();
    let support = (big.central_support(&e)? - identity(n)).norm();
    let residual = fixed.max(support);
    if !big.is_abelian_projection(&e) || !tol.accepts(residual, xi0.norm().max(1.0)) {
        return Err(Error::HypothesisFailed {
            name: "cyclic abelian projection".to_string(),
            residual,
        });
    }
    Ok(e)
}

/// Dimension of `{x ∈ eZ'e : xξ₀ ∈ ℂξ₀}`. Equals one exactly when `e` is
/// the only abelian projection of full support fixing `ξ₀`.
pub fn cyclic_constraint_dim(z: &VNAlgebra, xi0: &Vector, e: &Matrix) -> Result<usize> {
    let tol = z.tolerance();
    let n = z.ambient_dim();
    let big = z.commutant()?;
    let corner: Vec<Matrix> = big.basis().iter().map(|b| e * b * e).collect();
    let corner = hs_orthonormalize(&corner, tol)?;
    let norm2 = xi0.norm_squared();
    let off = identity(n) - xi0 * xi0.adjoint() / re(norm2);
    let columns: Vec<Vector> = corner.iter().map(|c| &off * (c * xi0)).collect();
    if columns.is_empty() {
        return Ok(0);
    }
    Ok(nullspace(&Matrix::from_columns(&columns), tol)?.ncols())
}

/// Abelian `e ∈ Z'` of full central support with `JeJ = e`, from a
/// `J`-symmetrized cyclic vector `ζ + Jζ`.
pub fn j_fixed_abelian_projection(j: &AntilinearOperator, z: &VNAlgebra, seed: u64) -> Result<Matrix> {
    let tol = z.tolerance();
    let n = z.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SEARCH_ATTEMPTS {
        let zeta = numerics::random_vector(&mut rng, n);
        let xi = &zeta + j.apply(&zeta);
        let Ok(e) = abelian_projection_from_cyclic(z, &xi) else {
            continue;
        };
        if let Some(image) = j.conjugate_linear(&e) {
            if tol.accepts((image - &e).norm(), 1.0) {
                return Ok(e);
            }
        }
    }
    Err(Error::SearchExhausted {
        attempts: SEARCH_ATTEMPTS,
    })
}

/// How a certificate relates its source and target modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Involution on `Ne` fixing `e`.
    Fixed,
    /// Involution on `Ne` for an arbitrary `e`.
    Transported,
    /// `Ne → Nf` with `Te = f`.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateResiduals {
    /// `‖T(e) − f‖`.
    pub fixed_point: f64,
    /// `‖T∘T − 1‖`; zero for maps between different modules.
    pub involution: f64,
    /// `(Tx|Ty) = (y|x)` over basis pairs.
    pub antiunitary: f64,
    pub z_antilinearity: f64,
    /// Distance between `T L(M) T^{-1}` and `L(M')`.
    pub exchange: f64,
    /// `max ‖T L(z) T^{-1} − L(z*)‖` over the centre of `M`.
    pub centre: f64,
}

#[derive(Debug, Clone)]
pub struct ReducedStandardnessCertificate {
    pub kind: CertificateKind,
    pub algebra: VNAlgebra,
    pub map: ModuleMap,
    pub residuals: CertificateResiduals,
}

impl ReducedStandardnessCertificate {
    pub fn e(&self) -> &Matrix {
        self.map.source.parent().e()
    }

    pub fn f(&self) -> &Matrix {
        self.map.target.parent().e()
    }

    pub fn source_module(&self) -> &Arc<HilbertModule> {
        self.map.source.parent()
    }

    /// Largest residual among those the kind of certificate requires.
    pub fn worst_residual(&self) -> f64 {
        let r = &self.residuals;
        let mut worst = r.antiunitary.max(r.z_antilinearity).max(r.exchange).max(r.centre);
        if self.kind != CertificateKind::Transported {
            worst = worst.max(r.fixed_point);
        }
        if self.kind != CertificateKind::Paired {
            worst = worst.max(r.involution);
        }
        worst
    }

    pub fn passes(&self) -> bool {
        self.worst_residual() < CERTIFICATE_BOUND
    }
}

fn conjugated_actions(map: &ModuleMap, elements: &[Matrix]) -> Result<Vec<Matrix>> {
    let inverse = map.inverse().ok_or_else(|| Error::HypothesisFailed {
        name: "bijectivity".to_string(),
        residual: f64::INFINITY,
    })?;
    let source = map.source.parent();
    elements
        .iter()
        .map(|a| {
            let la = source.l_rep(a)?;
            Ok(map.compose(&la.compose(&inverse)?)?.action)
        })
        .collect()
}

/// `(exchange, centre)` residuals of `T L(·) T^{-1}` against `L(M')` and
/// `L(z*)`.
fn module_conjugation_residuals(m: &VNAlgebra, map: &ModuleMap) -> Result<(f64, f64)> {
    let tol = m.tolerance();
    let target = map.target.parent();
    let images = conjugated_actions(map, m.basis())?;
    let commutant = m.commutant()?;
    let expected: Vec<Matrix> = commutant
        .basis()
        .iter()
        .map(|b| target.l_rep(b).map(|l| l.action))
        .collect::<Result<_>>()?;
    let q1 = hs_orthonormalize(&images, tol)?;
    let q2 = hs_orthonormalize(&expected, tol)?;
    let exchange = span_distance(&stack_columns(&q1), &stack_columns(&q2));
    let centre_basis = m.center()?.basis().to_vec();
    let conjugated = conjugated_actions(map, &centre_basis)?;
    let mut centre: f64 = 0.0;
    for (z, img) in centre_basis.iter().zip(&conjugated) {
        let want = target.l_rep(&z.adjoint())?.action;
        centre = centre.max((img - want).norm());
    }
    Ok((exchange, centre))
}

fn antiunitary_residual(map: &ModuleMap) -> f64 {
    let source = map.source.parent();
    let target = map.target.parent();
    let images: Vec<Matrix> = map.source.basis().iter().map(|x| map.apply(x)).collect();
    let mut worst: f64 = 0.0;
    for (x, tx) in map.source.basis().iter().zip(&images) {
        for (y, ty) in map.source.basis().iter().zip(&images) {
            let left = target.inner_values(tx, ty);
            let right = source.inner_values(y, x);
            for (k, &sk) in map.pairing.iter().enumerate() {
                worst = worst.max((left[sk] - right[k]).norm());
            }
        }
    }
    worst
}

pub fn certify_module_map(
    m: &VNAlgebra,
    map: ModuleMap,
    kind: CertificateKind,
) -> Result<ReducedStandardnessCertificate> {
    if !map.antilinear {
        return Err(Error::HypothesisFailed {
            name: "antilinearity".to_string(),
            residual: f64::INFINITY,
        });
    }
    let e = map.source.parent().e().clone();
    let f = map.target.parent().e();
    let fixed_point = (map.apply(&e) - f).norm();
    let involution = if kind == CertificateKind::Paired {
        0.0
    } else {
        let square = map.compose(&map)?;
        (square.action - identity(map.source.dim())).norm()
    };
    let (exchange, centre) = module_conjugation_residuals(m, &map)?;
    let residuals = CertificateResiduals {
        fixed_point,
        involution,
        antiunitary: antiunitary_residual(&map),
        z_antilinearity: map.z_linearity_residual(),
        exchange,
        centre,
    };
    Ok(ReducedStandardnessCertificate {
        kind,
        algebra: m.clone(),
        map,
        residuals,
    })
}

/// `x ↦ JxJ` on `Ne`, with the character pairing induced by `J` on `Z`.
pub fn natural_module_candidate(
    j: &AntilinearOperator,
    z: &VNAlgebra,
    e: &Matrix,
    seed: u64,
) -> Result<ModuleMap> {
    let tol = *z.tolerance();
    let image = j.conjugate_linear(e).ok_or(Error::NonConvergence("conjugation not invertible"))?;
    let residual = (image - e).norm();
    if !tol.accepts(residual, 1.0) {
        return Err(Error::HypothesisFailed {
            name: "J-invariance of e".to_string(),
            residual,
        });
    }
    let module = Arc::new(HilbertModule::new(z.commutant()?, e.clone(), seed)?);
    let central = module.central_projections();
    let mut pairing = Vec::with_capacity(central.len());
    for p in central {
        let moved = j.conjugate_linear(p).ok_or(Error::NonConvergence("conjugation not invertible"))?;
        let hit = central
            .iter()
            .position(|q| tol.accepts((&moved - q).norm(), 1.0))
            .ok_or_else(|| Error::HypothesisFailed {
                name: "J-invariance of Z".to_string(),
                residual: (&moved - p).norm(),
            })?;
        pairing.push(hit);
    }
    let full = Arc::new(module.full_submodule());
    let jj = j.clone();
    Ok(ModuleMap::from_fn(full.clone(), full, true, move |x| jj.sandwich(x)).with_pairing(pairing))
}

fn require_central(m: &VNAlgebra, z: &VNAlgebra) -> Result<()> {
    if !z.is_abelian() {
        return Err(Error::NotAbelian);
    }
    if !z.is_subalgebra_of(&m.center()?) {
        return Err(Error::InclusionViolated(
            "Z is not contained in the centre of M".to_string(),
        ));
    }
    Ok(())
}

/// `T x = JxJ` on `Ne` for a `J`-fixed abelian `e ∈ Z'`.
pub fn reduced_standardness_certificate(
    m: &VNAlgebra,
    z: &VNAlgebra,
    seed: u64,
) -> Result<ReducedStandardnessCertificate> {
    let report = is_standard(m)?;
    let Some(j) = report.witness.clone() else {
        let (n, k) = report.obstruction().unwrap_or((0, 0));
        return Err(Error::NotStandard { n, m: k });
    };
    require_central(m, z)?;
    let e = j_fixed_abelian_projection(&j, z, seed)?;
    let map = natural_module_candidate(&j, z, &e, seed)?;
    certify_module_map(m, map, CertificateKind::Fixed)
}

/// `T_e = U_{v*} T_{e₀} U_v` for `v*v = e₀`, `vv* = e`.
pub fn transport_certificate(
    cert: &ReducedStandardnessCertificate,
    e: &Matrix,
    seed: u64,
) -> Result<ReducedStandardnessCertificate> {
    let module0 = cert.map.source.parent().clone();
    let big = module0.algebra().clone();
    let v = big.mvn_partial_isometry(module0.e(), e, seed)?;
    let module = Arc::new(HilbertModule::new(big, e.clone(), seed)?);
    let forward = u_v(&module, &module0, &v)?;
    let back = u_v(&module0, &module, &v.adjoint())?;
    let map = back.compose(&cert.map.compose(&forward)?)?;
    certify_module_map(&cert.algebra, map, CertificateKind::Transported)
}

/// `T = U_{v*} T₀ : Ne → Nf` with `v = T₀ e` and `f = vv*`.
pub fn paired_certificate(
    cert: &ReducedStandardnessCertificate,
    seed: u64,
) -> Result<ReducedStandardnessCertificate> {
    let module_e = cert.map.source.parent().clone();
    let v = cert.map.apply(module_e.e());
    let f = hermitian_part(&(&v * v.adjoint()));
    let module_f = Arc::new(HilbertModule::new(module_e.algebra().clone(), f, seed)?);
    let shift = u_v(&module_e, &module_f, &v.adjoint())?;
    let map = shift.compose(&cert.map)?;
    certify_module_map(&cert.algebra, map, CertificateKind::Paired)
}

/// Random abelian projection `u e u*` of full central support, `u` a
/// unitary of the algebra.
pub fn random_abelian_projection<R: rand::Rng>(
    algebra: &VNAlgebra,
    e: &Matrix,
    rng: &mut R,
) -> Result<Matrix> {
    let a = algebra.random_element(rng);
    let u = numerics::polar_decompose(&a, algebra.tolerance())?.isometry;
    Ok(hermitian_part(&(&u * e * u.adjoint())))
}

fn hypothesis(name: &str, residual: f64, scale: f64, tol: &Tolerance) -> Result<()> {
    if tol.accepts(residual, scale) {
        Ok(())
    } else {
        Err(Error::HypothesisFailed {
            name: name.to_string(),
            residual,
        })
    }
}

fn check_module_hypotheses(m: &VNAlgebra, map: &ModuleMap, with_centre: bool) -> Result<()> {
    let tol = m.tolerance();
    if !map.antilinear {
        return Err(Error::HypothesisFailed {
            name: "antilinearity".to_string(),
            residual: f64::INFINITY,
        });
    }
    let scale = map.action.norm().max(1.0);
    hypothesis("z-antilinearity", map.z_linearity_residual(), scale, tol)?;
    let sv = singular_values(&map.action);
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if map.action.nrows() != map.action.ncols() || tol.is_zero(smallest, largest) {
        return Err(Error::HypothesisFailed {
            name: "bijectivity".to_string(),
            residual: smallest,
        });
    }
    let (exchange, centre) = module_conjugation_residuals(m, map)?;
    hypothesis("algebra exchange", exchange, 1.0, tol)?;
    if with_centre {
        hypothesis("centre conjugation", centre, 1.0, tol)?;
    }
    Ok(())
}

/// Checks both conjugation identities for a module map `Ne → Nf`, then
/// returns the structural verdict.
pub fn standardness_from_module_map(m: &VNAlgebra, map: &ModuleMap) -> Result<StandardnessReport> {
    check_module_hypotheses(m, map, true)?;
    is_standard(m)
}

/// Checks `TMT^{-1} = M'` and `TzT^{-1} = z*` for an operator on the
/// whole space, then returns the structural verdict.
pub fn standardness_from_operator(m: &VNAlgebra, t: &AntilinearOperator) -> Result<StandardnessReport> {
    let tol = m.tolerance();
    hypothesis("algebra exchange", exchange_residual(m, t)?, 1.0, tol)?;
    hypothesis("centre conjugation", centre_residual(m, t)?, 1.0, tol)?;
    is_standard(m)
}

/// `T^{-1}(e₀) ξ₀`, verified separating for `M` by a kernel test.
pub fn separating_from_module_map(
    m: &VNAlgebra,
    z: &VNAlgebra,
    xi0: &Vector,
    map: &ModuleMap,
) -> Result<Vector> {
    let tol = m.tolerance();
    require_cyclic(m, xi0)?;
    let e0 = abelian_projection_from_cyclic(z, xi0)?;
    let module = map.source.parent();
    hypothesis("module projection", (module.e() - &e0).norm(), 1.0, tol)?;
    check_module_hypotheses(m, map, false)?;
    let inverse = map.inverse().ok_or_else(|| Error::HypothesisFailed {
        name: "bijectivity".to_string(),
        residual: f64::INFINITY,
    })?;
    let eta = inverse.apply(&e0) * xi0;
    let columns: Vec<Vector> = m.basis().iter().map(|b| b * &eta).collect();
    let sv = singular_values(&Matrix::from_columns(&columns));
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if numerical_rank(&Matrix::from_columns(&columns), tol) < m.dim() {
        return Err(Error::HypothesisFailed {
            name: "separating".to_string(),
            residual: smallest,
        });
    }
    Ok(eta)
}

#[derive(Debug, Clone)]
pub struct GalleryCase {
    pub name: &'static str,
    pub algebra: VNAlgebra,
    pub conjugation: AntilinearOperator,
    /// Distance between `JMJ` and `M'`.
    pub exchange_residual: f64,
    pub report: StandardnessReport,
}

fn embed_first(x: &Matrix) -> Matrix {
    numerics::block_diag(&[x.clone(), zeros(2, 2)])
}

fn embed_second(x: &Matrix) -> Matrix {
    numerics::block_diag(&[zeros(2, 2), x.clone()])
}

fn gallery_case(
    name: &'static str,
    gens: &[Matrix],
    conjugation: AntilinearOperator,
    tol: Tolerance,
) -> Result<GalleryCase> {
    let algebra = generate_algebra(gens, 4, tol)?;
    let exchange = exchange_residual(&algebra, &conjugation)?;
    let report = is_standard(&algebra)?;
    Ok(GalleryCase {
        name,
        algebra,
        conjugation,
        exchange_residual: exchange,
        report,
    })
}

/// `M = {x ⊕ x'}` on `ℂ² ⊕ ℂ²` for `N = M₂` and for `N = ℂ`, with the
/// swap conjugation `ξ ⊕ η ↦ conj(η) ⊕ conj(ξ)`, and `M₂ ⊗ 1` as control.
pub fn counterexample_gallery(tol: Tolerance) -> Result<Vec<GalleryCase>> {
    let matrix_units = [unit(2, 0, 1), unit(2, 1, 0), unit(2, 0, 0)];
    let mut swap_halves = zeros(4, 4);
    swap_halves
        .view_mut((0, 2), (2, 2))
        .copy_from(&identity(2));
    swap_halves
        .view_mut((2, 0), (2, 2))
        .copy_from(&identity(2));
    let halves = AntilinearOperator::new(swap_halves);
    let full: Vec<Matrix> = matrix_units.iter().map(embed_first).collect();
    let scalar: Vec<Matrix> = matrix_units.iter().map(embed_second).collect();
    let mut flip = zeros(4, 4);
    for i in 0..2 {
        for s in 0..2 {
            flip[(s * 2 + i, i * 2 + s)] = numerics::ONE;
        }
    }
    let control: Vec<Matrix> = matrix_units
        .iter()
        .map(|u| numerics::kron(u, &identity(2)))
        .collect();
    Ok(vec![
        gallery_case("remark1-full", &full, halves.clone(), tol)?,
        gallery_case("remark1-scalar", &scalar, halves, tol)?,
        gallery_case("standard-control", &control, AntilinearOperator::new(flip), tol)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{diag_real, kron};
    use crate::vn_algebra::canonical_algebra;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn m2_tensor_one() -> VNAlgebra {
        generate_algebra(
            &[kron(&unit(2, 0, 1), &identity(2)), kron(&unit(2, 1, 0), &identity(2))],
            4,
            tol(),
        )
        .unwrap()
    }

    #[test]
    fn structural_test_examples() {
        let r = is_standard(&m2_tensor_one()).unwrap();
        assert!(r.standard);
        assert!(r.exchange_residual.unwrap() < 1e-9);
        assert!(r.centre_residual.unwrap() < 1e-9);
        let r = is_standard(&VNAlgebra::full(2, tol())).unwrap();
        assert!(!r.standard);
        assert_eq!(r.obstruction(), Some((2, 1)));
        let gallery = counterexample_gallery(tol()).unwrap();
        assert!(!gallery[0].report.standard);
        assert_eq!(gallery[0].report.obstruction(), Some((2, 1)));
    }

    #[test]
    fn gallery_outcomes() {
        let gallery = counterexample_gallery(tol()).unwrap();
        let names: Vec<&str> = gallery.iter().map(|g| g.name).collect();
        assert_eq!(names, ["remark1-full", "remark1-scalar", "standard-control"]);
        for case in &gallery[..2] {
            assert!(case.exchange_residual < 1e-9);
            assert!(!case.report.standard);
        }
        assert_eq!(gallery[1].report.obstruction(), Some((1, 2)));
        assert!(gallery[2].report.standard);
        assert!(gallery[2].exchange_residual < 1e-9);
    }

    #[test]
    fn modular_examples() {
        let m2 = VNAlgebra::full(2, tol());
        let data = gns_modular(&m2, &(identity(2) * re(0.5))).unwrap();
        assert!((&data.delta - identity(4)).norm() < 1e-10);
        let x = numerics::random_complex_matrix(&mut ChaCha8Rng::seed_from_u64(1), 2, 2);
        let jx = data.conjugation.apply(&data.embed(&x));
        assert!((jx - data.embed(&x.adjoint())).norm() < 1e-10);
        assert!(data.residuals().unwrap().max() < 1e-9);

        let data = gns_modular(&m2, &diag_real(&[2.0 / 3.0, 1.0 / 3.0])).unwrap();
        let eig = numerics::hermitian_eig(&data.delta, &tol()).unwrap();
        let expect = [0.5, 1.0, 1.0, 2.0];
        for (a, b) in eig.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10);
        }
        let r = data.residuals().unwrap();
        assert!(r.delta_inversion < 1e-10);
        assert!(is_standard(&data.represented).unwrap().standard);

        let diag = canonical_algebra(&[(1, 1), (1, 1)], tol());
        let data = gns_modular(&diag, &diag_real(&[0.9, 0.1])).unwrap();
        assert!((&data.delta - identity(2)).norm() < 1e-10);
        assert_eq!(
            gns_modular(&m2, &diag_real(&[1.0, 0.0])).unwrap_err(),
            Error::NotFaithful
        );
    }

    #[test]
    fn cyclic_projection_examples() {
        let scalars = VNAlgebra::scalars(2, tol());
        let xi = Vector::from_vec(vec![numerics::ONE, numerics::ZERO]);
        let e = abelian_projection_from_cyclic(&scalars, &xi).unwrap();
        assert!((&e - unit(2, 0, 0)).norm() < 1e-12);
        assert_eq!(cyclic_constraint_dim(&scalars, &xi, &e).unwrap(), 1);

        let diag = canonical_algebra(&[(1, 1), (1, 1)], tol());
        let xi = Vector::from_vec(vec![re(0.5f64.sqrt()), re(0.5f64.sqrt())]);
        let e = abelian_projection_from_cyclic(&diag, &xi).unwrap();
        assert!((&e - identity(2)).norm() < 1e-12);

        let z = canonical_algebra(&[(1, 2), (1, 2)], tol());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xi = numerics::random_vector(&mut rng, 4);
        let e = abelian_projection_from_cyclic(&z, &xi).unwrap();
        assert!((e.trace().re - 2.0).abs() < 1e-10);
        assert_eq!(cyclic_constraint_dim(&z, &xi, &e).unwrap(), 1);

        let xi = Vector::from_vec(vec![numerics::ONE, numerics::ZERO, numerics::ZERO, numerics::ZERO]);
        assert!(matches!(
            abelian_projection_from_cyclic(&z, &xi),
            Err(Error::NotCyclic { .. })
        ));
    }

    #[test]
    fn j_fixed_examples() {
        let m = m2_tensor_one();
        let j = is_standard(&m).unwrap().witness.unwrap();
        let e = j_fixed_abelian_projection(&j, &VNAlgebra::scalars(4, tol()), 0).unwrap();
        assert!((e.trace().re - 1.0).abs() < 1e-10);
        assert!((j.sandwich(&e) - &e).norm() < 1e-9);

        let masa = canonical_algebra(&[(1, 1), (1, 1), (1, 1)], tol());
        let j = is_standard(&masa).unwrap().witness.unwrap();
        let e = j_fixed_abelian_projection(&j, &masa, 0).unwrap();
        assert!((&e - identity(3)).norm() < 1e-9);

        let m = canonical_algebra(&[(2, 2), (3, 3)], tol());
        let j = is_standard(&m).unwrap().witness.unwrap();
        let e = j_fixed_abelian_projection(&j, &m.center().unwrap(), 1).unwrap();
        assert!((e.trace().re - 2.0).abs() < 1e-10);
        assert!((j.sandwich(&e) - &e).norm() < 1e-9);
    }

    #[test]
    fn certificate_examples() {
        let m = m2_tensor_one();
        let cert = reduced_standardness_certificate(&m, &VNAlgebra::scalars(4, tol()), 0).unwrap();
        assert!(cert.worst_residual() < 1e-9, "{:?}", cert.residuals);

        let masa = canonical_algebra(&[(1, 1), (1, 1), (1, 1)], tol());
        let cert = reduced_standardness_certificate(&masa, &masa, 0).unwrap();
        assert!(cert.passes());
        assert!((cert.e() - identity(3)).norm() < 1e-9);

        let m = canonical_algebra(&[(2, 2), (1, 1)], tol());
        let z = m.center().unwrap();
        let cert = reduced_standardness_certificate(&m, &z, 3).unwrap();
        assert!(cert.passes(), "{:?}", cert.residuals);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e2 = random_abelian_projection(cert.source_module().algebra(), cert.e(), &mut rng).unwrap();
        let moved = transport_certificate(&cert, &e2, 3).unwrap();
        assert!(moved.passes(), "{:?}", moved.residuals);
        let paired = paired_certificate(&moved, 3).unwrap();
        assert!(paired.passes(), "{:?}", paired.residuals);
        assert!(standardness_from_module_map(&m, &paired.map).unwrap().standard);

        assert_eq!(
            reduced_standardness_certificate(&VNAlgebra::full(2, tol()), &VNAlgebra::scalars(2, tol()), 0)
                .unwrap_err(),
            Error::NotStandard { n: 2, m: 1 }
        );
    }

    #[test]
    fn harness_rejections() {
        let m = m2_tensor_one();
        let cert = reduced_standardness_certificate(&m, &VNAlgebra::scalars(4, tol()), 0).unwrap();
        let mut noisy = cert.map.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = numerics::random_complex_matrix(&mut rng, noisy.action.nrows(), noisy.action.ncols());
        noisy.action += noise * re(1e-3);
        match standardness_from_module_map(&m, &noisy) {
            Err(Error::HypothesisFailed { residual, .. }) => {
                assert!(residual > 1e-5 && residual < 1e-1, "{residual}")
            }
            other => panic!("unexpected {other:?}"),
        }

        let gallery = counterexample_gallery(tol()).unwrap();
        for case in &gallery[..2] {
            let z = case.algebra.center().unwrap();
            let e = j_fixed_abelian_projection(&case.conjugation, &z, 0).unwrap();
            let candidate = natural_module_candidate(&case.conjugation, &z, &e, 0).unwrap();
            match standardness_from_module_map(&case.algebra, &candidate) {
                Err(Error::HypothesisFailed { name, .. }) => assert_eq!(name, "centre conjugation"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn separating_examples() {
        let m = m2_tensor_one();
        let z = VNAlgebra::scalars(4, tol());
        let cert = reduced_standardness_certificate(&m, &z, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xi0 = numerics::random_vector(&mut rng, 4);
        let e0 = abelian_projection_from_cyclic(&z, &xi0).unwrap();
        let moved = transport_certificate(&cert, &e0, 0).unwrap();
        let eta = separating_from_module_map(&m, &z, &xi0, &moved.map).unwrap();
        assert!(eta.norm() > 1e-6);
    }
}
