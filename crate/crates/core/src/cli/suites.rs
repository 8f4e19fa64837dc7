//! Property suites behind `wstar verify`.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generate::{random_central_subalgebra, random_instance, random_standard_instance};
use crate::hilbert_module::{z_linear_maps, HilbertModule};
use crate::numerics::{identity, op_norm, random_unitary, re, AntilinearOperator, Matrix, Tolerance};
use crate::reduction::{
    decompose_along, doubled_algebra, fiber_membership, fiber_spaces, pi_fiber, project_vector,
    synthesize_operator, synthesize_vector,
};
use crate::standard_form::{
    is_standard, j_fixed_abelian_projection, natural_module_candidate, paired_certificate,
    random_abelian_projection, reduced_standardness_certificate, standardness_from_module_map,
    standardness_from_operator, transport_certificate,
};
use crate::vn_algebra::{generate_algebra, VNAlgebra};

const SAMPLES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Module,
    Isotr,
    Fibers,
    Atdu,
    St1,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "module" => Ok(Suite::Module),
            "isotr" => Ok(Suite::Isotr),
            "fibers" => Ok(Suite::Fibers),
            "atdu" => Ok(Suite::Atdu),
            "st1" => Ok(Suite::St1),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite `{other}` (expected module, isotr, fibers, atdu, st1 or all)"
            )),
        }
    }
}

impl Suite {
    fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Module, Suite::Isotr, Suite::Fibers, Suite::Atdu, Suite::St1],
            s => vec![s],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub worst: f64,
    pub threshold: f64,
}

impl Property {
    pub fn new(name: &str, worst: f64, threshold: f64) -> Self {
        Property {
            name: name.to_string(),
            worst,
            threshold,
        }
    }

    /// A yes/no property recorded as residual 0 or 1.
    pub fn flag(name: &str, ok: bool) -> Self {
        Property::new(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn passes(&self) -> bool {
        self.worst <= self.threshold
    }
}

/// One algebra with optional central subalgebra and conjugation.
#[derive(Debug, Clone)]
pub struct SuiteInput {
    pub algebra: VNAlgebra,
    pub central: Option<VNAlgebra>,
    pub conjugation: Option<AntilinearOperator>,
    pub seed: u64,
}

impl SuiteInput {
    fn central_or_centre(&self) -> Result<VNAlgebra> {
        match &self.central {
            Some(z) => Ok(z.clone()),
            None => self.algebra.center(),
        }
    }
}

/// Folds repeated measurements into the worst value per property name.
#[derive(Debug, Default)]
struct Table(Vec<Property>);

impl Table {
    fn record(&mut self, p: Property) {
        let value = if p.worst.is_nan() { f64::INFINITY } else { p.worst };
        match self.0.iter_mut().find(|q| q.name == p.name) {
            Some(q) => q.worst = q.worst.max(value),
            None => self.0.push(Property { worst: value, ..p }),
        }
    }

    fn add(&mut self, name: &str, worst: f64, threshold: f64) {
        self.record(Property::new(name, worst, threshold));
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.record(Property::flag(name, ok));
    }

    fn merge(&mut self, other: Table) {
        for p in other.0 {
            self.record(p);
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn module_suite(input: &SuiteInput, rng: &mut ChaCha8Rng) -> Result<Table> {
    let mut t = Table::default();
    let module = Arc::new(HilbertModule::with_canonical_projection(input.algebra.clone(), input.seed)?);
    let full = module.full_submodule();
    for _ in 0..SAMPLES {
        let x = full.random_element(rng);
        let y = full.random_element(rng);
        let xx = module.inner_values(&x, &x);
        let yy = module.inner_values(&y, &y);
        let xy = module.inner_values(&x, &y);
        let ss = module.inner_values(&(&x + &y), &(&x + &y));
        for k in 0..xx.len() {
            let scale = (xx[k].re * yy[k].re).max(1.0);
            let margin = xx[k].re * yy[k].re - xy[k].norm_sqr();
            t.add("schwarz", (-margin).max(0.0) / scale, 1e-9);
            let mink = xx[k].re.max(0.0).sqrt() + yy[k].re.max(0.0).sqrt() - ss[k].re.max(0.0).sqrt();
            t.add("minkowski", (-mink).max(0.0), 1e-9);
        }
        t.add("module norm = operator norm", relative(module.module_norm(&x), op_norm(&x)), 1e-9);
        let sub = module.submodule_projection(&[x.clone(), y.clone()])?;
        t.add("submodule span", sub.span_residual(), 1e-8);
        let again = module.submodule_projection(&[&x + &y, y.clone()])?;
        t.add(
            "submodule projection uniqueness",
            (sub.projection() - again.projection()).norm(),
            1e-8,
        );
    }
    Ok(t)
}

fn isotr_suite(input: &SuiteInput, rng: &mut ChaCha8Rng) -> Result<Table> {
    let mut t = Table::default();
    let module = Arc::new(HilbertModule::with_canonical_projection(input.algebra.clone(), input.seed)?);
    for _ in 0..SAMPLES {
        let a = input.algebra.random_element(rng);
        let scale = a.norm().max(1.0);
        let l = module.l_rep(&a)?;
        let back = module.l_inverse(&l)?;
        t.add("left representation round trip", (&back - &a).norm() / scale, 1e-8);
        t.add("left representation isometry", relative(l.norm(), op_norm(&a)), 1e-8);
        let solve = module.l_inverse_solve(&l)?;
        let frame = module.l_inverse_frame(&l)?;
        t.add("frame reconstruction = linear solve", (solve - frame).norm() / scale, 1e-8);
    }
    Ok(t)
}

fn fibers_suite(input: &SuiteInput, rng: &mut ChaCha8Rng) -> Result<Table> {
    let mut t = Table::default();
    let z = input.central_or_centre()?;
    let big = z.commutant()?;
    let module = HilbertModule::with_canonical_projection(big.clone(), input.seed)?;
    let fibers = fiber_spaces(&module)?;
    let shared = Arc::new(module.clone());
    let full = shared.full_submodule();
    for _ in 0..SAMPLES {
        let x = full.random_element(rng);
        let parts = project_vector(&module, &fibers, &x);
        let top = parts.iter().map(|p| p.norm()).fold(0.0, f64::max);
        t.add("fiber norm", relative(module.module_norm(&x), top), 1e-8);
        let back = synthesize_vector(&module, &fibers, &parts);
        t.add("vector synthesis", (back - &x).norm() / x.norm().max(1.0), 1e-9);

        let a = big.random_element(rng);
        let b = big.random_element(rng);
        let pa = pi_fiber(&module, &fibers, &a)?;
        let pb = pi_fiber(&module, &fibers, &b)?;
        t.add("fiber operator norm", relative(op_norm(&a), pa.max_norm()), 1e-8);
        let back = synthesize_operator(&module, &fibers, &pa);
        t.add("operator synthesis", (back - &a).norm() / a.norm().max(1.0), 1e-9);
        let pab = pi_fiber(&module, &fibers, &(&a * &b))?;
        let pstar = pi_fiber(&module, &fibers, &a.adjoint())?;
        let mut hom: f64 = 0.0;
        for k in 0..fibers.len() {
            let scale = (a.norm() * b.norm()).max(1.0);
            hom = hom
                .max((&pab.blocks[k] - &pa.blocks[k] * &pb.blocks[k]).norm() / scale)
                .max((&pstar.blocks[k] - pa.blocks[k].adjoint()).norm() / a.norm().max(1.0));
        }
        t.add("fiber *-homomorphism", hom, 1e-9);
    }
    if input.algebra.is_subalgebra_of(&big) {
        let parts = decompose_along(&input.algebra, &z, &module)?;
        for _ in 0..SAMPLES {
            let a = input.algebra.random_element(rng);
            t.flag("fiberwise membership", fiber_membership(&module, &parts, &a)?);
        }
    }
    Ok(t)
}

fn atdu_suite(input: &SuiteInput, rng: &mut ChaCha8Rng) -> Result<Table> {
    let mut t = Table::default();
    let z = input.central_or_centre()?;
    let big = z.commutant()?;
    let m1 = Arc::new(HilbertModule::with_canonical_projection(big.clone(), input.seed)?);
    let e2 = random_abelian_projection(&big, m1.e(), rng)?;
    let m2 = Arc::new(HilbertModule::new(big, e2, input.seed)?);
    let pairing: Vec<usize> = (0..m1.num_characters()).collect();
    let d = doubled_algebra(m1.clone(), m2.clone(), &pairing)?;
    t.add("doubled projection", d.projection_residual(), 1e-9);
    t.add("doubled abelian", d.abelian_residual(), 1e-9);
    t.add("doubled central support", d.support_residual(), 1e-9);
    let s1 = Arc::new(m1.full_submodule());
    let s2 = Arc::new(m2.full_submodule());
    let basis = d.intertwiner_basis()?;
    let maps = z_linear_maps(&s1, &s2, &pairing)?;
    t.flag("intertwiner dimension = module map dimension", basis.len() == maps.len());
    for _ in 0..SAMPLES {
        let x1 = s1.random_element(rng);
        let x2 = s2.random_element(rng);
        let block = d.block_element(&x1, &x2);
        t.add(
            "block norm formula",
            relative(op_norm(&block), d.block_norm_formula(&x1, &x2)),
            1e-8,
        );
        let floor = std::f64::consts::SQRT_2 * op_norm(&x1).max(op_norm(&x2));
        t.add("block norm lower bound", (floor - op_norm(&block)).max(0.0), 1e-8);
        let lone = d.block_element(&x1, &Matrix::zeros(x2.nrows(), x2.ncols()));
        t.add(
            "block norm equality case",
            relative(op_norm(&lone), std::f64::consts::SQRT_2 * op_norm(&x1)),
            1e-8,
        );
        let in_module = d.algebra.membership_residual(&block).max((&block * &d.e - &block).norm());
        t.add("block form lies in the doubled module", in_module / block.norm().max(1.0), 1e-9);
        let y = d.algebra.random_element(rng);
        t.add(
            "corners intertwine",
            d.corner_intertwining_residual(&y) / y.norm().max(1.0),
            1e-9,
        );

        let mut tt = Matrix::zeros(d.v.nrows(), d.v.ncols());
        for b in &basis {
            let w: f64 = rng.random_range(-1.0..1.0);
            let v: f64 = rng.random_range(-1.0..1.0);
            tt += b * crate::numerics::c(w, v);
        }
        let map = d.module_map_from_intertwiner(&tt)?;
        t.add("module map isometry", relative(map.norm(), op_norm(&tt)), 1e-8);
        let adj = map.adjoint()?;
        let reverse = d.reverse_module_map(&tt.adjoint())?;
        t.add(
            "adjoint identity",
            (adj.action - &reverse.action).norm() / tt.norm().max(1.0),
            1e-9,
        );
        t.add("adjoint defining relation", map.adjoint_residual(&reverse), 1e-9);
        let back = d.intertwiner_from_module_map(&map)?;
        t.add("intertwiner recovery", (back - &tt).norm() / tt.norm().max(1.0), 1e-8);
    }
    Ok(t)
}

fn st1_suite(input: &SuiteInput, rng: &mut ChaCha8Rng) -> Result<Table> {
    let mut t = Table::default();
    let m = &input.algebra;
    let report = is_standard(m)?;
    let z = input.central_or_centre()?;
    if let Some(j) = &input.conjugation {
        t.add(
            "supplied conjugation exchanges M and M'",
            crate::standard_form::exchange_residual(m, j)?,
            1e-9,
        );
    }
    if !report.standard {
        t.flag(
            "certification refused",
            matches!(
                reduced_standardness_certificate(m, &z, input.seed),
                Err(Error::NotStandard { .. })
            ),
        );
        if let Some(j) = &input.conjugation {
            let centre = m.center()?;
            let e = j_fixed_abelian_projection(j, &centre, input.seed)?;
            let candidate = natural_module_candidate(j, &centre, &e, input.seed)?;
            let rejected = matches!(
                standardness_from_module_map(m, &candidate),
                Err(Error::HypothesisFailed { ref name, .. }) if name == "centre conjugation"
            );
            t.flag("natural candidate rejected on the centre", rejected);
        }
        return Ok(t);
    }
    let cert = reduced_standardness_certificate(m, &z, input.seed)?;
    t.add("certificate residuals", cert.worst_residual(), 1e-8);
    t.flag(
        "certificate verdict",
        standardness_from_module_map(m, &cert.map)?.standard,
    );
    let e2 = random_abelian_projection(cert.source_module().algebra(), cert.e(), rng)?;
    let moved = transport_certificate(&cert, &e2, input.seed)?;
    t.add("transported certificate residuals", moved.worst_residual(), 1e-8);
    let paired = paired_certificate(&moved, input.seed)?;
    t.add("paired certificate residuals", paired.worst_residual(), 1e-8);
    t.flag(
        "paired certificate verdict",
        standardness_from_module_map(m, &paired.map)?.standard,
    );
    if let Some(j) = &report.witness {
        let a = m.random_element(rng) + identity(m.ambient_dim()) * re(3.0);
        let witness = j.after_linear(&a);
        t.flag(
            "perturbed witness verdict",
            standardness_from_operator(m, &witness)?.standard,
        );
    }
    let u = random_unitary(rng, m.ambient_dim());
    let moved_gens: Vec<Matrix> = m.basis().iter().map(|b| &u * b * u.adjoint()).collect();
    let conjugated = generate_algebra(&moved_gens, m.ambient_dim(), *m.tolerance())?;
    t.flag(
        "verdict invariant under unitary conjugation",
        is_standard(&conjugated)?.standard,
    );
    Ok(t)
}

pub fn run_suite(suite: Suite, input: &SuiteInput) -> Result<Vec<Property>> {
    let mut table = Table::default();
    let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
    for part in suite.parts() {
        let result = match part {
            Suite::Module => module_suite(input, &mut rng),
            Suite::Isotr => isotr_suite(input, &mut rng),
            Suite::Fibers => fibers_suite(input, &mut rng),
            Suite::Atdu => atdu_suite(input, &mut rng),
            Suite::St1 => st1_suite(input, &mut rng),
            Suite::All => unreachable!("expanded by parts"),
        };
        table.merge(result?);
    }
    Ok(table.0)
}

/// `count` generated inputs; standard ones for the standard-form suite.
pub fn random_inputs(suite: Suite, count: usize, seed: u64, tol: Tolerance) -> Result<Vec<SuiteInput>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let instance = if suite == Suite::St1 {
                random_standard_instance(&mut rng, 9, tol)?
            } else {
                random_instance(&mut rng, 8, tol)?
            };
            let central = instance.algebra.minimal_central_projections()?;
            let z = random_central_subalgebra(&mut rng, &central, tol)?;
            Ok(SuiteInput {
                algebra: instance.algebra,
                central: Some(z),
                conjugation: None,
                seed: seed.wrapping_add(i as u64),
            })
        })
        .collect()
}

/// Runs a suite over many inputs and folds the tables.
pub fn run_many(suite: Suite, inputs: &[SuiteInput]) -> Result<Vec<Property>> {
    let mut table = Table::default();
    for input in inputs {
        for p in run_suite(suite, input)? {
            table.record(p);
        }
    }
    Ok(table.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_on_generated_inputs() {
        let tol = Tolerance::default();
        for suite in Suite::All.parts() {
            let inputs = random_inputs(suite, 3, 11, tol).unwrap();
            for p in run_many(suite, &inputs).unwrap() {
                assert!(p.passes(), "{suite:?}: {p:?}");
            }
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!("nope".parse::<Suite>().is_err());
        assert_eq!("st1".parse::<Suite>().unwrap(), Suite::St1);
    }
}
