//! Families of factorized finite-dimensional Hilbert spaces.
//!
//! For `λ ≤ λ'` the family holds a unitary `Φ_{λ'λ}: H_{λ'} → H̃_{λ'λ} ⊗ H_λ`
//! and for `λ ≤ λ' ≤ λ''` a unitary `Φ_{λ''λ'λ}: H̃_{λ''λ} → H̃_{λ''λ'} ⊗ H̃_{λ'λ}`.
//! Tensor products are Kronecker products with the left factor most
//! significant, so `H̃ ⊗ H` has index `i·dim H + j`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Identity tolerance for floating-point checks.
pub const TOLERANCE: f64 = 1e-12;

/// Smallest eigenvalue accepted for a density matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Finite preorder in which every pair has an upper bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedSet {
    size: usize,
    leq: Vec<Vec<bool>>,
}

impl DirectedSet {
    /// Reflexive-transitive closure of `relations`, given as `(lower, upper)`.
    pub fn new(size: usize, relations: &[(usize, usize)]) -> Result<Self> {
        let mut leq = vec![vec![false; size]; size];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in relations {
            if a >= size || b >= size {
                return Err(Error::invalid("directed set", format!("edge ({a}, {b}) out of range")));
            }
            leq[a][b] = true;
        }
        for k in 0..size {
            for i in 0..size {
                if leq[i][k] {
                    for j in 0..size {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        let set = DirectedSet { size, leq };
        set.check_directed()?;
        Ok(set)
    }

    /// Order given by a predicate `leq(a, b)`, which must be a preorder.
    pub fn from_order(size: usize, leq: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let relations: Vec<(usize, usize)> = (0..size)
            .flat_map(|a| (0..size).map(move |b| (a, b)))
            .filter(|&(a, b)| leq(a, b))
            .collect();
        let set = Self::new(size, &relations)?;
        for a in 0..size {
            for b in 0..size {
                if set.leq[a][b] != (a == b || leq(a, b)) {
                    return Err(Error::invalid("directed set", "order predicate is not transitive"));
                }
            }
        }
        Ok(set)
    }

    fn check_directed(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::NotDirected("empty index set".into()));
        }
        for a in 0..self.size {
            for b in a + 1..self.size {
                if self.upper_bound(a, b).is_none() {
                    return Err(Error::NotDirected(format!("{a} and {b} have no upper bound")));
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn upper_bound(&self, a: usize, b: usize) -> Option<usize> {
        (0..self.size).find(|&c| self.leq[a][c] && self.leq[b][c])
    }

    /// An element above every other one; exists in every finite directed set.
    pub fn greatest(&self) -> usize {
        (0..self.size)
            .find(|&g| (0..self.size).all(|a| self.leq[a][g]))
            .expect("finite directed sets have a greatest element")
    }

    /// Comparable pairs as `(upper, lower)`, including `(λ, λ)`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for upper in 0..self.size {
            for lower in 0..self.size {
                if self.leq[lower][upper] {
                    out.push((upper, lower));
                }
            }
        }
        out
    }

    /// Chains `lower ≤ middle ≤ top` as `(top, middle, lower)`.
    pub fn triples(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (top, middle) in self.pairs() {
            for lower in 0..self.size {
                if self.leq[lower][middle] {
                    out.push((top, middle, lower));
                }
            }
        }
        out
    }

    /// Strict relations `(lower, upper)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.pairs()
            .into_iter()
            .filter(|(u, l)| u != l)
            .map(|(u, l)| (l, u))
            .collect()
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn deviation(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    max_abs(&(a - b))
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    deviation(&(u.adjoint() * u), &identity(n)).max(deviation(&(u * u.adjoint()), &identity(n)))
}

/// Unitary reordering tensor factors: output factor `j` is input factor
/// `perm[j]`, where input factor `i` has dimension `dims[i]`.
pub fn tensor_permutation(dims: &[usize], perm: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut m = CMatrix::zeros(total, total);
    let mut idx = vec![0usize; dims.len()];
    for input in 0..total {
        let mut rest = input;
        for f in (0..dims.len()).rev() {
            idx[f] = rest % dims[f];
            rest /= dims[f];
        }
        let output = perm
            .iter()
            .zip(&out_dims)
            .fold(0, |acc, (&p, &d)| acc * d + idx[p]);
        m[(output, input)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// `tr_1` of an operator on `C^{d1} ⊗ C^{d2}`.
pub fn partial_trace_first(m: &CMatrix, d1: usize, d2: usize) -> CMatrix {
    assert_eq!(m.nrows(), d1 * d2);
    CMatrix::from_fn(d2, d2, |i, j| (0..d1).map(|k| m[(k * d2 + i, k * d2 + j)]).sum())
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let qr = random_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random permutation matrix with random signs; products stay exact.
pub fn random_signed_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut m = CMatrix::zeros(n, n);
    for (i, &p) in perm.iter().enumerate() {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        m[(p, i)] = Complex64::new(sign, 0.0);
    }
    m
}

/// Random full-rank density matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let a = random_matrix(rng, n, n);
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Density matrix of a state on `B(H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraState {
    rho: CMatrix,
}

impl AlgebraState {
    /// Accepts Hermitian, unit-trace, positive semidefinite matrices.
    pub fn new(rho: CMatrix) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::invalid("state", "density matrix must be square"));
        }
        if deviation(&rho, &rho.adjoint()) > 1e-10 {
            return Err(Error::invalid("state", "density matrix is not Hermitian"));
        }
        if (rho.trace() - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::invalid("state", "trace differs from 1"));
        }
        let min = min_eigenvalue(&rho);
        if min < -PSD_TOLERANCE {
            return Err(Error::invalid("state", format!("negative eigenvalue {min:e}")));
        }
        Ok(AlgebraState { rho })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        AlgebraState {
            rho: identity(n) / Complex64::new(n as f64, 0.0),
        }
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// `ω(a) = tr(ρ a)`.
    pub fn expectation(&self, a: &CMatrix) -> Complex64 {
        (&self.rho * a).trace()
    }
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()) / Complex64::new(2.0, 0.0);
    herm.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Index set, spaces `H_λ` and the factorization unitaries.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedFamily {
    index: DirectedSet,
    dims: Vec<usize>,
    phi: BTreeMap<(usize, usize), CMatrix>,
    phi3: BTreeMap<(usize, usize, usize), CMatrix>,
}

impl FactorizedFamily {
    /// `phi` is keyed by `(upper, lower)`, `phi3` by `(top, middle, lower)`;
    /// every comparable pair and chain must be present.
    pub fn new(
        index: DirectedSet,
        dims: Vec<usize>,
        phi: BTreeMap<(usize, usize), CMatrix>,
        phi3: BTreeMap<(usize, usize, usize), CMatrix>,
    ) -> Result<Self> {
        if dims.len() != index.size() {
            return Err(Error::DimensionMismatch {
                expected: index.size(),
                found: dims.len(),
            });
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::invalid("family", format!("space of dimension {d}")));
        }
        if let Some(p) = index.pairs().into_iter().find(|p| !phi.contains_key(p)) {
            return Err(Error::invalid("family", format!("missing isomorphism for pair {p:?}")));
        }
        if let Some(t) = index.triples().into_iter().find(|t| !phi3.contains_key(t)) {
            return Err(Error::invalid("family", format!("missing isomorphism for chain {t:?}")));
        }
        Ok(FactorizedFamily {
            index,
            dims,
            phi,
            phi3,
        })
    }

    pub fn index(&self) -> &DirectedSet {
        &self.index
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, lambda: usize) -> usize {
        self.dims[lambda]
    }

    /// `dim H̃_{upper, lower}`, read off the isomorphism.
    pub fn factor_dim(&self, upper: usize, lower: usize) -> usize {
        self.phi[&(upper, lower)].nrows() / self.dims[lower]
    }

    pub fn phi(&self, upper: usize, lower: usize) -> &CMatrix {
        &self.phi[&(upper, lower)]
    }

    pub fn phi3(&self, top: usize, middle: usize, lower: usize) -> &CMatrix {
        &self.phi3[&(top, middle, lower)]
    }

    pub fn replace_phi(&mut self, upper: usize, lower: usize, m: CMatrix) {
        self.phi.insert((upper, lower), m);
    }

    pub fn replace_phi3(&mut self, top: usize, middle: usize, lower: usize, m: CMatrix) {
        self.phi3.insert((top, middle, lower), m);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub check: &'static str,
    pub location: Vec<usize>,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub pairs: usize,
    pub triples: usize,
    pub max_unitarity_deviation: f64,
    pub max_triviality_deviation: f64,
    pub max_diagram_deviation: f64,
    pub max_deviation: f64,
    pub failures: Vec<Failure>,
    pub passed: bool,
}

/// `|Φ - cI|` for the best unit scalar `c`; 0 exactly for trivial maps.
fn triviality_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() || m.nrows() == 0 {
        return f64::INFINITY;
    }
    let c = m[(0, 0)];
    let scalar = identity(m.nrows()) * c;
    deviation(m, &scalar).max((c.norm() - 1.0).abs())
}

fn check_shapes(fam: &FactorizedFamily) -> Result<()> {
    for (upper, lower) in fam.index.pairs() {
        let m = fam.phi(upper, lower);
        let (du, dl) = (fam.dims[upper], fam.dims[lower]);
        if m.ncols() != du || m.nrows() != du || du % dl != 0 {
            return Err(Error::DimensionMismatch {
                expected: du,
                found: m.nrows(),
            });
        }
    }
    for (top, middle, lower) in fam.index.triples() {
        let m = fam.phi3(top, middle, lower);
        let source = fam.factor_dim(top, lower);
        let target = fam.factor_dim(top, middle) * fam.factor_dim(middle, lower);
        if m.ncols() != source || m.nrows() != target {
            return Err(Error::DimensionMismatch {
                expected: target,
                found: m.nrows(),
            });
        }
    }
    Ok(())
}

/// Checks every clause of the family definition: dimensions, unitarity,
/// triviality on the diagonal, and commutativity of
/// `(Φ_{λ''λ'λ} ⊗ 1) Φ_{λ''λ} = (1 ⊗ Φ_{λ'λ}) Φ_{λ''λ'}` on all chains.
pub fn verify_family(fam: &FactorizedFamily) -> Result<FamilyReport> {
    check_shapes(fam)?;
    let mut failures = Vec::new();
    let mut unitarity: f64 = 0.0;
    let mut triviality: f64 = 0.0;
    let mut diagram: f64 = 0.0;
    let pairs = fam.index.pairs();
    for &(upper, lower) in &pairs {
        let m = fam.phi(upper, lower);
        let u = unitarity_deviation(m);
        unitarity = unitarity.max(u);
        if u > TOLERANCE {
            failures.push(Failure {
                check: "unitarity",
                location: vec![upper, lower],
                deviation: u,
            });
        }
        if upper == lower {
            let t = if fam.factor_dim(upper, lower) == 1 {
                triviality_deviation(m)
            } else {
                f64::INFINITY
            };
            triviality = triviality.max(t);
            if t > TOLERANCE {
                failures.push(Failure {
                    check: "triviality",
                    location: vec![upper, lower],
                    deviation: t,
                });
            }
        }
    }
    let triples = fam.index.triples();
    for &(top, middle, lower) in &triples {
        let m3 = fam.phi3(top, middle, lower);
        let u = unitarity_deviation(m3);
        unitarity = unitarity.max(u);
        if u > TOLERANCE {
            failures.push(Failure {
                check: "unitarity",
                location: vec![top, middle, lower],
                deviation: u,
            });
        }
        if top == middle || middle == lower {
            let t = triviality_deviation(m3);
            triviality = triviality.max(t);
            if t > TOLERANCE {
                failures.push(Failure {
                    check: "triviality",
                    location: vec![top, middle, lower],
                    deviation: t,
                });
            }
        }
        let lhs = kron(m3, &identity(fam.dims[lower])) * fam.phi(top, lower);
        let rhs = kron(&identity(fam.factor_dim(top, middle)), fam.phi(middle, lower)) * fam.phi(top, middle);
        let d = deviation(&lhs, &rhs);
        diagram = diagram.max(d);
        if d > TOLERANCE {
            failures.push(Failure {
                check: "diagram",
                location: vec![top, middle, lower],
                deviation: d,
            });
        }
    }
    let max_deviation = unitarity.max(triviality).max(diagram);
    Ok(FamilyReport {
        pairs: pairs.len(),
        triples: triples.len(),
        max_unitarity_deviation: unitarity,
        max_triviality_deviation: triviality,
        max_diagram_deviation: diagram,
        max_deviation,
        passed: failures.is_empty(),
        failures,
    })
}

/// Index set with a slot set per element; `H_λ` is the product of the slot
/// spaces of `λ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyShape {
    pub index: DirectedSet,
    pub slots: Vec<BTreeSet<usize>>,
    pub slot_dims: BTreeMap<usize, usize>,
}

impl FamilyShape {
    pub fn new(index: DirectedSet, slots: Vec<BTreeSet<usize>>, slot_dims: BTreeMap<usize, usize>) -> Result<Self> {
        if slots.len() != index.size() {
            return Err(Error::DimensionMismatch {
                expected: index.size(),
                found: slots.len(),
            });
        }
        for s in slots.iter().flatten() {
            match slot_dims.get(s) {
                Some(&d) if d >= 1 => {}
                _ => return Err(Error::invalid("shape", format!("slot {s} has no dimension"))),
            }
        }
        for (upper, lower) in index.pairs() {
            if !slots[lower].is_subset(&slots[upper]) {
                return Err(Error::invalid(
                    "shape",
                    format!("slots of {lower} are not contained in those of {upper}"),
                ));
            }
        }
        Ok(FamilyShape {
            index,
            slots,
            slot_dims,
        })
    }

    /// Shape ordered by inclusion of the given slot sets.
    pub fn by_inclusion(slots: Vec<BTreeSet<usize>>, slot_dims: BTreeMap<usize, usize>) -> Result<Self> {
        let index = DirectedSet::from_order(slots.len(), |a, b| slots[a].is_subset(&slots[b]))?;
        Self::new(index, slots, slot_dims)
    }

    pub fn dim(&self, lambda: usize) -> usize {
        self.slots[lambda].iter().map(|s| self.slot_dims[s]).product()
    }
}

/// Floating-point random unitaries, or signed permutations for bit-exact runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Exact,
}

fn random_unitary_in<R: Rng + ?Sized>(rng: &mut R, n: usize, mode: Mode) -> CMatrix {
    match mode {
        Mode::Float => random_unitary(rng, n),
        Mode::Exact => random_signed_permutation(rng, n),
    }
}

/// Unitary taking the factors `source` (in order) to the order `target`.
fn reorder(shape: &FamilyShape, source: &[usize], target: &[usize]) -> CMatrix {
    let dims: Vec<usize> = source.iter().map(|s| shape.slot_dims[s]).collect();
    let perm: Vec<usize> = target
        .iter()
        .map(|t| source.iter().position(|s| s == t).expect("target slot in source"))
        .collect();
    tensor_permutation(&dims, &perm)
}

fn product_of(unitaries: &BTreeMap<usize, CMatrix>, slots: &[usize]) -> CMatrix {
    slots
        .iter()
        .fold(identity(1), |acc, s| kron(&acc, &unitaries[s]))
}

/// Builds a family on `shape`:
/// `Φ_{λ'λ} = (W_{λ'λ} ⊗ V_λ) Π_{λ'λ} V_{λ'}^†` with a unitary `V_λ` per
/// index, `W` the product of per-slot unitaries over the new slots and `Π`
/// the slot reordering. The chain maps are `(W ⊗ W) Π W^†` likewise, so the
/// diagram commutes by construction.
pub fn generate_family<R: Rng + ?Sized>(shape: &FamilyShape, mode: Mode, rng: &mut R) -> Result<FactorizedFamily> {
    let all_slots: BTreeSet<usize> = shape.slots.iter().flatten().copied().collect();
    let slot_unitaries: BTreeMap<usize, CMatrix> = all_slots
        .iter()
        .map(|&s| (s, random_unitary_in(rng, shape.slot_dims[&s], mode)))
        .collect();
    let index_unitaries: Vec<CMatrix> = (0..shape.index.size())
        .map(|l| random_unitary_in(rng, shape.dim(l), mode))
        .collect();
    let ordered = |l: usize| -> Vec<usize> { shape.slots[l].iter().copied().collect() };
    let diff = |u: usize, l: usize| -> Vec<usize> { shape.slots[u].difference(&shape.slots[l]).copied().collect() };

    let mut phi = BTreeMap::new();
    for (upper, lower) in shape.index.pairs() {
        let new_slots = diff(upper, lower);
        let mut target = new_slots.clone();
        target.extend(ordered(lower));
        let pi = reorder(shape, &ordered(upper), &target);
        let w = product_of(&slot_unitaries, &new_slots);
        let m = kron(&w, &index_unitaries[lower]) * pi * index_unitaries[upper].adjoint();
        phi.insert((upper, lower), m);
    }
    let mut phi3 = BTreeMap::new();
    for (top, middle, lower) in shape.index.triples() {
        let source = diff(top, lower);
        let first = diff(top, middle);
        let second = diff(middle, lower);
        let mut target = first.clone();
        target.extend(second.iter().copied());
        let pi = reorder(shape, &source, &target);
        let w_first = product_of(&slot_unitaries, &first);
        let w_second = product_of(&slot_unitaries, &second);
        let w_source = product_of(&slot_unitaries, &source);
        phi3.insert((top, middle, lower), kron(&w_first, &w_second) * pi * w_source.adjoint());
    }
    let dims = (0..shape.index.size()).map(|l| shape.dim(l)).collect();
    FactorizedFamily::new(shape.index.clone(), dims, phi, phi3)
}

/// `ι_{λ'λ}(a) = Φ^{-1} (1 ⊗ a) Φ`.
pub fn embed_operator(fam: &FactorizedFamily, upper: usize, lower: usize, a: &CMatrix) -> Result<CMatrix> {
    if !fam.index.leq(lower, upper) {
        return Err(Error::invalid("embedding", format!("{lower} is not below {upper}")));
    }
    if a.nrows() != fam.dims[lower] || a.ncols() != fam.dims[lower] {
        return Err(Error::DimensionMismatch {
            expected: fam.dims[lower],
            found: a.nrows(),
        });
    }
    let m = fam.phi(upper, lower);
    Ok(m.adjoint() * kron(&identity(fam.factor_dim(upper, lower)), a) * m)
}

#[derive(Clone, Debug, Serialize)]
pub struct InductiveReport {
    pub triples: usize,
    pub matrix_units: usize,
    pub max_deviation: f64,
    pub failures: Vec<Failure>,
    pub passed: bool,
}

/// Row blocks `R_i` of a map into `H̃ ⊗ H_n`, so that `m^† (1 ⊗ e_ij) m = R_i^† R_j`.
fn unit_rows(m: &CMatrix, n: usize) -> Vec<CMatrix> {
    let k = m.nrows() / n;
    (0..n)
        .map(|i| m.select_rows((0..k).map(|r| r * n + i).collect::<Vec<_>>().iter()))
        .collect()
}

/// `ι_{λ''λ'} ∘ ι_{λ'λ} = ι_{λ''λ}` on every matrix unit of every chain.
pub fn check_inductive(fam: &FactorizedFamily) -> Result<InductiveReport> {
    check_shapes(fam)?;
    let mut failures = Vec::new();
    let mut max_dev: f64 = 0.0;
    let mut units = 0;
    let triples = fam.index.triples();
    for &(top, middle, lower) in &triples {
        let n = fam.dims[lower];
        let two_steps = kron(&identity(fam.factor_dim(top, middle)), fam.phi(middle, lower)) * fam.phi(top, middle);
        let composed = unit_rows(&two_steps, n);
        let direct = unit_rows(fam.phi(top, lower), n);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = composed[i].adjoint() * &composed[j];
                let b = direct[i].adjoint() * &direct[j];
                worst = worst.max(deviation(&a, &b));
                units += 1;
            }
        }
        max_dev = max_dev.max(worst);
        if worst > TOLERANCE {
            failures.push(Failure {
                check: "inductive",
                location: vec![top, middle, lower],
                deviation: worst,
            });
        }
    }
    Ok(InductiveReport {
        triples: triples.len(),
        matrix_units: units,
        max_deviation: max_dev,
        passed: failures.is_empty(),
        failures,
    })
}

/// `Π_{λλ'}(ω) = ω ∘ ι_{λ'λ}`, computed as `tr_{H̃}(Φ ρ Φ^†)`.
pub fn pullback_state(fam: &FactorizedFamily, upper: usize, lower: usize, state: &AlgebraState) -> Result<AlgebraState> {
    if !fam.index.leq(lower, upper) {
        return Err(Error::invalid("pull-back", format!("{lower} is not below {upper}")));
    }
    if state.dim() != fam.dims[upper] {
        return Err(Error::DimensionMismatch {
            expected: fam.dims[upper],
            found: state.dim(),
        });
    }
    let m = fam.phi(upper, lower);
    let moved = m * state.rho() * m.adjoint();
    AlgebraState::new(partial_trace_first(&moved, fam.factor_dim(upper, lower), fam.dims[lower]))
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectiveReport {
    pub greatest: usize,
    pub max_net_deviation: f64,
    pub max_composition_deviation: f64,
    pub min_eigenvalue: f64,
    pub max_trace_deviation: f64,
    pub failures: Vec<Failure>,
    pub passed: bool,
}

/// Builds the net `s_λ = Π_{λg}(ω)` from a state `ω` at the greatest element
/// `g`, checks `Π_{λλ'}(s_{λ'}) = s_λ` for every pair, and checks the
/// composition law `Π_{λλ'} ∘ Π_{λ'λ''} = Π_{λλ''}` on random states.
pub fn check_projective<R: Rng + ?Sized>(
    fam: &FactorizedFamily,
    top_state: &AlgebraState,
    rng: &mut R,
) -> Result<(Vec<AlgebraState>, ProjectiveReport)> {
    check_shapes(fam)?;
    let g = fam.index.greatest();
    let net: Vec<AlgebraState> = (0..fam.index.size())
        .map(|l| pullback_state(fam, g, l, top_state))
        .collect::<Result<_>>()?;
    let mut failures = Vec::new();
    let mut net_dev: f64 = 0.0;
    let mut comp_dev: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut trace_dev: f64 = 0.0;
    for s in &net {
        min_eig = min_eig.min(min_eigenvalue(s.rho()));
        trace_dev = trace_dev.max((s.rho().trace() - Complex64::new(1.0, 0.0)).norm());
    }
    for (upper, lower) in fam.index.pairs() {
        let d = deviation(pullback_state(fam, upper, lower, &net[upper])?.rho(), net[lower].rho());
        net_dev = net_dev.max(d);
        if d > TOLERANCE {
            failures.push(Failure {
                check: "net",
                location: vec![upper, lower],
                deviation: d,
            });
        }
    }
    for (top, middle, lower) in fam.index.triples() {
        let rho = AlgebraState::new(random_density(rng, fam.dims[top]))?;
        let two_steps = pullback_state(fam, middle, lower, &pullback_state(fam, top, middle, &rho)?)?;
        let direct = pullback_state(fam, top, lower, &rho)?;
        let d = deviation(two_steps.rho(), direct.rho());
        comp_dev = comp_dev.max(d);
        if d > TOLERANCE {
            failures.push(Failure {
                check: "composition",
                location: vec![top, middle, lower],
                deviation: d,
            });
        }
    }
    let report = ProjectiveReport {
        greatest: g,
        max_net_deviation: net_dev,
        max_composition_deviation: comp_dev,
        min_eigenvalue: min_eig,
        max_trace_deviation: trace_dev,
        passed: failures.is_empty() && min_eig >= -PSD_TOLERANCE && trace_dev <= TOLERANCE,
        failures,
    };
    Ok((net, report))
}

/// Random shape: distinct slot subsets of a small universe ordered by
/// inclusion, always containing the full universe so the set is directed.
/// Every space has dimension at most `max_dim`.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, max_elements: usize, max_dim: usize) -> FamilyShape {
    let mut slot_dims = BTreeMap::new();
    let mut total = 1;
    for s in 0..8 {
        let d = rng.random_range(2..=3);
        if total * d > max_dim {
            break;
        }
        total *= d;
        slot_dims.insert(s, d);
    }
    let universe: BTreeSet<usize> = slot_dims.keys().copied().collect();
    let capacity = 1usize << universe.len();
    let target = rng.random_range(1..=max_elements.min(capacity).max(1));
    let mut sets: Vec<BTreeSet<usize>> = vec![universe.clone()];
    let members: Vec<usize> = universe.iter().copied().collect();
    while sets.len() < target {
        let s: BTreeSet<usize> = members.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        if !sets.contains(&s) {
            sets.push(s);
        }
    }
    sets.shuffle(rng);
    FamilyShape::by_inclusion(sets, slot_dims).expect("inclusion order with a top element is directed")
}

/// Chain `0 < 1 < … < n-1` where element `k` carries slots `0..=k`.
pub fn chain_shape(slot_dims: &[usize]) -> FamilyShape {
    let slots = (0..slot_dims.len()).map(|k| (0..=k).collect()).collect();
    let dims = slot_dims.iter().copied().enumerate().collect();
    FamilyShape::by_inclusion(slots, dims).expect("chains are directed")
}

type ComplexRows = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorDoc {
    pub upper: usize,
    pub lower: usize,
    pub matrix: ComplexRows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleDoc {
    pub top: usize,
    pub middle: usize,
    pub lower: usize,
    pub matrix: ComplexRows,
}

/// Serialized family: strict order edges, dimensions and every unitary as
/// row-major `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub size: usize,
    pub edges: Vec<[usize; 2]>,
    pub dims: Vec<usize>,
    pub factors: Vec<FactorDoc>,
    pub triples: Vec<TripleDoc>,
}

fn to_rows(m: &CMatrix) -> ComplexRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_rows(rows: &ComplexRows) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::invalid("matrix", "ragged rows"));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl FactorizedFamily {
    pub fn to_doc(&self) -> FamilyDoc {
        FamilyDoc {
            size: self.index.size(),
            edges: self.index.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            dims: self.dims.clone(),
            factors: self
                .phi
                .iter()
                .map(|(&(upper, lower), m)| FactorDoc {
                    upper,
                    lower,
                    matrix: to_rows(m),
                })
                .collect(),
            triples: self
                .phi3
                .iter()
                .map(|(&(top, middle, lower), m)| TripleDoc {
                    top,
                    middle,
                    lower,
                    matrix: to_rows(m),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &FamilyDoc) -> Result<Self> {
        let edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
        let index = DirectedSet::new(doc.size, &edges)?;
        let phi = doc
            .factors
            .iter()
            .map(|f| Ok(((f.upper, f.lower), from_rows(&f.matrix)?)))
            .collect::<Result<_>>()?;
        let phi3 = doc
            .triples
            .iter()
            .map(|t| Ok(((t.top, t.middle, t.lower), from_rows(&t.matrix)?)))
            .collect::<Result<_>>()?;
        Self::new(index, doc.dims.clone(), phi, phi3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded;

    #[test]
    fn chain_dimensions() {
        let shape = chain_shape(&[2, 2, 2]);
        let fam = generate_family(&shape, Mode::Float, &mut seeded(1)).unwrap();
        assert_eq!(fam.dims(), &[2, 4, 8]);
        let report = verify_family(&fam).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(check_inductive(&fam).unwrap().passed);
    }

    #[test]
    fn single_element_is_trivial() {
        let shape = FamilyShape::by_inclusion(vec![BTreeSet::from([0])], BTreeMap::from([(0, 3)])).unwrap();
        let fam = generate_family(&shape, Mode::Float, &mut seeded(2)).unwrap();
        assert_eq!(fam.factor_dim(0, 0), 1);
        assert!(verify_family(&fam).unwrap().passed);
    }

    #[test]
    fn exact_mode_has_zero_deviation() {
        let mut rng = seeded(3);
        let shape = random_shape(&mut rng, 6, 16);
        let fam = generate_family(&shape, Mode::Exact, &mut rng).unwrap();
        let report = verify_family(&fam).unwrap();
        assert_eq!(report.max_deviation, 0.0);
        assert_eq!(check_inductive(&fam).unwrap().max_deviation, 0.0);
    }

    #[test]
    fn permutation_identity_family_passes() {
        let shape = chain_shape(&[2, 3]);
        let dims = vec![2, 6];
        let mut phi = BTreeMap::new();
        phi.insert((0, 0), identity(2));
        phi.insert((1, 1), identity(6));
        // H_1 = C^2 ⊗ C^3 with slots (0, 1); H̃ ⊗ H_0 = C^3 ⊗ C^2.
        phi.insert((1, 0), tensor_permutation(&[2, 3], &[1, 0]));
        let mut phi3 = BTreeMap::new();
        for t in shape.index.triples() {
            let n = match t {
                (1, _, 0) => 3,
                _ => 1,
            };
            phi3.insert(t, identity(n));
        }
        let fam = FactorizedFamily::new(shape.index.clone(), dims, phi, phi3).unwrap();
        let report = verify_family(&fam).unwrap();
        assert!(report.passed);
        assert_eq!(report.max_deviation, 0.0);
    }

    #[test]
    fn broken_chain_map_is_located() {
        let mut rng = seeded(4);
        let shape = chain_shape(&[2, 2, 2]);
        let mut fam = generate_family(&shape, Mode::Float, &mut rng).unwrap();
        let n = fam.phi3(2, 1, 0).nrows();
        fam.replace_phi3(2, 1, 0, random_unitary(&mut rng, n));
        let report = verify_family(&fam).unwrap();
        assert!(!report.passed);
        assert!(report
            .failures
            .iter()
            .any(|f| f.check == "diagram" && f.location == vec![2, 1, 0]));
    }

    #[test]
    fn embedding_is_a_homomorphism() {
        let mut rng = seeded(5);
        let shape = chain_shape(&[2, 3]);
        let fam = generate_family(&shape, Mode::Float, &mut rng).unwrap();
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 2, 2);
        let ia = embed_operator(&fam, 1, 0, &a).unwrap();
        let ib = embed_operator(&fam, 1, 0, &b).unwrap();
        let iab = embed_operator(&fam, 1, 0, &(&a * &b)).unwrap();
        assert!(deviation(&iab, &(&ia * &ib)) < TOLERANCE);
        let ia_star = embed_operator(&fam, 1, 0, &a.adjoint()).unwrap();
        assert!(deviation(&ia_star, &ia.adjoint()) < TOLERANCE);
        let one = embed_operator(&fam, 1, 0, &identity(2)).unwrap();
        assert!(deviation(&one, &identity(6)) < TOLERANCE);
    }

    #[test]
    fn pullback_duality_and_mixed_states() {
        let mut rng = seeded(6);
        let shape = chain_shape(&[2, 2]);
        let fam = generate_family(&shape, Mode::Float, &mut rng).unwrap();
        let mixed = AlgebraState::maximally_mixed(4);
        let pulled = pullback_state(&fam, 1, 0, &mixed).unwrap();
        assert!(deviation(pulled.rho(), AlgebraState::maximally_mixed(2).rho()) < TOLERANCE);
        let rho = AlgebraState::new(random_density(&mut rng, 4)).unwrap();
        let a = random_matrix(&mut rng, 2, 2);
        let lhs = rho.expectation(&embed_operator(&fam, 1, 0, &a).unwrap());
        let rhs = pullback_state(&fam, 1, 0, &rho).unwrap().expectation(&a);
        assert!((lhs - rhs).norm() < TOLERANCE);
        let same = pullback_state(&fam, 1, 1, &rho).unwrap();
        assert!(deviation(same.rho(), rho.rho()) < TOLERANCE);
    }

    #[test]
    fn non_directed_set_rejected() {
        assert!(matches!(DirectedSet::new(2, &[]), Err(Error::NotDirected(_))));
        assert!(DirectedSet::new(3, &[(0, 2), (1, 2)]).is_ok());
    }

    #[test]
    fn doc_round_trip() {
        let mut rng = seeded(7);
        let shape = random_shape(&mut rng, 5, 12);
        let fam = generate_family(&shape, Mode::Float, &mut rng).unwrap();
        let json = serde_json::to_string(&fam.to_doc()).unwrap();
        let back: FamilyDoc = serde_json::from_str(&json).unwrap();
        assert!(FactorizedFamily::from_doc(&back).unwrap() == fam);
    }
}
