//! Elementary degrees of freedom, momentum operators and cylindrical
//! functions.
//!
//! A configurational d.o.f. `κ` evaluates a tensor field at one point on a
//! fixed set of slot arguments. A momentum d.o.f. `φ` contracts a momentum
//! density with one form-like field per slot and integrates the result. The
//! operator `φ̂` acts on cylindrical functions through the Poisson bracket;
//! on a single `κ` it yields the constant returned by [`pairing`].

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::geometry::{
    self, contract, outer_product, Covector, DiscreteMeasure, MomentumField, OneForm, PointId,
    TangentVector, TensorSort, VectorField,
};
use crate::linalg::Matrix;
use crate::polynomial::Polynomial;
use crate::rational::Q;
use crate::{Error, Result};

/// Configurational d.o.f. `κ(q) = q_x(a_0, …, a_{r-1})`.
///
/// `args[s]` is a covector for contravariant slots and a vector for
/// covariant ones. Equality is equality as functions of symmetric fields,
/// so arguments permuted by a declared symmetry compare equal.
#[derive(Clone, Debug)]
pub struct ConfigDof {
    sort: TensorSort,
    dim: usize,
    point: PointId,
    args: Vec<Vec<Q>>,
}

impl ConfigDof {
    pub fn new(sort: TensorSort, dim: usize, point: PointId, args: Vec<Vec<Q>>) -> Result<Self> {
        if args.len() != sort.rank() {
            return Err(Error::ArgumentMismatch(format!(
                "sort `{}` has {} slots, got {} arguments",
                sort.label,
                sort.rank(),
                args.len()
            )));
        }
        if let Some(a) = args.iter().find(|a| a.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.len(),
            });
        }
        Ok(ConfigDof {
            sort,
            dim,
            point,
            args,
        })
    }

    /// Builds a d.o.f. from based covectors (upper slots) and vectors (lower
    /// slots), checking that every argument sits at `point`.
    pub fn from_arguments(
        sort: TensorSort,
        point: PointId,
        covectors: &[Covector],
        vectors: &[TangentVector],
        dim: usize,
    ) -> Result<Self> {
        if covectors.len() != sort.contravariant() || vectors.len() != sort.covariant() {
            return Err(Error::ArgumentMismatch(format!(
                "sort `{}` takes {} covectors and {} vectors",
                sort.label,
                sort.contravariant(),
                sort.covariant()
            )));
        }
        let bases = covectors.iter().map(|c| &c.base).chain(vectors.iter().map(|v| &v.base));
        for base in bases {
            if *base != point {
                return Err(Error::ArgumentMismatch(format!(
                    "argument based at `{base}`, d.o.f. at `{point}`"
                )));
            }
        }
        let args = covectors
            .iter()
            .map(|c| c.components.clone())
            .chain(vectors.iter().map(|v| v.components.clone()))
            .collect();
        Self::new(sort, dim, point, args)
    }

    pub fn scalar(sort: TensorSort, dim: usize, point: PointId) -> Result<Self> {
        Self::new(sort, dim, point, Vec::new())
    }

    pub fn sort(&self) -> &TensorSort {
        &self.sort
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self) -> &PointId {
        &self.point
    }

    pub fn args(&self) -> &[Vec<Q>] {
        &self.args
    }

    /// Plain outer product of the arguments, one entry per component `q_I`.
    pub fn coefficient_tensor(&self) -> Vec<Q> {
        let args: Vec<&[Q]> = self.args.iter().map(Vec::as_slice).collect();
        outer_product(&args, self.dim)
    }

    /// Coefficients on the independent components of a symmetric field, one
    /// per orbit representative of [`TensorSort::orbit_representatives`].
    pub fn linear_functional(&self) -> Vec<Q> {
        let tensor = self.coefficient_tensor();
        let reps = self.sort.orbit_representatives(self.dim);
        let position: BTreeMap<Vec<usize>, usize> =
            reps.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect();
        let mut out = vec![Q::zero(); reps.len()];
        for (flat, c) in tensor.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let idx = geometry::unflatten(flat, self.dim, self.sort.rank());
            out[position[&self.sort.canonical_indices(&idx)]] += c;
        }
        out
    }
}

impl PartialEq for ConfigDof {
    fn eq(&self, other: &Self) -> bool {
        self.sort == other.sort
            && self.dim == other.dim
            && self.point == other.point
            && self.linear_functional() == other.linear_functional()
    }
}

impl Eq for ConfigDof {}

/// Momentum d.o.f. `φ(p) = Σ_y w(y) p_y(f_0(y), …, f_{r-1}(y))`.
///
/// Upper slots of the sort are filled with vector fields, lower slots with
/// one-forms; a scalar sort uses a finitely supported smearing function.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct MomentumDof {
    sort: TensorSort,
    dim: usize,
    vector_fields: Vec<VectorField>,
    one_forms: Vec<OneForm>,
    smearing: BTreeMap<PointId, Q>,
    measure: DiscreteMeasure,
}

impl MomentumDof {
    pub fn new(
        sort: TensorSort,
        dim: usize,
        vector_fields: Vec<VectorField>,
        one_forms: Vec<OneForm>,
        measure: DiscreteMeasure,
    ) -> Result<Self> {
        if sort.is_scalar() {
            return Err(Error::ArgumentMismatch(format!(
                "scalar sort `{}` needs a smearing function",
                sort.label
            )));
        }
        if vector_fields.len() != sort.contravariant() || one_forms.len() != sort.covariant() {
            return Err(Error::ArgumentMismatch(format!(
                "sort `{}` takes {} vector fields and {} one-forms, got {} and {}",
                sort.label,
                sort.contravariant(),
                sort.covariant(),
                vector_fields.len(),
                one_forms.len()
            )));
        }
        let all_values = vector_fields
            .iter()
            .flat_map(|f| f.values().values())
            .chain(one_forms.iter().flat_map(|f| f.values().values()));
        for v in all_values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Self::checked(MomentumDof {
            sort,
            dim,
            vector_fields,
            one_forms,
            smearing: BTreeMap::new(),
            measure,
        })
    }

    pub fn scalar(
        sort: TensorSort,
        dim: usize,
        smearing: BTreeMap<PointId, Q>,
        measure: DiscreteMeasure,
    ) -> Result<Self> {
        if !sort.is_scalar() {
            return Err(Error::ArgumentMismatch(format!(
                "sort `{}` is not scalar",
                sort.label
            )));
        }
        let smearing = smearing.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        Self::checked(MomentumDof {
            sort,
            dim,
            vector_fields: Vec::new(),
            one_forms: Vec::new(),
            smearing,
            measure,
        })
    }

    fn checked(dof: MomentumDof) -> Result<Self> {
        let support = dof.support();
        if support.is_empty() {
            return Err(Error::invalid(
                "momentum d.o.f.",
                "the slot fields have no common support, so the functional vanishes",
            ));
        }
        if let Some(p) = support.iter().find(|p| !dof.measure.covers(p)) {
            return Err(Error::OutsideMeasure(p.clone()));
        }
        Ok(dof)
    }

    pub fn sort(&self) -> &TensorSort {
        &self.sort
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector_fields(&self) -> &[VectorField] {
        &self.vector_fields
    }

    pub fn one_forms(&self) -> &[OneForm] {
        &self.one_forms
    }

    pub fn smearing(&self) -> &BTreeMap<PointId, Q> {
        &self.smearing
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    /// Value of the field in slot `s` at `point`, `None` where it vanishes.
    pub fn slot_value(&self, slot: usize, point: &PointId) -> Option<&[Q]> {
        let m = self.sort.contravariant();
        if slot < m {
            self.vector_fields[slot].value(point)
        } else {
            self.one_forms[slot - m].value(point)
        }
    }

    /// Points where the contracted density can be nonzero: all slot fields
    /// are nonzero there (the smearing support for scalar sorts).
    pub fn support(&self) -> BTreeSet<PointId> {
        if self.sort.is_scalar() {
            return self.smearing.keys().cloned().collect();
        }
        let mut slots = (0..self.sort.rank()).map(|s| {
            let m = self.sort.contravariant();
            if s < m {
                self.vector_fields[s].support()
            } else {
                self.one_forms[s - m].support()
            }
        });
        let first = slots.next().unwrap_or_default();
        slots.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
    }

    /// Every point where at least one slot field is nonzero.
    pub fn footprint(&self) -> BTreeSet<PointId> {
        let mut out: BTreeSet<PointId> = self.smearing.keys().cloned().collect();
        for f in &self.vector_fields {
            out.extend(f.support());
        }
        for f in &self.one_forms {
            out.extend(f.support());
        }
        out
    }

    /// Coefficient array `c_J(y)` with `φ(p) = Σ_y w(y) Σ_J c_J(y) p^J(y)`.
    pub fn density_coefficients(&self, point: &PointId) -> Option<Vec<Q>> {
        if self.sort.is_scalar() {
            return self.smearing.get(point).map(|v| vec![v.clone()]);
        }
        let values: Option<Vec<&[Q]>> = (0..self.sort.rank())
            .map(|s| self.slot_value(s, point))
            .collect();
        values.map(|v| outer_product(&v, self.dim))
    }

    /// A momentum field on which this d.o.f. is nonzero, certifying that it
    /// is a non-zero functional.
    pub fn witness_field(&self) -> MomentumField {
        let point = self.support().into_iter().next().expect("support checked at construction");
        let coefs = self.density_coefficients(&point).expect("point in support");
        let sample = self.sort.symmetrize(self.dim, &coefs);
        MomentumField::new(self.sort.clone(), self.dim, BTreeMap::from([(point, sample)]))
            .expect("symmetrized sample")
    }
}

/// Finite linear combination `Σ c_i φ̂_i`. Identical d.o.f. are merged and
/// zero coefficients dropped, so structurally equal combinations compare
/// equal. Use [`crate::systems::operators_equal`] for extensional equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentumOperator {
    terms: Vec<(Q, MomentumDof)>,
}

impl MomentumOperator {
    pub fn from_terms(terms: impl IntoIterator<Item = (Q, MomentumDof)>) -> Self {
        let mut merged: BTreeMap<MomentumDof, Q> = BTreeMap::new();
        for (c, dof) in terms {
            *merged.entry(dof).or_insert_with(Q::zero) += c;
        }
        MomentumOperator {
            terms: merged
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(d, c)| (c, d))
                .collect(),
        }
    }

    pub fn single(dof: MomentumDof) -> Self {
        Self::from_terms([(Q::one(), dof)])
    }

    pub fn zero() -> Self {
        MomentumOperator { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[(Q, MomentumDof)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, factor: &Q) -> Self {
        Self::from_terms(self.terms.iter().map(|(c, d)| (c * factor, d.clone())))
    }

    pub fn add(&self, other: &MomentumOperator) -> Self {
        Self::from_terms(self.terms.iter().chain(&other.terms).cloned())
    }

    /// `Σ coefs[i] · ops[i]`.
    pub fn combination(coefs: &[Q], ops: &[MomentumOperator]) -> Self {
        assert_eq!(coefs.len(), ops.len());
        Self::from_terms(coefs.iter().zip(ops).flat_map(|(c, op)| {
            op.terms.iter().filter(|_| !c.is_zero()).map(move |(t, d)| (c * t, d.clone()))
        }))
    }

    pub fn support(&self) -> BTreeSet<PointId> {
        self.terms.iter().flat_map(|(_, d)| d.support()).collect()
    }

    pub fn footprint(&self) -> BTreeSet<PointId> {
        self.terms.iter().flat_map(|(_, d)| d.footprint()).collect()
    }

    pub fn sorts(&self) -> Vec<TensorSort> {
        let mut out: Vec<TensorSort> = Vec::new();
        for (_, d) in &self.terms {
            if !out.contains(&d.sort) {
                out.push(d.sort.clone());
            }
        }
        out
    }
}

/// One sampled field per sort label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Configuration {
    fields: BTreeMap<String, geometry::ConfigField>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, field: geometry::ConfigField) {
        self.fields.insert(field.sort().label.clone(), field);
    }

    pub fn field(&self, label: &str) -> Option<&geometry::ConfigField> {
        self.fields.get(label)
    }

    pub fn fields(&self) -> impl Iterator<Item = &geometry::ConfigField> {
        self.fields.values()
    }

    pub fn eval(&self, dof: &ConfigDof) -> Result<Q> {
        let field = self.fields.get(&dof.sort.label).ok_or_else(|| {
            Error::SortMismatch(format!("no field of sort `{}`", dof.sort.label))
        })?;
        eval_config_dof(dof, field)
    }
}

/// Function `Ψ(q) = ψ(κ_1(q), …, κ_N(q))` with polynomial `ψ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylindricalFunction {
    base: Vec<ConfigDof>,
    poly: Polynomial,
}

impl CylindricalFunction {
    pub fn new(base: Vec<ConfigDof>, poly: Polynomial) -> Result<Self> {
        if poly.nvars() != base.len() {
            return Err(Error::DimensionMismatch {
                expected: base.len(),
                found: poly.nvars(),
            });
        }
        Ok(CylindricalFunction { base, poly })
    }

    pub fn base(&self) -> &[ConfigDof] {
        &self.base
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn eval(&self, q: &Configuration) -> Result<Q> {
        let coords: Vec<Q> = self.base.iter().map(|k| q.eval(k)).collect::<Result<_>>()?;
        Ok(self.poly.eval(&coords))
    }

    /// Whether the base d.o.f. are linearly independent functions on Q.
    pub fn has_independent_base(&self) -> bool {
        independent(&self.base)
    }
}

/// Linear independence of configurational d.o.f. as functions on Q.
pub fn independent(dofs: &[ConfigDof]) -> bool {
    functional_matrix(dofs).0.rank() == dofs.len()
}

/// Rows: the d.o.f. as functionals on the independent components of all
/// sampled fields. Columns are keyed by `(point, sort label, orbit index)`.
pub fn functional_matrix(dofs: &[ConfigDof]) -> (Matrix, Vec<(PointId, String, usize)>) {
    let mut columns: BTreeMap<(PointId, String, usize), usize> = BTreeMap::new();
    let functionals: Vec<Vec<Q>> = dofs.iter().map(ConfigDof::linear_functional).collect();
    for (dof, f) in dofs.iter().zip(&functionals) {
        for i in 0..f.len() {
            let key = (dof.point.clone(), dof.sort.label.clone(), i);
            let next = columns.len();
            columns.entry(key).or_insert(next);
        }
    }
    let mut keys: Vec<_> = columns.keys().cloned().collect();
    keys.sort();
    let position: BTreeMap<_, usize> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let mut m = Matrix::zeros(dofs.len(), keys.len());
    for (r, (dof, f)) in dofs.iter().zip(&functionals).enumerate() {
        for (i, c) in f.iter().enumerate() {
            let key = (dof.point.clone(), dof.sort.label.clone(), i);
            m[(r, position[&key])] = c.clone();
        }
    }
    (m, keys)
}

/// Coefficients expressing `target` as a combination of `dofs`, if possible.
pub fn express(target: &ConfigDof, dofs: &[ConfigDof]) -> Option<Vec<Q>> {
    let mut all = dofs.to_vec();
    all.push(target.clone());
    let (m, _) = functional_matrix(&all);
    let basis = m.block(0..dofs.len(), 0..m.cols());
    basis.row_combination(m.row(dofs.len()))
}

fn check_same_sort(a: &TensorSort, b: &TensorSort, dim_a: usize, dim_b: usize) -> Result<()> {
    if a.label != b.label || !a.same_shape(b) || dim_a != dim_b {
        return Err(Error::SortMismatch(format!(
            "`{}` {:?} in dimension {dim_a} against `{}` {:?} in dimension {dim_b}",
            a.label,
            (a.contravariant(), a.covariant()),
            b.label,
            (b.contravariant(), b.covariant())
        )));
    }
    Ok(())
}

pub fn eval_config_dof(dof: &ConfigDof, q: &geometry::ConfigField) -> Result<Q> {
    check_same_sort(&dof.sort, q.sort(), dof.dim, q.dim())?;
    let sample = q.sample(&dof.point)?;
    let args: Vec<&[Q]> = dof.args.iter().map(Vec::as_slice).collect();
    Ok(contract(sample, dof.dim, &args))
}

pub fn eval_momentum_dof(dof: &MomentumDof, p: &MomentumField) -> Result<Q> {
    check_same_sort(&dof.sort, p.sort(), dof.dim, p.dim())?;
    let mut density = BTreeMap::new();
    for point in dof.support() {
        let Some(sample) = p.sample(&point) else {
            continue;
        };
        let value = if dof.sort.is_scalar() {
            &sample[0] * &dof.smearing[&point]
        } else {
            let args: Vec<&[Q]> = (0..dof.sort.rank())
                .map(|s| dof.slot_value(s, &point).expect("point in support"))
                .collect();
            contract(sample, dof.dim, &args)
        };
        density.insert(point, value);
    }
    geometry::integrate_density(&density, &dof.measure)
}

/// The constant `φ̂κ` for a single momentum d.o.f.
///
/// Different sort labels are independent canonical pairs and give 0. For a
/// shared sort the value is `-(1/|S|) Σ_{σ∈S} Π_s ⟨f_{σ(s)}(x), a_s⟩` at
/// `x = κ.point`, with `S` the declared symmetry group. The measure weight
/// cancels against the bracket normalization.
pub fn pairing_dof(phi: &MomentumDof, kappa: &ConfigDof) -> Result<Q> {
    if phi.sort.label != kappa.sort.label {
        return Ok(Q::zero());
    }
    check_same_sort(&phi.sort, &kappa.sort, phi.dim, kappa.dim)?;
    let x = &kappa.point;
    if phi.sort.is_scalar() {
        return Ok(phi.smearing.get(x).map_or_else(Q::zero, |v| -v));
    }
    let rank = phi.sort.rank();
    let values: Option<Vec<&[Q]>> = (0..rank).map(|s| phi.slot_value(s, x)).collect();
    let Some(values) = values else {
        return Ok(Q::zero());
    };
    let perms = phi.sort.symmetry_permutations();
    let mut total = Q::zero();
    for perm in &perms {
        let mut term = Q::one();
        for (s, &source) in perm.iter().enumerate() {
            term *= crate::rational::dot(values[source], &kappa.args[s]);
            if term.is_zero() {
                break;
            }
        }
        total += term;
    }
    Ok(-total / Q::from_integer((perms.len() as i64).into()))
}

/// `φ̂κ` extended linearly over the operator terms.
pub fn pairing(op: &MomentumOperator, kappa: &ConfigDof) -> Result<Q> {
    let mut total = Q::zero();
    for (c, dof) in &op.terms {
        let v = pairing_dof(dof, kappa)?;
        if !v.is_zero() {
            total += c * v;
        }
    }
    Ok(total)
}

/// `φ̂Ψ = Σ_α (∂_α ψ) · φ̂κ_α`, a cylindrical function over the same base.
pub fn apply_momentum_operator(
    op: &MomentumOperator,
    psi: &CylindricalFunction,
) -> Result<CylindricalFunction> {
    let n = psi.base.len();
    let mut poly = Polynomial::zero(n);
    for (alpha, kappa) in psi.base.iter().enumerate() {
        let g = pairing(op, kappa)?;
        if g.is_zero() {
            continue;
        }
        poly = &poly + &psi.poly.derivative(alpha).scale(&g);
    }
    CylindricalFunction::new(psi.base.clone(), poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{standard_basis, ConfigField};
    use crate::rational::{frac, int};

    fn y() -> PointId {
        PointId::from("y")
    }

    fn metric() -> TensorSort {
        TensorSort::symmetric_covariant_pair("q")
    }

    fn e(i: usize) -> Vec<Q> {
        standard_basis(3)[i].clone()
    }

    fn kappa(a: Vec<Q>, b: Vec<Q>) -> ConfigDof {
        ConfigDof::new(metric(), 3, y(), vec![a, b]).unwrap()
    }

    fn phi(a: Vec<Q>, b: Vec<Q>) -> MomentumDof {
        MomentumDof::new(
            metric(),
            3,
            vec![],
            vec![OneForm::at("y", a), OneForm::at("y", b)],
            DiscreteMeasure::unit([&y()]),
        )
        .unwrap()
    }

    #[test]
    fn dual_configuration_pairs_to_minus_half() {
        let op = MomentumOperator::single(phi(e(0), e(1)));
        assert_eq!(pairing(&op, &kappa(e(0), e(1))).unwrap(), frac(-1, 2));
    }

    #[test]
    fn swapped_arguments_are_equal() {
        let a = vec![int(1), int(2), int(0)];
        let b = vec![int(0), frac(1, 3), int(5)];
        assert_eq!(kappa(a.clone(), b.clone()), kappa(b.clone(), a.clone()));
        assert_ne!(kappa(a.clone(), a.clone()), kappa(a, b));
    }

    #[test]
    fn different_sorts_do_not_pair() {
        let other = ConfigDof::scalar(TensorSort::scalar("phi"), 3, y()).unwrap();
        assert_eq!(pairing_dof(&phi(e(0), e(0)), &other).unwrap(), int(0));
        let clash = ConfigDof::new(TensorSort::new("q", 0, 2), 3, y(), vec![e(0), e(0)]).unwrap();
        assert!(matches!(
            pairing_dof(&phi(e(0), e(0)), &clash),
            Err(Error::SortMismatch(_))
        ));
    }

    #[test]
    fn forms_away_from_point_give_zero() {
        let far = MomentumDof::new(
            metric(),
            3,
            vec![],
            vec![OneForm::at("z", e(0)), OneForm::at("z", e(0))],
            DiscreteMeasure::unit([&PointId::from("z")]),
        )
        .unwrap();
        assert_eq!(pairing_dof(&far, &kappa(e(0), e(0))).unwrap(), int(0));
    }

    #[test]
    fn momentum_dof_without_common_support_is_rejected() {
        let r = MomentumDof::new(
            metric(),
            3,
            vec![],
            vec![OneForm::at("y", e(0)), OneForm::at("z", e(0))],
            DiscreteMeasure::unit([&y(), &PointId::from("z")]),
        );
        assert!(r.is_err());
        let outside = MomentumDof::new(
            metric(),
            3,
            vec![],
            vec![OneForm::at("y", e(0)), OneForm::at("y", e(0))],
            DiscreteMeasure::unit([&PointId::from("z")]),
        );
        assert!(matches!(outside, Err(Error::OutsideMeasure(_))));
    }

    #[test]
    fn witness_field_is_nonzero() {
        let d = phi(vec![int(1), int(-1), int(0)], vec![int(1), int(1), int(0)]);
        let p = d.witness_field();
        assert!(!eval_momentum_dof(&d, &p).unwrap().is_zero());
    }

    #[test]
    fn config_dof_evaluates_by_contraction() {
        let sort = metric();
        let mut arr = vec![int(0); 9];
        arr[1] = int(4);
        arr[3] = int(4);
        arr[8] = int(2);
        let q = ConfigField::new(sort, 3, BTreeMap::from([(y(), arr)])).unwrap();
        assert_eq!(eval_config_dof(&kappa(e(0), e(1)), &q).unwrap(), int(4));
        let v = vec![int(1), int(1), int(1)];
        assert_eq!(eval_config_dof(&kappa(v.clone(), v), &q).unwrap(), int(10));
    }

    #[test]
    fn linear_functional_collects_orbits() {
        let k = kappa(vec![int(1), int(1), int(0)], e(0));
        // Orbit representatives in order: 00 01 02 11 12 22.
        assert_eq!(
            k.linear_functional(),
            vec![int(1), int(1), int(0), int(0), int(0), int(0)]
        );
    }

    #[test]
    fn operator_terms_merge() {
        let a = phi(e(0), e(1));
        let op = MomentumOperator::from_terms([(int(2), a.clone()), (int(-2), a.clone())]);
        assert!(op.is_zero());
        let op = MomentumOperator::from_terms([(int(1), a.clone()), (frac(1, 2), a)]);
        assert_eq!(op.terms().len(), 1);
        assert_eq!(op.terms()[0].0, frac(3, 2));
    }

    #[test]
    fn constant_cylindrical_function_is_annihilated() {
        let base = vec![kappa(e(0), e(0))];
        let psi = CylindricalFunction::new(base, Polynomial::constant(1, int(7))).unwrap();
        let op = MomentumOperator::single(phi(e(0), e(0)));
        assert!(apply_momentum_operator(&op, &psi).unwrap().poly().is_zero());
    }
}
