//! Desk-scale model of the spatial manifold Σ.
//!
//! Σ is a finite set of labelled points with rational chart coordinates.
//! Tangent and cotangent objects are plain component vectors tied to a base
//! point, tensor fields are sampled component arrays, and integration over Σ
//! is a weighted sum over points.
//!
//! Component arrays of a tensor with `m` contravariant and `n` covariant
//! indices are stored row-major with shape `D^(m+n)`: the `m` upper indices
//! come first (slot 0 is the most significant), then the `n` lower indices.
//! Contravariant slots are contracted with covectors, covariant slots with
//! vectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::marker::PhantomData;

use num_traits::{One, Signed, Zero};

use crate::linalg::Matrix;
use crate::rational::{self, Q};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub String);

impl PointId {
    pub fn new(id: impl Into<String>) -> Self {
        PointId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PointId {
    fn from(s: &str) -> Self {
        PointId(s.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Point {
    pub id: PointId,
    pub coords: Vec<Q>,
}

/// The finite point set standing in for Σ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifold {
    dim: usize,
    points: BTreeMap<PointId, Vec<Q>>,
    fresh_counter: u64,
}

impl Manifold {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("manifold", "dimension must be at least 1"));
        }
        Ok(Manifold {
            dim,
            points: BTreeMap::new(),
            fresh_counter: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, point: Point) -> Result<()> {
        if point.coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.coords.len(),
            });
        }
        if self.points.contains_key(&point.id) {
            return Err(Error::invalid("point", format!("duplicate id `{}`", point.id)));
        }
        if self.points.values().any(|c| *c == point.coords) {
            return Err(Error::invalid(
                "point",
                format!("`{}` repeats the coordinates of another point", point.id),
            ));
        }
        self.points.insert(point.id, point.coords);
        Ok(())
    }

    pub fn contains(&self, id: &PointId) -> bool {
        self.points.contains_key(id)
    }

    pub fn coords(&self, id: &PointId) -> Option<&[Q]> {
        self.points.get(id).map(Vec::as_slice)
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.points.iter().map(|(id, c)| Point {
            id: id.clone(),
            coords: c.clone(),
        })
    }

    pub fn ids(&self) -> BTreeSet<PointId> {
        self.points.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Next point of the deterministic fresh sequence: ids `~k`, coordinates
    /// `(-(k+1), 1/2, 0, …)`, skipping anything already present or in `avoid`.
    pub fn fresh_point(&mut self, avoid: &BTreeSet<PointId>) -> PointId {
        loop {
            let k = self.fresh_counter;
            self.fresh_counter += 1;
            let id = PointId(format!("~{k}"));
            let mut coords = vec![Q::zero(); self.dim];
            coords[0] = -rational::int(k as i64 + 1);
            if self.dim > 1 {
                coords[1] = rational::frac(1, 2);
            }
            if avoid.contains(&id) || self.points.contains_key(&id) {
                continue;
            }
            if self.points.values().any(|c| *c == coords) {
                continue;
            }
            self.points.insert(id.clone(), coords);
            return id;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangentVector {
    pub base: PointId,
    pub components: Vec<Q>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Covector {
    pub base: PointId,
    pub components: Vec<Q>,
}

impl TangentVector {
    pub fn new(base: impl Into<PointId>, components: Vec<Q>) -> Self {
        TangentVector {
            base: base.into(),
            components,
        }
    }
}

impl Covector {
    pub fn new(base: impl Into<PointId>, components: Vec<Q>) -> Self {
        Covector {
            base: base.into(),
            components,
        }
    }

    pub fn apply(&self, v: &TangentVector) -> Q {
        rational::dot(&self.components, &v.components)
    }
}

impl From<String> for PointId {
    fn from(s: String) -> Self {
        PointId(s)
    }
}

/// Which kind of argument a tensor slot consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variance {
    /// Upper index; contracted with a covector.
    Contravariant,
    /// Lower index; contracted with a vector.
    Covariant,
}

/// Type `(m, n)` of a tensor field together with its declared symmetries.
///
/// Symmetries are given as disjoint groups of slots; the tensor is totally
/// symmetric under permutations inside each group. A symmetric `(0, 2)` sort
/// has the single group `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorSort {
    pub label: String,
    contravariant: usize,
    covariant: usize,
    symmetric_groups: Vec<Vec<usize>>,
}

impl TensorSort {
    pub fn new(label: impl Into<String>, contravariant: usize, covariant: usize) -> Self {
        TensorSort {
            label: label.into(),
            contravariant,
            covariant,
            symmetric_groups: Vec::new(),
        }
    }

    pub fn with_symmetry(
        label: impl Into<String>,
        contravariant: usize,
        covariant: usize,
        groups: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let mut sort = Self::new(label, contravariant, covariant);
        let rank = sort.rank();
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::new();
        for group in groups {
            let mut group = group;
            group.sort_unstable();
            if group.len() < 2 {
                return Err(Error::invalid("sort", "symmetry group needs two or more slots"));
            }
            for &slot in &group {
                if slot >= rank {
                    return Err(Error::invalid("sort", format!("slot {slot} out of range")));
                }
                if !seen.insert(slot) {
                    return Err(Error::invalid("sort", format!("slot {slot} in two groups")));
                }
            }
            let v = sort.slot_variance(group[0]);
            if group.iter().any(|&s| sort.slot_variance(s) != v) {
                return Err(Error::invalid(
                    "sort",
                    "a symmetry group mixes upper and lower slots",
                ));
            }
            normalized.push(group);
        }
        normalized.sort();
        sort.symmetric_groups = normalized;
        Ok(sort)
    }

    /// Symmetric `(0, 2)` sort, the metric-like case.
    pub fn symmetric_covariant_pair(label: impl Into<String>) -> Self {
        Self::with_symmetry(label, 0, 2, vec![vec![0, 1]]).expect("valid symmetric pair")
    }

    pub fn scalar(label: impl Into<String>) -> Self {
        Self::new(label, 0, 0)
    }

    pub fn contravariant(&self) -> usize {
        self.contravariant
    }

    pub fn covariant(&self) -> usize {
        self.covariant
    }

    pub fn rank(&self) -> usize {
        self.contravariant + self.covariant
    }

    pub fn is_scalar(&self) -> bool {
        self.rank() == 0
    }

    pub fn symmetric_groups(&self) -> &[Vec<usize>] {
        &self.symmetric_groups
    }

    pub fn slot_variance(&self, slot: usize) -> Variance {
        if slot < self.contravariant {
            Variance::Contravariant
        } else {
            Variance::Covariant
        }
    }

    /// Same `(m, n)` and symmetry; labels may differ.
    pub fn same_shape(&self, other: &TensorSort) -> bool {
        self.contravariant == other.contravariant
            && self.covariant == other.covariant
            && self.symmetric_groups == other.symmetric_groups
    }

    pub fn component_count(&self, dim: usize) -> usize {
        dim.pow(self.rank() as u32)
    }

    /// All slot permutations of the declared symmetry group, identity first.
    /// A permutation `σ` acts on multi-indices by `(σ·I)_s = I_{σ(s)}`.
    pub fn symmetry_permutations(&self) -> Vec<Vec<usize>> {
        let mut perms = vec![(0..self.rank()).collect::<Vec<_>>()];
        for group in &self.symmetric_groups {
            let group_perms = permutations(group);
            let mut next = Vec::with_capacity(perms.len() * group_perms.len());
            for base in &perms {
                for gp in &group_perms {
                    let mut p = base.clone();
                    for (slot, target) in group.iter().zip(gp) {
                        p[*slot] = base[*target];
                    }
                    next.push(p);
                }
            }
            perms = next;
        }
        perms
    }

    pub fn group_order(&self) -> usize {
        self.symmetric_groups
            .iter()
            .map(|g| (1..=g.len()).product::<usize>())
            .product()
    }

    /// Orbit representative of a multi-index: values sorted ascending within
    /// every symmetry group.
    pub fn canonical_indices(&self, indices: &[usize]) -> Vec<usize> {
        let mut out = indices.to_vec();
        for group in &self.symmetric_groups {
            let mut values: Vec<usize> = group.iter().map(|&s| indices[s]).collect();
            values.sort_unstable();
            for (slot, v) in group.iter().zip(values) {
                out[*slot] = v;
            }
        }
        out
    }

    /// One multi-index per symmetry orbit, in lexicographic order.
    pub fn orbit_representatives(&self, dim: usize) -> Vec<Vec<usize>> {
        (0..self.component_count(dim))
            .map(|flat| unflatten(flat, dim, self.rank()))
            .filter(|idx| self.canonical_indices(idx) == *idx)
            .collect()
    }

    /// Number of group elements fixing the multi-index.
    pub fn stabilizer_size(&self, indices: &[usize]) -> usize {
        self.symmetric_groups
            .iter()
            .map(|group| {
                let mut counts = BTreeMap::new();
                for &s in group {
                    *counts.entry(indices[s]).or_insert(0usize) += 1;
                }
                counts
                    .values()
                    .map(|&c| (1..=c).product::<usize>())
                    .product::<usize>()
            })
            .product()
    }

    /// Average of a component array over the symmetry group.
    pub fn symmetrize(&self, dim: usize, components: &[Q]) -> Vec<Q> {
        let perms = self.symmetry_permutations();
        if perms.len() == 1 {
            return components.to_vec();
        }
        let rank = self.rank();
        let norm = Q::from_integer((perms.len() as i64).into());
        (0..components.len())
            .map(|flat| {
                let idx = unflatten(flat, dim, rank);
                let sum: Q = perms
                    .iter()
                    .map(|p| &components[flatten(&act(p, &idx), dim)])
                    .sum();
                sum / &norm
            })
            .collect()
    }

    pub fn is_symmetric_array(&self, dim: usize, components: &[Q]) -> bool {
        let rank = self.rank();
        let perms = self.symmetry_permutations();
        (0..components.len()).all(|flat| {
            let idx = unflatten(flat, dim, rank);
            perms
                .iter()
                .all(|p| components[flatten(&act(p, &idx), dim)] == components[flat])
        })
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// `(σ·I)_s = I_{σ(s)}`.
pub fn act(perm: &[usize], indices: &[usize]) -> Vec<usize> {
    perm.iter().map(|&s| indices[s]).collect()
}

pub fn unflatten(mut flat: usize, dim: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in (0..rank).rev() {
        idx[slot] = flat % dim;
        flat /= dim;
    }
    idx
}

pub fn flatten(indices: &[usize], dim: usize) -> usize {
    indices.iter().fold(0, |acc, &i| acc * dim + i)
}

/// Outer product of slot arguments as a flat component array.
pub fn outer_product(args: &[&[Q]], dim: usize) -> Vec<Q> {
    let rank = args.len();
    (0..dim.pow(rank as u32))
        .map(|flat| {
            let idx = unflatten(flat, dim, rank);
            args.iter()
                .zip(&idx)
                .fold(Q::one(), |acc, (arg, &i)| acc * &arg[i])
        })
        .collect()
}

/// Full contraction of a component array with one argument per slot.
pub fn contract(components: &[Q], dim: usize, args: &[&[Q]]) -> Q {
    let rank = args.len();
    debug_assert_eq!(components.len(), dim.pow(rank as u32));
    let mut total = Q::zero();
    for (flat, c) in components.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let idx = unflatten(flat, dim, rank);
        let mut term = c.clone();
        for (arg, &i) in args.iter().zip(&idx) {
            if arg[i].is_zero() {
                term = Q::zero();
                break;
            }
            term *= &arg[i];
        }
        total += term;
    }
    total
}

/// Positive weights standing in for the integral over Σ.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiscreteMeasure {
    weights: BTreeMap<PointId, Q>,
}

impl DiscreteMeasure {
    pub fn new(weights: BTreeMap<PointId, Q>) -> Result<Self> {
        if let Some((p, _)) = weights.iter().find(|(_, w)| !w.is_positive()) {
            return Err(Error::invalid("measure", format!("non-positive weight at `{p}`")));
        }
        Ok(DiscreteMeasure { weights })
    }

    /// Unit weight on each of the given points.
    pub fn unit<'a>(points: impl IntoIterator<Item = &'a PointId>) -> Self {
        DiscreteMeasure {
            weights: points.into_iter().map(|p| (p.clone(), Q::one())).collect(),
        }
    }

    pub fn weight(&self, point: &PointId) -> Result<&Q> {
        self.weights
            .get(point)
            .ok_or_else(|| Error::OutsideMeasure(point.clone()))
    }

    pub fn domain(&self) -> impl Iterator<Item = &PointId> {
        self.weights.keys()
    }

    pub fn covers(&self, point: &PointId) -> bool {
        self.weights.contains_key(point)
    }

    pub fn weights(&self) -> &BTreeMap<PointId, Q> {
        &self.weights
    }
}

pub fn integrate_density(density: &BTreeMap<PointId, Q>, measure: &DiscreteMeasure) -> Result<Q> {
    let mut total = Q::zero();
    for (point, value) in density {
        let w = measure.weight(point)?;
        total += value * w;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cotangent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tangent;

/// Finitely supported field of (co)tangent components.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointwiseField<Kind> {
    values: BTreeMap<PointId, Vec<Q>>,
    kind: PhantomData<Kind>,
}

/// Finitely supported one-form.
pub type OneForm = PointwiseField<Cotangent>;

/// Finitely supported vector field.
pub type VectorField = PointwiseField<Tangent>;

impl<Kind> PointwiseField<Kind> {
    pub fn new(dim: usize, values: BTreeMap<PointId, Vec<Q>>) -> Result<Self> {
        for v in values.values() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        let values = values
            .into_iter()
            .filter(|(_, v)| !rational::is_zero_vector(v))
            .collect();
        Ok(PointwiseField {
            values,
            kind: PhantomData,
        })
    }

    pub fn at(point: impl Into<PointId>, components: Vec<Q>) -> Self {
        let dim = components.len();
        Self::new(dim, BTreeMap::from([(point.into(), components)])).expect("consistent dimension")
    }

    /// Points where the value is nonzero.
    pub fn support(&self) -> BTreeSet<PointId> {
        self.values.keys().cloned().collect()
    }

    pub fn value(&self, point: &PointId) -> Option<&[Q]> {
        self.values.get(point).map(Vec::as_slice)
    }

    pub fn values(&self) -> &BTreeMap<PointId, Vec<Q>> {
        &self.values
    }
}

/// Sampled configuration field of one sort. Points without a sample are
/// outside the field's known domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigField {
    sort: TensorSort,
    dim: usize,
    samples: BTreeMap<PointId, Vec<Q>>,
}

/// Sampled momentum density (weight 1) conjugate to a sort. Unsampled points
/// carry the zero density.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentumField {
    sort: TensorSort,
    dim: usize,
    samples: BTreeMap<PointId, Vec<Q>>,
}

fn check_samples(sort: &TensorSort, dim: usize, samples: &BTreeMap<PointId, Vec<Q>>) -> Result<()> {
    let expected = sort.component_count(dim);
    for (point, arr) in samples {
        if arr.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: arr.len(),
            });
        }
        if !sort.is_symmetric_array(dim, arr) {
            return Err(Error::invalid(
                "field",
                format!("sample at `{point}` violates the symmetry of sort `{}`", sort.label),
            ));
        }
    }
    Ok(())
}

impl ConfigField {
    pub fn new(sort: TensorSort, dim: usize, samples: BTreeMap<PointId, Vec<Q>>) -> Result<Self> {
        check_samples(&sort, dim, &samples)?;
        Ok(ConfigField { sort, dim, samples })
    }

    pub fn zero(sort: TensorSort, dim: usize, points: impl IntoIterator<Item = PointId>) -> Self {
        let n = sort.component_count(dim);
        let samples = points.into_iter().map(|p| (p, vec![Q::zero(); n])).collect();
        ConfigField { sort, dim, samples }
    }

    pub fn sort(&self) -> &TensorSort {
        &self.sort
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, point: &PointId) -> Result<&[Q]> {
        self.samples
            .get(point)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingSample(point.clone()))
    }

    pub fn samples(&self) -> &BTreeMap<PointId, Vec<Q>> {
        &self.samples
    }
}

impl MomentumField {
    pub fn new(sort: TensorSort, dim: usize, samples: BTreeMap<PointId, Vec<Q>>) -> Result<Self> {
        check_samples(&sort, dim, &samples)?;
        Ok(MomentumField { sort, dim, samples })
    }

    pub fn sort(&self) -> &TensorSort {
        &self.sort
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sample at a point; `None` means the density vanishes there.
    pub fn sample(&self, point: &PointId) -> Option<&[Q]> {
        self.samples.get(point).map(Vec::as_slice)
    }

    pub fn samples(&self) -> &BTreeMap<PointId, Vec<Q>> {
        &self.samples
    }
}

/// Evaluates a sampled field at `point` on `m` covectors and `n` vectors.
pub fn evaluate_tensor(
    field: &ConfigField,
    point: &PointId,
    covectors: &[Covector],
    vectors: &[TangentVector],
) -> Result<Q> {
    let sort = field.sort();
    if covectors.len() != sort.contravariant() || vectors.len() != sort.covariant() {
        return Err(Error::ArgumentMismatch(format!(
            "sort `{}` takes {} covectors and {} vectors, got {} and {}",
            sort.label,
            sort.contravariant(),
            sort.covariant(),
            covectors.len(),
            vectors.len()
        )));
    }
    let bases = covectors
        .iter()
        .map(|c| (&c.base, c.components.len()))
        .chain(vectors.iter().map(|v| (&v.base, v.components.len())));
    for (base, len) in bases {
        if base != point {
            return Err(Error::ArgumentMismatch(format!(
                "argument based at `{base}`, evaluation at `{point}`"
            )));
        }
        if len != field.dim() {
            return Err(Error::DimensionMismatch {
                expected: field.dim(),
                found: len,
            });
        }
    }
    let sample = field.sample(point)?;
    let args: Vec<&[Q]> = covectors
        .iter()
        .map(|c| c.components.as_slice())
        .chain(vectors.iter().map(|v| v.components.as_slice()))
        .collect();
    Ok(contract(sample, field.dim(), &args))
}

/// Dual of a basis given as component vectors: rows `θ^i` with
/// `θ^i(e_j) = δ^i_j`. `None` if the vectors are not a basis.
pub fn dual_components(basis: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let dim = basis.len();
    if basis.iter().any(|e| e.len() != dim) {
        return None;
    }
    // Columns of `columns` are the basis vectors.
    let columns = Matrix::from_rows(basis.to_vec(), dim).transpose();
    columns.inverse().map(|inv| inv.to_rows())
}

pub fn dual_basis(basis: &[TangentVector]) -> Result<Vec<Covector>> {
    let Some(first) = basis.first() else {
        return Err(Error::invalid("basis", "empty basis"));
    };
    let base = &first.base;
    if let Some(v) = basis.iter().find(|v| v.base != *base) {
        return Err(Error::ArgumentMismatch(format!(
            "basis vectors based at `{base}` and `{}`",
            v.base
        )));
    }
    let comps: Vec<Vec<Q>> = basis.iter().map(|v| v.components.clone()).collect();
    if let Some(v) = comps.iter().find(|c| c.len() != basis.len()) {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: v.len(),
        });
    }
    let dual = dual_components(&comps).ok_or_else(|| Error::DegenerateBasis(base.clone()))?;
    Ok(dual
        .into_iter()
        .map(|c| Covector::new(base.clone(), c))
        .collect())
}

pub fn standard_basis(dim: usize) -> Vec<Vec<Q>> {
    (0..dim)
        .map(|i| {
            let mut e = vec![Q::zero(); dim];
            e[i] = Q::one();
            e
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn y() -> PointId {
        PointId::from("y")
    }

    fn diag_field() -> ConfigField {
        let sort = TensorSort::symmetric_covariant_pair("q");
        let mut arr = vec![int(0); 9];
        arr[0] = int(1);
        arr[4] = int(2);
        arr[8] = int(3);
        ConfigField::new(sort, 3, BTreeMap::from([(y(), arr)])).unwrap()
    }

    fn e(i: usize) -> Vec<Q> {
        standard_basis(3)[i].clone()
    }

    #[test]
    fn evaluate_on_basis_picks_component() {
        let q = diag_field();
        let e1 = TangentVector::new("y", e(0));
        assert_eq!(evaluate_tensor(&q, &y(), &[], &[e1.clone(), e1]).unwrap(), int(1));
        let e3 = TangentVector::new("y", e(2));
        assert_eq!(evaluate_tensor(&q, &y(), &[], &[e3.clone(), e3]).unwrap(), int(3));
    }

    #[test]
    fn evaluate_with_zero_vector_vanishes() {
        let q = diag_field();
        let zero = TangentVector::new("y", vec![int(0); 3]);
        let v = TangentVector::new("y", vec![int(1), int(2), int(3)]);
        assert_eq!(evaluate_tensor(&q, &y(), &[], &[v, zero]).unwrap(), int(0));
    }

    #[test]
    fn evaluate_errors() {
        let q = diag_field();
        let v = TangentVector::new("y", e(0));
        assert!(matches!(
            evaluate_tensor(&q, &y(), &[], std::slice::from_ref(&v)),
            Err(Error::ArgumentMismatch(_))
        ));
        let elsewhere = TangentVector::new("z", e(0));
        assert!(evaluate_tensor(&q, &y(), &[], &[v.clone(), elsewhere]).is_err());
        let z = PointId::from("z");
        let vz = TangentVector::new("z", e(0));
        assert!(matches!(
            evaluate_tensor(&q, &z, &[], &[vz.clone(), vz]),
            Err(Error::MissingSample(_))
        ));
    }

    #[test]
    fn evaluate_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sort = TensorSort::symmetric_covariant_pair("q");
        for _ in 0..50 {
            let mut m = vec![vec![int(0); 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    let v = rational::random(&mut rng, 6, 5);
                    m[i][j] = v.clone();
                    m[j][i] = v;
                }
            }
            let arr: Vec<Q> = m.iter().flatten().cloned().collect();
            let q = ConfigField::new(sort.clone(), 3, BTreeMap::from([(y(), arr)])).unwrap();
            let a = rational::random_vector(&mut rng, 3);
            let b = rational::random_vector(&mut rng, 3);
            let mut expected = int(0);
            for i in 0..3 {
                for j in 0..3 {
                    expected += &m[i][j] * &a[i] * &b[j];
                }
            }
            let got = evaluate_tensor(
                &q,
                &y(),
                &[],
                &[TangentVector::new("y", a), TangentVector::new("y", b)],
            )
            .unwrap();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn symmetric_field_rejects_asymmetric_sample() {
        let sort = TensorSort::symmetric_covariant_pair("q");
        let mut arr = vec![int(0); 9];
        arr[1] = int(1);
        assert!(ConfigField::new(sort, 3, BTreeMap::from([(y(), arr)])).is_err());
    }

    #[test]
    fn dual_of_standard_basis_is_standard() {
        let basis: Vec<TangentVector> = (0..3).map(|i| TangentVector::new("y", e(i))).collect();
        let dual = dual_basis(&basis).unwrap();
        for (i, th) in dual.iter().enumerate() {
            assert_eq!(th.components, e(i));
        }
    }

    #[test]
    fn dual_pairs_to_identity_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let comps: Vec<Vec<Q>> = (0..3).map(|_| rational::random_vector(&mut rng, 3)).collect();
            let basis: Vec<TangentVector> =
                comps.iter().map(|c| TangentVector::new("y", c.clone())).collect();
            match dual_basis(&basis) {
                Ok(dual) => {
                    for (i, th) in dual.iter().enumerate() {
                        for (j, v) in basis.iter().enumerate() {
                            let expected = if i == j { int(1) } else { int(0) };
                            assert_eq!(th.apply(v), expected);
                        }
                    }
                    // Oracle: rows of the dual are the inverse of the column matrix.
                    let m = Matrix::from_rows(comps.clone(), 3).transpose();
                    let inv = m.inverse().unwrap();
                    for (i, th) in dual.iter().enumerate() {
                        assert_eq!(th.components, inv.row(i));
                    }
                }
                Err(Error::DegenerateBasis(_)) => {
                    assert_eq!(Matrix::from_rows(comps, 3).determinant(), int(0));
                }
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }

    #[test]
    fn degenerate_basis_rejected() {
        let basis = vec![
            TangentVector::new("y", e(0)),
            TangentVector::new("y", e(0)),
            TangentVector::new("y", e(2)),
        ];
        assert!(matches!(dual_basis(&basis), Err(Error::DegenerateBasis(_))));
    }

    #[test]
    fn integrate_density_sums_weighted_values() {
        let y1 = PointId::from("y1");
        let y2 = PointId::from("y2");
        let unit = DiscreteMeasure::unit([&y1, &y2]);
        assert_eq!(integrate_density(&BTreeMap::new(), &unit).unwrap(), int(0));
        let density = BTreeMap::from([(y1.clone(), int(2)), (y2.clone(), int(3))]);
        assert_eq!(integrate_density(&density, &unit).unwrap(), int(5));
        let weighted = DiscreteMeasure::new(BTreeMap::from([
            (y1.clone(), frac(1, 2)),
            (y2.clone(), int(2)),
        ]))
        .unwrap();
        assert_eq!(integrate_density(&density, &weighted).unwrap(), int(7));
        let outside = BTreeMap::from([(PointId::from("y3"), int(1))]);
        assert!(matches!(
            integrate_density(&outside, &unit),
            Err(Error::OutsideMeasure(_))
        ));
        assert!(DiscreteMeasure::new(BTreeMap::from([(y1, int(0))])).is_err());
    }

    #[test]
    fn integrate_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let mut density = BTreeMap::new();
            let mut weights = BTreeMap::new();
            let mut expected = int(0);
            for k in 0..6 {
                let p = PointId(format!("p{k}"));
                let d = rational::random(&mut rng, 9, 4);
                let w = frac(rand::Rng::random_range(&mut rng, 1..9), 3);
                expected += &d * &w;
                density.insert(p.clone(), d);
                weights.insert(p, w);
            }
            let measure = DiscreteMeasure::new(weights).unwrap();
            assert_eq!(integrate_density(&density, &measure).unwrap(), expected);
        }
    }

    #[test]
    fn sort_orbits_and_stabilizers() {
        let sym = TensorSort::symmetric_covariant_pair("q");
        assert_eq!(sym.orbit_representatives(3).len(), 6);
        assert_eq!(sym.group_order(), 2);
        assert_eq!(sym.stabilizer_size(&[1, 1]), 2);
        assert_eq!(sym.stabilizer_size(&[0, 1]), 1);
        let mixed = TensorSort::new("t", 1, 1);
        assert_eq!(mixed.orbit_representatives(2).len(), 4);
        assert!(TensorSort::with_symmetry("bad", 1, 1, vec![vec![0, 1]]).is_err());
        let sym3 = TensorSort::with_symmetry("s", 0, 3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(sym3.orbit_representatives(3).len(), 10);
        assert_eq!(sym3.symmetry_permutations().len(), 6);
    }

    #[test]
    fn fresh_points_avoid_existing() {
        let mut m = Manifold::new(2).unwrap();
        m.insert(Point {
            id: "~0".into(),
            coords: vec![int(-2), frac(1, 2)],
        })
        .unwrap();
        let avoid = BTreeSet::from([PointId::from("~1")]);
        let a = m.fresh_point(&avoid);
        assert_ne!(a.as_str(), "~0");
        assert_ne!(a.as_str(), "~1");
        let b = m.fresh_point(&avoid);
        assert_ne!(a, b);
        assert!(m.contains(&a) && m.contains(&b));
    }
}
