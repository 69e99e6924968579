//! Finite physical systems `λ = (F̂, K_γ)`, their order, and the join.

pub mod conditions;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::dof::{pairing_dof, MomentumDof, MomentumOperator};
use crate::frames::{self, build_k_gamma, DiscreteFrame, DofLabel, KGamma};
use crate::geometry::{DiscreteMeasure, Manifold, OneForm, PointId, TensorSort, VectorField, Variance};
use crate::linalg::Matrix;
use crate::rational::Q;
use crate::{Error, Result};

/// A basis of momentum operators together with the d.o.f. set `K_γ`.
#[derive(Clone, Debug)]
pub struct FiniteSystem {
    operators: Vec<MomentumOperator>,
    kset: KGamma,
}

impl FiniteSystem {
    /// Accepts only non-degenerate pairs.
    pub fn new(operators: Vec<MomentumOperator>, kset: KGamma) -> Result<Self> {
        let system = FiniteSystem { operators, kset };
        match system.degeneracy() {
            None => Ok(system),
            Some(reason) => Err(Error::Degenerate(reason)),
        }
    }

    /// Skips the non-degeneracy check, for feeding defective systems to the
    /// condition checks.
    pub fn unchecked(operators: Vec<MomentumOperator>, kset: KGamma) -> Self {
        FiniteSystem { operators, kset }
    }

    /// `K_γ` with its dual operators, whose pairing matrix is the identity.
    pub fn dual(frame: &DiscreteFrame, sorts: &[TensorSort]) -> Result<Self> {
        let kset = build_k_gamma(frame, sorts)?;
        let operators = dual_operators_for(&kset)?;
        Self::new(operators, kset)
    }

    pub fn operators(&self) -> &[MomentumOperator] {
        &self.operators
    }

    pub fn kset(&self) -> &KGamma {
        &self.kset
    }

    pub fn frame(&self) -> &DiscreteFrame {
        self.kset.frame()
    }

    pub fn sorts(&self) -> &[TensorSort] {
        self.kset.sorts()
    }

    pub fn pairing_matrix(&self) -> Result<Matrix> {
        pairing_matrix(&self.operators, &self.kset)
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.degeneracy().is_none()
    }

    /// Why the system fails non-degeneracy, if it does.
    pub fn degeneracy(&self) -> Option<String> {
        let n = self.kset.len();
        if self.operators.len() != n {
            return Some(format!(
                "{} operators for {} configurational d.o.f.",
                self.operators.len(),
                n
            ));
        }
        let g = match self.pairing_matrix() {
            Ok(g) => g,
            Err(e) => return Some(e.to_string()),
        };
        if !g.determinant().is_zero() {
            // A square non-singular G already forces independent operators.
            return None;
        }
        match operator_rank(&self.operators) {
            Ok(r) if r < n => Some(format!("operators span dimension {r}, need {n}")),
            Ok(_) => Some("pairing matrix is singular".into()),
            Err(e) => Some(e.to_string()),
        }
    }
}

/// `G_{βα} = φ̂_β κ_α`.
pub fn pairing_matrix(ops: &[MomentumOperator], k: &KGamma) -> Result<Matrix> {
    let mut sites: BTreeMap<(&PointId, &str), Vec<usize>> = BTreeMap::new();
    for (a, kappa) in k.dofs().iter().enumerate() {
        sites
            .entry((kappa.point(), kappa.sort().label.as_str()))
            .or_default()
            .push(a);
    }
    let mut g = Matrix::zeros(ops.len(), k.len());
    for (b, op) in ops.iter().enumerate() {
        for (c, dof) in op.terms() {
            for p in dof.support() {
                let Some(columns) = sites.get(&(&p, dof.sort().label.as_str())) else {
                    continue;
                };
                for &a in columns {
                    let v = pairing_dof(dof, &k.dofs()[a])?;
                    if !v.is_zero() {
                        g[(b, a)] += c * v;
                    }
                }
            }
        }
    }
    Ok(g)
}

/// The operator dual to the d.o.f. labelled `label`: basis vectors in upper
/// slots, dual one-forms in lower slots, all supported at the single point,
/// rescaled so it pairs to 1 with that d.o.f. and to 0 with the others.
pub fn dual_operator(frame: &DiscreteFrame, sort: &TensorSort, label: &DofLabel) -> Result<MomentumOperator> {
    let point = &label.point;
    let basis = frame.basis(point).ok_or_else(|| Error::PointNotInFrame(point.clone()))?;
    let dual = frame.dual(point).expect("dual stored with basis");
    let dim = frame.dim();
    let measure = DiscreteMeasure::unit([point]);
    let dof = if sort.is_scalar() {
        MomentumDof::scalar(sort.clone(), dim, BTreeMap::from([(point.clone(), Q::one())]), measure)?
    } else {
        let mut vector_fields = Vec::new();
        let mut one_forms = Vec::new();
        for (slot, &i) in label.indices.iter().enumerate() {
            match sort.slot_variance(slot) {
                Variance::Contravariant => {
                    vector_fields.push(VectorField::at(point.clone(), basis[i].clone()))
                }
                Variance::Covariant => one_forms.push(OneForm::at(point.clone(), dual[i].clone())),
            }
        }
        MomentumDof::new(sort.clone(), dim, vector_fields, one_forms, measure)?
    };
    let scale = -Q::from_integer((sort.group_order() as i64).into())
        / Q::from_integer((sort.stabilizer_size(&label.indices) as i64).into());
    Ok(MomentumOperator::from_terms([(scale, dof)]))
}

fn dual_operators_for(k: &KGamma) -> Result<Vec<MomentumOperator>> {
    k.labels()
        .iter()
        .map(|label| {
            let sort = k.sort(&label.sort).expect("label sort belongs to the set");
            dual_operator(k.frame(), sort, label)
        })
        .collect()
}

/// Operators dual to `K_γ`, in the order of [`build_k_gamma`].
pub fn dual_operators(frame: &DiscreteFrame, sorts: &[TensorSort]) -> Result<Vec<MomentumOperator>> {
    dual_operators_for(&build_k_gamma(frame, sorts)?)
}

fn operator_sorts(ops: &[MomentumOperator]) -> Result<(Vec<TensorSort>, Option<usize>)> {
    let mut sorts: BTreeMap<String, TensorSort> = BTreeMap::new();
    let mut dim = None;
    for op in ops {
        for (_, d) in op.terms() {
            match sorts.get(&d.sort().label) {
                Some(s) if s != d.sort() => {
                    return Err(Error::SortMismatch(format!(
                        "sort `{}` used with two shapes",
                        s.label
                    )))
                }
                Some(_) => {}
                None => {
                    sorts.insert(d.sort().label.clone(), d.sort().clone());
                }
            }
            match dim {
                Some(x) if x != d.dim() => {
                    return Err(Error::DimensionMismatch {
                        expected: x,
                        found: d.dim(),
                    })
                }
                _ => dim = Some(d.dim()),
            }
        }
    }
    Ok((sorts.into_values().collect(), dim))
}

/// Pairings of each operator against the coordinate-basis `K` over the
/// union of all supports and `extra`, for every sort the operators use.
/// Two operators are equal exactly when their rows agree.
pub fn signature_matrix(ops: &[MomentumOperator], extra: &BTreeSet<PointId>) -> Result<Matrix> {
    let (sorts, dim) = operator_sorts(ops)?;
    let Some(dim) = dim else {
        return Ok(Matrix::zeros(ops.len(), 0));
    };
    let mut points: BTreeSet<PointId> = ops.iter().flat_map(MomentumOperator::support).collect();
    points.extend(extra.iter().cloned());
    let k = build_k_gamma(&DiscreteFrame::standard(dim, points), &sorts)?;
    pairing_matrix(ops, &k)
}

pub fn operator_rank(ops: &[MomentumOperator]) -> Result<usize> {
    Ok(signature_matrix(ops, &BTreeSet::new())?.rank())
}

/// Whether every candidate lies in the span of `ops`.
pub fn span_contains(ops: &[MomentumOperator], candidates: &[MomentumOperator]) -> Result<bool> {
    let mut all = ops.to_vec();
    all.extend(candidates.iter().cloned());
    let sig = signature_matrix(&all, &BTreeSet::new())?;
    let base = sig.block(0..ops.len(), 0..sig.cols());
    Ok(sig.rank() == base.rank())
}

pub fn operators_equal(a: &MomentumOperator, b: &MomentumOperator) -> Result<bool> {
    let diff = a.add(&b.scale(&-Q::one()));
    Ok(signature_matrix(&[diff], &BTreeSet::new())?.is_zero())
}

/// Non-degeneracy of an operator list against `K`: as many operators as
/// d.o.f., linearly independent, with invertible pairing matrix.
pub fn is_nondegenerate(ops: &[MomentumOperator], k: &KGamma) -> bool {
    FiniteSystem::unchecked(ops.to_vec(), k.clone()).is_nondegenerate()
}

/// The order on systems: `λ' ≥ λ` iff `γ' ≥ γ` and `F̂ ⊆ F̂'`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SystemRelation;

impl SystemRelation {
    pub fn geq(&self, upper: &FiniteSystem, lower: &FiniteSystem) -> Result<bool> {
        let sorts_ok = lower
            .sorts()
            .iter()
            .all(|s| upper.sorts().iter().any(|u| u == s));
        Ok(sorts_ok
            && frames::frame_leq(lower.frame(), upper.frame())
            && span_contains(upper.operators(), lower.operators())?)
    }
}

/// Greedily keeps operators independent of the ones kept before.
pub fn independent_basis(ops: &[MomentumOperator]) -> Result<Vec<MomentumOperator>> {
    let sig = signature_matrix(ops, &BTreeSet::new())?;
    Ok(sig.independent_rows().into_iter().map(|i| ops[i].clone()).collect())
}

fn restricted_rank(
    basis: &[MomentumOperator],
    points: &BTreeSet<PointId>,
    sorts: &[TensorSort],
    dim: usize,
) -> Result<usize> {
    let k = build_k_gamma(&DiscreteFrame::standard(dim, points.iter().cloned()), sorts)?;
    Ok(pairing_matrix(basis, &k)?.rank())
}

/// Points on which the operators stay linearly independent: the smallest
/// support point of each operator, then further support points in id order
/// until the restricted pairing matrix has full rank.
pub fn independence_points(
    basis: &[MomentumOperator],
    sorts: &[TensorSort],
    dim: usize,
) -> Result<BTreeSet<PointId>> {
    let mut points: BTreeSet<PointId> = basis
        .iter()
        .filter_map(|op| op.support().into_iter().next())
        .collect();
    let target = basis.len();
    let mut rank = restricted_rank(basis, &points, sorts, dim)?;
    let all: BTreeSet<PointId> = basis.iter().flat_map(MomentumOperator::support).collect();
    for p in all {
        if rank == target {
            break;
        }
        if points.insert(p) {
            rank = restricted_rank(basis, &points, sorts, dim)?;
        }
    }
    if rank < target {
        return Err(Error::Degenerate(
            "operators are dependent on every frame over their supports".into(),
        ));
    }
    Ok(points)
}

/// Result of extending an independent operator list to a system on a frame.
#[derive(Clone, Debug)]
pub struct Enlargement {
    pub system: FiniteSystem,
    /// `T` with `T · G⁰` in reduced row echelon form.
    pub basis_change: Matrix,
    /// Column order putting the pivot d.o.f. first.
    pub permutation: Vec<usize>,
    /// `G¹ = [𝟙 | G']`, before the dual operators are appended.
    pub reduced: Matrix,
    /// Final pairing matrix `[[𝟙, G'], [𝟘, 𝟙']]`.
    pub block: Matrix,
}

/// Extends `basis` (independent on `K_frame`) by dual operators to a
/// non-degenerate system on `frame`.
pub fn enlarge(
    basis: &[MomentumOperator],
    frame: &DiscreteFrame,
    sorts: &[TensorSort],
) -> Result<Enlargement> {
    let k = build_k_gamma(frame, sorts)?;
    let m = basis.len();
    let n = k.len();
    let g0 = pairing_matrix(basis, &k)?;
    let rref = g0.rref();
    if rref.pivots.len() < m {
        return Err(Error::Degenerate(format!(
            "operators have rank {} on the frame, need {m}",
            rref.pivots.len()
        )));
    }
    let permutation = rref.pivot_first_permutation();
    let reduced = rref.reduced.permute_columns(&permutation);
    let basis_change = rref.transform;
    let mut operators: Vec<MomentumOperator> = (0..m)
        .map(|i| MomentumOperator::combination(basis_change.row(i), basis))
        .collect();
    let kset = k.permuted(&permutation);
    let mut duals = Vec::with_capacity(n - m);
    for j in m..n {
        let label = &kset.labels()[j];
        let sort = kset.sort(&label.sort).expect("label sort belongs to the set");
        duals.push(dual_operator(frame, sort, label)?);
    }
    // Pairing is linear in the operator, so the first rows are `T · G⁰`.
    let mut rows = reduced.to_rows();
    rows.extend(pairing_matrix(&duals, &kset)?.to_rows());
    let block = Matrix::from_rows(rows, n);
    if block.determinant().is_zero() {
        return Err(Error::Degenerate("enlarged pairing matrix is singular".into()));
    }
    operators.extend(duals);
    let system = FiniteSystem::unchecked(operators, kset);
    Ok(Enlargement {
        system,
        basis_change,
        permutation,
        reduced,
        block,
    })
}

/// Output of [`join`] and [`span_system`].
#[derive(Clone, Debug)]
pub struct JoinOutcome {
    pub system: FiniteSystem,
    /// `dim F̂₀`.
    pub rank: usize,
    pub independence_points: BTreeSet<PointId>,
    pub fresh_points: Vec<PointId>,
    pub basis_change: Matrix,
    pub permutation: Vec<usize>,
    pub reduced: Matrix,
    pub block: Matrix,
}

pub(crate) fn merge_sorts(a: &[TensorSort], b: &[TensorSort]) -> Result<Vec<TensorSort>> {
    let mut out = a.to_vec();
    for s in b {
        match out.iter().find(|t| t.label == s.label) {
            Some(t) if t != s => {
                return Err(Error::SortMismatch(format!(
                    "sort `{}` has different shapes in the two systems",
                    s.label
                )))
            }
            Some(_) => {}
            None => out.push(s.clone()),
        }
    }
    Ok(out)
}

/// Frame containing `base`, `required` and enough fresh points that
/// `|K| > rank`.
pub fn frame_for_rank(
    base: &DiscreteFrame,
    required: &BTreeSet<PointId>,
    sorts: &[TensorSort],
    rank: usize,
    manifold: &mut Manifold,
    avoid: &BTreeSet<PointId>,
) -> (DiscreteFrame, Vec<PointId>) {
    let mut frame = base.clone();
    for p in required {
        frame = frame.with_standard_point(p.clone());
    }
    let per_point = KGamma::per_point(sorts, frame.dim());
    let mut fresh = Vec::new();
    let mut avoid = avoid.clone();
    avoid.extend(frame.points());
    while frame.len() * per_point <= rank {
        let p = manifold.fresh_point(&avoid);
        avoid.insert(p.clone());
        frame = frame.with_standard_point(p.clone());
        fresh.push(p);
    }
    (frame, fresh)
}

/// Smallest-effort system whose operator space contains `ops` and whose
/// frame contains `base`: independent basis, independence points, fresh
/// points until `|K| > dim`, then [`enlarge`].
pub fn span_system(
    ops: &[MomentumOperator],
    sorts: &[TensorSort],
    base: &DiscreteFrame,
    manifold: &mut Manifold,
) -> Result<JoinOutcome> {
    let basis = independent_basis(ops)?;
    let rank = basis.len();
    let independence = independence_points(&basis, sorts, base.dim())?;
    let mut avoid: BTreeSet<PointId> = ops.iter().flat_map(MomentumOperator::footprint).collect();
    avoid.extend(independence.iter().cloned());
    let (frame, fresh_points) = frame_for_rank(base, &independence, sorts, rank, manifold, &avoid);
    let e = enlarge(&basis, &frame, sorts)?;
    Ok(JoinOutcome {
        system: e.system,
        rank,
        independence_points: independence,
        fresh_points,
        basis_change: e.basis_change,
        permutation: e.permutation,
        reduced: e.reduced,
        block: e.block,
    })
}

/// A system dominating both `a` and `b`. Fresh points come from `manifold`.
pub fn join(a: &FiniteSystem, b: &FiniteSystem, manifold: &mut Manifold) -> Result<JoinOutcome> {
    let sorts = merge_sorts(a.sorts(), b.sorts())?;
    let frame = frames::join_frames(a.frame(), b.frame())?;
    let mut ops = b.operators().to_vec();
    ops.extend(a.operators().iter().cloned());
    span_system(&ops, &sorts, &frame, manifold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn pid(s: &str) -> PointId {
        PointId::from(s)
    }

    fn metric() -> TensorSort {
        TensorSort::symmetric_covariant_pair("q")
    }

    #[test]
    fn dual_operators_give_identity() {
        let frame = DiscreteFrame::standard(3, [pid("a"), pid("b")]);
        let sys = FiniteSystem::dual(&frame, &[metric()]).unwrap();
        assert!(sys.pairing_matrix().unwrap().is_identity());
    }

    #[test]
    fn dual_operator_coefficients() {
        let frame = DiscreteFrame::standard(3, [pid("a")]);
        let ops = dual_operators(&frame, &[metric()]).unwrap();
        // Orbit order 00 01 02 11 12 22.
        assert_eq!(ops[0].terms()[0].0, int(-1));
        assert_eq!(ops[1].terms()[0].0, int(-2));
        let scalar = dual_operators(&frame, &[TensorSort::scalar("phi")]).unwrap();
        assert_eq!(scalar[0].terms()[0].0, int(-1));
    }

    #[test]
    fn defective_systems_rejected() {
        let frame = DiscreteFrame::standard(2, [pid("a")]);
        let k = build_k_gamma(&frame, &[metric()]).unwrap();
        let mut ops = dual_operators(&frame, &[metric()]).unwrap();
        ops[1] = ops[0].clone();
        assert!(!is_nondegenerate(&ops, &k));
        ops.pop();
        assert!(FiniteSystem::new(ops, k).is_err());
    }

    #[test]
    fn rescaling_scales_row() {
        let frame = DiscreteFrame::standard(2, [pid("a")]);
        let k = build_k_gamma(&frame, &[metric()]).unwrap();
        let mut ops = dual_operators(&frame, &[metric()]).unwrap();
        ops[2] = ops[2].scale(&frac(5, 3));
        let g = pairing_matrix(&ops, &k).unwrap();
        assert_eq!(g[(2, 2)], frac(5, 3));
    }

    #[test]
    fn join_of_disjoint_systems() {
        let mut manifold = Manifold::new(2).unwrap();
        let a = FiniteSystem::dual(&DiscreteFrame::standard(2, [pid("a")]), &[metric()]).unwrap();
        let b = FiniteSystem::dual(&DiscreteFrame::standard(2, [pid("b")]), &[metric()]).unwrap();
        let out = join(&a, &b, &mut manifold).unwrap();
        let rel = SystemRelation;
        assert!(rel.geq(&out.system, &a).unwrap());
        assert!(rel.geq(&out.system, &b).unwrap());
        assert_eq!(out.rank, 6);
        assert_eq!(out.fresh_points.len(), 1);
        let m = out.rank;
        let n = out.block.cols();
        assert!(out.block.block(0..m, 0..m).is_identity());
        assert!(out.block.block(m..n, 0..m).is_zero());
        assert!(out.block.block(m..n, m..n).is_identity());
        assert!(out.reduced.block(0..m, 0..m).is_identity());
    }

    #[test]
    fn join_with_itself_dominates() {
        let mut manifold = Manifold::new(2).unwrap();
        let a = FiniteSystem::dual(&DiscreteFrame::standard(2, [pid("a")]), &[metric()]).unwrap();
        let out = join(&a, &a, &mut manifold).unwrap();
        assert!(SystemRelation.geq(&out.system, &a).unwrap());
    }
}
