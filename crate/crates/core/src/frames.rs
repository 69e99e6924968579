//! Discrete frames and the configurational d.o.f. sets they generate.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::dof::{self, ConfigDof, Configuration};
use crate::geometry::{self, ConfigField, PointId, TensorSort};
use crate::linalg::Matrix;
use crate::rational::Q;
use crate::{Error, Result};

/// Finitely many distinct points, each carrying a basis of its tangent space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteFrame {
    dim: usize,
    bases: BTreeMap<PointId, Vec<Vec<Q>>>,
    duals: BTreeMap<PointId, Vec<Vec<Q>>>,
}

impl DiscreteFrame {
    /// `entries` pairs each point with `dim` basis vectors.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (PointId, Vec<Vec<Q>>)>) -> Result<Self> {
        let mut bases = BTreeMap::new();
        let mut duals = BTreeMap::new();
        for (point, basis) in entries {
            if basis.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: basis.len(),
                });
            }
            if let Some(v) = basis.iter().find(|v| v.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            let dual = geometry::dual_components(&basis)
                .ok_or_else(|| Error::DegenerateBasis(point.clone()))?;
            if bases.insert(point.clone(), basis).is_some() {
                return Err(Error::invalid("frame", format!("point `{point}` listed twice")));
            }
            duals.insert(point, dual);
        }
        Ok(DiscreteFrame { dim, bases, duals })
    }

    /// The coordinate basis at every point.
    pub fn standard(dim: usize, points: impl IntoIterator<Item = PointId>) -> Self {
        let e = geometry::standard_basis(dim);
        let points: BTreeSet<PointId> = points.into_iter().collect();
        DiscreteFrame {
            dim,
            bases: points.iter().map(|p| (p.clone(), e.clone())).collect(),
            duals: points.into_iter().map(|p| (p, e.clone())).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn points(&self) -> BTreeSet<PointId> {
        self.bases.keys().cloned().collect()
    }

    pub fn contains(&self, point: &PointId) -> bool {
        self.bases.contains_key(point)
    }

    pub fn basis(&self, point: &PointId) -> Option<&[Vec<Q>]> {
        self.bases.get(point).map(Vec::as_slice)
    }

    pub fn dual(&self, point: &PointId) -> Option<&[Vec<Q>]> {
        self.duals.get(point).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PointId, &Vec<Vec<Q>>)> {
        self.bases.iter()
    }

    /// Adds a point with the coordinate basis; existing points are kept.
    pub fn with_standard_point(&self, point: PointId) -> Self {
        let mut out = self.clone();
        if !out.contains(&point) {
            let e = geometry::standard_basis(self.dim);
            out.bases.insert(point.clone(), e.clone());
            out.duals.insert(point, e);
        }
        out
    }
}

/// Position of a d.o.f. of `K_γ`: point, sort label and orbit representative.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DofLabel {
    pub point: PointId,
    pub sort: String,
    pub indices: Vec<usize>,
}

/// The set `K_γ` for a frame and a list of sorts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KGamma {
    frame: DiscreteFrame,
    sorts: Vec<TensorSort>,
    labels: Vec<DofLabel>,
    dofs: Vec<ConfigDof>,
}

impl KGamma {
    pub fn frame(&self) -> &DiscreteFrame {
        &self.frame
    }

    pub fn sorts(&self) -> &[TensorSort] {
        &self.sorts
    }

    pub fn labels(&self) -> &[DofLabel] {
        &self.labels
    }

    pub fn dofs(&self) -> &[ConfigDof] {
        &self.dofs
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn sort(&self, label: &str) -> Option<&TensorSort> {
        self.sorts.iter().find(|s| s.label == label)
    }

    /// Same set in a new order: entry `j` of the result is entry `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> KGamma {
        assert_eq!(perm.len(), self.len());
        KGamma {
            frame: self.frame.clone(),
            sorts: self.sorts.clone(),
            labels: perm.iter().map(|&i| self.labels[i].clone()).collect(),
            dofs: perm.iter().map(|&i| self.dofs[i].clone()).collect(),
        }
    }

    /// Values `(κ_1(q), …, κ_N(q))`, the map `K̃`.
    pub fn evaluate(&self, q: &Configuration) -> Result<Vec<Q>> {
        self.dofs.iter().map(|k| q.eval(k)).collect()
    }

    /// Number of d.o.f. a single frame point contributes.
    pub fn per_point(sorts: &[TensorSort], dim: usize) -> usize {
        sorts.iter().map(|s| s.orbit_representatives(dim).len()).sum()
    }
}

fn check_sorts(sorts: &[TensorSort]) -> Result<Vec<TensorSort>> {
    let mut sorted = sorts.to_vec();
    sorted.sort_by(|a, b| a.label.cmp(&b.label));
    for pair in sorted.windows(2) {
        if pair[0].label == pair[1].label {
            return Err(Error::SortMismatch(format!(
                "sort label `{}` declared twice",
                pair[0].label
            )));
        }
    }
    Ok(sorted)
}

/// Builds `K_γ`: per point, per sort, one d.o.f. per symmetry orbit, with
/// basis vectors in lower slots and dual covectors in upper slots. Ordered
/// by point id, sort label, then orbit representative.
pub fn build_k_gamma(frame: &DiscreteFrame, sorts: &[TensorSort]) -> Result<KGamma> {
    let sorts = check_sorts(sorts)?;
    let dim = frame.dim;
    let mut labels = Vec::new();
    let mut dofs = Vec::new();
    for (point, basis) in &frame.bases {
        let dual = &frame.duals[point];
        for sort in &sorts {
            for rep in sort.orbit_representatives(dim) {
                let args = rep
                    .iter()
                    .enumerate()
                    .map(|(slot, &i)| match sort.slot_variance(slot) {
                        geometry::Variance::Contravariant => dual[i].clone(),
                        geometry::Variance::Covariant => basis[i].clone(),
                    })
                    .collect();
                dofs.push(ConfigDof::new(sort.clone(), dim, point.clone(), args)?);
                labels.push(DofLabel {
                    point: point.clone(),
                    sort: sort.label.clone(),
                    indices: rep,
                });
            }
        }
    }
    Ok(KGamma {
        frame: frame.clone(),
        sorts,
        labels,
        dofs,
    })
}

/// A configuration `q` with `κ_α(q) = target_α` for every `κ_α ∈ K_γ`.
/// Fields are sampled exactly at the frame points.
pub fn reconstruct_config(k: &KGamma, target: &[Q]) -> Result<Configuration> {
    if target.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            found: target.len(),
        });
    }
    let dim = k.frame.dim;
    let mut groups: BTreeMap<(String, PointId), Vec<usize>> = BTreeMap::new();
    for (i, label) in k.labels.iter().enumerate() {
        groups
            .entry((label.sort.clone(), label.point.clone()))
            .or_default()
            .push(i);
    }
    let mut samples: BTreeMap<String, BTreeMap<PointId, Vec<Q>>> = BTreeMap::new();
    for ((label, point), members) in groups {
        let sort = k.sort(&label).expect("label from this set");
        let rows: Vec<Vec<Q>> = members.iter().map(|&i| k.dofs[i].linear_functional()).collect();
        let n = rows[0].len();
        let rhs: Vec<Q> = members.iter().map(|&i| target[i].clone()).collect();
        let orbit_values = Matrix::from_rows(rows, n)
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate(format!("d.o.f. at `{point}` are not independent")))?;
        let reps = sort.orbit_representatives(dim);
        let position: BTreeMap<Vec<usize>, usize> =
            reps.into_iter().enumerate().map(|(i, r)| (r, i)).collect();
        let components = (0..sort.component_count(dim))
            .map(|flat| {
                let idx = geometry::unflatten(flat, dim, sort.rank());
                orbit_values[position[&sort.canonical_indices(&idx)]].clone()
            })
            .collect();
        samples.entry(label).or_default().insert(point, components);
    }
    let mut q = Configuration::new();
    for sort in &k.sorts {
        let s = samples.remove(&sort.label).unwrap_or_default();
        q.insert(ConfigField::new(sort.clone(), dim, s)?);
    }
    Ok(q)
}

/// Writes `κ` as a combination of the d.o.f. of `K_γ` at its point.
pub fn express_in_frame(kappa: &ConfigDof, frame: &DiscreteFrame) -> Result<Vec<(Q, ConfigDof)>> {
    if !frame.contains(kappa.point()) {
        return Err(Error::PointNotInFrame(kappa.point().clone()));
    }
    if kappa.dim() != frame.dim {
        return Err(Error::DimensionMismatch {
            expected: frame.dim,
            found: kappa.dim(),
        });
    }
    let local = DiscreteFrame::new(
        frame.dim,
        [(kappa.point().clone(), frame.bases[kappa.point()].clone())],
    )?;
    let k = build_k_gamma(&local, std::slice::from_ref(kappa.sort()))?;
    let coefs = dof::express(kappa, k.dofs())
        .ok_or_else(|| Error::Degenerate("frame d.o.f. do not span the point".into()))?;
    Ok(coefs
        .into_iter()
        .zip(k.dofs)
        .filter(|(c, _)| !c.is_zero())
        .collect())
}

/// `γ ≤ γ'`: the points of `γ` are among those of `γ'`.
pub fn frame_leq(gamma: &DiscreteFrame, gamma_prime: &DiscreteFrame) -> bool {
    gamma.bases.keys().all(|p| gamma_prime.contains(p))
}

/// Same relation decided by linear expressibility of `K_γ` in `K_γ'`.
pub fn frame_leq_by_expressibility(
    gamma: &DiscreteFrame,
    gamma_prime: &DiscreteFrame,
    sorts: &[TensorSort],
) -> Result<bool> {
    let k = build_k_gamma(gamma, sorts)?;
    let k_prime = build_k_gamma(gamma_prime, sorts)?;
    // Every κ is a combination of K' exactly when adding K leaves the rank unchanged.
    let mut both = k_prime.dofs().to_vec();
    both.extend(k.dofs().iter().cloned());
    Ok(dof::functional_matrix(&both).0.rank() == dof::functional_matrix(k_prime.dofs()).0.rank())
}

/// Frame on the union of points. At a shared point the basis of the frame
/// with more points is kept, the first argument winning ties.
pub fn join_frames(a: &DiscreteFrame, b: &DiscreteFrame) -> Result<DiscreteFrame> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let (major, minor) = if b.len() > a.len() { (b, a) } else { (a, b) };
    let mut out = major.clone();
    for (p, basis) in &minor.bases {
        if !out.contains(p) {
            out.bases.insert(p.clone(), basis.clone());
            out.duals.insert(p.clone(), minor.duals[p].clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn pid(s: &str) -> PointId {
        PointId::from(s)
    }

    fn metric() -> TensorSort {
        TensorSort::symmetric_covariant_pair("q")
    }

    #[test]
    fn k_gamma_sizes() {
        let f1 = DiscreteFrame::standard(3, [pid("a")]);
        assert_eq!(build_k_gamma(&f1, &[metric()]).unwrap().len(), 6);
        let f2 = DiscreteFrame::standard(3, [pid("a"), pid("b")]);
        assert_eq!(build_k_gamma(&f2, &[metric()]).unwrap().len(), 12);
        let f3 = DiscreteFrame::standard(2, [pid("a")]);
        assert_eq!(
            build_k_gamma(&f3, &[TensorSort::new("t", 1, 1)]).unwrap().len(),
            4
        );
    }

    #[test]
    fn degenerate_frame_rejected() {
        let basis = vec![vec![int(1), int(0)], vec![int(2), int(0)]];
        assert!(matches!(
            DiscreteFrame::new(2, [(pid("a"), basis)]),
            Err(Error::DegenerateBasis(_))
        ));
    }

    #[test]
    fn express_sum_vector() {
        let f = DiscreteFrame::standard(3, [pid("y")]);
        let k = ConfigDof::new(
            metric(),
            3,
            pid("y"),
            vec![vec![int(1), int(1), int(0)], vec![int(1), int(0), int(0)]],
        )
        .unwrap();
        let terms = express_in_frame(&k, &f).unwrap();
        assert_eq!(terms.len(), 2);
        assert!(terms.iter().all(|(c, _)| *c == int(1)));
        let args: Vec<_> = terms.iter().map(|(_, d)| d.args().to_vec()).collect();
        assert!(args.contains(&vec![
            vec![int(1), int(0), int(0)],
            vec![int(1), int(0), int(0)]
        ]));
        assert!(args.contains(&vec![
            vec![int(1), int(0), int(0)],
            vec![int(0), int(1), int(0)]
        ]));
    }

    #[test]
    fn express_outside_frame_fails() {
        let f = DiscreteFrame::standard(3, [pid("y")]);
        let k = ConfigDof::new(metric(), 3, pid("z"), vec![vec![int(1); 3], vec![int(1); 3]]).unwrap();
        assert!(matches!(express_in_frame(&k, &f), Err(Error::PointNotInFrame(_))));
    }

    #[test]
    fn zero_target_reconstructs_zero() {
        let f = DiscreteFrame::standard(3, [pid("y")]);
        let k = build_k_gamma(&f, &[metric()]).unwrap();
        let q = reconstruct_config(&k, &vec![int(0); 6]).unwrap();
        assert!(q.field("q").unwrap().samples()[&pid("y")].iter().all(Zero::is_zero));
    }

    #[test]
    fn frame_order_and_join() {
        let a = DiscreteFrame::standard(2, [pid("a")]);
        let ab = DiscreteFrame::standard(2, [pid("a"), pid("b")]);
        let c = DiscreteFrame::standard(2, [pid("c")]);
        assert!(frame_leq(&a, &a));
        assert!(frame_leq(&a, &ab));
        assert!(!frame_leq(&ab, &a));
        assert!(!frame_leq(&a, &c));
        let j = join_frames(&ab, &c).unwrap();
        assert!(frame_leq(&ab, &j) && frame_leq(&c, &j));
        let sorts = [TensorSort::new("t", 1, 1)];
        assert!(frame_leq_by_expressibility(&a, &ab, &sorts).unwrap());
        assert!(!frame_leq_by_expressibility(&a, &c, &sorts).unwrap());
    }
}
