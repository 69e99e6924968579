//! Coupling two theories: the combined family of factorized Hilbert spaces
//! over a directed subset Θ of a product index set, and the coupling set Θ
//! between tensor-field systems and LQG graph/surface systems.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;

use crate::geometry::{Manifold, PointId};
use crate::hilbert::{self, kron, CMatrix, DirectedSet, FactorizedFamily, Failure, TOLERANCE};
use crate::systems::{self, FiniteSystem, JoinOutcome, SystemRelation};
use crate::{Error, Result};

pub type CVector = DVector<Complex64>;

/// Matrix of `v₁⊗v₂⊗v₃⊗v₄ ↦ v₁⊗v₃⊗v₂⊗v₄` for factor dimensions `dims`.
pub fn flip_matrix(dims: [usize; 4]) -> CMatrix {
    hilbert::tensor_permutation(&dims, &[0, 2, 1, 3])
}

/// Applies the flip to a vector of `H₁⊗H₂⊗H₃⊗H₄` by index relabelling.
pub fn flip(v: &CVector, dims: [usize; 4]) -> Result<CVector> {
    let [d1, d2, d3, d4] = dims;
    let total = d1 * d2 * d3 * d4;
    if v.len() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            found: v.len(),
        });
    }
    let mut out = CVector::zeros(total);
    for a in 0..d1 {
        for b in 0..d2 {
            for c in 0..d3 {
                for d in 0..d4 {
                    let from = ((a * d2 + b) * d3 + c) * d4 + d;
                    let to = ((a * d3 + c) * d2 + b) * d4 + d;
                    out[to] = v[from];
                }
            }
        }
    }
    Ok(out)
}

/// Family over Θ with `members[θ] = (λ, λ̄)`.
#[derive(Clone, Debug)]
pub struct CombinedFamily {
    pub family: FactorizedFamily,
    pub members: Vec<(usize, usize)>,
}

/// `H_θ = H_λ ⊗ H_λ̄`, `Φ_{θ'θ} = F ∘ (Φ_{λ'λ} ⊗ Φ_{λ̄'λ̄})` and
/// `Φ_{θ''θ'θ} = F ∘ (Φ_{λ''λ'λ} ⊗ Φ_{λ̄''λ̄'λ̄})`, ordered by the product order.
pub fn combine_families(
    a: &FactorizedFamily,
    b: &FactorizedFamily,
    members: &[(usize, usize)],
) -> Result<CombinedFamily> {
    for &(x, y) in members {
        if x >= a.index().size() || y >= b.index().size() {
            return Err(Error::invalid("Θ fragment", format!("member ({x}, {y}) out of range")));
        }
    }
    if members.iter().collect::<BTreeSet<_>>().len() != members.len() {
        return Err(Error::invalid("Θ fragment", "repeated member"));
    }
    let index = DirectedSet::from_order(members.len(), |i, j| {
        a.index().leq(members[i].0, members[j].0) && b.index().leq(members[i].1, members[j].1)
    })?;
    let dims = members.iter().map(|&(x, y)| a.dim(x) * b.dim(y)).collect();
    let mut phi = BTreeMap::new();
    for (u, l) in index.pairs() {
        let ((ua, ub), (la, lb)) = (members[u], members[l]);
        let f = flip_matrix([a.factor_dim(ua, la), a.dim(la), b.factor_dim(ub, lb), b.dim(lb)]);
        phi.insert((u, l), f * kron(a.phi(ua, la), b.phi(ub, lb)));
    }
    let mut phi3 = BTreeMap::new();
    for (t, m, l) in index.triples() {
        let ((ta, tb), (ma, mb), (la, lb)) = (members[t], members[m], members[l]);
        let f = flip_matrix([
            a.factor_dim(ta, ma),
            a.factor_dim(ma, la),
            b.factor_dim(tb, mb),
            b.factor_dim(mb, lb),
        ]);
        phi3.insert((t, m, l), f * kron(a.phi3(ta, ma, la), b.phi3(tb, mb, lb)));
    }
    Ok(CombinedFamily {
        family: FactorizedFamily::new(index, dims, phi, phi3)?,
        members: members.to_vec(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlipReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub failures: Vec<Failure>,
    pub passed: bool,
}

fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    hilbert::random_matrix(rng, n, 1).column(0).into_owned()
}

fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

/// Evaluates `Φ⁻¹_{θ''θ} ∘ (Φ⁻¹_{θ''θ'θ} ⊗ id)` and `Φ⁻¹_{θ''θ'} ∘ (id ⊗ Φ⁻¹_{θ'θ})`
/// on random simple tensors `v₁⊗…⊗v₆` of
/// `H̃_{λ''λ'} ⊗ H̃_{λ̄''λ̄'} ⊗ H̃_{λ'λ} ⊗ H̃_{λ̄'λ̄} ⊗ H_λ ⊗ H_λ̄`, and compares
/// both with the product of the corresponding maps of the two input families.
pub fn check_flip_identity<R: Rng + ?Sized>(
    combined: &CombinedFamily,
    a: &FactorizedFamily,
    b: &FactorizedFamily,
    samples: usize,
    rng: &mut R,
) -> Result<FlipReport> {
    let fam = &combined.family;
    let triples = fam.index().triples();
    let mut failures = Vec::new();
    let mut max_dev: f64 = 0.0;
    for s in 0..samples {
        let (t, m, l) = triples[s % triples.len()];
        let ((ta, tb), (ma, mb), (la, lb)) = (combined.members[t], combined.members[m], combined.members[l]);
        let v = [
            random_vector(rng, a.factor_dim(ta, ma)),
            random_vector(rng, b.factor_dim(tb, mb)),
            random_vector(rng, a.factor_dim(ma, la)),
            random_vector(rng, b.factor_dim(mb, lb)),
            random_vector(rng, a.dim(la)),
            random_vector(rng, b.dim(lb)),
        ];
        let x = v[1..].iter().fold(v[0].clone(), |acc, w| kron_vec(&acc, w));

        let lhs_inner = kron(&fam.phi3(t, m, l).adjoint(), &hilbert::identity(fam.dim(l))) * &x;
        let lhs = fam.phi(t, l).adjoint() * lhs_inner;
        let rhs_inner = kron(&hilbert::identity(fam.factor_dim(t, m)), &fam.phi(m, l).adjoint()) * &x;
        let rhs = fam.phi(t, m).adjoint() * rhs_inner;

        let side_a = a.phi(ta, la).adjoint() * kron_vec(&(a.phi3(ta, ma, la).adjoint() * kron_vec(&v[0], &v[2])), &v[4]);
        let side_b = b.phi(tb, lb).adjoint() * kron_vec(&(b.phi3(tb, mb, lb).adjoint() * kron_vec(&v[1], &v[3])), &v[5]);
        let expected = kron_vec(&side_a, &side_b);

        let dev = (&lhs - &rhs).camax().max((&lhs - &expected).camax());
        max_dev = max_dev.max(dev);
        if dev > TOLERANCE {
            failures.push(Failure {
                check: "flip identity",
                location: vec![t, m, l],
                deviation: dev,
            });
        }
    }
    Ok(FlipReport {
        samples,
        max_deviation: max_dev,
        passed: failures.is_empty(),
        failures,
    })
}

impl FactorizedFamily {
    /// Family with every space one-dimensional and every map `[1]`.
    pub fn trivial(index: DirectedSet) -> Self {
        let one = hilbert::identity(1);
        let phi = index.pairs().into_iter().map(|p| (p, one.clone())).collect();
        let phi3 = index.triples().into_iter().map(|t| (t, one.clone())).collect();
        let dims = vec![1; index.size()];
        FactorizedFamily::new(index, dims, phi, phi3).expect("complete by construction")
    }
}

/// Unordered labelled edge; endpoints are stored in increasing order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: PointId,
    pub b: PointId,
    pub label: String,
}

impl Edge {
    pub fn new(a: PointId, b: PointId, label: impl Into<String>) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Edge {
            a,
            b,
            label: label.into(),
        }
    }
}

/// Finite graph; only its vertex and edge sets matter.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Graph {
    vertices: BTreeSet<PointId>,
    edges: BTreeSet<Edge>,
}

impl Graph {
    pub fn new(vertices: impl IntoIterator<Item = PointId>, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let vertices: BTreeSet<PointId> = vertices.into_iter().collect();
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        for e in &edges {
            for end in [&e.a, &e.b] {
                if !vertices.contains(end) {
                    return Err(Error::invalid("graph", format!("edge endpoint `{end}` is not a vertex")));
                }
            }
        }
        Ok(Graph { vertices, edges })
    }

    pub fn vertices(&self) -> &BTreeSet<PointId> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    /// Subgraph order: vertex and edge containment.
    pub fn leq(&self, other: &Graph) -> bool {
        self.vertices.is_subset(&other.vertices) && self.edges.is_subset(&other.edges)
    }

    pub fn union(&self, other: &Graph) -> Graph {
        Graph {
            vertices: self.vertices.union(&other.vertices).cloned().collect(),
            edges: self.edges.union(&other.edges).cloned().collect(),
        }
    }

    /// Adds `new` vertices, each joined by an `ext` edge to the smallest
    /// vertex of the enlarged graph.
    pub fn extended(&self, new: impl IntoIterator<Item = PointId>) -> Graph {
        let mut out = self.clone();
        let new: Vec<PointId> = new.into_iter().filter(|v| !self.vertices.contains(v)).collect();
        out.vertices.extend(new.iter().cloned());
        if let Some(anchor) = out.vertices.first().cloned() {
            for v in new {
                if v != anchor {
                    out.edges.insert(Edge::new(anchor.clone(), v, "ext"));
                }
            }
        }
        out
    }
}

/// Surface given by the finite set of points lying on it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Surface {
    pub id: String,
    pub points: BTreeSet<PointId>,
}

/// Finite collection of surfaces, ordered by containment.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SurfaceSet {
    surfaces: BTreeSet<Surface>,
}

impl SurfaceSet {
    pub fn new(surfaces: impl IntoIterator<Item = Surface>) -> Self {
        SurfaceSet {
            surfaces: surfaces.into_iter().collect(),
        }
    }

    pub fn surfaces(&self) -> &BTreeSet<Surface> {
        &self.surfaces
    }

    pub fn leq(&self, other: &SurfaceSet) -> bool {
        self.surfaces.is_subset(&other.surfaces)
    }

    pub fn union(&self, other: &SurfaceSet) -> SurfaceSet {
        SurfaceSet {
            surfaces: self.surfaces.union(&other.surfaces).cloned().collect(),
        }
    }

    pub fn points(&self) -> BTreeSet<PointId> {
        self.surfaces.iter().flat_map(|s| s.points.iter().cloned()).collect()
    }
}

/// Element `(γ̄, σ)` of the graph × surface-collection product order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LqgSystem {
    pub graph: Graph,
    pub surfaces: SurfaceSet,
}

impl LqgSystem {
    pub fn new(graph: Graph, surfaces: SurfaceSet) -> Self {
        LqgSystem { graph, surfaces }
    }

    pub fn leq(&self, other: &LqgSystem) -> bool {
        self.graph.leq(&other.graph) && self.surfaces.leq(&other.surfaces)
    }

    pub fn join(&self, other: &LqgSystem) -> LqgSystem {
        LqgSystem {
            graph: self.graph.union(&other.graph),
            surfaces: self.surfaces.union(&other.surfaces),
        }
    }

    /// Graph vertices and points of every surface.
    pub fn points(&self) -> BTreeSet<PointId> {
        let mut out = self.graph.vertices.clone();
        out.extend(self.surfaces.points());
        out
    }
}

/// Θ membership: the frame points coincide with the graph vertices.
pub fn in_theta(tensor: &FiniteSystem, lqg: &LqgSystem) -> bool {
    tensor.frame().points() == lqg.graph.vertices
}

/// Points touched by the tensor side: frame points and the supports of all
/// fields defining the operators.
pub fn tensor_points(tensor: &FiniteSystem) -> BTreeSet<PointId> {
    let mut out = tensor.frame().points();
    for op in tensor.operators() {
        out.extend(op.footprint());
    }
    out
}

/// True when the frame points and every operator field support avoid the
/// graph and every surface. Graphs are represented by their vertices.
pub fn disjoint_support(tensor: &FiniteSystem, lqg: &LqgSystem) -> bool {
    tensor_points(tensor).is_disjoint(&lqg.points())
}

/// Element of Θ.
#[derive(Clone, Debug)]
pub struct CoupledSystem {
    tensor: FiniteSystem,
    lqg: LqgSystem,
}

impl CoupledSystem {
    pub fn new(tensor: FiniteSystem, lqg: LqgSystem) -> Result<Self> {
        if !in_theta(&tensor, &lqg) {
            return Err(Error::invalid(
                "coupled system",
                "frame points differ from the graph vertices",
            ));
        }
        Ok(CoupledSystem { tensor, lqg })
    }

    pub fn tensor(&self) -> &FiniteSystem {
        &self.tensor
    }

    pub fn lqg(&self) -> &LqgSystem {
        &self.lqg
    }
}

/// Product order on `Λ × Λ̄`.
pub fn product_geq(upper: (&FiniteSystem, &LqgSystem), lower: (&FiniteSystem, &LqgSystem)) -> Result<bool> {
    Ok(lower.1.leq(upper.1) && SystemRelation.geq(upper.0, lower.0)?)
}

#[derive(Clone, Debug)]
pub struct ThetaJoin {
    pub coupled: CoupledSystem,
    /// Vertex added so the old frame points form a proper subset.
    pub fresh_vertex: PointId,
    /// Vertices added to the joined graph.
    pub new_vertices: BTreeSet<PointId>,
    pub tensor_join: JoinOutcome,
}

/// A Θ-member dominating every element of `items` (arbitrary elements of the
/// product order). The LQG sides are joined, a fresh vertex is added, the
/// frame is extended to all vertices and the operator space is enlarged to a
/// non-degenerate system on that frame.
pub fn theta_cover(items: &[(&FiniteSystem, &LqgSystem)], manifold: &mut Manifold) -> Result<ThetaJoin> {
    let (first, rest) = items
        .split_first()
        .ok_or_else(|| Error::invalid("Θ join", "no elements to dominate"))?;
    let mut lqg = first.1.clone();
    let mut seed = first.0.clone();
    for (tensor, other) in rest {
        lqg = lqg.join(other);
        seed = systems::join(&seed, tensor, manifold)?.system;
    }
    let mut avoid = lqg.points();
    for (tensor, _) in items {
        avoid.extend(tensor_points(tensor));
    }
    avoid.extend(tensor_points(&seed));
    let fresh_vertex = manifold.fresh_point(&avoid);

    let mut frame = seed.frame().clone();
    for v in lqg.graph.vertices.iter().chain(std::iter::once(&fresh_vertex)) {
        frame = frame.with_standard_point(v.clone());
    }
    let tensor_join = systems::span_system(seed.operators(), seed.sorts(), &frame, manifold)?;
    let new_vertices: BTreeSet<PointId> = tensor_join
        .system
        .frame()
        .points()
        .difference(&lqg.graph.vertices)
        .cloned()
        .collect();
    let graph = lqg.graph.extended(new_vertices.iter().cloned());
    let coupled = CoupledSystem::new(tensor_join.system.clone(), LqgSystem::new(graph, lqg.surfaces))?;
    Ok(ThetaJoin {
        coupled,
        fresh_vertex,
        new_vertices,
        tensor_join,
    })
}

/// Upper bound of two Θ-members inside Θ.
pub fn theta_join(a: &CoupledSystem, b: &CoupledSystem, manifold: &mut Manifold) -> Result<ThetaJoin> {
    theta_cover(&[(a.tensor(), a.lqg()), (b.tensor(), b.lqg())], manifold)
}

/// Random graph on `vertices` with about one edge per vertex.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, vertices: &BTreeSet<PointId>) -> Graph {
    let vs: Vec<PointId> = vertices.iter().cloned().collect();
    let mut edges = BTreeSet::new();
    if vs.len() > 1 {
        for _ in 0..vs.len() {
            let pair: Vec<&PointId> = vs.choose_multiple(rng, 2).collect();
            edges.insert(Edge::new(pair[0].clone(), pair[1].clone(), "e"));
        }
    }
    Graph::new(vs, edges).expect("edges between vertices")
}

/// Up to `max` random surfaces through points of `pool`.
pub fn random_surfaces<R: Rng + ?Sized>(rng: &mut R, pool: &[PointId], max: usize) -> SurfaceSet {
    let n = rng.random_range(0..=max);
    SurfaceSet::new((0..n).map(|i| Surface {
        id: format!("S{}", rng.random_range(0..4 * max.max(1)) + i),
        points: crate::random::subset(rng, pool, 3),
    }))
}
