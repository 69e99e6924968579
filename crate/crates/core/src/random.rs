//! Seeded generators for test data: frames, d.o.f., operators, systems and
//! polynomials. Every generator takes the caller's RNG so a single seed
//! drives a whole run.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dof::{ConfigDof, MomentumDof, MomentumOperator};
use crate::frames::{build_k_gamma, DiscreteFrame};
use crate::geometry::{DiscreteMeasure, Manifold, OneForm, Point, PointId, TensorSort, VectorField};
use crate::linalg::Matrix;
use crate::polynomial::Polynomial;
use crate::rational::{self, Q};
use crate::systems::{self, FiniteSystem};
use crate::Result;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Point ids `p0 … p{n-1}`.
pub fn point_pool(n: usize) -> Vec<PointId> {
    (0..n).map(|i| PointId(format!("p{i}"))).collect()
}

/// A manifold holding the pool points at distinct integer coordinates.
pub fn pool_manifold(dim: usize, pool: &[PointId]) -> Manifold {
    let mut m = Manifold::new(dim).expect("positive dimension");
    for (i, id) in pool.iter().enumerate() {
        let mut coords = vec![Q::zero(); dim];
        coords[0] = rational::int(i as i64);
        m.insert(Point {
            id: id.clone(),
            coords,
        })
        .expect("distinct pool points");
    }
    m
}

pub fn nonzero_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Q> {
    loop {
        let v = rational::random_vector(rng, dim);
        if !rational::is_zero_vector(&v) {
            return v;
        }
    }
}

/// Random invertible basis; with probability 1/3 the coordinate basis.
pub fn basis<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Vec<Q>> {
    if rng.random_range(0..3) == 0 {
        return crate::geometry::standard_basis(dim);
    }
    loop {
        let rows: Vec<Vec<Q>> = (0..dim).map(|_| rational::random_vector(rng, dim)).collect();
        if !Matrix::from_rows(rows.clone(), dim).determinant().is_zero() {
            return rows;
        }
    }
}

pub fn frame<R: Rng + ?Sized>(rng: &mut R, dim: usize, points: &[PointId]) -> DiscreteFrame {
    DiscreteFrame::new(dim, points.iter().map(|p| (p.clone(), basis(rng, dim))))
        .expect("random bases are invertible")
}

/// Random frame on `1..=max_points` points drawn from `pool`.
pub fn frame_from_pool<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    pool: &[PointId],
    max_points: usize,
) -> DiscreteFrame {
    let n = rng.random_range(1..=max_points.min(pool.len()));
    let points: Vec<PointId> = pool.choose_multiple(rng, n).cloned().collect();
    frame(rng, dim, &points)
}

pub fn config_dof<R: Rng + ?Sized>(rng: &mut R, sort: &TensorSort, dim: usize, point: PointId) -> ConfigDof {
    let args = (0..sort.rank()).map(|_| rational::random_vector(rng, dim)).collect();
    ConfigDof::new(sort.clone(), dim, point, args).expect("consistent shapes")
}

/// Fixed weight of a point, one of 1, 1/2, 2 and 3/2 by the bytes of its id.
/// Generated momentum d.o.f. all use it, so any set of them discretizes the
/// phase space consistently.
pub fn cell_weight(p: &PointId) -> Q {
    let h = p.as_str().bytes().fold(0u32, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u32));
    [rational::one(), rational::frac(1, 2), rational::int(2), rational::frac(3, 2)][(h % 4) as usize].clone()
}

/// Random momentum d.o.f. whose slot fields are all nonzero on `support`;
/// individual slots may reach further into `pool`.
pub fn momentum_dof<R: Rng + ?Sized>(
    rng: &mut R,
    sort: &TensorSort,
    dim: usize,
    support: &[PointId],
    pool: &[PointId],
) -> MomentumDof {
    let weights = support.iter().map(|p| (p.clone(), cell_weight(p))).collect();
    let measure = DiscreteMeasure::new(weights).expect("positive weights");
    if sort.is_scalar() {
        let smearing = support
            .iter()
            .map(|p| (p.clone(), rational::random_nonzero(rng, 5, 3)))
            .collect();
        return MomentumDof::scalar(sort.clone(), dim, smearing, measure).expect("valid smearing");
    }
    let slot_field = |rng: &mut R| {
        let mut values: BTreeMap<PointId, Vec<Q>> =
            support.iter().map(|p| (p.clone(), nonzero_vector(rng, dim))).collect();
        if rng.random_bool(0.3) {
            if let Some(extra) = pool.choose(rng) {
                values
                    .entry(extra.clone())
                    .or_insert_with(|| nonzero_vector(rng, dim));
            }
        }
        values
    };
    let vector_fields = (0..sort.contravariant())
        .map(|_| VectorField::new(dim, slot_field(rng)).expect("dimension"))
        .collect();
    let one_forms = (0..sort.covariant())
        .map(|_| OneForm::new(dim, slot_field(rng)).expect("dimension"))
        .collect();
    // Extra points outside the measure would make the d.o.f. invalid, so the
    // measure is widened to the common support.
    let probe = MomentumDof::new(
        sort.clone(),
        dim,
        vector_fields,
        one_forms,
        DiscreteMeasure::unit(pool.iter().chain(support)),
    )
    .expect("nonzero slot values on the support");
    let weights: BTreeMap<PointId, Q> = probe
        .support()
        .into_iter()
        .map(|p| {
            let w = cell_weight(&p);
            (p, w)
        })
        .collect();
    MomentumDof::new(
        sort.clone(),
        dim,
        probe.vector_fields().to_vec(),
        probe.one_forms().to_vec(),
        DiscreteMeasure::new(weights).expect("positive weights"),
    )
    .expect("same fields")
}

/// Random combination of one to three momentum d.o.f. over `sorts`.
pub fn operator<R: Rng + ?Sized>(
    rng: &mut R,
    sorts: &[TensorSort],
    dim: usize,
    points: &[PointId],
    pool: &[PointId],
) -> MomentumOperator {
    loop {
        let terms: Vec<(Q, MomentumDof)> = (0..rng.random_range(1..=3))
            .map(|_| {
                let sort = sorts.choose(rng).expect("at least one sort");
                let n = rng.random_range(1..=points.len().min(2));
                let support: Vec<PointId> = points.choose_multiple(rng, n).cloned().collect();
                (
                    rational::random_nonzero(rng, 4, 3),
                    momentum_dof(rng, sort, dim, &support, pool),
                )
            })
            .collect();
        let op = MomentumOperator::from_terms(terms);
        if !op.is_zero() {
            return op;
        }
    }
}

pub fn invertible_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    loop {
        let rows: Vec<Vec<Q>> = (0..n)
            .map(|_| (0..n).map(|_| rational::random(rng, 3, 2)).collect())
            .collect();
        let m = Matrix::from_rows(rows, n);
        if !m.determinant().is_zero() {
            return m;
        }
    }
}

/// `ops'_i = Σ_j A_ij ops_j` for a random invertible `A`.
pub fn recombine<R: Rng + ?Sized>(rng: &mut R, ops: &[MomentumOperator]) -> Vec<MomentumOperator> {
    let a = invertible_matrix(rng, ops.len());
    (0..ops.len())
        .map(|i| MomentumOperator::combination(a.row(i), ops))
        .collect()
}

/// How [`system`] builds its operator basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    /// Dual operators of the frame.
    Dual,
    /// Dual operators mixed by a random invertible matrix.
    Recombined,
    /// Random operators, possibly reaching beyond the frame.
    Generic,
}

/// Random non-degenerate system on a frame drawn from `pool`.
pub fn system<R: Rng + ?Sized>(
    rng: &mut R,
    kind: SystemKind,
    sorts: &[TensorSort],
    dim: usize,
    pool: &[PointId],
    max_points: usize,
) -> Result<FiniteSystem> {
    let frame = frame_from_pool(rng, dim, pool, max_points);
    system_on(rng, kind, sorts, &frame, pool)
}

pub fn system_on<R: Rng + ?Sized>(
    rng: &mut R,
    kind: SystemKind,
    sorts: &[TensorSort],
    frame: &DiscreteFrame,
    pool: &[PointId],
) -> Result<FiniteSystem> {
    let kset = build_k_gamma(frame, sorts)?;
    let duals = systems::dual_operators(frame, sorts)?;
    match kind {
        SystemKind::Dual => FiniteSystem::new(duals, kset),
        SystemKind::Recombined => FiniteSystem::new(recombine(rng, &duals), kset),
        SystemKind::Generic => {
            let points: Vec<PointId> = frame.points().into_iter().collect();
            for _ in 0..20 {
                // One leading term per d.o.f. keeps every column of G reachable.
                let ops: Vec<MomentumOperator> = kset
                    .labels()
                    .iter()
                    .map(|label| {
                        let sort = kset.sort(&label.sort).expect("label sort");
                        let lead = momentum_dof(rng, sort, frame.dim(), std::slice::from_ref(&label.point), pool);
                        let extra = if rng.random_bool(0.5) {
                            operator(rng, sorts, frame.dim(), &points, pool)
                        } else {
                            MomentumOperator::zero()
                        };
                        MomentumOperator::single(lead).add(&extra)
                    })
                    .collect();
                let sys = FiniteSystem::unchecked(ops, kset.clone());
                if sys.is_nondegenerate() {
                    return Ok(sys);
                }
            }
            // Random data almost never lands here; fall back to mixing duals.
            FiniteSystem::new(recombine(rng, &duals), kset)
        }
    }
}

pub fn random_kind<R: Rng + ?Sized>(rng: &mut R) -> SystemKind {
    *[SystemKind::Dual, SystemKind::Recombined, SystemKind::Generic]
        .choose(rng)
        .expect("non-empty")
}

/// Random polynomial with up to `max_terms` terms of total degree at most
/// `max_degree`.
pub fn polynomial<R: Rng + ?Sized>(rng: &mut R, nvars: usize, max_degree: u32, max_terms: usize) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    if nvars == 0 {
        return Polynomial::constant(0, rational::random(rng, 5, 3));
    }
    for _ in 0..rng.random_range(1..=max_terms) {
        let degree = rng.random_range(0..=max_degree);
        let mut exps = vec![0u32; nvars];
        for _ in 0..degree {
            exps[rng.random_range(0..nvars)] += 1;
        }
        p.add_term(exps, rational::random_nonzero(rng, 5, 3));
    }
    p
}

/// Random subset of `items` of size `1..=max`.
pub fn subset<R: Rng + ?Sized, T: Clone + Ord>(rng: &mut R, items: &[T], max: usize) -> BTreeSet<T> {
    let n = rng.random_range(1..=max.min(items.len()).max(1));
    let mut v = items.to_vec();
    v.shuffle(rng);
    v.into_iter().take(n).collect()
}
