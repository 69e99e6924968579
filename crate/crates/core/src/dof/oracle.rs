//! Discretized canonical Poisson bracket.
//!
//! Every sampled component of a configuration field, `q_I(y)`, and of a
//! momentum density, `p^J(y)`, is a canonical coordinate, with
//!
//! ```text
//! {q_I(y), p^J(y')} = δ_{yy'} · P_I^J / w(y)
//! ```
//!
//! where `P` is the projector onto symmetric arrays of the sort and `w` the
//! measure weight. Functionals are lifted to polynomials in these coordinates
//! and bracketed by explicit partial derivatives. Nothing here uses the
//! closed-form pairing, which is what makes it usable as a cross-check.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::dof::{ConfigDof, CylindricalFunction, MomentumDof, MomentumOperator};
use crate::geometry::{self, PointId, TensorSort};
use crate::polynomial::Polynomial;
use crate::rational::Q;
use crate::{Error, Result};

/// A function on the discretized phase space.
#[derive(Clone, Debug)]
pub enum Functional {
    Config(ConfigDof),
    Momentum(MomentumDof),
    /// Linear combination of momentum d.o.f.
    MomentumCombination(MomentumOperator),
    Cylindrical(CylindricalFunction),
}

impl From<ConfigDof> for Functional {
    fn from(k: ConfigDof) -> Self {
        Functional::Config(k)
    }
}

impl From<MomentumDof> for Functional {
    fn from(p: MomentumDof) -> Self {
        Functional::Momentum(p)
    }
}

impl From<MomentumOperator> for Functional {
    fn from(op: MomentumOperator) -> Self {
        Functional::MomentumCombination(op)
    }
}

impl From<CylindricalFunction> for Functional {
    fn from(f: CylindricalFunction) -> Self {
        Functional::Cylindrical(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PhaseCoord {
    Config {
        point: PointId,
        sort: String,
        index: usize,
    },
    Momentum {
        point: PointId,
        sort: String,
        index: usize,
    },
}

/// Canonical sparse polynomial in phase coordinates. Monomials list their
/// coordinates in increasing order with positive exponents.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PhasePolynomial {
    terms: BTreeMap<Vec<(PhaseCoord, u32)>, Q>,
}

impl PhasePolynomial {
    fn from_polynomial(poly: &Polynomial, coords: &[PhaseCoord]) -> Self {
        let mut terms = BTreeMap::new();
        for (exps, c) in poly.terms() {
            let mut mono: Vec<(PhaseCoord, u32)> = exps
                .iter()
                .zip(coords)
                .filter(|(&e, _)| e > 0)
                .map(|(&e, coord)| (coord.clone(), e))
                .collect();
            mono.sort();
            terms.insert(mono, c.clone());
        }
        PhasePolynomial { terms }
    }

    pub fn terms(&self) -> &BTreeMap<Vec<(PhaseCoord, u32)>, Q> {
        &self.terms
    }

    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BracketValue {
    Constant(Q),
    Polynomial(PhasePolynomial),
}

impl BracketValue {
    pub fn as_constant(&self) -> Option<&Q> {
        match self {
            BracketValue::Constant(c) => Some(c),
            BracketValue::Polynomial(_) => None,
        }
    }

    /// The value as a phase polynomial, constants included.
    pub fn into_phase(self) -> PhasePolynomial {
        match self {
            BracketValue::Constant(c) if c.is_zero() => PhasePolynomial::default(),
            BracketValue::Constant(c) => PhasePolynomial {
                terms: BTreeMap::from([(Vec::new(), c)]),
            },
            BracketValue::Polynomial(p) => p,
        }
    }
}

#[derive(Default)]
struct PhaseSpace {
    coords: BTreeMap<PhaseCoord, usize>,
    sorts: BTreeMap<String, (TensorSort, usize)>,
    weights: BTreeMap<PointId, Q>,
}

impl PhaseSpace {
    fn register_sort(&mut self, sort: &TensorSort, dim: usize) -> Result<()> {
        match self.sorts.get(&sort.label) {
            Some((s, d)) if !s.same_shape(sort) || *d != dim => Err(Error::Unsupported(format!(
                "sort `{}` appears with two different shapes",
                sort.label
            ))),
            Some(_) => Ok(()),
            None => {
                self.sorts.insert(sort.label.clone(), (sort.clone(), dim));
                Ok(())
            }
        }
    }

    fn add_coord(&mut self, coord: PhaseCoord) {
        let next = self.coords.len();
        self.coords.entry(coord).or_insert(next);
    }

    fn register_config(&mut self, k: &ConfigDof) -> Result<()> {
        self.register_sort(k.sort(), k.dim())?;
        for index in 0..k.sort().component_count(k.dim()) {
            self.add_coord(PhaseCoord::Config {
                point: k.point().clone(),
                sort: k.sort().label.clone(),
                index,
            });
        }
        Ok(())
    }

    fn register_momentum(&mut self, phi: &MomentumDof) -> Result<()> {
        self.register_sort(phi.sort(), phi.dim())?;
        for point in phi.support() {
            let w = phi.measure().weight(&point)?.clone();
            match self.weights.get(&point) {
                Some(existing) if *existing != w => {
                    return Err(Error::Unsupported(format!(
                        "two measures disagree at `{point}`"
                    )))
                }
                Some(_) => {}
                None => {
                    self.weights.insert(point.clone(), w);
                }
            }
            for index in 0..phi.sort().component_count(phi.dim()) {
                self.add_coord(PhaseCoord::Momentum {
                    point: point.clone(),
                    sort: phi.sort().label.clone(),
                    index,
                });
            }
        }
        Ok(())
    }

    fn register(&mut self, f: &Functional) -> Result<()> {
        match f {
            Functional::Config(k) => self.register_config(k),
            Functional::Momentum(phi) => self.register_momentum(phi),
            Functional::MomentumCombination(op) => {
                op.terms().iter().try_for_each(|(_, d)| self.register_momentum(d))
            }
            Functional::Cylindrical(psi) => {
                psi.base().iter().try_for_each(|k| self.register_config(k))
            }
        }
    }

    /// Coordinates in a fixed order; variable `i` of lifted polynomials is
    /// `ordered()[i]`.
    fn freeze(&mut self) -> Vec<PhaseCoord> {
        let ordered: Vec<PhaseCoord> = self.coords.keys().cloned().collect();
        self.coords = ordered.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        ordered
    }

    fn nvars(&self) -> usize {
        self.coords.len()
    }

    fn lift_config(&self, k: &ConfigDof) -> Polynomial {
        let mut coefs = vec![Q::zero(); self.nvars()];
        for (index, c) in k.coefficient_tensor().into_iter().enumerate() {
            let coord = PhaseCoord::Config {
                point: k.point().clone(),
                sort: k.sort().label.clone(),
                index,
            };
            coefs[self.coords[&coord]] += c;
        }
        Polynomial::linear(&coefs)
    }

    fn lift_momentum(&self, phi: &MomentumDof, scale: &Q) -> Vec<Q> {
        let mut coefs = vec![Q::zero(); self.nvars()];
        for point in phi.support() {
            let w = &self.weights[&point];
            let density = phi.density_coefficients(&point).expect("point in support");
            for (index, c) in density.into_iter().enumerate() {
                let coord = PhaseCoord::Momentum {
                    point: point.clone(),
                    sort: phi.sort().label.clone(),
                    index,
                };
                coefs[self.coords[&coord]] += c * w * scale;
            }
        }
        coefs
    }

    fn lift(&self, f: &Functional) -> Polynomial {
        match f {
            Functional::Config(k) => self.lift_config(k),
            Functional::Momentum(phi) => Polynomial::linear(&self.lift_momentum(phi, &Q::from_integer(1.into()))),
            Functional::MomentumCombination(op) => {
                let mut coefs = vec![Q::zero(); self.nvars()];
                for (c, d) in op.terms() {
                    for (acc, x) in coefs.iter_mut().zip(self.lift_momentum(d, c)) {
                        *acc += x;
                    }
                }
                Polynomial::linear(&coefs)
            }
            Functional::Cylindrical(psi) => {
                if psi.base().is_empty() {
                    let c = psi.poly().as_constant().unwrap_or_else(Q::zero);
                    return Polynomial::constant(self.nvars(), c);
                }
                let subs: Vec<Polynomial> =
                    psi.base().iter().map(|k| self.lift_config(k)).collect();
                psi.poly().compose(&subs)
            }
        }
    }
}

/// Entries `P_I^J = #{σ : σ·I = J} / |S|` of the symmetrization projector.
fn symmetry_projector(sort: &TensorSort, dim: usize) -> BTreeMap<(usize, usize), Q> {
    let perms = sort.symmetry_permutations();
    let norm = Q::from_integer((perms.len() as i64).into());
    let rank = sort.rank();
    let mut out: BTreeMap<(usize, usize), Q> = BTreeMap::new();
    for i in 0..sort.component_count(dim) {
        let idx = geometry::unflatten(i, dim, rank);
        for p in &perms {
            let j = geometry::flatten(&geometry::act(p, &idx), dim);
            *out.entry((i, j)).or_insert_with(Q::zero) += Q::from_integer(1.into()) / &norm;
        }
    }
    out
}

/// Lifts a single functional to a phase-space polynomial.
pub fn lift(f: &Functional) -> Result<PhasePolynomial> {
    let mut space = PhaseSpace::default();
    space.register(f)?;
    let coords = space.freeze();
    Ok(PhasePolynomial::from_polynomial(&space.lift(f), &coords))
}

/// `{F, G}` computed from partial derivatives in canonical coordinates.
pub fn poisson_bracket(f: &Functional, g: &Functional) -> Result<BracketValue> {
    let mut space = PhaseSpace::default();
    space.register(f)?;
    space.register(g)?;
    let coords = space.freeze();
    let pf = space.lift(f);
    let pg = space.lift(g);

    let mut momenta: BTreeMap<(PointId, String), Vec<(usize, usize)>> = BTreeMap::new();
    for (i, c) in coords.iter().enumerate() {
        if let PhaseCoord::Momentum { point, sort, index } = c {
            momenta
                .entry((point.clone(), sort.clone()))
                .or_default()
                .push((*index, i));
        }
    }
    let projectors: BTreeMap<String, BTreeMap<(usize, usize), Q>> = space
        .sorts
        .iter()
        .map(|(label, (sort, dim))| (label.clone(), symmetry_projector(sort, *dim)))
        .collect();

    let mut result = Polynomial::zero(coords.len());
    for (qi, c) in coords.iter().enumerate() {
        let PhaseCoord::Config { point, sort, index } = c else {
            continue;
        };
        let Some(ps) = momenta.get(&(point.clone(), sort.clone())) else {
            continue;
        };
        let df_dq = pf.derivative(qi);
        let dg_dq = pg.derivative(qi);
        if df_dq.is_zero() && dg_dq.is_zero() {
            continue;
        }
        let w = &space.weights[point];
        for &(j_index, pj) in ps {
            let Some(proj) = projectors[sort].get(&(*index, j_index)) else {
                continue;
            };
            let factor = proj / w;
            let term = &(&df_dq * &pg.derivative(pj)) - &(&dg_dq * &pf.derivative(pj));
            if !term.is_zero() {
                result = &result + &term.scale(&factor);
            }
        }
    }
    Ok(match result.as_constant() {
        Some(c) => BracketValue::Constant(c),
        None => BracketValue::Polynomial(PhasePolynomial::from_polynomial(&result, &coords)),
    })
}
