//! Checks of the six structural conditions on a finite fragment of systems.
//!
//! Each check records how many instances it examined and, on the first
//! failure, a witness naming the offending system(s).

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::dof::oracle::{poisson_bracket, BracketValue, Functional};
use crate::dof::{self, apply_momentum_operator, pairing, ConfigDof, CylindricalFunction, MomentumDof, MomentumOperator};
use crate::frames::{reconstruct_config, DiscreteFrame};
use crate::geometry::{Manifold, TensorSort};
use crate::linalg::Matrix;
use crate::rational::{self, Q};
use crate::systems::{self, merge_sorts, FiniteSystem, SystemRelation};
use crate::random;

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub system: Option<usize>,
    pub other: Option<usize>,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionResult {
    pub name: &'static str,
    pub description: &'static str,
    pub passed: bool,
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub systems: usize,
    pub conditions: Vec<ConditionResult>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// The fragment under test plus the elementary d.o.f. that generate it.
#[derive(Clone, Debug, Default)]
pub struct ConditionInput {
    pub systems: Vec<FiniteSystem>,
    pub config_generators: Vec<ConfigDof>,
    pub momentum_generators: Vec<MomentumDof>,
}

pub fn matrix_strings(m: &Matrix) -> Vec<Vec<String>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(rational::format).collect())
        .collect()
}

struct Tally {
    name: &'static str,
    description: &'static str,
    checked: usize,
    witness: Option<Witness>,
}

impl Tally {
    fn new(name: &'static str, description: &'static str) -> Self {
        Tally {
            name,
            description,
            checked: 0,
            witness: None,
        }
    }

    fn pass(&mut self) {
        self.checked += 1;
    }

    fn fail(&mut self, system: Option<usize>, other: Option<usize>, detail: impl Into<String>, matrix: Option<&Matrix>) {
        self.checked += 1;
        if self.witness.is_none() {
            self.witness = Some(Witness {
                system,
                other,
                detail: detail.into(),
                matrix: matrix.map(matrix_strings),
            });
        }
    }

    fn finish(self) -> ConditionResult {
        ConditionResult {
            name: self.name,
            description: self.description,
            passed: self.witness.is_none(),
            checked: self.checked,
            witness: self.witness,
        }
    }
}

fn all_sorts(input: &ConditionInput) -> Vec<TensorSort> {
    let mut sorts = Vec::new();
    for s in &input.systems {
        sorts = merge_sorts(&sorts, s.sorts()).unwrap_or(sorts);
    }
    sorts
}

fn sample_dim(input: &ConditionInput) -> Option<usize> {
    input
        .systems
        .first()
        .map(|s| s.frame().dim())
        .or_else(|| input.config_generators.first().map(ConfigDof::dim))
        .or_else(|| input.momentum_generators.first().map(MomentumDof::dim))
}

/// Runs every check. `manifold` supplies fresh points for constructive
/// steps; `rng` drives the randomized round trips.
pub fn check_conditions<R: Rng + ?Sized>(
    input: &ConditionInput,
    manifold: &mut Manifold,
    rng: &mut R,
) -> ConditionReport {
    let sorts = all_sorts(input);
    let dim = sample_dim(input).unwrap_or(manifold.dim());
    let rel = SystemRelation;
    let n = input.systems.len();

    let mut c4 = Tally::new("4", "dim F = |K| and the pairing matrix is non-degenerate");
    let mut valid = vec![true; n];
    for (i, s) in input.systems.iter().enumerate() {
        match s.degeneracy() {
            None => c4.pass(),
            Some(reason) => {
                valid[i] = false;
                let g = s.pairing_matrix().ok();
                let zero_rows = g.as_ref().map(Matrix::zero_rows).unwrap_or_default();
                let detail = if zero_rows.is_empty() {
                    reason
                } else {
                    format!("{reason}; zero rows {zero_rows:?}")
                };
                c4.fail(Some(i), None, detail, g.as_ref());
            }
        }
    }

    let c1a = check_config_generators(input, &sorts, dim, manifold);
    let c1b = check_momentum_generators(input, &sorts, dim, manifold);

    let mut c2 = Tally::new("2", "the coordinate map of K is onto R^N");
    let mut c3a = Tally::new("3a", "momentum operators act as derivations on cylindrical functions of K");
    let mut c3b = Tally::new("3b", "brackets of momentum and configurational d.o.f. are constants");
    for (i, s) in input.systems.iter().enumerate() {
        check_surjective(&mut c2, i, s, rng);
        check_leibniz(&mut c3a, i, s, rng);
        check_constant_brackets(&mut c3b, i, s);
    }

    let mut c5 = Tally::new("5", "equal reduced configuration spaces and equal F give systems ordered both ways");
    let mut c6a = Tally::new("6a", "if λ' ≥ λ then every d.o.f. of K is a combination of d.o.f. of K'");
    let mut c6b = Tally::new("6b", "if λ' ≥ λ then F is a subspace of F'");
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (a, b) = (&input.systems[i], &input.systems[j]);
            let geq = rel.geq(b, a).unwrap_or(false);
            if i < j && same_reduced_space(a, b) && same_span(a, b) {
                if geq && rel.geq(a, b).unwrap_or(false) {
                    c5.pass();
                } else {
                    c5.fail(Some(i), Some(j), "same K and F but not ordered both ways", None);
                }
            }
            if !geq {
                continue;
            }
            if expressible_all(a.kset().dofs(), b.kset().dofs()) {
                c6a.pass();
            } else {
                c6a.fail(Some(j), Some(i), "a d.o.f. of the lower system is not expressible", None);
            }
            if !valid[j] {
                c6b.fail(Some(j), Some(i), "upper system is degenerate", None);
                continue;
            }
            match contained_via_pairing(a.operators(), b) {
                Ok(true) => c6b.pass(),
                Ok(false) => c6b.fail(Some(j), Some(i), "an operator of the lower system leaves F'", None),
                Err(e) => c6b.fail(Some(j), Some(i), e.to_string(), None),
            }
        }
    }

    ConditionReport {
        systems: n,
        conditions: vec![
            c1a,
            c1b,
            c2.finish(),
            c3a.finish(),
            c3b.finish(),
            c4.finish(),
            c5.finish(),
            c6a.finish(),
            c6b.finish(),
        ],
    }
}

fn check_config_generators(
    input: &ConditionInput,
    sorts: &[TensorSort],
    dim: usize,
    manifold: &mut Manifold,
) -> ConditionResult {
    let mut t = Tally::new("1a", "every configurational d.o.f. is a cylindrical function of some K");
    for (g, kappa) in input.config_generators.iter().enumerate() {
        let sorts = match merge_sorts(sorts, std::slice::from_ref(kappa.sort())) {
            Ok(s) => s,
            Err(e) => {
                t.fail(None, None, format!("generator {g}: {e}"), None);
                continue;
            }
        };
        let frame = DiscreteFrame::standard(dim, [kappa.point().clone()]);
        let own = match FiniteSystem::dual(&frame, &sorts) {
            Ok(s) => s,
            Err(e) => {
                t.fail(None, None, format!("generator {g}: {e}"), None);
                continue;
            }
        };
        let host = match input.systems.first() {
            Some(first) => match systems::join(&own, first, manifold) {
                Ok(out) => out.system,
                Err(e) => {
                    t.fail(Some(0), None, format!("generator {g}: {e}"), None);
                    continue;
                }
            },
            None => own,
        };
        if dof::express(kappa, host.kset().dofs()).is_some() {
            t.pass();
        } else {
            t.fail(None, None, format!("generator {g} is not expressible in the constructed K"), None);
        }
    }
    t.finish()
}

fn check_momentum_generators(
    input: &ConditionInput,
    sorts: &[TensorSort],
    dim: usize,
    manifold: &mut Manifold,
) -> ConditionResult {
    let mut t = Tally::new("1b", "every momentum d.o.f. lies in the operator space of some system");
    for (g, phi) in input.momentum_generators.iter().enumerate() {
        let op = MomentumOperator::single(phi.clone());
        let outcome = merge_sorts(sorts, std::slice::from_ref(phi.sort())).and_then(|sorts| {
            systems::span_system(
                std::slice::from_ref(&op),
                &sorts,
                &DiscreteFrame::standard(dim, []),
                manifold,
            )
        });
        match outcome {
            Ok(out) => match systems::span_contains(out.system.operators(), std::slice::from_ref(&op)) {
                Ok(true) => t.pass(),
                Ok(false) => t.fail(None, None, format!("generator {g} missing from the built system"), None),
                Err(e) => t.fail(None, None, format!("generator {g}: {e}"), None),
            },
            Err(e) => t.fail(None, None, format!("generator {g}: {e}"), None),
        }
    }
    t.finish()
}

fn check_surjective<R: Rng + ?Sized>(t: &mut Tally, i: usize, s: &FiniteSystem, rng: &mut R) {
    for _ in 0..2 {
        let target: Vec<Q> = (0..s.kset().len()).map(|_| rational::random(rng, 9, 5)).collect();
        let ok = reconstruct_config(s.kset(), &target)
            .and_then(|q| s.kset().evaluate(&q))
            .map(|values| values == target);
        match ok {
            Ok(true) => t.pass(),
            Ok(false) => t.fail(Some(i), None, "reconstructed field misses the target values", None),
            Err(e) => t.fail(Some(i), None, e.to_string(), None),
        }
    }
}

fn check_leibniz<R: Rng + ?Sized>(t: &mut Tally, i: usize, s: &FiniteSystem, rng: &mut R) {
    let base = s.kset().dofs().to_vec();
    let nvars = base.len();
    let p1 = random::polynomial(rng, nvars, 2, 3);
    let p2 = random::polynomial(rng, nvars, 2, 3);
    let product = &p1 * &p2;
    let cyl = |p: &crate::polynomial::Polynomial| CylindricalFunction::new(base.clone(), p.clone());
    for op in s.operators() {
        let result = (|| {
            let a = apply_momentum_operator(op, &cyl(&p1)?)?;
            let b = apply_momentum_operator(op, &cyl(&p2)?)?;
            let ab = apply_momentum_operator(op, &cyl(&product)?)?;
            let expected = &(a.poly() * &p2) + &(&p1 * b.poly());
            Ok::<bool, crate::Error>(ab.poly() == &expected && ab.base() == base.as_slice())
        })();
        match result {
            Ok(true) => t.pass(),
            Ok(false) => t.fail(Some(i), None, "product rule violated", None),
            Err(e) => t.fail(Some(i), None, e.to_string(), None),
        }
    }
}

fn check_constant_brackets(t: &mut Tally, i: usize, s: &FiniteSystem) {
    for (b, op) in s.operators().iter().enumerate() {
        let f = Functional::MomentumCombination(op.clone());
        for (a, kappa) in s.kset().dofs().iter().enumerate() {
            let value = poisson_bracket(&f, &Functional::Config(kappa.clone()));
            let expected = pairing(op, kappa);
            match (value, expected) {
                (Ok(BracketValue::Constant(v)), Ok(e)) if v == e => t.pass(),
                (Ok(BracketValue::Constant(v)), Ok(e)) => t.fail(
                    Some(i),
                    None,
                    format!("operator {b} on d.o.f. {a}: bracket {v}, pairing {e}"),
                    None,
                ),
                (Ok(BracketValue::Polynomial(_)), _) => t.fail(
                    Some(i),
                    None,
                    format!("operator {b} on d.o.f. {a}: bracket depends on the phase point"),
                    None,
                ),
                (Err(e), _) | (_, Err(e)) => t.fail(Some(i), None, e.to_string(), None),
            }
        }
    }
}

fn expressible_all(targets: &[ConfigDof], dofs: &[ConfigDof]) -> bool {
    let mut all = dofs.to_vec();
    all.extend(targets.iter().cloned());
    let (m, _) = dof::functional_matrix(&all);
    let (base, _) = dof::functional_matrix(dofs);
    m.rank() == base.rank()
}

/// `Q_K = Q_K'`, decided as mutual linear expressibility.
fn same_reduced_space(a: &FiniteSystem, b: &FiniteSystem) -> bool {
    let sa: BTreeSet<&str> = a.sorts().iter().map(|s| s.label.as_str()).collect();
    let sb: BTreeSet<&str> = b.sorts().iter().map(|s| s.label.as_str()).collect();
    sa == sb
        && a.kset().len() == b.kset().len()
        && expressible_all(a.kset().dofs(), b.kset().dofs())
        && expressible_all(b.kset().dofs(), a.kset().dofs())
}

fn same_span(a: &FiniteSystem, b: &FiniteSystem) -> bool {
    systems::span_contains(a.operators(), b.operators()).unwrap_or(false)
        && systems::span_contains(b.operators(), a.operators()).unwrap_or(false)
}

/// Membership in `F̂'` through the pairing matrix of the upper system:
/// coefficients `c = (φ̂|K') G'^{-1}`, then the remainder must vanish on
/// every configurational d.o.f. over the supports.
pub fn contained_via_pairing(ops: &[MomentumOperator], upper: &FiniteSystem) -> crate::Result<bool> {
    let g = upper.pairing_matrix()?;
    let inv = g
        .inverse()
        .ok_or_else(|| crate::Error::Degenerate("singular pairing matrix".into()))?;
    let restricted = systems::pairing_matrix(ops, upper.kset())?;
    let coefs = restricted.mul(&inv);
    for (r, op) in ops.iter().enumerate() {
        let combo = MomentumOperator::combination(coefs.row(r), upper.operators());
        let rest = op.add(&combo.scale(&-Q::from_integer(1.into())));
        if rest.is_zero() {
            continue;
        }
        let mut extra = op.support();
        extra.extend(upper.frame().points());
        let sig = systems::signature_matrix(&[rest], &extra)?;
        if !sig.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointId;

    #[test]
    fn dual_fragment_passes_and_defects_are_caught() {
        let mut rng = random::seeded(3);
        let pool = random::point_pool(4);
        let mut manifold = random::pool_manifold(2, &pool);
        let sorts = [TensorSort::symmetric_covariant_pair("q")];
        let a = FiniteSystem::dual(&DiscreteFrame::standard(2, [pool[0].clone()]), &sorts).unwrap();
        let b = FiniteSystem::dual(&DiscreteFrame::standard(2, [pool[0].clone(), pool[1].clone()]), &sorts)
            .unwrap();
        let input = ConditionInput {
            systems: vec![a.clone(), b],
            config_generators: vec![random::config_dof(&mut rng, &sorts[0], 2, PointId::from("p3"))],
            momentum_generators: vec![random::momentum_dof(&mut rng, &sorts[0], 2, &[pool[2].clone()], &pool)],
        };
        let report = check_conditions(&input, &mut manifold, &mut rng);
        assert!(report.all_passed(), "{report:#?}");
        assert!(report.get("6a").unwrap().checked > 0);

        let mut ops = a.operators().to_vec();
        ops.pop();
        let broken = FiniteSystem::unchecked(ops, a.kset().clone());
        let input = ConditionInput {
            systems: vec![broken],
            ..Default::default()
        };
        let report = check_conditions(&input, &mut manifold, &mut rng);
        assert!(!report.get("4").unwrap().passed);
    }
}
