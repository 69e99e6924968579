//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_traits::Zero;
use projstate::coupling::{
    self, check_flip_identity, combine_families, in_theta, random_graph, random_surfaces, theta_cover,
    theta_join, CoupledSystem, LqgSystem,
};
use projstate::dof::oracle::{lift, poisson_bracket, Functional};
use projstate::dof::{self, apply_momentum_operator, pairing, ConfigDof, CylindricalFunction, MomentumDof, MomentumOperator};
use projstate::frames::{build_k_gamma, DiscreteFrame};
use projstate::geometry::{standard_basis, DiscreteMeasure, OneForm, PointId, TensorSort};
use projstate::hilbert::{
    check_inductive, check_projective, chain_shape, generate_family, random_density, random_shape, random_unitary,
    verify_family, AlgebraState, FactorizedFamily, Mode,
};
use projstate::random::{self, seeded, SeededRng};
use projstate::rational::{self, frac, Q};
use projstate::systems::{dual_operators, join, pairing_matrix, FiniteSystem, SystemRelation};
use projstate::systems::conditions::{check_conditions, ConditionInput};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Largest entrywise deviation accepted for unitary families and their
/// embeddings, pull-backs and flips.
const HILBERT_TOLERANCE: f64 = 1e-12;

const RANDOM_PAIRINGS: usize = 1000;
const DUAL_FRAMES: usize = 100;
const JOIN_PAIRS: usize = 200;
const FRAGMENT_SYSTEMS: usize = 20;
const FAMILIES: usize = 50;
const FLIP_SAMPLES: usize = 1000;
const THETA_PAIRS: usize = 100;
const LEIBNIZ_INSTANCES: usize = 500;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn metric() -> TensorSort {
    TensorSort::symmetric_covariant_pair("q")
}

fn mixed() -> TensorSort {
    TensorSort::new("E", 1, 1)
}

fn scalar() -> TensorSort {
    TensorSort::scalar("phi")
}

fn all_sorts() -> Vec<TensorSort> {
    vec![metric(), mixed(), scalar()]
}

/// Non-empty random subset of the three sorts, in a fixed order.
fn sort_subset(rng: &mut SeededRng) -> Vec<TensorSort> {
    loop {
        let s: Vec<TensorSort> = all_sorts().into_iter().filter(|_| rng.random_bool(0.5)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

fn pid(s: &str) -> PointId {
    PointId::from(s)
}

// ---------------------------------------------------------------------------
// Independent order oracle. Frames: the configurational d.o.f. of the lower
// system add no rank to those of the upper one. Operators: with
// `C = G_low · G_up⁻¹` on the upper d.o.f., the lower operators must agree with
// `C · F_up` on the standard d.o.f. of every touched point.

fn probe_points(ops: &[MomentumOperator], extra: &BTreeSet<PointId>) -> BTreeSet<PointId> {
    let mut out = extra.clone();
    for op in ops {
        out.extend(op.footprint());
    }
    out
}

fn operators_in_span(lower: &[MomentumOperator], upper: &FiniteSystem) -> Result<bool, String> {
    let k = upper.kset();
    let g_up = pairing_matrix(upper.operators(), k).map_err(err)?;
    let Some(inv) = g_up.inverse() else {
        return Ok(false);
    };
    let coefs = pairing_matrix(lower, k).map_err(err)?.mul(&inv);
    let mut ops = upper.operators().to_vec();
    ops.extend(lower.iter().cloned());
    let points = probe_points(&ops, &upper.frame().points());
    let probe = build_k_gamma(&DiscreteFrame::standard(upper.frame().dim(), points), upper.sorts()).map_err(err)?;
    let on_probe = pairing_matrix(upper.operators(), &probe).map_err(err)?;
    Ok(coefs.mul(&on_probe) == pairing_matrix(lower, &probe).map_err(err)?)
}

fn oracle_geq(upper: &FiniteSystem, lower: &FiniteSystem) -> Result<bool, String> {
    if !lower.sorts().iter().all(|s| upper.sorts().contains(s)) {
        return Ok(false);
    }
    if !lower.frame().points().is_subset(&upper.frame().points()) {
        return Ok(false);
    }
    let mut both = upper.kset().dofs().to_vec();
    both.extend(lower.kset().dofs().iter().cloned());
    if dof::functional_matrix(&both).0.rank() != dof::functional_matrix(upper.kset().dofs()).0.rank() {
        return Ok(false);
    }
    operators_in_span(lower.operators(), upper)
}

fn lqg_contains(upper: &LqgSystem, lower: &LqgSystem) -> bool {
    lower.graph.vertices().is_subset(upper.graph.vertices())
        && lower.graph.edges().is_subset(upper.graph.edges())
        && lower.surfaces.surfaces().is_subset(upper.surfaces.surfaces())
}

// ---------------------------------------------------------------------------

fn pairing_formula() -> Check {
    let y = pid("y");
    let e = standard_basis(3);
    let fixture = MomentumDof::new(
        metric(),
        3,
        vec![],
        vec![OneForm::at(y.clone(), e[0].clone()), OneForm::at(y.clone(), e[1].clone())],
        DiscreteMeasure::unit([&y]),
    )
    .map_err(err)?;
    let k12 = ConfigDof::new(metric(), 3, y.clone(), vec![e[0].clone(), e[1].clone()]).map_err(err)?;
    let fixed = pairing(&MomentumOperator::single(fixture), &k12).map_err(err)?;
    ensure(fixed == frac(-1, 2), || format!("dual configuration pairs to {fixed}"))?;

    let mut rng = seeded(101);
    for i in 0..RANDOM_PAIRINGS {
        let w = random::nonzero_vector(&mut rng, 3);
        let w2 = random::nonzero_vector(&mut rng, 3);
        let a = rational::random_vector(&mut rng, 3);
        let b = rational::random_vector(&mut rng, 3);
        let weight = frac(rng.random_range(1..9), rng.random_range(1..5));
        let measure = DiscreteMeasure::new(BTreeMap::from([(y.clone(), weight)])).map_err(err)?;
        let phi = MomentumDof::new(
            metric(),
            3,
            vec![],
            vec![OneForm::at(y.clone(), w.clone()), OneForm::at(y.clone(), w2.clone())],
            measure,
        )
        .map_err(err)?;
        let kappa = ConfigDof::new(metric(), 3, y.clone(), vec![a.clone(), b.clone()]).map_err(err)?;
        let op = MomentumOperator::single(phi);
        let value = pairing(&op, &kappa).map_err(err)?;
        let bracket = poisson_bracket(&Functional::MomentumCombination(op), &Functional::Config(kappa)).map_err(err)?;
        ensure(bracket.as_constant() == Some(&value), || {
            format!("instance {i}: pairing {value} but bracket {bracket:?}")
        })?;
        let by_hand = -(rational::dot(&w, &a) * rational::dot(&w2, &b) + rational::dot(&w2, &a) * rational::dot(&w, &b))
            / Q::from_integer(2.into());
        ensure(value == by_hand, || format!("instance {i}: pairing {value}, symmetrized product {by_hand}"))?;
    }
    Ok(format!("fixture -1/2, {RANDOM_PAIRINGS} random instances equal the bracket"))
}

fn dual_identity() -> Check {
    let mut rng = seeded(202);
    let pool = random::point_pool(8);
    let sorts = [metric()];
    let mut total = 0;
    for i in 0..DUAL_FRAMES {
        let frame = random::frame_from_pool(&mut rng, 3, &pool, 8);
        let n = frame.len();
        let k = build_k_gamma(&frame, &sorts).map_err(err)?;
        ensure(k.len() == 6 * n, || format!("frame {i}: |K| = {} for {n} points", k.len()))?;
        let ops = dual_operators(&frame, &sorts).map_err(err)?;
        let g = pairing_matrix(&ops, &k).map_err(err)?;
        ensure(g.is_identity(), || format!("frame {i}: pairing matrix is not the identity"))?;
        total += n;
    }
    Ok(format!("{DUAL_FRAMES} frames, {total} points, G = 1 and |K| = 6N throughout"))
}

fn joins() -> Check {
    let mut rng = seeded(303);
    let pool = random::point_pool(6);
    let mut manifold = random::pool_manifold(2, &pool);
    for i in 0..JOIN_PAIRS {
        let sa = sort_subset(&mut rng);
        let sb = sort_subset(&mut rng);
        let ka = random::random_kind(&mut rng);
        let kb = random::random_kind(&mut rng);
        let a = random::system(&mut rng, ka, &sa, 2, &pool, 3).map_err(err)?;
        let b = random::system(&mut rng, kb, &sb, 2, &pool, 3).map_err(err)?;
        let out = join(&a, &b, &mut manifold).map_err(err)?;
        let j = &out.system;
        ensure(oracle_geq(j, &a)? && oracle_geq(j, &b)?, || format!("pair {i}: join does not dominate"))?;
        ensure(
            SystemRelation.geq(j, &a).map_err(err)? && SystemRelation.geq(j, &b).map_err(err)?,
            || format!("pair {i}: library order disagrees with the oracle"),
        )?;
        let det = j.pairing_matrix().map_err(err)?.determinant();
        ensure(!det.is_zero(), || format!("pair {i}: singular pairing matrix"))?;
        let r = &out.reduced;
        ensure(r.rows() == out.rank, || format!("pair {i}: reduced matrix has {} rows, rank {}", r.rows(), out.rank))?;
        ensure(r.block(0..out.rank, 0..out.rank).is_identity(), || {
            format!("pair {i}: reduced matrix lacks a leading identity block")
        })?;
    }
    Ok(format!("{JOIN_PAIRS} joins dominate both inputs, det G != 0, reduced form [1 | G']"))
}

fn fragment(rng: &mut SeededRng) -> Result<(ConditionInput, projstate::geometry::Manifold), String> {
    let pool = random::point_pool(5);
    let mut manifold = random::pool_manifold(2, &pool);
    let sorts = all_sorts();
    let mut systems_list: Vec<FiniteSystem> = Vec::new();
    // Each sort alone first, then random subsets, then joins for ordered pairs.
    for s in &sorts {
        let kind = random::random_kind(rng);
        systems_list.push(random::system(rng, kind, std::slice::from_ref(s), 2, &pool, 2).map_err(err)?);
    }
    while systems_list.len() < FRAGMENT_SYSTEMS - 6 {
        let s = sort_subset(rng);
        let kind = random::random_kind(rng);
        systems_list.push(random::system(rng, kind, &s, 2, &pool, 2).map_err(err)?);
    }
    while systems_list.len() < FRAGMENT_SYSTEMS {
        let a = systems_list.choose(rng).unwrap().clone();
        let b = systems_list.choose(rng).unwrap().clone();
        systems_list.push(join(&a, &b, &mut manifold).map_err(err)?.system);
    }
    let config_generators = (0..6)
        .map(|_| {
            let s = sorts.choose(rng).unwrap();
            let at = pool.choose(rng).unwrap().clone();
            random::config_dof(rng, s, 2, at)
        })
        .collect();
    let momentum_generators = (0..6)
        .map(|_| {
            let s = sorts.choose(rng).unwrap();
            let at = pool.choose(rng).unwrap().clone();
            random::momentum_dof(rng, s, 2, &[at], &pool)
        })
        .collect();
    Ok((
        ConditionInput {
            systems: systems_list,
            config_generators,
            momentum_generators,
        },
        manifold,
    ))
}

fn conditions() -> Check {
    let mut rng = seeded(404);
    let (input, mut manifold) = fragment(&mut rng)?;
    let labels: BTreeSet<String> = input.systems.iter().flat_map(|s| s.sorts().iter().map(|t| t.label.clone())).collect();
    ensure(labels.len() >= 3 && labels.contains("E"), || format!("fragment covers only {labels:?}"))?;
    let report = check_conditions(&input, &mut manifold, &mut rng);
    for c in &report.conditions {
        ensure(c.passed, || format!("condition {} failed: {:?}", c.name, c.witness))?;
        ensure(c.checked > 0, || format!("condition {} examined nothing", c.name))?;
    }

    // Zero row: the first operator is moved off the frame.
    let frame = DiscreteFrame::standard(2, [pid("p0")]);
    let sorts = [metric(), mixed()];
    let base = FiniteSystem::dual(&frame, &sorts).map_err(err)?;
    let mut ops = base.operators().to_vec();
    ops[0] = MomentumOperator::single(random::momentum_dof(&mut rng, &metric(), 2, &[pid("p4")], &[]));
    let zero_row = FiniteSystem::unchecked(ops, base.kset().clone());
    let mut missing_ops = base.operators().to_vec();
    missing_ops.pop();
    let missing = FiniteSystem::unchecked(missing_ops, base.kset().clone());
    let mut detected = Vec::new();
    for (name, broken) in [("zero row", zero_row), ("missing operator", missing)] {
        let mut systems_list = input.systems.clone();
        let at = systems_list.len();
        systems_list.push(broken);
        let defective = ConditionInput {
            systems: systems_list,
            ..Default::default()
        };
        let report = check_conditions(&defective, &mut manifold, &mut rng);
        let c4 = report.get("4").ok_or("no non-degeneracy condition")?;
        let witness = c4.witness.as_ref().ok_or_else(|| format!("{name} not detected"))?;
        ensure(witness.system == Some(at), || format!("{name}: witness names {:?}", witness.system))?;
        if name == "zero row" {
            ensure(witness.detail.contains("zero rows [0]"), || format!("zero row witness: {}", witness.detail))?;
        }
        detected.push(name);
    }
    Ok(format!(
        "{} systems over {} sorts pass every condition; detected {}",
        report.systems,
        labels.len(),
        detected.join(" and ")
    ))
}

fn full_family_suite(fam: &FactorizedFamily, rng: &mut SeededRng) -> Result<f64, String> {
    let v = verify_family(fam).map_err(err)?;
    let ind = check_inductive(fam).map_err(err)?;
    let top = fam.index().greatest();
    let state = AlgebraState::new(random_density(rng, fam.dim(top))).map_err(err)?;
    let (_, proj) = check_projective(fam, &state, rng).map_err(err)?;
    let worst = v
        .max_deviation
        .max(ind.max_deviation)
        .max(proj.max_net_deviation)
        .max(proj.max_composition_deviation)
        .max(proj.max_trace_deviation);
    ensure(v.passed && ind.passed && proj.passed && worst <= HILBERT_TOLERANCE, || {
        format!("family checks fail: {:?} {:?} {:?}", v.failures, ind.failures, proj.failures)
    })?;
    Ok(worst)
}

fn corrupt_triple(fam: &mut FactorizedFamily, rng: &mut SeededRng) -> Option<(usize, usize, usize)> {
    let (t, m, l) = fam.index().triples().into_iter().find(|&(t, m, l)| t != m && m != l)?;
    let bad = random_unitary(rng, fam.phi3(t, m, l).nrows()) * fam.phi3(t, m, l);
    fam.replace_phi3(t, m, l, bad);
    Some((t, m, l))
}

fn families() -> Check {
    let mut rng = seeded(505);
    let mut worst: f64 = 0.0;
    let mut sizes = 0;
    for i in 0..FAMILIES {
        let shape = random_shape(&mut rng, 10, 16);
        let mode = if i % 5 == 4 { Mode::Exact } else { Mode::Float };
        let fam = generate_family(&shape, mode, &mut rng).map_err(err)?;
        ensure(fam.dims().iter().all(|&d| d <= 16), || format!("family {i}: dimension above 16"))?;
        sizes += fam.index().size();
        worst = worst.max(full_family_suite(&fam, &mut rng).map_err(|e| format!("family {i}: {e}"))?);
    }
    let mut fam = generate_family(&chain_shape(&[2, 2, 2]), Mode::Float, &mut rng).map_err(err)?;
    let at = corrupt_triple(&mut fam, &mut rng).ok_or("chain has no proper triple")?;
    let report = verify_family(&fam).map_err(err)?;
    let caught = report
        .failures
        .iter()
        .any(|f| f.location == vec![at.0, at.1, at.2]);
    ensure(!report.passed && caught, || format!("corrupted triple {at:?} not reported"))?;
    Ok(format!(
        "{FAMILIES} families ({sizes} elements) within {worst:.2e}; corrupted triple {at:?} detected"
    ))
}

fn combination() -> Check {
    let mut rng = seeded(606);
    let mut worst: f64 = 0.0;
    let mut members_total = 0;
    for _ in 0..3 {
        let a = generate_family(&random_shape(&mut rng, 4, 6), Mode::Float, &mut rng).map_err(err)?;
        let b = generate_family(&random_shape(&mut rng, 4, 6), Mode::Float, &mut rng).map_err(err)?;
        let members: Vec<(usize, usize)> = (0..a.index().size())
            .flat_map(|x| (0..b.index().size()).map(move |y| (x, y)))
            .collect();
        members_total += members.len();
        let c = combine_families(&a, &b, &members).map_err(err)?;
        worst = worst.max(full_family_suite(&c.family, &mut rng)?);
        let flip = check_flip_identity(&c, &a, &b, FLIP_SAMPLES, &mut rng).map_err(err)?;
        ensure(flip.passed && flip.max_deviation <= HILBERT_TOLERANCE, || {
            format!("flip identity off by {:.2e}", flip.max_deviation)
        })?;
        worst = worst.max(flip.max_deviation);
    }
    Ok(format!(
        "3 combined families ({members_total} members) pass the family suite and {FLIP_SAMPLES} flip samples each, max {worst:.2e}"
    ))
}

fn random_coupled(rng: &mut SeededRng, pool: &[PointId]) -> Result<CoupledSystem, String> {
    let sorts = sort_subset(rng);
    let kind = random::random_kind(rng);
    let sys = random::system(rng, kind, &sorts, 2, pool, 3).map_err(err)?;
    let graph = random_graph(rng, &sys.frame().points());
    let lqg = LqgSystem::new(graph, random_surfaces(rng, pool, 2));
    CoupledSystem::new(sys, lqg).map_err(err)
}

fn check_cover(
    result: &coupling::ThetaJoin,
    inputs: &[(&FiniteSystem, &LqgSystem)],
    what: &str,
) -> Result<(), String> {
    let (t, l) = (result.coupled.tensor(), result.coupled.lqg());
    ensure(in_theta(t, l), || format!("{what}: result outside the coupling set"))?;
    ensure(t.frame().points() == *l.graph.vertices(), || format!("{what}: frame points differ from vertices"))?;
    ensure(t.is_nondegenerate(), || format!("{what}: degenerate tensor side"))?;
    for (sys, lqg) in inputs {
        ensure(oracle_geq(t, sys)? && lqg_contains(l, lqg), || format!("{what}: result does not dominate"))?;
    }
    let covered: BTreeSet<PointId> = inputs.iter().flat_map(|(s, _)| s.frame().points()).collect();
    ensure(covered.len() < t.frame().points().len(), || format!("{what}: no proper vertex extension"))?;
    Ok(())
}

fn theta() -> Check {
    let mut rng = seeded(707);
    let pool = random::point_pool(6);
    let far: Vec<PointId> = (0..4).map(|i| pid(&format!("v{i}"))).collect();
    let mut all = pool.clone();
    all.extend(far.iter().cloned());
    let mut manifold = random::pool_manifold(2, &all);
    for i in 0..THETA_PAIRS {
        let a = random_coupled(&mut rng, &pool)?;
        let b = random_coupled(&mut rng, &pool)?;
        let out = theta_join(&a, &b, &mut manifold).map_err(err)?;
        check_cover(&out, &[(a.tensor(), a.lqg()), (b.tensor(), b.lqg())], &format!("pair {i}"))?;
    }
    let mut outside = 0;
    for i in 0..THETA_PAIRS {
        let sorts = sort_subset(&mut rng);
        let kind = random::random_kind(&mut rng);
        let sys = random::system(&mut rng, kind, &sorts, 2, &pool, 3).map_err(err)?;
        let vertices = random::subset(&mut rng, &all, 4);
        let lqg = LqgSystem::new(random_graph(&mut rng, &vertices), random_surfaces(&mut rng, &all, 2));
        if in_theta(&sys, &lqg) {
            continue;
        }
        outside += 1;
        let out = theta_cover(&[(&sys, &lqg)], &mut manifold).map_err(err)?;
        check_cover(&out, &[(&sys, &lqg)], &format!("element {i}"))?;
    }
    ensure(outside >= THETA_PAIRS / 2, || format!("only {outside} elements fell outside the coupling set"))?;
    Ok(format!(
        "{THETA_PAIRS} joins dominate both inputs inside the coupling set; {outside} outside elements covered"
    ))
}

fn leibniz() -> Check {
    let mut rng = seeded(808);
    let pool = random::point_pool(4);
    let sorts = all_sorts();
    for i in 0..LEIBNIZ_INSTANCES {
        let n = rng.random_range(1..=4);
        let base: Vec<ConfigDof> = (0..n)
            .map(|_| {
                let s = sorts.choose(&mut rng).unwrap();
                let at = pool.choose(&mut rng).unwrap().clone();
                random::config_dof(&mut rng, s, 2, at)
            })
            .collect();
        let p = random::polynomial(&mut rng, n, 3, 4);
        let p2 = random::polynomial(&mut rng, n, 3, 4);
        let psi = CylindricalFunction::new(base.clone(), p.clone()).map_err(err)?;
        let psi2 = CylindricalFunction::new(base.clone(), p2.clone()).map_err(err)?;
        let support = random::subset(&mut rng, &pool, 2).into_iter().collect::<Vec<_>>();
        let op = random::operator(&mut rng, &sorts, 2, &support, &pool);

        let direct = apply_momentum_operator(&op, &psi).map_err(err)?;
        let bracket = poisson_bracket(
            &Functional::MomentumCombination(op.clone()),
            &Functional::Cylindrical(psi.clone()),
        )
        .map_err(err)?;
        let lifted = lift(&Functional::Cylindrical(direct.clone())).map_err(err)?;
        ensure(lifted == bracket.into_phase(), || format!("instance {i}: action differs from the bracket"))?;

        let product = CylindricalFunction::new(base.clone(), &p * &p2).map_err(err)?;
        let lhs = apply_momentum_operator(&op, &product).map_err(err)?;
        let d2 = apply_momentum_operator(&op, &psi2).map_err(err)?;
        let rhs = &(direct.poly() * &p2) + &(&p * d2.poly());
        ensure(lhs.poly() == &rhs, || format!("instance {i}: product rule fails"))?;
    }
    Ok(format!("{LEIBNIZ_INSTANCES} instances match the bracket and the product rule"))
}

/// Name, time budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Check);

fn main() {
    let criteria: [Criterion; 8] = [
        ("pairing formula and bracket oracle", 5, pairing_formula),
        ("dual operators give identity pairing", 5, dual_identity),
        ("constructive join", 30, joins),
        ("structural conditions and defect witnesses", 30, conditions),
        ("factorized families, embeddings, pull-backs", 60, families),
        ("combined families and flip identity", 30, combination),
        ("coupling set joins and cofinality", 30, theta),
        ("momentum action as a derivation", 10, leibniz),
    ];
    let mut failed = 0;
    for (n, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let budget = Duration::from_secs(*budget);
        let (ok, detail) = match result {
            Ok(detail) if elapsed <= budget => (true, detail),
            Ok(detail) => (false, format!("{detail}; over time budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {detail} [{:.2}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            n + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
