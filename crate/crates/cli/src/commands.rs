use projstate::coupling::{self, in_theta, product_geq, theta_cover, tensor_points, CombinedFamily};
use projstate::dof::oracle::{lift, poisson_bracket, BracketValue, Functional, PhaseCoord, PhasePolynomial};
use projstate::dof::{apply_momentum_operator, pairing, MomentumOperator};
use projstate::hilbert::{
    check_inductive, check_projective, generate_family, random_density, verify_family, AlgebraState,
    FactorizedFamily,
};
use projstate::linalg::Matrix;
use projstate::random::{seeded, SeededRng};
use projstate::rational::{self, Q};
use projstate::scenario::{system_doc, Model};
use projstate::systems::conditions::{check_conditions, matrix_strings, ConditionInput};
use projstate::systems::{self, SystemRelation};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{Command, Outcome, Settings};

type Run = Result<Outcome, String>;

const FLIP_SAMPLES: usize = 200;

pub fn run(command: Command, model: &Model, settings: &Settings) -> Run {
    match command {
        Command::Pairing => pairing_cmd(model),
        Command::Join => join_cmd(model, settings),
        Command::CheckConditions => conditions_cmd(model, settings),
        Command::VerifyFamily => verify_cmd(model, settings),
        Command::GenerateFamily => generate_cmd(model, settings),
        Command::Combine => combine_cmd(model, settings),
        Command::ThetaJoin => theta_cmd(model, settings),
        Command::Oracle => oracle_cmd(model),
    }
}

/// Independent stream per case so results do not depend on `--parallel`.
fn case_rng(seed: u64, case: usize) -> SeededRng {
    seeded(seed.wrapping_add((case as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn map_cases<T: Send>(n: usize, parallel: bool, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn text(q: &Q) -> String {
    rational::format(q)
}

fn err(e: projstate::Error) -> String {
    e.to_string()
}

fn need(count: usize, what: &str) -> Result<(), String> {
    if count == 0 {
        return Err(format!("scenario defines no {what}"));
    }
    Ok(())
}

/// One case: passed, number of checks, worst deviation, JSON detail.
type Case = (bool, usize, Option<f64>, Value);

fn collect(cases: Vec<Result<Case, String>>) -> Run {
    let mut passed = true;
    let mut checks = 0;
    let mut max_dev: Option<f64> = None;
    let mut results = Vec::new();
    for c in cases {
        let (p, n, d, v) = c?;
        passed &= p;
        checks += n;
        if let Some(d) = d {
            max_dev = Some(max_dev.map_or(d, |m| m.max(d)));
        }
        results.push(v);
    }
    Ok(Outcome {
        passed,
        checks,
        max_deviation: max_dev,
        results: Value::Array(results),
    })
}

fn pairing_cmd(model: &Model) -> Run {
    need(model.pairings.len() + model.systems.len(), "pairings or systems")?;
    let mut cases = Vec::new();
    for case in &model.pairings {
        let value = pairing(&case.operator, &case.dof).map_err(err)?;
        let bracket = poisson_bracket(
            &Functional::MomentumCombination(case.operator.clone()),
            &Functional::Config(case.dof.clone()),
        );
        let (oracle, agrees) = match bracket {
            Ok(BracketValue::Constant(c)) => (json!(text(&c)), c == value),
            Ok(BracketValue::Polynomial(_)) => (json!("non-constant"), false),
            Err(e) => (json!({ "error": e.to_string() }), false),
        };
        cases.push(Ok((
            agrees,
            1,
            None,
            json!({
                "operator": case.operator_id,
                "dof": case.dof_id,
                "value": text(&value),
                "oracle": oracle,
                "agrees": agrees,
            }),
        )));
    }
    for (id, sys) in &model.systems {
        let g = sys.pairing_matrix().map_err(err)?;
        let nondegenerate = sys.is_nondegenerate();
        cases.push(Ok((
            true,
            0,
            None,
            json!({
                "system": id,
                "matrix": matrix_strings(&g),
                "nondegenerate": nondegenerate,
            }),
        )));
    }
    collect(cases)
}

/// `[𝟙 | G']` in the leading `rank` columns.
fn has_identity_block(m: &Matrix, rank: usize) -> bool {
    if m.rows() != rank || m.cols() < rank {
        return false;
    }
    (0..rank).all(|i| (0..rank).all(|j| m[(i, j)] == if i == j { rational::one() } else { rational::zero() }))
}

fn join_cmd(model: &Model, settings: &Settings) -> Run {
    need(model.joins.len(), "joins")?;
    let cases = map_cases(model.joins.len(), settings.parallel, |c| {
        let (i, j) = model.joins[c];
        let (a_id, a) = &model.systems[i];
        let (b_id, b) = &model.systems[j];
        let mut manifold = model.manifold.clone();
        let out = systems::join(a, b, &mut manifold).map_err(err)?;
        let geq_a = SystemRelation.geq(&out.system, a).map_err(err)?;
        let geq_b = SystemRelation.geq(&out.system, b).map_err(err)?;
        let nondegenerate = out.system.is_nondegenerate();
        let block = has_identity_block(&out.reduced, out.rank);
        let passed = geq_a && geq_b && nondegenerate && block;
        Ok((
            passed,
            4,
            None,
            json!({
                "a": a_id,
                "b": b_id,
                "rank": out.rank,
                "fresh_points": out.fresh_points.iter().map(|p| p.0.clone()).collect::<Vec<_>>(),
                "independence_points": out.independence_points.iter().map(|p| p.0.clone()).collect::<Vec<_>>(),
                "geq_a": geq_a,
                "geq_b": geq_b,
                "nondegenerate": nondegenerate,
                "identity_block": block,
                "permutation": out.permutation,
                "basis_change": matrix_strings(&out.basis_change),
                "reduced": matrix_strings(&out.reduced),
                "pairing_matrix": matrix_strings(&out.block),
                "system": system_doc(&out.system),
            }),
        ))
    });
    collect(cases)
}

fn conditions_cmd(model: &Model, settings: &Settings) -> Run {
    need(model.systems.len(), "systems")?;
    let input = ConditionInput {
        systems: model.systems.iter().map(|(_, s)| s.clone()).collect(),
        config_generators: model.config_dofs.values().cloned().collect(),
        momentum_generators: model.momentum_dofs.values().cloned().collect(),
    };
    let mut manifold = model.manifold.clone();
    let report = check_conditions(&input, &mut manifold, &mut seeded(settings.seed));
    let checks = report.conditions.iter().map(|c| c.checked).sum();
    let ids: Vec<&str> = model.systems.iter().map(|(id, _)| id.as_str()).collect();
    Ok(Outcome {
        passed: report.all_passed(),
        checks,
        max_deviation: None,
        results: json!({ "system_ids": ids, "report": report }),
    })
}

fn family(model: &Model, settings: &Settings, index: usize) -> Result<FactorizedFamily, String> {
    let mut rng = case_rng(settings.seed, index);
    generate_family(&model.families[index].1, settings.mode, &mut rng).map_err(err)
}

fn verify_cmd(model: &Model, settings: &Settings) -> Run {
    need(model.families.len(), "families")?;
    let cases = map_cases(model.families.len(), settings.parallel, |i| {
        let fam = family(model, settings, i)?;
        let mut rng = case_rng(settings.seed ^ 0x5bd1_e995, i);
        let verify = verify_family(&fam).map_err(err)?;
        let inductive = check_inductive(&fam).map_err(err)?;
        let top = fam.index().greatest();
        let state = AlgebraState::new(random_density(&mut rng, fam.dim(top))).map_err(err)?;
        let (_, projective) = check_projective(&fam, &state, &mut rng).map_err(err)?;
        let dev = verify
            .max_deviation
            .max(inductive.max_deviation)
            .max(projective.max_net_deviation)
            .max(projective.max_composition_deviation);
        let passed = verify.passed && inductive.passed && projective.passed;
        let checks = verify.pairs + verify.triples + inductive.triples + fam.index().pairs().len();
        Ok((
            passed,
            checks,
            Some(dev),
            json!({
                "family": model.families[i].0,
                "dims": fam.dims(),
                "verify": verify,
                "inductive": inductive,
                "projective": projective,
            }),
        ))
    });
    collect(cases)
}

fn generate_cmd(model: &Model, settings: &Settings) -> Run {
    need(model.families.len(), "families")?;
    let cases = map_cases(model.families.len(), settings.parallel, |i| {
        let fam = family(model, settings, i)?;
        let verify = verify_family(&fam).map_err(err)?;
        Ok((
            verify.passed,
            verify.pairs + verify.triples,
            Some(verify.max_deviation),
            json!({
                "family": model.families[i].0,
                "doc": fam.to_doc(),
                "verify": verify,
            }),
        ))
    });
    collect(cases)
}

fn combine_cmd(model: &Model, settings: &Settings) -> Run {
    need(model.combinations.len(), "combinations")?;
    let cases = map_cases(model.combinations.len(), settings.parallel, |c| {
        let case = &model.combinations[c];
        let a = family(model, settings, case.a)?;
        let b = family(model, settings, case.b)?;
        let combined: CombinedFamily = coupling::combine_families(&a, &b, &case.members).map_err(err)?;
        let verify = verify_family(&combined.family).map_err(err)?;
        let inductive = check_inductive(&combined.family).map_err(err)?;
        let mut rng = case_rng(settings.seed ^ 0xc0ff_ee00, c);
        let flip = coupling::check_flip_identity(&combined, &a, &b, FLIP_SAMPLES, &mut rng).map_err(err)?;
        let dev = verify.max_deviation.max(inductive.max_deviation).max(flip.max_deviation);
        Ok((
            verify.passed && inductive.passed && flip.passed,
            verify.pairs + verify.triples + inductive.triples + flip.samples,
            Some(dev),
            json!({
                "a": model.families[case.a].0,
                "b": model.families[case.b].0,
                "members": case.members,
                "dims": combined.family.dims(),
                "verify": verify,
                "inductive": inductive,
                "flip": flip,
            }),
        ))
    });
    collect(cases)
}

fn coupled_json(c: &coupling::ThetaJoin) -> Value {
    let lqg = c.coupled.lqg();
    json!({
        "vertices": lqg.graph.vertices().iter().map(|p| p.0.clone()).collect::<Vec<_>>(),
        "edges": lqg.graph.edges().iter().map(|e| [e.a.0.clone(), e.b.0.clone(), e.label.clone()]).collect::<Vec<_>>(),
        "surfaces": lqg.surfaces.surfaces().iter().map(|s| s.id.clone()).collect::<Vec<_>>(),
        "fresh_vertex": c.fresh_vertex.0,
        "new_vertices": c.new_vertices.iter().map(|p| p.0.clone()).collect::<Vec<_>>(),
        "system": system_doc(c.coupled.tensor()),
    })
}

fn theta_cmd(model: &Model, settings: &Settings) -> Run {
    need(model.theta_joins.len() + model.coupled.len(), "theta joins or coupled systems")?;
    let element = |k: usize| {
        let (id, sys, lqg) = &model.coupled[k];
        (id.as_str(), &model.systems[*sys].1, lqg)
    };
    // Joins of listed pairs, then a dominating Θ-member for every element
    // outside Θ.
    let outside: Vec<usize> = (0..model.coupled.len())
        .filter(|&k| {
            let (_, s, l) = element(k);
            !in_theta(s, l)
        })
        .collect();
    let total = model.theta_joins.len() + outside.len();
    let cases = map_cases(total, settings.parallel, |c| {
        let members: Vec<usize> = if c < model.theta_joins.len() {
            let (i, j) = model.theta_joins[c];
            vec![i, j]
        } else {
            vec![outside[c - model.theta_joins.len()]]
        };
        let inputs: Vec<_> = members.iter().map(|&k| element(k)).collect();
        let pairs: Vec<_> = inputs.iter().map(|(_, s, l)| (*s, *l)).collect();
        let mut manifold = model.manifold.clone();
        let out = theta_cover(&pairs, &mut manifold).map_err(err)?;
        let tensor = out.coupled.tensor();
        let lqg = out.coupled.lqg();
        let member = in_theta(tensor, lqg);
        let mut dominates = Vec::new();
        for (s, l) in &pairs {
            dominates.push(product_geq((tensor, lqg), (s, l)).map_err(err)?);
        }
        let proper = pairs
            .iter()
            .all(|(s, _)| s.frame().points().is_subset(lqg.graph.vertices()) && s.frame().len() < lqg.graph.vertices().len());
        let nondegenerate = tensor.is_nondegenerate();
        let passed = member && proper && nondegenerate && dominates.iter().all(|&d| d);
        Ok((
            passed,
            3 + dominates.len(),
            None,
            json!({
                "inputs": inputs.iter().map(|(id, s, l)| json!({
                    "id": id,
                    "in_theta": in_theta(s, l),
                    "disjoint_support": coupling::disjoint_support(s, l),
                    "tensor_points": tensor_points(s).iter().map(|p| p.0.clone()).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
                "in_theta": member,
                "dominates": dominates,
                "proper_vertex_extension": proper,
                "nondegenerate": nondegenerate,
                "output": coupled_json(&out),
            }),
        ))
    });
    collect(cases)
}

fn coord_text(c: &PhaseCoord) -> String {
    match c {
        PhaseCoord::Config { point, sort, index } => format!("q[{sort}@{point}#{index}]"),
        PhaseCoord::Momentum { point, sort, index } => format!("p[{sort}@{point}#{index}]"),
    }
}

fn phase_json(p: &PhasePolynomial) -> Value {
    Value::Array(
        p.terms()
            .iter()
            .map(|(mono, coef)| {
                let m: Vec<String> = mono
                    .iter()
                    .map(|(c, e)| if *e == 1 { coord_text(c) } else { format!("{}^{e}", coord_text(c)) })
                    .collect();
                json!({ "coef": text(coef), "monomial": m.join(" ") })
            })
            .collect(),
    )
}

fn as_operator(f: &Functional) -> Option<MomentumOperator> {
    match f {
        Functional::Momentum(d) => Some(MomentumOperator::single(d.clone())),
        Functional::MomentumCombination(op) => Some(op.clone()),
        _ => None,
    }
}

fn oracle_cmd(model: &Model) -> Run {
    need(model.oracle.len(), "oracle cases")?;
    let mut cases = Vec::new();
    for case in &model.oracle {
        let bracket = poisson_bracket(&case.left, &case.right).map_err(err)?;
        let value = match &bracket {
            BracketValue::Constant(c) => json!(text(c)),
            BracketValue::Polynomial(p) => phase_json(p),
        };
        // Cross-checks against the direct formulas where one applies.
        let agrees = match (as_operator(&case.left), &case.right) {
            (Some(op), Functional::Config(k)) => Some(pairing(&op, k).ok().as_ref() == bracket.as_constant()),
            (Some(op), Functional::Cylindrical(psi)) => Some(
                apply_momentum_operator(&op, psi)
                    .and_then(|r| lift(&Functional::Cylindrical(r)))
                    .is_ok_and(|e| e == bracket.clone().into_phase()),
            ),
            _ => None,
        };
        cases.push(Ok((
            agrees.unwrap_or(true),
            1,
            None,
            json!({
                "left": case.left_id,
                "right": case.right_id,
                "bracket": value,
                "agrees_with_direct_formula": agrees,
            }),
        )));
    }
    collect(cases)
}
