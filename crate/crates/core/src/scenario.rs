//! JSON scenario files and report documents.
//!
//! Rationals are written as strings `"p/q"` (or `"p"`). Objects refer to
//! each other by id; [`Model::build`] resolves every reference and reports
//! the first broken one with its location in the file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{Edge, Graph, LqgSystem, Surface, SurfaceSet};
use crate::dof::oracle::Functional;
use crate::dof::{ConfigDof, CylindricalFunction, MomentumDof, MomentumOperator};
use crate::frames::{build_k_gamma, DiscreteFrame};
use crate::geometry::{standard_basis, DiscreteMeasure, Manifold, OneForm, Point, PointId, TensorSort, VectorField};
use crate::hilbert::{DirectedSet, FamilyShape};
use crate::polynomial::Polynomial;
use crate::rational::{self, Q};
use crate::systems::FiniteSystem;
use crate::{Error, Result};

type Values = BTreeMap<String, Vec<String>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub dim: usize,
    #[serde(default)]
    pub points: Vec<PointDoc>,
    #[serde(default)]
    pub sorts: Vec<SortDoc>,
    #[serde(default)]
    pub frames: Vec<FrameDoc>,
    #[serde(default)]
    pub config_dofs: Vec<ConfigDofDoc>,
    #[serde(default)]
    pub momentum_dofs: Vec<MomentumDofDoc>,
    #[serde(default)]
    pub operators: Vec<OperatorDoc>,
    #[serde(default)]
    pub cylindrical: Vec<CylindricalDoc>,
    #[serde(default)]
    pub systems: Vec<SystemSpec>,
    #[serde(default)]
    pub pairings: Vec<PairingSpec>,
    #[serde(default)]
    pub joins: Vec<[String; 2]>,
    #[serde(default)]
    pub oracle: Vec<[String; 2]>,
    #[serde(default)]
    pub families: Vec<FamilySpec>,
    #[serde(default)]
    pub combinations: Vec<CombinationSpec>,
    #[serde(default)]
    pub graphs: Vec<GraphDoc>,
    #[serde(default)]
    pub surfaces: Vec<SurfaceDoc>,
    #[serde(default)]
    pub lqg_systems: Vec<LqgDoc>,
    #[serde(default)]
    pub coupled: Vec<CoupledSpec>,
    #[serde(default)]
    pub theta_joins: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    pub id: String,
    /// Defaults to `(index, 0, …, 0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortDoc {
    pub label: String,
    #[serde(default)]
    pub contravariant: usize,
    #[serde(default)]
    pub covariant: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symmetric: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramePointDoc {
    pub point: String,
    /// Basis vectors as rows; defaults to the coordinate basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDoc {
    pub id: String,
    pub points: Vec<FramePointDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDofDoc {
    pub id: String,
    pub sort: String,
    pub point: String,
    /// Covector arguments for upper slots, vectors for lower slots.
    #[serde(default)]
    pub args: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumDofDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub sort: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vector_fields: Vec<Values>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub one_forms: Vec<Values>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub smearing: BTreeMap<String, String>,
    /// Point weights; defaults to weight 1 on every point the fields mention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<BTreeMap<String, String>>,
}

/// A momentum d.o.f. given by id or inline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DofRef {
    Id(String),
    Inline(MomentumDofDoc),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub coef: String,
    pub dof: DofRef,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub terms: Vec<TermDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialDoc {
    pub coef: String,
    pub exponents: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylindricalDoc {
    pub id: String,
    pub base: Vec<String>,
    pub terms: Vec<MonomialDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub id: String,
    pub frame: String,
    pub sorts: Vec<String>,
    /// Operator ids; the dual operators of the frame when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operators: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingSpec {
    /// Operator or momentum d.o.f. id.
    pub operator: String,
    pub dof: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub id: String,
    pub slots: Vec<Vec<usize>>,
    pub slot_dims: BTreeMap<usize, usize>,
    /// Order as `(lower, upper)` pairs; inclusion of slot sets when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinationSpec {
    pub a: String,
    pub b: String,
    pub members: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub vertices: Vec<String>,
    /// `[a, b]` or `[a, b, label]`.
    #[serde(default)]
    pub edges: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceDoc {
    pub id: String,
    pub points: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqgDoc {
    pub id: String,
    /// Graph id, or its position in `graphs` when graphs have no ids.
    pub graph: String,
    #[serde(default)]
    pub surfaces: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledSpec {
    pub id: String,
    pub system: String,
    pub lqg: String,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let text = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let reason = text.strip_suffix(&suffix).unwrap_or(&text).to_string();
            Error::scenario(format!("line {}, column {}", e.line(), e.column()), reason)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::scenario(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn parse_q(text: &str, at: &str) -> Result<Q> {
    rational::parse(text).map_err(|_| Error::scenario(at, format!("`{text}` is not a rational")))
}

fn parse_vec(values: &[String], dim: usize, at: &str) -> Result<Vec<Q>> {
    if values.len() != dim {
        return Err(Error::scenario(at, format!("expected {dim} components, found {}", values.len())));
    }
    values.iter().map(|v| parse_q(v, at)).collect()
}

fn texts(v: &[Q]) -> Vec<String> {
    v.iter().map(rational::format).collect()
}

fn locate<T>(result: Result<T>, at: &str) -> Result<T> {
    result.map_err(|e| match e {
        e @ Error::Scenario { .. } => e,
        other => Error::scenario(at, other.to_string()),
    })
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, key: &str, what: &str, at: &str) -> Result<&'a T> {
    map.get(key)
        .ok_or_else(|| Error::scenario(at, format!("unknown {what} `{key}`")))
}

fn insert_unique<T>(map: &mut BTreeMap<String, T>, key: &str, value: T, at: &str) -> Result<()> {
    if map.insert(key.to_string(), value).is_some() {
        return Err(Error::scenario(at, format!("duplicate id `{key}`")));
    }
    Ok(())
}

/// A pairing case after resolution.
#[derive(Clone, Debug)]
pub struct PairingCase {
    pub operator_id: String,
    pub dof_id: String,
    pub operator: MomentumOperator,
    pub dof: ConfigDof,
}

#[derive(Clone, Debug)]
pub struct OracleCase {
    pub left_id: String,
    pub right_id: String,
    pub left: Functional,
    pub right: Functional,
}

#[derive(Clone, Debug)]
pub struct CombinationCase {
    pub a: usize,
    pub b: usize,
    pub members: Vec<(usize, usize)>,
}

/// Scenario with all references resolved.
#[derive(Clone, Debug)]
pub struct Model {
    pub seed: u64,
    pub dim: usize,
    pub manifold: Manifold,
    pub sorts: BTreeMap<String, TensorSort>,
    pub frames: BTreeMap<String, DiscreteFrame>,
    pub config_dofs: BTreeMap<String, ConfigDof>,
    pub momentum_dofs: BTreeMap<String, MomentumDof>,
    pub operators: BTreeMap<String, MomentumOperator>,
    pub cylindrical: BTreeMap<String, CylindricalFunction>,
    pub systems: Vec<(String, FiniteSystem)>,
    pub pairings: Vec<PairingCase>,
    pub joins: Vec<(usize, usize)>,
    pub oracle: Vec<OracleCase>,
    pub families: Vec<(String, FamilyShape)>,
    pub combinations: Vec<CombinationCase>,
    pub lqg_systems: BTreeMap<String, LqgSystem>,
    pub coupled: Vec<(String, usize, LqgSystem)>,
    pub theta_joins: Vec<(usize, usize)>,
}

fn position(ids: &[&str], key: &str, what: &str, at: &str) -> Result<usize> {
    ids.iter()
        .position(|id| *id == key)
        .ok_or_else(|| Error::scenario(at, format!("unknown {what} `{key}`")))
}

/// Converts a sort document.
pub fn sort_from_doc(doc: &SortDoc) -> Result<TensorSort> {
    TensorSort::with_symmetry(doc.label.clone(), doc.contravariant, doc.covariant, doc.symmetric.clone())
}

pub fn sort_doc(sort: &TensorSort) -> SortDoc {
    SortDoc {
        label: sort.label.clone(),
        contravariant: sort.contravariant(),
        covariant: sort.covariant(),
        symmetric: sort.symmetric_groups().to_vec(),
    }
}

fn values_from_doc(values: &Values, dim: usize, points: &BTreeSet<PointId>, at: &str) -> Result<BTreeMap<PointId, Vec<Q>>> {
    values
        .iter()
        .map(|(p, v)| {
            let id = PointId::new(p.clone());
            if !points.contains(&id) {
                return Err(Error::scenario(at, format!("unknown point `{p}`")));
            }
            Ok((id, parse_vec(v, dim, at)?))
        })
        .collect()
}

/// Builds a momentum d.o.f. from its document. `points` restricts the ids it
/// may mention; `None` accepts any id.
pub fn momentum_from_doc(
    doc: &MomentumDofDoc,
    sorts: &BTreeMap<String, TensorSort>,
    dim: usize,
    points: Option<&BTreeSet<PointId>>,
    at: &str,
) -> Result<MomentumDof> {
    let sort = lookup(sorts, &doc.sort, "sort", at)?.clone();
    let mut mentioned: BTreeSet<PointId> = doc
        .vector_fields
        .iter()
        .chain(&doc.one_forms)
        .flat_map(|f| f.keys())
        .chain(doc.smearing.keys())
        .chain(doc.measure.iter().flat_map(|m| m.keys()))
        .map(|p| PointId::new(p.clone()))
        .collect();
    let allowed = match points {
        Some(p) => {
            if let Some(bad) = mentioned.iter().find(|id| !p.contains(id)) {
                return Err(Error::scenario(at, format!("unknown point `{bad}`")));
            }
            p.clone()
        }
        None => std::mem::take(&mut mentioned),
    };
    let measure = match &doc.measure {
        Some(weights) => {
            let w = weights
                .iter()
                .map(|(p, v)| Ok((PointId::new(p.clone()), parse_q(v, at)?)))
                .collect::<Result<_>>()?;
            locate(DiscreteMeasure::new(w), at)?
        }
        None => {
            let touched: BTreeSet<PointId> = doc
                .vector_fields
                .iter()
                .chain(&doc.one_forms)
                .flat_map(|f| f.keys())
                .chain(doc.smearing.keys())
                .map(|p| PointId::new(p.clone()))
                .collect();
            DiscreteMeasure::unit(touched.iter())
        }
    };
    let dof = if sort.is_scalar() {
        let smearing = doc
            .smearing
            .iter()
            .map(|(p, v)| Ok((PointId::new(p.clone()), parse_q(v, at)?)))
            .collect::<Result<_>>()?;
        MomentumDof::scalar(sort, dim, smearing, measure)
    } else {
        let vector_fields = doc
            .vector_fields
            .iter()
            .map(|f| locate(VectorField::new(dim, values_from_doc(f, dim, &allowed, at)?), at))
            .collect::<Result<_>>()?;
        let one_forms = doc
            .one_forms
            .iter()
            .map(|f| locate(OneForm::new(dim, values_from_doc(f, dim, &allowed, at)?), at))
            .collect::<Result<_>>()?;
        MomentumDof::new(sort, dim, vector_fields, one_forms, measure)
    };
    locate(dof, at)
}

fn values_doc(values: &BTreeMap<PointId, Vec<Q>>) -> Values {
    values.iter().map(|(p, v)| (p.0.clone(), texts(v))).collect()
}

pub fn momentum_doc(dof: &MomentumDof) -> MomentumDofDoc {
    MomentumDofDoc {
        id: None,
        sort: dof.sort().label.clone(),
        vector_fields: dof.vector_fields().iter().map(|f| values_doc(f.values())).collect(),
        one_forms: dof.one_forms().iter().map(|f| values_doc(f.values())).collect(),
        smearing: dof.smearing().iter().map(|(p, v)| (p.0.clone(), rational::format(v))).collect(),
        measure: Some(
            dof.measure()
                .weights()
                .iter()
                .map(|(p, v)| (p.0.clone(), rational::format(v)))
                .collect(),
        ),
    }
}

pub fn operator_doc(op: &MomentumOperator) -> OperatorDoc {
    OperatorDoc {
        id: None,
        terms: op
            .terms()
            .iter()
            .map(|(c, d)| TermDoc {
                coef: rational::format(c),
                dof: DofRef::Inline(momentum_doc(d)),
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDoc {
    pub point: String,
    pub sort: String,
    pub indices: Vec<usize>,
}

/// Self-contained description of a finite system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub dim: usize,
    pub frame: Vec<FramePointDoc>,
    pub sorts: Vec<SortDoc>,
    pub operators: Vec<OperatorDoc>,
    /// `K_γ` in the order used by the pairing matrix.
    pub dofs: Vec<LabelDoc>,
}

pub fn frame_doc(frame: &DiscreteFrame) -> Vec<FramePointDoc> {
    frame
        .entries()
        .map(|(p, basis)| FramePointDoc {
            point: p.0.clone(),
            basis: Some(basis.iter().map(|v| texts(v)).collect()),
        })
        .collect()
}

pub fn system_doc(sys: &FiniteSystem) -> SystemDoc {
    SystemDoc {
        dim: sys.frame().dim(),
        frame: frame_doc(sys.frame()),
        sorts: sys.sorts().iter().map(sort_doc).collect(),
        operators: sys.operators().iter().map(operator_doc).collect(),
        dofs: sys
            .kset()
            .labels()
            .iter()
            .map(|l| LabelDoc {
                point: l.point.0.clone(),
                sort: l.sort.clone(),
                indices: l.indices.clone(),
            })
            .collect(),
    }
}

fn frame_from_doc(dim: usize, points: &[FramePointDoc], known: Option<&BTreeSet<PointId>>, at: &str) -> Result<DiscreteFrame> {
    let entries = points
        .iter()
        .enumerate()
        .map(|(i, fp)| {
            let at = format!("{at}.points[{i}]");
            let id = PointId::new(fp.point.clone());
            if known.is_some_and(|k| !k.contains(&id)) {
                return Err(Error::scenario(&at, format!("unknown point `{}`", fp.point)));
            }
            let basis = match &fp.basis {
                Some(rows) => {
                    if rows.len() != dim {
                        return Err(Error::scenario(&at, format!("basis needs {dim} vectors")));
                    }
                    rows.iter().map(|r| parse_vec(r, dim, &at)).collect::<Result<_>>()?
                }
                None => standard_basis(dim),
            };
            Ok((id, basis))
        })
        .collect::<Result<Vec<_>>>()?;
    locate(DiscreteFrame::new(dim, entries), at)
}

/// Rebuilds a system from [`system_doc`] output.
pub fn system_from_doc(doc: &SystemDoc) -> Result<FiniteSystem> {
    let sorts: Vec<TensorSort> = doc
        .sorts
        .iter()
        .map(|s| locate(sort_from_doc(s), "sorts"))
        .collect::<Result<_>>()?;
    let by_label: BTreeMap<String, TensorSort> = sorts.iter().map(|s| (s.label.clone(), s.clone())).collect();
    let frame = frame_from_doc(doc.dim, &doc.frame, None, "frame")?;
    let operators = doc
        .operators
        .iter()
        .enumerate()
        .map(|(i, op)| operator_from_doc(op, &by_label, &BTreeMap::new(), doc.dim, None, &format!("operators[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let k = locate(build_k_gamma(&frame, &sorts), "dofs")?;
    let perm = doc
        .dofs
        .iter()
        .map(|l| {
            k.labels()
                .iter()
                .position(|x| x.point.0 == l.point && x.sort == l.sort && x.indices == l.indices)
                .ok_or_else(|| Error::scenario("dofs", format!("d.o.f. {l:?} is not in K")))
        })
        .collect::<Result<Vec<_>>>()?;
    if perm.len() != k.len() || perm.iter().collect::<BTreeSet<_>>().len() != perm.len() {
        return Err(Error::scenario("dofs", "d.o.f. list is not a permutation of K"));
    }
    locate(FiniteSystem::new(operators, k.permuted(&perm)), "operators")
}

fn operator_from_doc(
    doc: &OperatorDoc,
    sorts: &BTreeMap<String, TensorSort>,
    named: &BTreeMap<String, MomentumDof>,
    dim: usize,
    points: Option<&BTreeSet<PointId>>,
    at: &str,
) -> Result<MomentumOperator> {
    let terms = doc
        .terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let at = format!("{at}.terms[{j}]");
            let c = parse_q(&t.coef, &at)?;
            let d = match &t.dof {
                DofRef::Id(id) => lookup(named, id, "momentum d.o.f.", &at)?.clone(),
                DofRef::Inline(doc) => momentum_from_doc(doc, sorts, dim, points, &at)?,
            };
            Ok((c, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentumOperator::from_terms(terms))
}

impl Model {
    pub fn build(s: &Scenario) -> Result<Model> {
        let dim = s.dim;
        let mut manifold = Manifold::new(dim).map_err(|e| Error::scenario("dim", e.to_string()))?;
        for (i, p) in s.points.iter().enumerate() {
            let at = format!("points[{i}]");
            let coords = match &p.coords {
                Some(c) => parse_vec(c, dim, &at)?,
                None => {
                    let mut c = vec![rational::zero(); dim];
                    c[0] = rational::int(i as i64);
                    c
                }
            };
            locate(
                manifold.insert(Point {
                    id: PointId::new(p.id.clone()),
                    coords,
                }),
                &at,
            )?;
        }
        let known = manifold.ids();

        let mut sorts = BTreeMap::new();
        for (i, d) in s.sorts.iter().enumerate() {
            let at = format!("sorts[{i}]");
            insert_unique(&mut sorts, &d.label, locate(sort_from_doc(d), &at)?, &at)?;
        }

        let mut frames = BTreeMap::new();
        for (i, f) in s.frames.iter().enumerate() {
            let at = format!("frames[{i}]");
            let frame = frame_from_doc(dim, &f.points, Some(&known), &at)?;
            insert_unique(&mut frames, &f.id, frame, &at)?;
        }

        let mut functional_ids = BTreeSet::new();
        let mut claim = |id: &str, at: &str| -> Result<()> {
            if !functional_ids.insert(id.to_string()) {
                return Err(Error::scenario(at, format!("duplicate id `{id}`")));
            }
            Ok(())
        };

        let mut config_dofs = BTreeMap::new();
        for (i, d) in s.config_dofs.iter().enumerate() {
            let at = format!("config_dofs[{i}]");
            claim(&d.id, &at)?;
            let sort = lookup(&sorts, &d.sort, "sort", &at)?.clone();
            let point = PointId::new(d.point.clone());
            if !known.contains(&point) {
                return Err(Error::scenario(&at, format!("unknown point `{}`", d.point)));
            }
            let args = d.args.iter().map(|a| parse_vec(a, dim, &at)).collect::<Result<_>>()?;
            config_dofs.insert(d.id.clone(), locate(ConfigDof::new(sort, dim, point, args), &at)?);
        }

        let mut momentum_dofs = BTreeMap::new();
        for (i, d) in s.momentum_dofs.iter().enumerate() {
            let at = format!("momentum_dofs[{i}]");
            let id = d
                .id
                .clone()
                .ok_or_else(|| Error::scenario(&at, "momentum d.o.f. needs an id"))?;
            claim(&id, &at)?;
            momentum_dofs.insert(id, momentum_from_doc(d, &sorts, dim, Some(&known), &at)?);
        }

        let mut operators = BTreeMap::new();
        for (i, d) in s.operators.iter().enumerate() {
            let at = format!("operators[{i}]");
            let id = d.id.clone().ok_or_else(|| Error::scenario(&at, "operator needs an id"))?;
            claim(&id, &at)?;
            operators.insert(id, operator_from_doc(d, &sorts, &momentum_dofs, dim, Some(&known), &at)?);
        }

        let mut cylindrical = BTreeMap::new();
        for (i, d) in s.cylindrical.iter().enumerate() {
            let at = format!("cylindrical[{i}]");
            claim(&d.id, &at)?;
            let base: Vec<ConfigDof> = d
                .base
                .iter()
                .map(|b| lookup(&config_dofs, b, "configurational d.o.f.", &at).cloned())
                .collect::<Result<_>>()?;
            let mut poly = Polynomial::zero(base.len());
            for m in &d.terms {
                if m.exponents.len() != base.len() {
                    return Err(Error::scenario(&at, "exponent count differs from the base size"));
                }
                poly.add_term(m.exponents.clone(), parse_q(&m.coef, &at)?);
            }
            cylindrical.insert(d.id.clone(), locate(CylindricalFunction::new(base, poly), &at)?);
        }

        let mut systems = Vec::new();
        for (i, d) in s.systems.iter().enumerate() {
            let at = format!("systems[{i}]");
            if systems.iter().any(|(id, _)| id == &d.id) {
                return Err(Error::scenario(&at, format!("duplicate id `{}`", d.id)));
            }
            let frame = lookup(&frames, &d.frame, "frame", &at)?;
            let sys_sorts: Vec<TensorSort> = d
                .sorts
                .iter()
                .map(|l| lookup(&sorts, l, "sort", &at).cloned())
                .collect::<Result<_>>()?;
            let sys = match &d.operators {
                None => locate(FiniteSystem::dual(frame, &sys_sorts), &at)?,
                Some(ids) => {
                    let ops = ids
                        .iter()
                        .map(|id| operator_ref(id, &operators, &momentum_dofs, &at))
                        .collect::<Result<Vec<_>>>()?;
                    let k = locate(build_k_gamma(frame, &sys_sorts), &at)?;
                    // Degenerate systems are kept so the condition checks can report them.
                    FiniteSystem::unchecked(ops, k)
                }
            };
            systems.push((d.id.clone(), sys));
        }
        let system_ids: Vec<&str> = systems.iter().map(|(id, _)| id.as_str()).collect();

        let pairings = s
            .pairings
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let at = format!("pairings[{i}]");
                Ok(PairingCase {
                    operator_id: p.operator.clone(),
                    dof_id: p.dof.clone(),
                    operator: operator_ref(&p.operator, &operators, &momentum_dofs, &at)?,
                    dof: lookup(&config_dofs, &p.dof, "configurational d.o.f.", &at)?.clone(),
                })
            })
            .collect::<Result<_>>()?;

        let joins = s
            .joins
            .iter()
            .enumerate()
            .map(|(i, [a, b])| {
                let at = format!("joins[{i}]");
                Ok((position(&system_ids, a, "system", &at)?, position(&system_ids, b, "system", &at)?))
            })
            .collect::<Result<_>>()?;

        let functional = |id: &str, at: &str| -> Result<Functional> {
            if let Some(d) = config_dofs.get(id) {
                return Ok(d.clone().into());
            }
            if let Some(d) = momentum_dofs.get(id) {
                return Ok(d.clone().into());
            }
            if let Some(o) = operators.get(id) {
                return Ok(o.clone().into());
            }
            if let Some(c) = cylindrical.get(id) {
                return Ok(c.clone().into());
            }
            Err(Error::scenario(at, format!("unknown functional `{id}`")))
        };
        let oracle = s
            .oracle
            .iter()
            .enumerate()
            .map(|(i, [l, r])| {
                let at = format!("oracle[{i}]");
                Ok(OracleCase {
                    left_id: l.clone(),
                    right_id: r.clone(),
                    left: functional(l, &at)?,
                    right: functional(r, &at)?,
                })
            })
            .collect::<Result<_>>()?;

        let mut families = Vec::new();
        for (i, f) in s.families.iter().enumerate() {
            let at = format!("families[{i}]");
            if families.iter().any(|(id, _): &(String, FamilyShape)| id == &f.id) {
                return Err(Error::scenario(&at, format!("duplicate id `{}`", f.id)));
            }
            let slots: Vec<BTreeSet<usize>> = f.slots.iter().map(|s| s.iter().copied().collect()).collect();
            let shape = match &f.edges {
                Some(edges) => {
                    let edges: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                    let index = locate(DirectedSet::new(slots.len(), &edges), &at)?;
                    FamilyShape::new(index, slots, f.slot_dims.clone())
                }
                None => FamilyShape::by_inclusion(slots, f.slot_dims.clone()),
            };
            families.push((f.id.clone(), locate(shape, &at)?));
        }
        let family_ids: Vec<&str> = families.iter().map(|(id, _)| id.as_str()).collect();
        let combinations = s
            .combinations
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let at = format!("combinations[{i}]");
                Ok(CombinationCase {
                    a: position(&family_ids, &c.a, "family", &at)?,
                    b: position(&family_ids, &c.b, "family", &at)?,
                    members: c.members.iter().map(|m| (m[0], m[1])).collect(),
                })
            })
            .collect::<Result<_>>()?;

        let mut graphs = BTreeMap::new();
        for (i, g) in s.graphs.iter().enumerate() {
            let at = format!("graphs[{i}]");
            let vertices: Vec<PointId> = g.vertices.iter().map(|v| PointId::new(v.clone())).collect();
            if let Some(v) = vertices.iter().find(|v| !known.contains(v)) {
                return Err(Error::scenario(&at, format!("unknown point `{v}`")));
            }
            let edges = g
                .edges
                .iter()
                .map(|e| match e.as_slice() {
                    [a, b] => Ok(Edge::new(PointId::new(a.clone()), PointId::new(b.clone()), "e")),
                    [a, b, label] => Ok(Edge::new(PointId::new(a.clone()), PointId::new(b.clone()), label.clone())),
                    _ => Err(Error::scenario(&at, "an edge is [a, b] or [a, b, label]")),
                })
                .collect::<Result<Vec<_>>>()?;
            let id = g.id.clone().unwrap_or_else(|| i.to_string());
            insert_unique(&mut graphs, &id, locate(Graph::new(vertices, edges), &at)?, &at)?;
        }
        let mut surfaces = BTreeMap::new();
        for (i, d) in s.surfaces.iter().enumerate() {
            let at = format!("surfaces[{i}]");
            let points: BTreeSet<PointId> = d.points.iter().map(|p| PointId::new(p.clone())).collect();
            if let Some(p) = points.iter().find(|p| !known.contains(p)) {
                return Err(Error::scenario(&at, format!("unknown point `{p}`")));
            }
            insert_unique(&mut surfaces, &d.id, Surface { id: d.id.clone(), points }, &at)?;
        }
        let mut lqg_systems = BTreeMap::new();
        for (i, d) in s.lqg_systems.iter().enumerate() {
            let at = format!("lqg_systems[{i}]");
            let graph = lookup(&graphs, &d.graph, "graph", &at)?.clone();
            let set = d
                .surfaces
                .iter()
                .map(|id| lookup(&surfaces, id, "surface", &at).cloned())
                .collect::<Result<Vec<_>>>()?;
            insert_unique(&mut lqg_systems, &d.id, LqgSystem::new(graph, SurfaceSet::new(set)), &at)?;
        }
        let mut coupled: Vec<(String, usize, LqgSystem)> = Vec::new();
        for (i, c) in s.coupled.iter().enumerate() {
            let at = format!("coupled[{i}]");
            if coupled.iter().any(|(id, _, _)| id == &c.id) {
                return Err(Error::scenario(&at, format!("duplicate id `{}`", c.id)));
            }
            let sys = position(&system_ids, &c.system, "system", &at)?;
            let lqg = lookup(&lqg_systems, &c.lqg, "LQG system", &at)?.clone();
            coupled.push((c.id.clone(), sys, lqg));
        }
        let coupled_ids: Vec<&str> = coupled.iter().map(|(id, _, _)| id.as_str()).collect();
        let theta_joins = s
            .theta_joins
            .iter()
            .enumerate()
            .map(|(i, [a, b])| {
                let at = format!("theta_joins[{i}]");
                Ok((
                    position(&coupled_ids, a, "coupled system", &at)?,
                    position(&coupled_ids, b, "coupled system", &at)?,
                ))
            })
            .collect::<Result<_>>()?;

        Ok(Model {
            seed: s.seed.unwrap_or(0),
            dim,
            manifold,
            sorts,
            frames,
            config_dofs,
            momentum_dofs,
            operators,
            cylindrical,
            systems,
            pairings,
            joins,
            oracle,
            families,
            combinations,
            lqg_systems,
            coupled,
            theta_joins,
        })
    }
}

fn operator_ref(
    id: &str,
    operators: &BTreeMap<String, MomentumOperator>,
    momentum: &BTreeMap<String, MomentumDof>,
    at: &str,
) -> Result<MomentumOperator> {
    if let Some(op) = operators.get(id) {
        return Ok(op.clone());
    }
    if let Some(d) = momentum.get(id) {
        return Ok(MomentumOperator::single(d.clone()));
    }
    Err(Error::scenario(at, format!("unknown operator `{id}`")))
}
