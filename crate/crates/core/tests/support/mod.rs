//! Generators and independent oracles shared by the property tests and the
//! acceptance suite. Nothing here calls into the code under test except to
//! build inputs.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use aas_core::ingest::{
    ComponentInstance, ComponentModel, ComponentSet, Nameplate, SkillDefinition, SystemModel, TaskPlot,
};
use aas_core::model::{
    AasEnvironment, AasIdentifier, AssetKind, CapabilityDecl, Collection, Constraint, FileRef, OperationDecl,
    OperationVariable, ParamSpec, Property, Shell, Submodel, SubmodelElement, ValueType,
};
use proptest::prelude::*;

pub mod lifecycle_oracle;

pub fn id_short() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,6}"
}

/// Text that exercises escaping: markup characters, quotes, whitespace and non-ASCII.
pub fn text() -> impl Strategy<Value = String> {
    "[ a-zA-Z0-9&<>\"'\t\r\n\u{e9}\u{4e2d}\u{1f916}]{0,12}"
}

pub fn value_type() -> impl Strategy<Value = ValueType> {
    prop_oneof![
        Just(ValueType::String),
        Just(ValueType::Integer),
        Just(ValueType::Decimal),
        Just(ValueType::Boolean),
    ]
}

fn finite_decimal() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1.0e6..1.0e6f64,
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
    ]
}

pub fn lexical_value(vt: ValueType) -> BoxedStrategy<String> {
    match vt {
        ValueType::String => text().boxed(),
        ValueType::Integer => any::<i64>().prop_map(|i| i.to_string()).boxed(),
        ValueType::Decimal => prop_oneof![
            finite_decimal().prop_map(|f| f.to_string()),
            Just("1e3".to_string()),
            Just("-0.5".to_string()),
        ]
        .boxed(),
        ValueType::Boolean => prop_oneof![Just("true".to_string()), Just("false".to_string())].boxed(),
    }
}

fn property() -> impl Strategy<Value = SubmodelElement> {
    (id_short(), value_type()).prop_flat_map(|(id, vt)| {
        lexical_value(vt).prop_map(move |value| {
            SubmodelElement::Property(Property {
                id_short: id.clone(),
                value_type: vt,
                value,
            })
        })
    })
}

pub fn param_spec() -> impl Strategy<Value = ParamSpec> {
    (id_short(), value_type(), any::<bool>(), 0u8..3).prop_flat_map(|(name, vt, required, c)| {
        let constraint: BoxedStrategy<Option<Constraint>> = match (c, vt) {
            (1, ValueType::Integer | ValueType::Decimal) => (finite_decimal(), 0.0..1.0e3f64)
                .prop_map(|(lo, width)| Some(Constraint::Range { lo, hi: lo + width }))
                .boxed(),
            (2, ValueType::String) => prop::collection::vec("[a-z]{1,6}", 1..4)
                .prop_map(|v| Some(Constraint::Enumeration(v)))
                .boxed(),
            _ => Just(None).boxed(),
        };
        constraint.prop_map(move |constraint| ParamSpec {
            name: name.clone(),
            value_type: vt,
            required,
            constraint,
        })
    })
}

fn dedup_by<T>(items: Vec<T>, key: impl Fn(&T) -> String) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|i| seen.insert(key(i))).collect()
}

pub fn params() -> impl Strategy<Value = Vec<ParamSpec>> {
    prop::collection::vec(param_spec(), 0..4).prop_map(|v| dedup_by(v, |p| p.name.clone()))
}

fn op_vars() -> impl Strategy<Value = Vec<OperationVariable>> {
    prop::collection::vec(
        (id_short(), value_type()).prop_map(|(n, t)| OperationVariable::new(n, t)),
        0..3,
    )
    .prop_map(|v| dedup_by(v, |var| var.name.clone()))
}

fn leaf() -> impl Strategy<Value = SubmodelElement> {
    prop_oneof![
        3 => property(),
        1 => (id_short(), op_vars(), op_vars()).prop_map(|(id_short, in_params, out_params)| {
            SubmodelElement::Operation(OperationDecl { id_short, in_params, out_params })
        }),
        1 => (id_short(), text(), params()).prop_map(|(id_short, description, params)| {
            SubmodelElement::Capability(CapabilityDecl { id_short, description, params })
        }),
        1 => (id_short(), "[a-z]{1,5}/[a-z0-9.+-]{1,8}", text()).prop_map(|(id_short, mime_type, path)| {
            SubmodelElement::File(FileRef { id_short, mime_type, path })
        }),
    ]
}

fn unique_elements(v: Vec<SubmodelElement>) -> Vec<SubmodelElement> {
    dedup_by(v, |e| e.id_short().to_string())
}

pub fn element() -> impl Strategy<Value = SubmodelElement> {
    leaf().prop_recursive(3, 24, 4, |inner| {
        (id_short(), prop::collection::vec(inner, 0..4)).prop_map(|(id_short, elements)| {
            SubmodelElement::Collection(Collection {
                id_short,
                elements: unique_elements(elements),
            })
        })
    })
}

fn submodel_body() -> impl Strategy<Value = (String, Option<String>, Vec<SubmodelElement>)> {
    (
        id_short(),
        prop::option::of("urn:sem:[a-z]{1,5}:[0-9]"),
        prop::collection::vec(element(), 0..4).prop_map(unique_elements),
    )
}

/// Valid environments: unique identifiers, unique idShorts per scope, every
/// reference resolvable, some submodels left unreferenced.
pub fn environment() -> impl Strategy<Value = AasEnvironment> {
    let shell = (
        id_short(),
        prop_oneof![Just(AssetKind::SoftwareComponent), Just(AssetKind::RobotSystem)],
        prop::collection::vec(submodel_body(), 0..4),
    );
    (
        prop::collection::vec(shell, 0..3),
        prop::collection::vec(submodel_body(), 0..2),
    )
        .prop_map(|(shells, orphans)| {
            let mut env = AasEnvironment::default();
            let mut next = 0usize;
            let mut fresh = |kind: &str| {
                next += 1;
                AasIdentifier::new(format!("urn:test:{kind}:{next}"))
            };
            for (name, kind, bodies) in dedup_by(shells, |s| s.0.clone()) {
                let shell_id = fresh("shell");
                let mut refs = Vec::new();
                for (sm_name, semantic_id, elements) in dedup_by(bodies, |b| b.0.clone()) {
                    let id = fresh("submodel");
                    refs.push(id.clone());
                    env.submodels.push(Submodel {
                        id,
                        id_short: sm_name,
                        semantic_id,
                        elements,
                    });
                }
                env.shells.push(Shell {
                    id: shell_id,
                    id_short: name,
                    asset_kind: kind,
                    submodel_refs: refs,
                });
            }
            for (sm_name, semantic_id, elements) in orphans {
                let id = fresh("orphan");
                env.submodels.push(Submodel {
                    id,
                    id_short: sm_name,
                    semantic_id,
                    elements,
                });
            }
            env
        })
}

/// Every addressable path of `env`, computed by a direct walk.
pub fn all_paths(env: &AasEnvironment) -> BTreeSet<String> {
    fn walk(prefix: &str, elements: &[SubmodelElement], out: &mut BTreeSet<String>) {
        for e in elements {
            let p = format!("{prefix}/{}", e.id_short());
            if let SubmodelElement::Collection(c) = e {
                walk(&p, &c.elements, out);
            }
            out.insert(p);
        }
    }
    let mut out = BTreeSet::new();
    for shell in &env.shells {
        out.insert(shell.id_short.clone());
        for r in &shell.submodel_refs {
            let sm = env.submodels.iter().find(|s| &s.id == r).expect("valid env");
            let p = format!("{}/{}", shell.id_short, sm.id_short);
            walk(&p, &sm.elements, &mut out);
            out.insert(p);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// small systems for the capability union

const SKILL_POOL: [&str; 8] = ["goto", "pick", "place", "dock", "scan", "grip", "lift", "turn"];
const PLOT_POOL: [&str; 4] = ["deliver", "patrol", "inventory", "tidy"];

/// Parameter schema fixed per skill name so equal names never conflict.
pub fn canonical_params(skill: &str) -> Vec<ParamSpec> {
    let n = skill.len();
    (0..n % 3)
        .map(|i| ParamSpec::new(format!("p{i}"), if i == 0 { ValueType::Decimal } else { ValueType::String }))
        .collect()
}

fn component_with_skills(name: String, skills: Vec<&str>) -> ComponentModel {
    ComponentModel {
        name: name.clone(),
        version: "1.0.0".into(),
        license: "MIT".into(),
        environment: "test".into(),
        services: Vec::new(),
        skills: skills
            .into_iter()
            .map(|s| SkillDefinition {
                name: s.to_string(),
                description: format!("{s} skill"),
                params: canonical_params(s),
                result_fields: Vec::new(),
            })
            .collect(),
        technical_data: Vec::new(),
        nameplate: Nameplate {
            manufacturer: "Acme".into(),
            product_designation: name,
            serial_number: None,
            address: None,
        },
        documentation: Vec::new(),
    }
}

/// A random system with up to 5 component instances (possibly repeating a
/// component) of up to 6 skills each, and task plots over the available skills.
pub fn small_system() -> impl Strategy<Value = (SystemModel, ComponentSet)> {
    let skills = prop::sample::subsequence(SKILL_POOL.to_vec(), 0..=6);
    (
        prop::collection::vec(skills, 1..=4),
        prop::collection::vec(0usize..4, 1..=5),
        prop::sample::subsequence(PLOT_POOL.to_vec(), 0..=3),
        any::<prop::sample::Index>(),
    )
        .prop_map(|(skill_sets, picks, plots, idx)| {
            let components: Vec<ComponentModel> = skill_sets
                .into_iter()
                .enumerate()
                .map(|(i, s)| component_with_skills(format!("Comp{i}"), s))
                .collect();
            let instances: Vec<ComponentInstance> = picks
                .iter()
                .enumerate()
                .map(|(i, p)| ComponentInstance {
                    instance: format!("inst{i}"),
                    component: components[p % components.len()].name.clone(),
                })
                .collect();
            let available: Vec<String> = instances
                .iter()
                .flat_map(|inst| {
                    components
                        .iter()
                        .find(|c| c.name == inst.component)
                        .unwrap()
                        .skills
                        .iter()
                        .map(|s| s.name.clone())
                })
                .collect();
            let task_plots = if available.is_empty() {
                Vec::new()
            } else {
                plots
                    .into_iter()
                    .map(|p| TaskPlot {
                        name: p.to_string(),
                        description: format!("{p} plot"),
                        skills_used: vec![idx.get(&available).clone()],
                        params: Vec::new(),
                    })
                    .collect()
            };
            let system = SystemModel {
                name: "Sys".into(),
                components: instances,
                task_plots,
                expose: None,
                nameplate: None,
                technical_data: Vec::new(),
                documentation: Vec::new(),
            };
            let set = components.into_iter().map(|c| (c.name.clone(), c)).collect();
            (system, set)
        })
}

/// Brute-force union: every skill of every used component and every task plot,
/// keyed by name, with its parameter schema.
pub fn union_oracle(system: &SystemModel, components: &ComponentSet) -> BTreeMap<String, Vec<ParamSpec>> {
    let mut out = BTreeMap::new();
    for inst in &system.components {
        for skill in &components[&inst.component].skills {
            out.insert(skill.name.clone(), skill.params.clone());
        }
    }
    for plot in &system.task_plots {
        out.insert(plot.name.clone(), plot.params.clone());
    }
    out
}
