//! Maps component and system models onto their AAS data sheets.
//!
//! A component shell carries ComponentDefinition, Capabilities, TechnicalData,
//! Operations, Nameplate and Documentation. A system shell carries
//! BillOfMaterials, TechnicalData, Operations, Nameplate, Documentation and
//! Capabilities, plus OperationalData once runtime telemetry is folded in.
//! All template decisions live in this module so the mapping can be swapped
//! for a standardized one without touching the model or the packaging.

use std::collections::BTreeSet;
use std::time::SystemTime;

use crate::ingest::{ComponentModel, ComponentSet, DocEntry, Nameplate, SystemModel};
use crate::model::{
    AasEnvironment, AasIdentifier, AssetKind, CapabilityDecl, FileRef, OperationDecl,
    OperationVariable, Shell, Submodel, SubmodelElement, ValueType,
};
use crate::telemetry::TelemetryLedger;

pub const COMPONENT_DEFINITION: &str = "ComponentDefinition";
pub const CAPABILITIES: &str = "Capabilities";
pub const TECHNICAL_DATA: &str = "TechnicalData";
pub const OPERATIONS: &str = "Operations";
pub const NAMEPLATE: &str = "Nameplate";
pub const DOCUMENTATION: &str = "Documentation";
pub const BILL_OF_MATERIALS: &str = "BillOfMaterials";
pub const OPERATIONAL_DATA: &str = "OperationalData";

pub const COMPONENT_SUBMODELS: [&str; 6] = [
    COMPONENT_DEFINITION,
    CAPABILITIES,
    TECHNICAL_DATA,
    OPERATIONS,
    NAMEPLATE,
    DOCUMENTATION,
];

pub const SYSTEM_SUBMODELS: [&str; 6] = [
    BILL_OF_MATERIALS,
    TECHNICAL_DATA,
    OPERATIONS,
    NAMEPLATE,
    DOCUMENTATION,
    CAPABILITIES,
];

/// The generic operation set shared by every capability.
pub const OPERATION_NAMES: [&str; 4] = ["pushCapability", "getStatus", "getOutput", "deleteCommand"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationReport {
    pub shell_id: AasIdentifier,
    pub submodels_emitted: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub env: AasEnvironment,
    pub report: GenerationReport,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("skill '{0}' is declared with conflicting parameter schemas")]
    ConflictingSkillSchemas(String),
    #[error("component '{0}' is not in the supplied component set")]
    MissingComponent(String),
    #[error("environment has no robot system shell")]
    NoSystemShell,
}

pub fn component_shell_id(name: &str) -> AasIdentifier {
    AasIdentifier::new(format!("urn:aas:component:{name}"))
}

pub fn system_shell_id(name: &str) -> AasIdentifier {
    AasIdentifier::new(format!("urn:aas:system:{name}"))
}

pub fn submodel_id(shell: &AasIdentifier, id_short: &str) -> AasIdentifier {
    AasIdentifier::new(format!("{shell}/submodels/{id_short}"))
}

fn submodel(shell: &AasIdentifier, id_short: &str, elements: Vec<SubmodelElement>) -> Submodel {
    Submodel {
        id: submodel_id(shell, id_short),
        id_short: id_short.to_string(),
        semantic_id: Some(format!("urn:robot-aas:submodel:{id_short}:1")),
        elements,
    }
}

fn assemble(
    shell_id: AasIdentifier,
    id_short: &str,
    kind: AssetKind,
    submodels: Vec<Submodel>,
    warnings: Vec<String>,
) -> Generated {
    let report = GenerationReport {
        shell_id: shell_id.clone(),
        submodels_emitted: submodels.iter().map(|s| s.id_short.clone()).collect(),
        warnings,
    };
    let shell = Shell {
        id: shell_id,
        id_short: id_short.to_string(),
        asset_kind: kind,
        submodel_refs: submodels.iter().map(|s| s.id.clone()).collect(),
    };
    Generated {
        env: AasEnvironment {
            shells: vec![shell],
            submodels,
        },
        report,
    }
}

fn operations() -> Vec<SubmodelElement> {
    let var = OperationVariable::new;
    let op = |name: &str, ins: Vec<OperationVariable>, outs: Vec<OperationVariable>| {
        SubmodelElement::Operation(OperationDecl {
            id_short: name.to_string(),
            in_params: ins,
            out_params: outs,
        })
    };
    let id = || var("commandId", ValueType::String);
    vec![
        op(
            "pushCapability",
            vec![var("capability", ValueType::String), var("params", ValueType::String)],
            vec![id(), var("state", ValueType::String)],
        ),
        op("getStatus", vec![id()], vec![var("state", ValueType::String)]),
        op(
            "getOutput",
            vec![id()],
            vec![var("outcome", ValueType::String), var("details", ValueType::String)],
        ),
        op("deleteCommand", vec![id()], vec![var("state", ValueType::String)]),
    ]
}

fn nameplate(np: &Nameplate, version: Option<&str>) -> Vec<SubmodelElement> {
    let mut elements = vec![
        SubmodelElement::string("manufacturer", &np.manufacturer),
        SubmodelElement::string("productDesignation", &np.product_designation),
    ];
    if let Some(serial) = &np.serial_number {
        elements.push(SubmodelElement::string("serialNumber", serial));
    }
    if let Some(address) = &np.address {
        elements.push(SubmodelElement::string("address", address));
    }
    if let Some(version) = version {
        elements.push(SubmodelElement::string("softwareVersion", version));
    }
    elements
}

fn guess_mime(uri: &str) -> &'static str {
    let path = uri.split(['?', '#']).next().unwrap_or(uri);
    let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pdf") => "application/pdf",
        Some("html" | "htm") => "text/html",
        Some("md") => "text/markdown",
        Some("txt") => "text/plain",
        Some("xml") => "application/xml",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}

fn documentation(docs: &[DocEntry]) -> Vec<SubmodelElement> {
    docs.iter()
        .enumerate()
        .map(|(i, doc)| {
            SubmodelElement::collection(
                format!("Document{:02}", i + 1),
                vec![
                    SubmodelElement::string("title", &doc.title),
                    SubmodelElement::File(FileRef {
                        id_short: "file".into(),
                        mime_type: guess_mime(&doc.uri).into(),
                        path: doc.uri.clone(),
                    }),
                ],
            )
        })
        .collect()
}

fn technical_pairs(pairs: &[(String, String)]) -> impl Iterator<Item = SubmodelElement> + '_ {
    pairs.iter().map(|(k, v)| SubmodelElement::string(k, v))
}

/// Builds the data sheet of one software component.
pub fn gen_component_aas(cm: &ComponentModel) -> Generated {
    let shell_id = component_shell_id(&cm.name);

    let definition = cm
        .services
        .iter()
        .map(|port| {
            SubmodelElement::collection(
                &port.name,
                vec![
                    SubmodelElement::string("direction", port.direction.as_str()),
                    SubmodelElement::string("pattern", &port.pattern),
                    SubmodelElement::string("messageType", &port.message_type),
                ],
            )
        })
        .collect();

    let capabilities = cm
        .skills
        .iter()
        .map(|skill| {
            SubmodelElement::Capability(CapabilityDecl {
                id_short: skill.name.clone(),
                description: skill.description.clone(),
                params: skill.params.clone(),
            })
        })
        .collect();

    let mut technical = vec![
        SubmodelElement::string("license", &cm.license),
        SubmodelElement::string("environment", &cm.environment),
    ];
    technical.extend(technical_pairs(&cm.technical_data));

    let submodels = vec![
        submodel(&shell_id, COMPONENT_DEFINITION, definition),
        submodel(&shell_id, CAPABILITIES, capabilities),
        submodel(&shell_id, TECHNICAL_DATA, technical),
        submodel(&shell_id, OPERATIONS, operations()),
        submodel(&shell_id, NAMEPLATE, nameplate(&cm.nameplate, Some(&cm.version))),
        submodel(&shell_id, DOCUMENTATION, documentation(&cm.documentation)),
    ];
    assemble(shell_id, &cm.name, AssetKind::SoftwareComponent, submodels, Vec::new())
}

/// Union of all component skills (first occurrence wins, identical schemas
/// deduplicated) followed by one capability per task plot.
pub fn system_capabilities(
    sm: &SystemModel,
    components: &ComponentSet,
) -> Result<(Vec<CapabilityDecl>, Vec<String>), GenerateError> {
    let mut caps: Vec<(CapabilityDecl, &str)> = Vec::new();
    let mut warnings = Vec::new();
    for instance in &sm.components {
        let component = components
            .get(&instance.component)
            .ok_or_else(|| GenerateError::MissingComponent(instance.component.clone()))?;
        for skill in &component.skills {
            match caps.iter().find(|(c, _)| c.id_short == skill.name) {
                Some((existing, _)) if existing.params != skill.params => {
                    return Err(GenerateError::ConflictingSkillSchemas(skill.name.clone()))
                }
                Some((_, owner)) => {
                    if *owner != component.name {
                        warnings.push(format!(
                            "skill '{}' is provided by both {} and {}; listed once",
                            skill.name, owner, component.name
                        ));
                    }
                }
                None => caps.push((
                    CapabilityDecl {
                        id_short: skill.name.clone(),
                        description: skill.description.clone(),
                        params: skill.params.clone(),
                    },
                    &component.name,
                )),
            }
        }
    }
    let mut caps: Vec<CapabilityDecl> = caps.into_iter().map(|(c, _)| c).collect();
    caps.extend(sm.task_plots.iter().map(|plot| CapabilityDecl {
        id_short: plot.name.clone(),
        description: plot.description.clone(),
        params: plot.params.clone(),
    }));
    if let Some(expose) = &sm.expose {
        let hidden = caps.len();
        caps.retain(|c| expose.contains(&c.id_short));
        let hidden = hidden - caps.len();
        if hidden > 0 {
            warnings.push(format!("{hidden} capabilities hidden by the expose list"));
        }
    }
    Ok((caps, warnings))
}

/// Builds the data sheet of a composed robot system.
pub fn gen_system_aas(sm: &SystemModel, components: &ComponentSet) -> Result<Generated, GenerateError> {
    let shell_id = system_shell_id(&sm.name);
    let (capabilities, warnings) = system_capabilities(sm, components)?;

    let bill = sm
        .components
        .iter()
        .map(|instance| {
            let component = &components[&instance.component];
            SubmodelElement::collection(
                &instance.instance,
                vec![
                    SubmodelElement::string("component", &component.name),
                    SubmodelElement::string("version", &component.version),
                    SubmodelElement::string("componentAas", component_shell_id(&component.name).as_str()),
                ],
            )
        })
        .collect();

    let default_nameplate = Nameplate {
        manufacturer: "unspecified".into(),
        product_designation: sm.name.clone(),
        serial_number: None,
        address: None,
    };
    let np = sm.nameplate.as_ref().unwrap_or(&default_nameplate);

    let submodels = vec![
        submodel(&shell_id, BILL_OF_MATERIALS, bill),
        submodel(&shell_id, TECHNICAL_DATA, technical_pairs(&sm.technical_data).collect()),
        submodel(&shell_id, OPERATIONS, operations()),
        submodel(&shell_id, NAMEPLATE, nameplate(np, None)),
        submodel(&shell_id, DOCUMENTATION, documentation(&sm.documentation)),
        submodel(
            &shell_id,
            CAPABILITIES,
            capabilities.into_iter().map(SubmodelElement::Capability).collect(),
        ),
    ];
    Ok(assemble(shell_id, &sm.name, AssetKind::RobotSystem, submodels, warnings))
}

pub fn format_decimal(value: f64) -> String {
    // Display on f64 never uses exponent notation and round-trips exactly.
    format!("{value}")
}

fn decimal(id_short: &str, value: f64) -> SubmodelElement {
    SubmodelElement::property(id_short, ValueType::Decimal, format_decimal(value))
}

fn integer(id_short: &str, value: u64) -> SubmodelElement {
    SubmodelElement::property(id_short, ValueType::Integer, value.to_string())
}

/// Builds the OperationalData submodel content for `ledger`.
pub fn operational_data_elements(ledger: &TelemetryLedger, now: SystemTime) -> Vec<SubmodelElement> {
    let skills = ledger
        .per_skill
        .iter()
        .map(|(skill, s)| {
            SubmodelElement::collection(
                skill,
                vec![
                    integer("count", s.count),
                    integer("successCount", s.success_count),
                    integer("errorCount", s.error_count),
                    decimal("successRate", s.success_rate()),
                    decimal("meanDurationSeconds", s.mean_duration_seconds()),
                ],
            )
        })
        .collect();
    vec![
        decimal("kilometersTravelled", ledger.kilometers_travelled()),
        decimal("hoursOfOperation", ledger.hours_of_operation(now)),
        SubmodelElement::collection("skills", skills),
    ]
}

/// Returns `env` with the system shell's OperationalData submodel created or replaced.
pub fn refresh_operational_data(
    env: &AasEnvironment,
    ledger: &TelemetryLedger,
    now: SystemTime,
) -> Result<AasEnvironment, GenerateError> {
    let shell = env.system_shell().ok_or(GenerateError::NoSystemShell)?;
    let shell_id = shell.id.clone();
    let fresh = submodel(&shell_id, OPERATIONAL_DATA, operational_data_elements(ledger, now));

    let mut out = env.clone();
    match out.submodels.iter_mut().find(|s| s.id == fresh.id) {
        Some(existing) => *existing = fresh,
        None => {
            let id = fresh.id.clone();
            out.submodels.push(fresh);
            let shell = out
                .shells
                .iter_mut()
                .find(|s| s.id == shell_id)
                .expect("shell cloned from env");
            if !shell.submodel_refs.contains(&id) {
                shell.submodel_refs.push(id);
            }
        }
    }
    Ok(out)
}

/// Capability idShorts across all Capabilities submodels of `env`.
pub fn capability_names(env: &AasEnvironment) -> BTreeSet<String> {
    env.submodels
        .iter()
        .filter(|s| s.id_short == CAPABILITIES)
        .flat_map(|s| s.elements.iter())
        .filter_map(|e| match e {
            SubmodelElement::Capability(c) => Some(c.id_short.clone()),
            _ => None,
        })
        .collect()
}
