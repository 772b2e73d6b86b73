//! Component and system description documents.
//!
//! These JSON documents stand in for the model-driven toolchain's component
//! and system models. Parsing walks the document by hand so every error can
//! name the exact field path (`skills[0].params[1].range`), rejects unknown
//! fields, and applies the documented defaults.

use std::collections::{BTreeMap, HashSet};

use serde_json::{Map, Value};

use crate::model::{is_valid_id_short, Constraint, ParamSpec, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated at {path}: {message}")]
    Invariant { path: String, message: String },
    #[error("unresolved component '{0}'")]
    UnresolvedComponent(String),
    #[error("task plot '{plot}' uses unknown skill '{skill}'")]
    UnknownSkillInTaskPlot { plot: String, skill: String },
    #[error("exposed capability '{0}' is neither a skill nor a task plot of the system")]
    UnknownExposedCapability(String),
}

impl IngestError {
    /// Field path the error refers to, when it has one.
    pub fn path(&self) -> Option<&str> {
        match self {
            IngestError::Schema { path, .. } | IngestError::Invariant { path, .. } => Some(path),
            _ => None,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Syntax { .. } => "SyntaxError",
            IngestError::Schema { .. } => "SchemaError",
            IngestError::Invariant { .. } => "InvariantError",
            IngestError::UnresolvedComponent(_) => "UnresolvedComponent",
            IngestError::UnknownSkillInTaskPlot { .. } => "UnknownSkillInTaskPlot",
            IngestError::UnknownExposedCapability(_) => "UnknownExposedCapability",
        }
    }
}

type Result<T> = std::result::Result<T, IngestError>;

/// TechnicalData keys the generator emits itself.
pub const RESERVED_TECHNICAL_KEYS: [&str; 2] = ["license", "environment"];

pub const DEFAULT_ENVIRONMENT: &str = "unspecified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortDirection {
    Provides,
    Requires,
}

impl PortDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            PortDirection::Provides => "provides",
            PortDirection::Requires => "requires",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServicePort {
    pub name: String,
    pub direction: PortDirection,
    pub pattern: String,
    pub message_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultField {
    pub name: String,
    pub value_type: ValueType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillDefinition {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub result_fields: Vec<ResultField>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nameplate {
    pub manufacturer: String,
    pub product_designation: String,
    pub serial_number: Option<String>,
    pub address: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocEntry {
    pub title: String,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentModel {
    pub name: String,
    pub version: String,
    pub license: String,
    pub environment: String,
    pub services: Vec<ServicePort>,
    pub skills: Vec<SkillDefinition>,
    /// Ordered name/value pairs.
    pub technical_data: Vec<(String, String)>,
    pub nameplate: Nameplate,
    pub documentation: Vec<DocEntry>,
}

impl ComponentModel {
    pub fn skill(&self, name: &str) -> Option<&SkillDefinition> {
        self.skills.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentInstance {
    pub instance: String,
    pub component: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPlot {
    pub name: String,
    pub description: String,
    pub skills_used: Vec<String>,
    pub params: Vec<ParamSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub components: Vec<ComponentInstance>,
    pub task_plots: Vec<TaskPlot>,
    /// Capabilities visible from the outside; `None` exposes everything.
    pub expose: Option<Vec<String>>,
    pub nameplate: Option<Nameplate>,
    pub technical_data: Vec<(String, String)>,
    pub documentation: Vec<DocEntry>,
}

/// Component models indexed by name.
pub type ComponentSet = BTreeMap<String, ComponentModel>;

pub fn component_set(components: impl IntoIterator<Item = ComponentModel>) -> ComponentSet {
    components
        .into_iter()
        .map(|c| (c.name.clone(), c))
        .collect()
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn invariant(path: impl Into<String>, message: impl Into<String>) -> IngestError {
    IngestError::Invariant {
        path: path.into(),
        message: message.into(),
    }
}

/// Field reader over one JSON object; tracks consumed keys so leftovers can be reported.
struct Fields<'a> {
    path: String,
    map: &'a Map<String, Value>,
    used: HashSet<&'static str>,
}

impl<'a> Fields<'a> {
    fn of(value: &'a Value, path: &str) -> Result<Self> {
        match value {
            Value::Object(map) => Ok(Self {
                path: path.to_string(),
                map,
                used: HashSet::new(),
            }),
            _ => Err(schema(display_path(path), "expected an object")),
        }
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn optional(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn required(&mut self, key: &'static str) -> Result<&'a Value> {
        self.optional(key)
            .ok_or_else(|| schema(self.at(key), "missing required field"))
    }

    fn string(&mut self, key: &'static str) -> Result<String> {
        let value = self.required(key)?;
        as_string(value, &self.at(key))
    }

    fn opt_string(&mut self, key: &'static str) -> Result<Option<String>> {
        self.optional(key)
            .map(|v| as_string(v, &self.at(key)))
            .transpose()
    }

    fn array(&mut self, key: &'static str) -> Result<&'a [Value]> {
        let value = self.required(key)?;
        as_array(value, &self.at(key))
    }

    fn opt_array(&mut self, key: &'static str) -> Result<Option<&'a [Value]>> {
        self.optional(key)
            .map(|v| as_array(v, &self.at(key)))
            .transpose()
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(unknown) => Err(schema(self.at(unknown), "unknown field")),
            None => Ok(()),
        }
    }
}

fn display_path(path: &str) -> &str {
    if path.is_empty() {
        "$"
    } else {
        path
    }
}

fn as_string(value: &Value, path: &str) -> Result<String> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| schema(path, "expected a string"))
}

fn as_array<'a>(value: &'a Value, path: &str) -> Result<&'a [Value]> {
    value
        .as_array()
        .map(Vec::as_slice)
        .ok_or_else(|| schema(path, "expected an array"))
}

fn value_type(value: &Value, path: &str) -> Result<ValueType> {
    let s = as_string(value, path)?;
    s.parse().map_err(|e: String| schema(path, e))
}

fn parse_json(document: &str) -> Result<Value> {
    serde_json::from_str(document).map_err(|e| IngestError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn parse_param(value: &Value, path: &str) -> Result<ParamSpec> {
    let mut f = Fields::of(value, path)?;
    let name = f.string("name")?;
    let value_type = value_type(f.required("type")?, &f.at("type"))?;
    let required = match f.optional("required") {
        None => true,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| schema(f.at("required"), "expected a boolean"))?,
    };
    let range = f.optional("range");
    let allowed = f.optional("enum");
    let constraint = match (range, allowed) {
        (Some(_), Some(_)) => {
            return Err(schema(f.at("enum"), "range and enum are mutually exclusive"))
        }
        (Some(range), None) => {
            let path = f.at("range");
            let bounds = as_array(range, &path)?;
            let [lo, hi] = bounds else {
                return Err(schema(path, "expected [lo, hi]"));
            };
            let (Some(lo), Some(hi)) = (lo.as_f64(), hi.as_f64()) else {
                return Err(schema(path, "range bounds must be numbers"));
            };
            if !value_type.is_numeric() {
                return Err(invariant(path, "range constraint on a non-numeric parameter"));
            }
            if lo > hi {
                return Err(invariant(path, format!("empty range [{lo}, {hi}]")));
            }
            Some(Constraint::Range { lo, hi })
        }
        (None, Some(allowed)) => {
            let path = f.at("enum");
            let items = as_array(allowed, &path)?
                .iter()
                .enumerate()
                .map(|(i, v)| as_string(v, &format!("{path}[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            if value_type != ValueType::String {
                return Err(invariant(path, "enumeration on a non-string parameter"));
            }
            if items.is_empty() {
                return Err(invariant(path, "empty enumeration"));
            }
            Some(Constraint::Enumeration(items))
        }
        (None, None) => None,
    };
    f.finish()?;
    if name.is_empty() {
        return Err(invariant(join(path, "name"), "parameter name is empty"));
    }
    Ok(ParamSpec {
        name,
        value_type,
        required,
        constraint,
    })
}

fn parse_params(values: &[Value], path: &str) -> Result<Vec<ParamSpec>> {
    let mut seen = HashSet::new();
    let mut params = Vec::with_capacity(values.len());
    for (i, value) in values.iter().enumerate() {
        let item = format!("{path}[{i}]");
        let param = parse_param(value, &item)?;
        if !seen.insert(param.name.clone()) {
            return Err(invariant(
                join(&item, "name"),
                format!("duplicate parameter '{}'", param.name),
            ));
        }
        params.push(param);
    }
    Ok(params)
}

fn check_id_short(name: &str, path: String, what: &str) -> Result<()> {
    if is_valid_id_short(name) {
        Ok(())
    } else {
        Err(invariant(
            path,
            format!("{what} '{name}' must match [A-Za-z][A-Za-z0-9_]*"),
        ))
    }
}

fn parse_skill(value: &Value, path: &str) -> Result<SkillDefinition> {
    let mut f = Fields::of(value, path)?;
    let name = f.string("name")?;
    let description = f.string("description")?;
    let params = parse_params(f.array("params")?, &f.at("params"))?;
    let results_path = f.at("results");
    let mut result_fields = Vec::new();
    for (i, item) in f.array("results")?.iter().enumerate() {
        let mut r = Fields::of(item, &format!("{results_path}[{i}]"))?;
        let name = r.string("name")?;
        let value_type = value_type(r.required("type")?, &r.at("type"))?;
        r.finish()?;
        result_fields.push(ResultField { name, value_type });
    }
    f.finish()?;
    check_id_short(&name, join(path, "name"), "skill name")?;
    Ok(SkillDefinition {
        name,
        description,
        params,
        result_fields,
    })
}

fn parse_technical_data(value: &Value, path: &str) -> Result<Vec<(String, String)>> {
    let Value::Object(map) = value else {
        return Err(schema(path, "expected an object"));
    };
    let mut pairs = Vec::with_capacity(map.len());
    for (key, v) in map {
        let key_path = join(path, key);
        let v = as_string(v, &key_path)?;
        check_id_short(key, key_path.clone(), "technical data key")?;
        if RESERVED_TECHNICAL_KEYS.contains(&key.as_str()) {
            return Err(invariant(key_path, format!("'{key}' is reserved")));
        }
        pairs.push((key.clone(), v));
    }
    Ok(pairs)
}

fn parse_nameplate(value: &Value, path: &str) -> Result<Nameplate> {
    let mut f = Fields::of(value, path)?;
    let nameplate = Nameplate {
        manufacturer: f.string("manufacturer")?,
        product_designation: f.string("productDesignation")?,
        serial_number: f.opt_string("serialNumber")?,
        address: f.opt_string("address")?,
    };
    f.finish()?;
    Ok(nameplate)
}

fn parse_documentation(values: &[Value], path: &str) -> Result<Vec<DocEntry>> {
    values
        .iter()
        .enumerate()
        .map(|(i, value)| {
            let mut f = Fields::of(value, &format!("{path}[{i}]"))?;
            let entry = DocEntry {
                title: f.string("title")?,
                uri: f.string("uri")?,
            };
            f.finish()?;
            Ok(entry)
        })
        .collect()
}

/// Parses a `*.component.json` document.
pub fn parse_component(document: &str) -> Result<ComponentModel> {
    component_from_value(&parse_json(document)?)
}

pub fn component_from_value(root: &Value) -> Result<ComponentModel> {
    let mut f = Fields::of(root, "")?;
    let name = f.string("name")?;
    let version = f.string("version")?;
    let license = f.string("license")?;
    let environment = f
        .opt_string("environment")?
        .unwrap_or_else(|| DEFAULT_ENVIRONMENT.to_string());

    let services_path = f.at("services");
    let mut services = Vec::new();
    let mut service_names = HashSet::new();
    for (i, value) in f.array("services")?.iter().enumerate() {
        let item = format!("{services_path}[{i}]");
        let mut s = Fields::of(value, &item)?;
        let port_name = s.string("name")?;
        let direction = match s.opt_string("direction")?.as_deref() {
            None | Some("provides") => PortDirection::Provides,
            Some("requires") => PortDirection::Requires,
            Some(other) => {
                return Err(schema(
                    s.at("direction"),
                    format!("expected 'provides' or 'requires', got '{other}'"),
                ))
            }
        };
        let pattern = s.string("pattern")?;
        let message_type = s.string("messageType")?;
        s.finish()?;
        check_id_short(&port_name, join(&item, "name"), "service name")?;
        if !service_names.insert(port_name.clone()) {
            return Err(invariant(
                join(&item, "name"),
                format!("duplicate service '{port_name}'"),
            ));
        }
        services.push(ServicePort {
            name: port_name,
            direction,
            pattern,
            message_type,
        });
    }

    let skills_path = f.at("skills");
    let mut skills: Vec<SkillDefinition> = Vec::new();
    for (i, value) in f.array("skills")?.iter().enumerate() {
        let item = format!("{skills_path}[{i}]");
        let skill = parse_skill(value, &item)?;
        if skills.iter().any(|s| s.name == skill.name) {
            return Err(invariant(
                join(&item, "name"),
                format!("duplicate skill '{}'", skill.name),
            ));
        }
        skills.push(skill);
    }

    let technical_data = parse_technical_data(f.required("technicalData")?, &f.at("technicalData"))?;
    let nameplate = parse_nameplate(f.required("nameplate")?, &f.at("nameplate"))?;
    let documentation = parse_documentation(f.array("documentation")?, &f.at("documentation"))?;
    f.finish()?;

    check_id_short(&name, "name".into(), "component name")?;
    if version.is_empty() {
        return Err(invariant("version", "version is empty"));
    }

    Ok(ComponentModel {
        name,
        version,
        license,
        environment,
        services,
        skills,
        technical_data,
        nameplate,
        documentation,
    })
}

/// Parses a `*.system.json` document and resolves it against `components`.
pub fn parse_system(document: &str, components: &ComponentSet) -> Result<SystemModel> {
    system_from_value(&parse_json(document)?, components)
}

pub fn system_from_value(root: &Value, components: &ComponentSet) -> Result<SystemModel> {
    let mut f = Fields::of(root, "")?;
    let name = f.string("name")?;

    let instances_path = f.at("components");
    let mut instances: Vec<ComponentInstance> = Vec::new();
    for (i, value) in f.array("components")?.iter().enumerate() {
        let item = format!("{instances_path}[{i}]");
        let mut c = Fields::of(value, &item)?;
        let instance = ComponentInstance {
            instance: c.string("instance")?,
            component: c.string("component")?,
        };
        c.finish()?;
        check_id_short(&instance.instance, join(&item, "instance"), "instance name")?;
        if instances.iter().any(|x| x.instance == instance.instance) {
            return Err(invariant(
                join(&item, "instance"),
                format!("duplicate instance '{}'", instance.instance),
            ));
        }
        instances.push(instance);
    }

    let plots_path = f.at("taskPlots");
    let mut task_plots: Vec<TaskPlot> = Vec::new();
    for (i, value) in f.array("taskPlots")?.iter().enumerate() {
        let item = format!("{plots_path}[{i}]");
        let mut t = Fields::of(value, &item)?;
        let plot_name = t.string("name")?;
        let description = t.string("description")?;
        let used_path = t.at("skillsUsed");
        let skills_used = t
            .array("skillsUsed")?
            .iter()
            .enumerate()
            .map(|(j, v)| as_string(v, &format!("{used_path}[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let params = match t.opt_array("params")? {
            Some(values) => parse_params(values, &t.at("params"))?,
            None => Vec::new(),
        };
        t.finish()?;
        check_id_short(&plot_name, join(&item, "name"), "task plot name")?;
        if task_plots.iter().any(|p| p.name == plot_name) {
            return Err(invariant(
                join(&item, "name"),
                format!("duplicate task plot '{plot_name}'"),
            ));
        }
        task_plots.push(TaskPlot {
            name: plot_name,
            description,
            skills_used,
            params,
        });
    }

    let expose = match f.opt_array("expose")? {
        Some(values) => {
            let path = f.at("expose");
            Some(
                values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| as_string(v, &format!("{path}[{i}]")))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };
    let nameplate = f
        .optional("nameplate")
        .map(|v| parse_nameplate(v, "nameplate"))
        .transpose()?;
    let technical_data = match f.optional("technicalData") {
        Some(v) => parse_technical_data(v, "technicalData")?,
        None => Vec::new(),
    };
    let documentation = match f.opt_array("documentation")? {
        Some(values) => parse_documentation(values, "documentation")?,
        None => Vec::new(),
    };
    f.finish()?;
    check_id_short(&name, "name".into(), "system name")?;

    // reference resolution
    let mut used: Vec<&ComponentModel> = Vec::new();
    for instance in &instances {
        let component = components
            .get(&instance.component)
            .ok_or_else(|| IngestError::UnresolvedComponent(instance.component.clone()))?;
        used.push(component);
    }
    let has_skill = |skill: &str| used.iter().any(|c| c.skill(skill).is_some());
    for (i, plot) in task_plots.iter().enumerate() {
        if has_skill(&plot.name) {
            return Err(invariant(
                format!("taskPlots[{i}].name"),
                format!("task plot '{}' shadows a component skill", plot.name),
            ));
        }
        if let Some(skill) = plot.skills_used.iter().find(|s| !has_skill(s)) {
            return Err(IngestError::UnknownSkillInTaskPlot {
                plot: plot.name.clone(),
                skill: skill.clone(),
            });
        }
    }
    if let Some(expose) = &expose {
        if let Some(unknown) = expose
            .iter()
            .find(|e| !has_skill(e) && !task_plots.iter().any(|p| &&p.name == e))
        {
            return Err(IngestError::UnknownExposedCapability(unknown.clone()));
        }
    }

    Ok(SystemModel {
        name,
        components: instances,
        task_plots,
        expose,
        nameplate,
        technical_data,
        documentation,
    })
}

fn param_to_json(param: &ParamSpec) -> Value {
    let mut map = Map::new();
    map.insert("name".into(), param.name.clone().into());
    map.insert("type".into(), param.value_type.as_str().into());
    map.insert("required".into(), param.required.into());
    match &param.constraint {
        Some(Constraint::Range { lo, hi }) => {
            map.insert("range".into(), Value::from(vec![*lo, *hi]));
        }
        Some(Constraint::Enumeration(items)) => {
            map.insert("enum".into(), Value::from(items.clone()));
        }
        None => {}
    }
    Value::Object(map)
}

fn nameplate_to_json(nameplate: &Nameplate) -> Value {
    let mut map = Map::new();
    map.insert("manufacturer".into(), nameplate.manufacturer.clone().into());
    map.insert(
        "productDesignation".into(),
        nameplate.product_designation.clone().into(),
    );
    if let Some(serial) = &nameplate.serial_number {
        map.insert("serialNumber".into(), serial.clone().into());
    }
    if let Some(address) = &nameplate.address {
        map.insert("address".into(), address.clone().into());
    }
    Value::Object(map)
}

fn pairs_to_json(pairs: &[(String, String)]) -> Value {
    Value::Object(
        pairs
            .iter()
            .map(|(k, v)| (k.clone(), Value::from(v.clone())))
            .collect(),
    )
}

fn docs_to_json(docs: &[DocEntry]) -> Value {
    docs.iter()
        .map(|d| serde_json::json!({ "title": d.title, "uri": d.uri }))
        .collect()
}

/// Renders the model back into its document form with every default made explicit.
pub fn component_to_json(model: &ComponentModel) -> Value {
    serde_json::json!({
        "name": model.name,
        "version": model.version,
        "license": model.license,
        "environment": model.environment,
        "services": model.services.iter().map(|s| serde_json::json!({
            "name": s.name,
            "direction": s.direction.as_str(),
            "pattern": s.pattern,
            "messageType": s.message_type,
        })).collect::<Vec<_>>(),
        "skills": model.skills.iter().map(|s| serde_json::json!({
            "name": s.name,
            "description": s.description,
            "params": s.params.iter().map(param_to_json).collect::<Vec<_>>(),
            "results": s.result_fields.iter().map(|r| serde_json::json!({
                "name": r.name,
                "type": r.value_type.as_str(),
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "technicalData": pairs_to_json(&model.technical_data),
        "nameplate": nameplate_to_json(&model.nameplate),
        "documentation": docs_to_json(&model.documentation),
    })
}

pub fn system_to_json(model: &SystemModel) -> Value {
    let mut root = serde_json::json!({
        "name": model.name,
        "components": model.components.iter().map(|c| serde_json::json!({
            "instance": c.instance,
            "component": c.component,
        })).collect::<Vec<_>>(),
        "taskPlots": model.task_plots.iter().map(|p| {
            let mut plot = serde_json::json!({
                "name": p.name,
                "description": p.description,
                "skillsUsed": p.skills_used,
            });
            if !p.params.is_empty() {
                plot["params"] = p.params.iter().map(param_to_json).collect();
            }
            plot
        }).collect::<Vec<_>>(),
    });
    if let Some(expose) = &model.expose {
        root["expose"] = Value::from(expose.clone());
    }
    if let Some(nameplate) = &model.nameplate {
        root["nameplate"] = nameplate_to_json(nameplate);
    }
    if !model.technical_data.is_empty() {
        root["technicalData"] = pairs_to_json(&model.technical_data);
    }
    if !model.documentation.is_empty() {
        root["documentation"] = docs_to_json(&model.documentation);
    }
    root
}
