//! In-memory asset administration shell model.
//!
//! This is a reduced subset of the Industry 4.0 meta-model: an environment
//! holds shells and submodels, shells reference submodels by identifier, and
//! submodels hold an ordered tree of five element kinds. Values are plain data;
//! [`validate`] reports every broken invariant instead of failing on the first.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Deepest allowed collection nesting inside a submodel.
pub const MAX_COLLECTION_DEPTH: usize = 8;

/// Globally unique IRI-style identifier of a shell or submodel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AasIdentifier(String);

impl AasIdentifier {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Non-empty and free of whitespace.
    pub fn is_well_formed(&self) -> bool {
        !self.0.is_empty() && !self.0.chars().any(char::is_whitespace)
    }
}

impl fmt::Display for AasIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AasIdentifier {
    fn from(value: &str) -> Self {
        Self::new(value)
    }
}

/// Returns true when `s` matches `[A-Za-z][A-Za-z0-9_]*`.
pub fn is_valid_id_short(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Returns true when every character of `s` may appear in an XML 1.0 document.
pub fn is_xml_text(s: &str) -> bool {
    s.chars().all(|c| {
        matches!(c,
            '\t' | '\n' | '\r'
            | '\u{20}'..='\u{D7FF}'
            | '\u{E000}'..='\u{FFFD}'
            | '\u{10000}'..='\u{10FFFF}')
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    String,
    Integer,
    Decimal,
    Boolean,
}

impl ValueType {
    pub const ALL: [ValueType; 4] = [
        ValueType::String,
        ValueType::Integer,
        ValueType::Decimal,
        ValueType::Boolean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::String => "string",
            ValueType::Integer => "integer",
            ValueType::Decimal => "decimal",
            ValueType::Boolean => "boolean",
        }
    }

    /// Whether `value` is a lexically valid literal of this type.
    pub fn accepts_lexical(self, value: &str) -> bool {
        match self {
            ValueType::String => is_xml_text(value),
            ValueType::Integer => value.parse::<i64>().is_ok(),
            ValueType::Decimal => value.parse::<f64>().is_ok_and(f64::is_finite),
            ValueType::Boolean => matches!(value, "true" | "false"),
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Integer | ValueType::Decimal)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown value type '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssetKind {
    SoftwareComponent,
    RobotSystem,
}

impl AssetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::SoftwareComponent => "SoftwareComponent",
            AssetKind::RobotSystem => "RobotSystem",
        }
    }
}

impl FromStr for AssetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SoftwareComponent" => Ok(AssetKind::SoftwareComponent),
            "RobotSystem" => Ok(AssetKind::RobotSystem),
            other => Err(format!("unknown asset kind '{other}'")),
        }
    }
}

/// Constraint attached to a skill parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Constraint {
    /// Inclusive numeric range, only for integer and decimal parameters.
    Range { lo: f64, hi: f64 },
    /// Allowed string values.
    Enumeration(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamSpec {
    pub name: String,
    pub value_type: ValueType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, value_type: ValueType) -> Self {
        Self {
            name: name.into(),
            value_type,
            required: true,
            constraint: None,
        }
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.constraint = Some(Constraint::Range { lo, hi });
        self
    }

    pub fn with_enumeration<I, S>(mut self, allowed: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.constraint = Some(Constraint::Enumeration(
            allowed.into_iter().map(Into::into).collect(),
        ));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperationVariable {
    pub name: String,
    pub value_type: ValueType,
}

impl OperationVariable {
    pub fn new(name: impl Into<String>, value_type: ValueType) -> Self {
        Self {
            name: name.into(),
            value_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Property {
    pub id_short: String,
    pub value_type: ValueType,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Collection {
    pub id_short: String,
    pub elements: Vec<SubmodelElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperationDecl {
    pub id_short: String,
    pub in_params: Vec<OperationVariable>,
    pub out_params: Vec<OperationVariable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CapabilityDecl {
    pub id_short: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FileRef {
    pub id_short: String,
    pub mime_type: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SubmodelElement {
    Property(Property),
    Collection(Collection),
    Operation(OperationDecl),
    Capability(CapabilityDecl),
    File(FileRef),
}

impl SubmodelElement {
    pub fn property(id_short: impl Into<String>, value_type: ValueType, value: impl Into<String>) -> Self {
        SubmodelElement::Property(Property {
            id_short: id_short.into(),
            value_type,
            value: value.into(),
        })
    }

    pub fn string(id_short: impl Into<String>, value: impl Into<String>) -> Self {
        Self::property(id_short, ValueType::String, value)
    }

    pub fn collection(id_short: impl Into<String>, elements: Vec<SubmodelElement>) -> Self {
        SubmodelElement::Collection(Collection {
            id_short: id_short.into(),
            elements,
        })
    }

    pub fn id_short(&self) -> &str {
        match self {
            SubmodelElement::Property(p) => &p.id_short,
            SubmodelElement::Collection(c) => &c.id_short,
            SubmodelElement::Operation(o) => &o.id_short,
            SubmodelElement::Capability(c) => &c.id_short,
            SubmodelElement::File(f) => &f.id_short,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SubmodelElement::Property(_) => "property",
            SubmodelElement::Collection(_) => "collection",
            SubmodelElement::Operation(_) => "operation",
            SubmodelElement::Capability(_) => "capability",
            SubmodelElement::File(_) => "file",
        }
    }

    /// Direct children; empty for everything but collections.
    pub fn children(&self) -> &[SubmodelElement] {
        match self {
            SubmodelElement::Collection(c) => &c.elements,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Submodel {
    pub id: AasIdentifier,
    pub id_short: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_id: Option<String>,
    pub elements: Vec<SubmodelElement>,
}

impl Submodel {
    pub fn element(&self, id_short: &str) -> Option<&SubmodelElement> {
        self.elements.iter().find(|e| e.id_short() == id_short)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Shell {
    pub id: AasIdentifier,
    pub id_short: String,
    pub asset_kind: AssetKind,
    pub submodel_refs: Vec<AasIdentifier>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AasEnvironment {
    pub shells: Vec<Shell>,
    pub submodels: Vec<Submodel>,
}

impl AasEnvironment {
    pub fn shell(&self, id_short: &str) -> Option<&Shell> {
        self.shells.iter().find(|s| s.id_short == id_short)
    }

    pub fn submodel_by_id(&self, id: &AasIdentifier) -> Option<&Submodel> {
        self.submodels.iter().find(|s| &s.id == id)
    }

    /// Submodels referenced by `shell`, in reference order. Dangling refs are skipped.
    pub fn submodels_of<'a>(&'a self, shell: &'a Shell) -> impl Iterator<Item = &'a Submodel> + 'a {
        shell
            .submodel_refs
            .iter()
            .filter_map(move |id| self.submodel_by_id(id))
    }

    pub fn shell_submodel<'a>(&'a self, shell: &'a Shell, id_short: &str) -> Option<&'a Submodel> {
        self.submodels_of(shell).find(|s| s.id_short == id_short)
    }

    /// First shell describing a robot system.
    pub fn system_shell(&self) -> Option<&Shell> {
        self.shells
            .iter()
            .find(|s| s.asset_kind == AssetKind::RobotSystem)
    }
}

/// A node addressed by an idShort path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Node<'a> {
    Shell(&'a Shell),
    Submodel(&'a Submodel),
    Element(&'a SubmodelElement),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("empty path")]
    EmptyPath,
    #[error("no node '{segment}' under '{prefix}'")]
    NotFound { segment: String, prefix: String },
}

/// Resolves `Shell/Submodel/Element/...` against `env`. Segments are matched
/// case-sensitively; descending below a non-collection element fails.
pub fn resolve<'a>(env: &'a AasEnvironment, path: &str) -> Result<Node<'a>, ResolveError> {
    if path.is_empty() {
        return Err(ResolveError::EmptyPath);
    }
    let mut segments = path.split('/');
    let mut prefix = String::new();
    let not_found = |segment: &str, prefix: &str| ResolveError::NotFound {
        segment: segment.to_string(),
        prefix: prefix.to_string(),
    };

    let first = segments.next().unwrap_or_default();
    let shell = env.shell(first).ok_or_else(|| not_found(first, ""))?;
    prefix.push_str(first);

    let Some(second) = segments.next() else {
        return Ok(Node::Shell(shell));
    };
    let submodel = env
        .shell_submodel(shell, second)
        .ok_or_else(|| not_found(second, &prefix))?;
    prefix.push('/');
    prefix.push_str(second);

    let mut siblings: &[SubmodelElement] = &submodel.elements;
    let mut node = Node::Submodel(submodel);
    for segment in segments {
        let element = siblings
            .iter()
            .find(|e| e.id_short() == segment)
            .ok_or_else(|| not_found(segment, &prefix))?;
        prefix.push('/');
        prefix.push_str(segment);
        siblings = element.children();
        node = Node::Element(element);
    }
    Ok(node)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ViolationCode {
    InvalidIdentifier,
    DuplicateId,
    InvalidIdShort,
    DuplicateIdShort,
    DuplicateSubmodelRef,
    UnresolvedSubmodelRef,
    LexicalMismatch,
    InvalidCharacter,
    NestingTooDeep,
    DuplicateParam,
    InvalidConstraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.code, self.path, self.message)
    }
}

struct Validator {
    violations: Vec<Violation>,
}

impl Validator {
    fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            path: path.into(),
            message: message.into(),
        });
    }

    fn id_short(&mut self, id_short: &str, path: &str) {
        if !is_valid_id_short(id_short) {
            self.push(
                ViolationCode::InvalidIdShort,
                path,
                format!("idShort '{id_short}' does not match [A-Za-z][A-Za-z0-9_]*"),
            );
        }
    }

    fn text(&mut self, what: &str, value: &str, path: &str) {
        if !is_xml_text(value) {
            self.push(
                ViolationCode::InvalidCharacter,
                path,
                format!("{what} contains characters not representable in XML"),
            );
        }
    }

    fn elements(&mut self, elements: &[SubmodelElement], parent: &str, depth: usize) {
        let mut seen = HashSet::new();
        for element in elements {
            let path = format!("{parent}/{}", element.id_short());
            self.id_short(element.id_short(), &path);
            if !seen.insert(element.id_short()) {
                self.push(
                    ViolationCode::DuplicateIdShort,
                    &path,
                    format!("idShort '{}' repeated among siblings", element.id_short()),
                );
            }
            match element {
                SubmodelElement::Property(p) => {
                    if !p.value_type.accepts_lexical(&p.value) {
                        let code = if p.value_type == ValueType::String {
                            ViolationCode::InvalidCharacter
                        } else {
                            ViolationCode::LexicalMismatch
                        };
                        self.push(
                            code,
                            &path,
                            format!("value '{}' is not a valid {}", p.value.escape_debug(), p.value_type),
                        );
                    }
                }
                SubmodelElement::Collection(c) => {
                    if depth + 1 > MAX_COLLECTION_DEPTH {
                        self.push(
                            ViolationCode::NestingTooDeep,
                            &path,
                            format!("collection nesting exceeds {MAX_COLLECTION_DEPTH}"),
                        );
                    } else {
                        self.elements(&c.elements, &path, depth + 1);
                    }
                }
                SubmodelElement::Operation(op) => {
                    for (dir, vars) in [("in", &op.in_params), ("out", &op.out_params)] {
                        let mut names = HashSet::new();
                        for var in vars {
                            self.text("operation variable name", &var.name, &path);
                            if !names.insert(var.name.as_str()) {
                                self.push(
                                    ViolationCode::DuplicateParam,
                                    &path,
                                    format!("{dir} variable '{}' declared twice", var.name),
                                );
                            }
                        }
                    }
                }
                SubmodelElement::Capability(cap) => {
                    self.text("description", &cap.description, &path);
                    self.params(&cap.params, &path);
                }
                SubmodelElement::File(file) => {
                    self.text("mime type", &file.mime_type, &path);
                    self.text("file path", &file.path, &path);
                }
            }
        }
    }

    fn params(&mut self, params: &[ParamSpec], path: &str) {
        let mut names = HashSet::new();
        for param in params {
            self.text("parameter name", &param.name, path);
            if param.name.is_empty() {
                self.push(ViolationCode::InvalidConstraint, path, "parameter with empty name");
            }
            if !names.insert(param.name.as_str()) {
                self.push(
                    ViolationCode::DuplicateParam,
                    path,
                    format!("parameter '{}' declared twice", param.name),
                );
            }
            match &param.constraint {
                None => {}
                Some(Constraint::Range { lo, hi }) => {
                    if !param.value_type.is_numeric() {
                        self.push(
                            ViolationCode::InvalidConstraint,
                            path,
                            format!("range on non-numeric parameter '{}'", param.name),
                        );
                    }
                    // also rejects NaN bounds
                    if !lo.is_finite() || !hi.is_finite() || lo > hi {
                        self.push(
                            ViolationCode::InvalidConstraint,
                            path,
                            format!("range [{lo}, {hi}] of '{}' is empty or unbounded", param.name),
                        );
                    }
                }
                Some(Constraint::Enumeration(allowed)) => {
                    if param.value_type != ValueType::String {
                        self.push(
                            ViolationCode::InvalidConstraint,
                            path,
                            format!("enumeration on non-string parameter '{}'", param.name),
                        );
                    }
                    if allowed.is_empty() {
                        self.push(
                            ViolationCode::InvalidConstraint,
                            path,
                            format!("empty enumeration on '{}'", param.name),
                        );
                    }
                    for value in allowed {
                        self.text("enumeration value", value, path);
                    }
                }
            }
        }
    }
}

/// Checks every model invariant; an empty result means the environment is well formed.
pub fn validate(env: &AasEnvironment) -> Vec<Violation> {
    let mut v = Validator {
        violations: Vec::new(),
    };

    let mut id_counts: HashMap<&AasIdentifier, usize> = HashMap::new();
    for id in env
        .shells
        .iter()
        .map(|s| &s.id)
        .chain(env.submodels.iter().map(|s| &s.id))
    {
        *id_counts.entry(id).or_default() += 1;
        if !id.is_well_formed() || !is_xml_text(id.as_str()) {
            v.push(
                ViolationCode::InvalidIdentifier,
                id.as_str(),
                "identifier must be non-empty and free of whitespace",
            );
        }
    }
    let mut reported = HashSet::new();
    for id in env
        .shells
        .iter()
        .map(|s| &s.id)
        .chain(env.submodels.iter().map(|s| &s.id))
    {
        if id_counts[id] > 1 && reported.insert(id) {
            v.push(
                ViolationCode::DuplicateId,
                id.as_str(),
                format!("identifier used {} times", id_counts[id]),
            );
        }
    }

    // path prefix for each submodel: the first shell referencing it, else its id
    let mut submodel_paths: HashMap<&AasIdentifier, String> = HashMap::new();
    let mut shell_names = HashSet::new();
    for shell in &env.shells {
        let path = shell.id_short.as_str();
        v.id_short(&shell.id_short, path);
        if !shell_names.insert(shell.id_short.as_str()) {
            v.push(
                ViolationCode::DuplicateIdShort,
                path,
                format!("shell idShort '{}' used twice", shell.id_short),
            );
        }
        let mut refs = HashSet::new();
        let mut sub_names = HashSet::new();
        for r in &shell.submodel_refs {
            if !refs.insert(r) {
                v.push(
                    ViolationCode::DuplicateSubmodelRef,
                    path,
                    format!("submodel '{r}' referenced twice"),
                );
                continue;
            }
            match env.submodel_by_id(r) {
                Some(sm) => {
                    submodel_paths
                        .entry(r)
                        .or_insert_with(|| format!("{}/{}", shell.id_short, sm.id_short));
                    if !sub_names.insert(sm.id_short.as_str()) {
                        v.push(
                            ViolationCode::DuplicateIdShort,
                            format!("{}/{}", shell.id_short, sm.id_short),
                            format!("two submodels named '{}' in one shell", sm.id_short),
                        );
                    }
                }
                None => v.push(
                    ViolationCode::UnresolvedSubmodelRef,
                    path,
                    format!("submodel '{r}' does not exist"),
                ),
            }
        }
    }

    for submodel in &env.submodels {
        let path = submodel_paths
            .get(&submodel.id)
            .cloned()
            .unwrap_or_else(|| submodel.id.to_string());
        v.id_short(&submodel.id_short, &path);
        if let Some(semantic_id) = &submodel.semantic_id {
            v.text("semanticId", semantic_id, &path);
        }
        v.elements(&submodel.elements, &path, 0);
    }

    v.violations
}
