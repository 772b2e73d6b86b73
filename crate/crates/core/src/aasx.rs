//! Deterministic AASX packaging.
//!
//! A package is a zip archive holding a single `aasx/env.xml` document. The
//! zip entry is deflated at a fixed level with the DOS epoch as its timestamp,
//! and the XML is emitted with a fixed attribute order, two-space indentation,
//! UTF-8 and LF line endings, so equal environments always produce identical
//! bytes. The XML vocabulary is documented in `docs/aasx-format.md`.

use std::fmt::Write as _;
use std::io::{Cursor, Read, Write};

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::model::{
    validate, AasEnvironment, AasIdentifier, CapabilityDecl, Collection, Constraint, FileRef,
    OperationDecl, OperationVariable, ParamSpec, Property, Shell, Submodel, SubmodelElement,
    Violation,
};

/// Path of the environment document inside the package.
pub const ENV_ENTRY: &str = "aasx/env.xml";

const DEFLATE_LEVEL: i64 = 6;

#[derive(Debug, thiserror::Error)]
pub enum AasxError {
    #[error("environment is invalid ({} violations)", .0.len())]
    InvalidEnvironment(Vec<Violation>),
    #[error("not a zip archive: {0}")]
    NotAZip(String),
    #[error("package has no entry '{0}'")]
    MissingEntry(String),
    #[error("XML error at byte {position}: {message}")]
    XmlError { position: u64, message: String },
    #[error("package environment is invalid ({} violations)", .0.len())]
    ModelError(Vec<Violation>),
}

impl AasxError {
    pub fn code(&self) -> &'static str {
        match self {
            AasxError::InvalidEnvironment(_) => "InvalidEnvironment",
            AasxError::NotAZip(_) => "NotAZip",
            AasxError::MissingEntry(_) => "MissingEntry",
            AasxError::XmlError { .. } => "XmlError",
            AasxError::ModelError(_) => "ModelError",
        }
    }
}

fn escape_into(out: &mut String, s: &str, attribute: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\r' => out.push_str("&#13;"),
            '\n' if attribute => out.push_str("&#10;"),
            '\t' if attribute => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

struct XmlOut {
    buf: String,
}

impl XmlOut {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.buf.push_str("  ");
        }
    }

    fn open(&mut self, depth: usize, name: &str, attrs: &[(&str, &str)], empty: bool) {
        self.indent(depth);
        self.buf.push('<');
        self.buf.push_str(name);
        for (key, value) in attrs {
            self.buf.push(' ');
            self.buf.push_str(key);
            self.buf.push_str("=\"");
            escape_into(&mut self.buf, value, true);
            self.buf.push('"');
        }
        self.buf.push_str(if empty { "/>\n" } else { ">\n" });
    }

    fn close(&mut self, depth: usize, name: &str) {
        self.indent(depth);
        let _ = writeln!(self.buf, "</{name}>");
    }

    fn element(&mut self, depth: usize, element: &SubmodelElement) {
        match element {
            SubmodelElement::Property(p) => {
                self.indent(depth);
                self.buf.push_str("<property idShort=\"");
                escape_into(&mut self.buf, &p.id_short, true);
                let _ = write!(self.buf, "\" valueType=\"{}\">", p.value_type);
                escape_into(&mut self.buf, &p.value, false);
                self.buf.push_str("</property>\n");
            }
            SubmodelElement::Collection(c) => {
                let empty = c.elements.is_empty();
                self.open(depth, "collection", &[("idShort", &c.id_short)], empty);
                if !empty {
                    for child in &c.elements {
                        self.element(depth + 1, child);
                    }
                    self.close(depth, "collection");
                }
            }
            SubmodelElement::Operation(op) => {
                let empty = op.in_params.is_empty() && op.out_params.is_empty();
                self.open(depth, "operation", &[("idShort", &op.id_short)], empty);
                if !empty {
                    for (tag, vars) in [("in", &op.in_params), ("out", &op.out_params)] {
                        for var in vars {
                            self.open(
                                depth + 1,
                                tag,
                                &[("name", &var.name), ("valueType", var.value_type.as_str())],
                                true,
                            );
                        }
                    }
                    self.close(depth, "operation");
                }
            }
            SubmodelElement::Capability(cap) => {
                let empty = cap.params.is_empty();
                self.open(
                    depth,
                    "capability",
                    &[("idShort", &cap.id_short), ("description", &cap.description)],
                    empty,
                );
                if !empty {
                    for param in &cap.params {
                        self.param(depth + 1, param);
                    }
                    self.close(depth, "capability");
                }
            }
            SubmodelElement::File(file) => self.open(
                depth,
                "file",
                &[
                    ("idShort", &file.id_short),
                    ("mimeType", &file.mime_type),
                    ("path", &file.path),
                ],
                true,
            ),
        }
    }

    fn param(&mut self, depth: usize, param: &ParamSpec) {
        let required = if param.required { "true" } else { "false" };
        let mut attrs = vec![
            ("name", param.name.clone()),
            ("valueType", param.value_type.as_str().to_string()),
            ("required", required.to_string()),
        ];
        if let Some(Constraint::Range { lo, hi }) = &param.constraint {
            attrs.push(("min", format!("{lo}")));
            attrs.push(("max", format!("{hi}")));
        }
        let attrs: Vec<(&str, &str)> = attrs.iter().map(|(k, v)| (*k, v.as_str())).collect();
        match &param.constraint {
            Some(Constraint::Enumeration(allowed)) => {
                self.open(depth, "param", &attrs, false);
                for value in allowed {
                    self.indent(depth + 1);
                    self.buf.push_str("<allowed>");
                    escape_into(&mut self.buf, value, false);
                    self.buf.push_str("</allowed>\n");
                }
                self.close(depth, "param");
            }
            _ => self.open(depth, "param", &attrs, true),
        }
    }
}

/// Renders the environment document.
pub fn env_to_xml(env: &AasEnvironment) -> String {
    let mut out = XmlOut {
        buf: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
    };
    if env.shells.is_empty() && env.submodels.is_empty() {
        out.buf.push_str("<environment/>\n");
        return out.buf;
    }
    out.open(0, "environment", &[], false);
    for shell in &env.shells {
        let empty = shell.submodel_refs.is_empty();
        out.open(
            1,
            "shell",
            &[
                ("id", shell.id.as_str()),
                ("idShort", &shell.id_short),
                ("kind", shell.asset_kind.as_str()),
            ],
            empty,
        );
        if !empty {
            for r in &shell.submodel_refs {
                out.open(2, "submodelRef", &[("id", r.as_str())], true);
            }
            out.close(1, "shell");
        }
    }
    for submodel in &env.submodels {
        let mut attrs = vec![("id", submodel.id.as_str()), ("idShort", submodel.id_short.as_str())];
        if let Some(semantic_id) = &submodel.semantic_id {
            attrs.push(("semanticId", semantic_id));
        }
        let empty = submodel.elements.is_empty();
        out.open(1, "submodel", &attrs, empty);
        if !empty {
            for element in &submodel.elements {
                out.element(2, element);
            }
            out.close(1, "submodel");
        }
    }
    out.close(0, "environment");
    out.buf
}

/// Serializes `env` into package bytes. The environment must validate.
pub fn write_aasx(env: &AasEnvironment) -> Result<Vec<u8>, AasxError> {
    let violations = validate(env);
    if !violations.is_empty() {
        return Err(AasxError::InvalidEnvironment(violations));
    }
    let xml = env_to_xml(env);
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .compression_level(Some(DEFLATE_LEVEL))
        .last_modified_time(DateTime::DEFAULT)
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let io = |e: std::io::Error| AasxError::NotAZip(e.to_string());
    zip.start_file(ENV_ENTRY, options)
        .map_err(|e| AasxError::NotAZip(e.to_string()))?;
    zip.write_all(xml.as_bytes()).map_err(io)?;
    let cursor = zip.finish().map_err(|e| AasxError::NotAZip(e.to_string()))?;
    Ok(cursor.into_inner())
}

/// Reads package bytes back into a validated environment.
pub fn read_aasx(bytes: &[u8]) -> Result<AasEnvironment, AasxError> {
    let mut archive =
        ZipArchive::new(Cursor::new(bytes)).map_err(|e| AasxError::NotAZip(e.to_string()))?;
    let mut entry = archive
        .by_name(ENV_ENTRY)
        .map_err(|_| AasxError::MissingEntry(ENV_ENTRY.to_string()))?;
    let mut raw = Vec::new();
    entry
        .read_to_end(&mut raw)
        .map_err(|e| AasxError::NotAZip(e.to_string()))?;
    let xml = String::from_utf8(raw).map_err(|e| AasxError::XmlError {
        position: e.utf8_error().valid_up_to() as u64,
        message: "document is not valid UTF-8".into(),
    })?;
    let env = env_from_xml(&xml)?;
    let violations = validate(&env);
    if !violations.is_empty() {
        return Err(AasxError::ModelError(violations));
    }
    Ok(env)
}

/// Generic element tree; the model mapping runs over this.
#[derive(Debug)]
struct XmlNode {
    name: String,
    position: u64,
    attrs: Vec<(String, String)>,
    children: Vec<XmlNode>,
    text: String,
}

fn xml_err(position: u64, message: impl Into<String>) -> AasxError {
    AasxError::XmlError {
        position,
        message: message.into(),
    }
}

fn start_node(start: &BytesStart<'_>, position: u64) -> Result<XmlNode, AasxError> {
    let name = start.name().into_inner().to_string();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| xml_err(position, e.to_string()))?;
        let key = attr.key.into_inner().to_string();
        let value = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|e| xml_err(position, e.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(XmlNode {
        name,
        position,
        attrs,
        children: Vec::new(),
        text: String::new(),
    })
}

fn parse_tree(xml: &str) -> Result<XmlNode, AasxError> {
    let mut reader = Reader::from_str(xml);
    let mut stack: Vec<XmlNode> = Vec::new();
    let mut root: Option<XmlNode> = None;

    let mut attach = |node: XmlNode, stack: &mut Vec<XmlNode>| -> Result<(), AasxError> {
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None if root.is_none() => root = Some(node),
            None => return Err(xml_err(node.position, "more than one root element")),
        }
        Ok(())
    };

    loop {
        let position = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| xml_err(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(start) => stack.push(start_node(&start, position)?),
            Event::Empty(start) => {
                let node = start_node(&start, position)?;
                attach(node, &mut stack)?;
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| xml_err(position, "unbalanced end tag"))?;
                attach(node, &mut stack)?;
            }
            Event::Text(text) => {
                let content = text.xml10_content();
                match stack.last_mut() {
                    Some(node) => node.text.push_str(&content),
                    None if content.trim().is_empty() => {}
                    None => return Err(xml_err(position, "text outside the root element")),
                }
            }
            Event::CData(data) => match stack.last_mut() {
                Some(node) => node.text.push_str(&data.into_inner()),
                None => return Err(xml_err(position, "CDATA outside the root element")),
            },
            Event::GeneralRef(reference) => {
                let resolved = match reference
                    .resolve_char_ref()
                    .map_err(|e| xml_err(position, e.to_string()))?
                {
                    Some(c) => c.to_string(),
                    None => {
                        let name = reference.into_inner();
                        resolve_predefined_entity(&name)
                            .ok_or_else(|| xml_err(position, format!("unknown entity '&{name};'")))?
                            .to_string()
                    }
                };
                match stack.last_mut() {
                    Some(node) => node.text.push_str(&resolved),
                    None => return Err(xml_err(position, "reference outside the root element")),
                }
            }
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) => {}
            Event::DocType(_) => return Err(xml_err(position, "DOCTYPE is not supported")),
            Event::Eof => break,
        }
    }
    if let Some(open) = stack.last() {
        return Err(xml_err(open.position, format!("element <{}> is not closed", open.name)));
    }
    root.ok_or_else(|| xml_err(0, "document has no root element"))
}

/// Attribute reader that rejects unknown attributes.
struct Attrs<'a> {
    node: &'a XmlNode,
    used: Vec<&'static str>,
}

impl<'a> Attrs<'a> {
    fn of(node: &'a XmlNode) -> Self {
        Self {
            node,
            used: Vec::new(),
        }
    }

    fn optional(&mut self, key: &'static str) -> Option<&'a str> {
        self.used.push(key);
        self.node
            .attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn required(&mut self, key: &'static str) -> Result<&'a str, AasxError> {
        self.optional(key).ok_or_else(|| {
            xml_err(
                self.node.position,
                format!("<{}> is missing attribute '{key}'", self.node.name),
            )
        })
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &'static str) -> Result<T, AasxError> {
        let raw = self.required(key)?;
        raw.parse().map_err(|_| {
            xml_err(
                self.node.position,
                format!("<{}> attribute '{key}' has invalid value '{raw}'", self.node.name),
            )
        })
    }

    fn finish(self) -> Result<(), AasxError> {
        if let Some((key, _)) = self
            .node
            .attrs
            .iter()
            .find(|(k, _)| !self.used.contains(&k.as_str()))
        {
            return Err(xml_err(
                self.node.position,
                format!("<{}> has unknown attribute '{key}'", self.node.name),
            ));
        }
        Ok(())
    }
}

fn no_text(node: &XmlNode) -> Result<(), AasxError> {
    if node.text.trim().is_empty() {
        Ok(())
    } else {
        Err(xml_err(node.position, format!("<{}> must not contain text", node.name)))
    }
}

fn leaf(node: &XmlNode) -> Result<(), AasxError> {
    match node.children.first() {
        Some(child) => Err(xml_err(
            child.position,
            format!("unexpected element <{}> inside <{}>", child.name, node.name),
        )),
        None => Ok(()),
    }
}

fn unexpected(node: &XmlNode, context: &str) -> AasxError {
    xml_err(
        node.position,
        format!("unknown element <{}> in <{context}>", node.name),
    )
}

fn element_from(node: &XmlNode) -> Result<SubmodelElement, AasxError> {
    let mut a = Attrs::of(node);
    let element = match node.name.as_str() {
        "property" => {
            let id_short = a.required("idShort")?.to_string();
            let value_type = a.parsed("valueType")?;
            leaf(node)?;
            SubmodelElement::Property(Property {
                id_short,
                value_type,
                value: node.text.clone(),
            })
        }
        "collection" => {
            let id_short = a.required("idShort")?.to_string();
            no_text(node)?;
            SubmodelElement::Collection(Collection {
                id_short,
                elements: node.children.iter().map(element_from).collect::<Result<_, _>>()?,
            })
        }
        "operation" => {
            let id_short = a.required("idShort")?.to_string();
            no_text(node)?;
            let mut op = OperationDecl {
                id_short,
                in_params: Vec::new(),
                out_params: Vec::new(),
            };
            for child in &node.children {
                let target = match child.name.as_str() {
                    "in" => &mut op.in_params,
                    "out" => &mut op.out_params,
                    _ => return Err(unexpected(child, "operation")),
                };
                let mut ca = Attrs::of(child);
                let var = OperationVariable {
                    name: ca.required("name")?.to_string(),
                    value_type: ca.parsed("valueType")?,
                };
                ca.finish()?;
                leaf(child)?;
                no_text(child)?;
                target.push(var);
            }
            SubmodelElement::Operation(op)
        }
        "capability" => {
            let id_short = a.required("idShort")?.to_string();
            let description = a.required("description")?.to_string();
            no_text(node)?;
            let params = node
                .children
                .iter()
                .map(|child| match child.name.as_str() {
                    "param" => param_from(child),
                    _ => Err(unexpected(child, "capability")),
                })
                .collect::<Result<_, _>>()?;
            SubmodelElement::Capability(CapabilityDecl {
                id_short,
                description,
                params,
            })
        }
        "file" => {
            let file = FileRef {
                id_short: a.required("idShort")?.to_string(),
                mime_type: a.required("mimeType")?.to_string(),
                path: a.required("path")?.to_string(),
            };
            leaf(node)?;
            no_text(node)?;
            SubmodelElement::File(file)
        }
        _ => return Err(unexpected(node, "submodel")),
    };
    a.finish()?;
    Ok(element)
}

fn param_from(node: &XmlNode) -> Result<ParamSpec, AasxError> {
    let mut a = Attrs::of(node);
    let name = a.required("name")?.to_string();
    let value_type = a.parsed("valueType")?;
    let required = a.parsed("required")?;
    let min = a.optional("min");
    let max = a.optional("max");
    a.finish()?;
    no_text(node)?;
    let parse_bound = |raw: &str| {
        raw.parse::<f64>()
            .map_err(|_| xml_err(node.position, format!("invalid range bound '{raw}'")))
    };
    let constraint = match (min, max) {
        (Some(lo), Some(hi)) => {
            leaf(node)?;
            Some(Constraint::Range {
                lo: parse_bound(lo)?,
                hi: parse_bound(hi)?,
            })
        }
        (None, None) if node.children.is_empty() => None,
        (None, None) => {
            let mut allowed = Vec::new();
            for child in &node.children {
                if child.name != "allowed" {
                    return Err(unexpected(child, "param"));
                }
                Attrs::of(child).finish()?;
                leaf(child)?;
                allowed.push(child.text.clone());
            }
            Some(Constraint::Enumeration(allowed))
        }
        _ => return Err(xml_err(node.position, "range needs both 'min' and 'max'")),
    };
    Ok(ParamSpec {
        name,
        value_type,
        required,
        constraint,
    })
}

/// Parses an environment document without validating the model invariants.
pub fn env_from_xml(xml: &str) -> Result<AasEnvironment, AasxError> {
    let root = parse_tree(xml)?;
    if root.name != "environment" {
        return Err(xml_err(
            root.position,
            format!("root element must be <environment>, found <{}>", root.name),
        ));
    }
    Attrs::of(&root).finish()?;
    no_text(&root)?;

    let mut env = AasEnvironment::default();
    for node in &root.children {
        let mut a = Attrs::of(node);
        match node.name.as_str() {
            "shell" => {
                let id = AasIdentifier::new(a.required("id")?);
                let id_short = a.required("idShort")?.to_string();
                let asset_kind = a.parsed("kind")?;
                a.finish()?;
                no_text(node)?;
                let mut submodel_refs = Vec::new();
                for child in &node.children {
                    if child.name != "submodelRef" {
                        return Err(unexpected(child, "shell"));
                    }
                    let mut ca = Attrs::of(child);
                    submodel_refs.push(AasIdentifier::new(ca.required("id")?));
                    ca.finish()?;
                    leaf(child)?;
                }
                env.shells.push(Shell {
                    id,
                    id_short,
                    asset_kind,
                    submodel_refs,
                });
            }
            "submodel" => {
                let id = AasIdentifier::new(a.required("id")?);
                let id_short = a.required("idShort")?.to_string();
                let semantic_id = a.optional("semanticId").map(str::to_string);
                a.finish()?;
                no_text(node)?;
                env.submodels.push(Submodel {
                    id,
                    id_short,
                    semantic_id,
                    elements: node.children.iter().map(element_from).collect::<Result<_, _>>()?,
                });
            }
            _ => return Err(unexpected(node, "environment")),
        }
    }
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DifferenceKind {
    Missing,
    Extra,
    ValueChanged,
}

/// One structural difference, addressed by a resolve-style path.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Difference {
    pub path: String,
    pub kind: DifferenceKind,
    pub detail: String,
}

struct Differ {
    out: Vec<Difference>,
}

impl Differ {
    fn push(&mut self, path: &str, kind: DifferenceKind, detail: impl Into<String>) {
        self.out.push(Difference {
            path: path.to_string(),
            kind,
            detail: detail.into(),
        });
    }

    fn elements(&mut self, a: &[SubmodelElement], b: &[SubmodelElement], parent: &str) {
        for ea in a {
            let path = format!("{parent}/{}", ea.id_short());
            match b.iter().find(|eb| eb.id_short() == ea.id_short()) {
                None => self.push(&path, DifferenceKind::Missing, ea.kind_name()),
                Some(eb) => self.element(ea, eb, &path),
            }
        }
        for eb in b {
            if !a.iter().any(|ea| ea.id_short() == eb.id_short()) {
                self.push(&format!("{parent}/{}", eb.id_short()), DifferenceKind::Extra, eb.kind_name());
            }
        }
        let order_a: Vec<_> = a.iter().map(|e| e.id_short()).filter(|n| b.iter().any(|e| e.id_short() == *n)).collect();
        let order_b: Vec<_> = b.iter().map(|e| e.id_short()).filter(|n| a.iter().any(|e| e.id_short() == *n)).collect();
        if order_a != order_b {
            self.push(parent, DifferenceKind::ValueChanged, "element order");
        }
    }

    fn element(&mut self, a: &SubmodelElement, b: &SubmodelElement, path: &str) {
        use SubmodelElement as E;
        match (a, b) {
            (E::Collection(ca), E::Collection(cb)) => self.elements(&ca.elements, &cb.elements, path),
            (E::Property(pa), E::Property(pb)) => {
                if pa.value_type != pb.value_type {
                    self.push(path, DifferenceKind::ValueChanged, format!("valueType {} -> {}", pa.value_type, pb.value_type));
                } else if pa.value != pb.value {
                    self.push(path, DifferenceKind::ValueChanged, format!("'{}' -> '{}'", pa.value, pb.value));
                }
            }
            _ if a.kind_name() != b.kind_name() => {
                self.push(path, DifferenceKind::ValueChanged, format!("kind {} -> {}", a.kind_name(), b.kind_name()));
            }
            _ if a != b => self.push(path, DifferenceKind::ValueChanged, format!("{} declaration differs", a.kind_name())),
            _ => {}
        }
    }

    fn submodel(&mut self, a: &Submodel, b: &Submodel, path: &str) {
        if a.id != b.id {
            self.push(path, DifferenceKind::ValueChanged, format!("id {} -> {}", a.id, b.id));
        }
        if a.semantic_id != b.semantic_id {
            self.push(path, DifferenceKind::ValueChanged, "semanticId");
        }
        self.elements(&a.elements, &b.elements, path);
    }
}

/// Structural differences from `a` to `b`: `Missing` nodes exist only in `a`,
/// `Extra` nodes only in `b`. Empty iff the environments are equal.
pub fn diff(a: &AasEnvironment, b: &AasEnvironment) -> Vec<Difference> {
    let mut d = Differ { out: Vec::new() };
    for sa in &a.shells {
        let path = sa.id_short.as_str();
        let Some(sb) = b.shell(&sa.id_short) else {
            d.push(path, DifferenceKind::Missing, "shell");
            continue;
        };
        if sa.id != sb.id || sa.asset_kind != sb.asset_kind {
            d.push(path, DifferenceKind::ValueChanged, "shell id or kind");
        }
        let subs_a: Vec<&Submodel> = a.submodels_of(sa).collect();
        let subs_b: Vec<&Submodel> = b.submodels_of(sb).collect();
        for ma in &subs_a {
            let sub_path = format!("{path}/{}", ma.id_short);
            match subs_b.iter().find(|mb| mb.id_short == ma.id_short) {
                None => d.push(&sub_path, DifferenceKind::Missing, "submodel"),
                Some(mb) => d.submodel(ma, mb, &sub_path),
            }
        }
        for mb in &subs_b {
            if !subs_a.iter().any(|ma| ma.id_short == mb.id_short) {
                d.push(&format!("{path}/{}", mb.id_short), DifferenceKind::Extra, "submodel");
            }
        }
    }
    for sb in &b.shells {
        if a.shell(&sb.id_short).is_none() {
            d.push(&sb.id_short, DifferenceKind::Extra, "shell");
        }
    }

    // submodels no shell references are addressed by id
    let orphans = |env: &AasEnvironment| -> Vec<Submodel> {
        env.submodels
            .iter()
            .filter(|s| !env.shells.iter().any(|sh| sh.submodel_refs.contains(&s.id)))
            .cloned()
            .collect()
    };
    let (oa, ob) = (orphans(a), orphans(b));
    for ma in &oa {
        match ob.iter().find(|mb| mb.id == ma.id) {
            None => d.push(ma.id.as_str(), DifferenceKind::Missing, "submodel"),
            Some(mb) => d.submodel(ma, mb, ma.id.as_str()),
        }
    }
    for mb in &ob {
        if !oa.iter().any(|ma| ma.id == mb.id) {
            d.push(mb.id.as_str(), DifferenceKind::Extra, "submodel");
        }
    }

    if d.out.is_empty() && a != b {
        d.push("", DifferenceKind::ValueChanged, "shell or submodel order");
    }
    d.out
}
