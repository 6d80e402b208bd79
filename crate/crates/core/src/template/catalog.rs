use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::shape::{CountRange, ShapeRequirements};
use super::text::{parse_text, Segment};
use crate::model::{ParamValue, TemplateId};
use crate::spec_io::decode::Decoder;
use crate::spec_io::yaml::{parse_node, Node};
use crate::spec_io::ParseError;

const BUILTIN: &str = include_str!("catalog.yaml");

/// Default cap on categories for breakdown designs.
pub const DEFAULT_CATEGORY_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamType {
    Number,
    NumberPerCategory,
    Text,
}

impl ParamType {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Number => "number",
            ParamType::NumberPerCategory => "number-per-category",
            ParamType::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ParamType::Number, ParamType::NumberPerCategory, ParamType::Text]
            .into_iter()
            .find(|t| t.as_str() == s)
    }

    pub fn matches(self, v: &ParamValue) -> bool {
        matches!(
            (self, v),
            (ParamType::Number, ParamValue::Number(_))
                | (ParamType::NumberPerCategory, ParamValue::PerCategory(_))
                | (ParamType::Text, ParamValue::Text(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
}

/// How the visual design is drawn. Fields name the parameters the drawing reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "kebab-case")]
pub enum VisualRecipe {
    HorizontalBars { goal: Option<String> },
    Line { upper: Option<String>, lower: Option<String> },
}

impl VisualRecipe {
    pub fn parameters(&self) -> Vec<&str> {
        match self {
            VisualRecipe::HorizontalBars { goal } => goal.iter().map(String::as_str).collect(),
            VisualRecipe::Line { upper, lower } => upper.iter().chain(lower.iter()).map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionRepeat {
    Once,
    /// Once per category of the nominal dimension, or once per series.
    Each,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSection {
    pub repeat: SectionRepeat,
    pub text: String,
    /// Rendered only when this parameter has a value.
    pub when: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TemplateDesign {
    pub id: TemplateId,
    pub intent: String,
    pub requirements: ShapeRequirements,
    pub parameters: Vec<ParamDef>,
    pub visual: VisualRecipe,
    pub text_template: Vec<TextSection>,
}

impl TemplateDesign {
    pub fn parameter(&self, name: &str) -> Option<&ParamDef> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Tokens every design may use: attributes carried over from the component and the result.
pub const TRANSFERRED_TOKENS: [&str; 11] = [
    "measure",
    "dimension",
    "category",
    "value",
    "total",
    "time-frame",
    "start",
    "end",
    "change",
    "for_category",
    "points",
];

/// Tokens computed from a parameter; usable only when the design declares it.
pub const DERIVED_TOKENS: [(&str, &str); 5] = [
    ("pct_of_goal", "goal"),
    ("met", "goal"),
    ("pct_of_total_goal", "total-goal"),
    ("above_upper", "upper-threshold"),
    ("below_lower", "lower-threshold"),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("template {template}: {message}")]
    Invalid { template: String, message: String },
}

/// The set of template designs, in presentation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    designs: Vec<TemplateDesign>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::builtin()
    }
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> Self {
        Catalog::from_yaml(BUILTIN).expect("built-in catalog is valid")
    }

    pub fn from_yaml(text: &str) -> Result<Self, CatalogError> {
        let node = parse_node(text)?;
        let mut d = Decoder::default();
        let m = d.map(&node, "", &["templates"])?;
        let designs = d.list(m.require(&d, "templates")?, "templates", design)?;
        let mut seen = BTreeSet::new();
        for t in &designs {
            if !seen.insert(t.id.clone()) {
                return Err(invalid(t, "declared twice".into()));
            }
            check_tokens(t)?;
        }
        Ok(Catalog { designs })
    }

    pub fn get(&self, id: &TemplateId) -> Option<&TemplateDesign> {
        self.designs.iter().find(|d| &d.id == id)
    }

    pub fn designs(&self) -> &[TemplateDesign] {
        &self.designs
    }

    /// Replaces the category cap of every design that has one.
    pub fn with_category_cap(mut self, cap: usize) -> Self {
        for d in &mut self.designs {
            if d.requirements.max_categories.is_some() {
                d.requirements.max_categories = Some(cap);
            }
        }
        self
    }
}

fn invalid(t: &TemplateDesign, message: String) -> CatalogError {
    CatalogError::Invalid {
        template: t.id.to_string(),
        message,
    }
}

/// Every token in the text and every parameter the visual reads must be a transferred
/// attribute or a declared parameter.
fn check_tokens(t: &TemplateDesign) -> Result<(), CatalogError> {
    let declared = |name: &str| t.parameter(name).is_some();
    for p in t.visual.parameters() {
        if !declared(p) {
            return Err(invalid(t, format!("visual design reads undeclared parameter {p:?}")));
        }
    }
    for section in &t.text_template {
        if let Some(w) = &section.when {
            if !declared(w) {
                return Err(invalid(t, format!("text section conditioned on undeclared parameter {w:?}")));
            }
        }
        let segments = parse_text(&section.text).map_err(|e| invalid(t, e.to_string()))?;
        for seg in segments {
            let Segment::Token { name, arg } = seg else { continue };
            if arg.is_some() {
                return Err(invalid(t, format!("token {{{name}}} takes no argument in a text template")));
            }
            let ok = TRANSFERRED_TOKENS.contains(&name.as_str())
                || declared(&name)
                || DERIVED_TOKENS.iter().any(|(tok, base)| *tok == name && declared(base));
            if !ok {
                return Err(invalid(t, format!("text template uses unknown token {{{name}}}")));
            }
        }
    }
    Ok(())
}

fn count_range(d: &mut Decoder, node: &Node, path: &str) -> Result<CountRange, ParseError> {
    if node.as_map().is_some() {
        let m = d.map(node, path, &["min", "max"])?;
        let min = match m.get("min") {
            Some(n) => d.u32(n, &m.path_of("min"))?,
            None => 0,
        };
        let max = m.get("max").map(|n| d.u32(n, &m.path_of("max"))).transpose()?;
        return Ok(CountRange { min, max });
    }
    let n = d.u32(node, path)?;
    Ok(CountRange::exactly(n))
}

fn design(d: &mut Decoder, node: &Node, path: &str) -> Result<TemplateDesign, ParseError> {
    let m = d.map(
        node,
        path,
        &["id", "intent", "requirements", "parameters", "visual-design", "text-template"],
    )?;
    let id = TemplateId(d.nonempty_string(m.require(d, "id")?, &m.path_of("id"))?);
    let intent = d.string(m.require(d, "intent")?, &m.path_of("intent"))?;

    let rp = m.path_of("requirements");
    let r = d.map(m.require(d, "requirements")?, &rp, &["measures", "nominal", "temporal", "max-categories"])?;
    let any = CountRange { min: 0, max: None };
    let requirements = ShapeRequirements {
        measures: match r.get("measures") {
            Some(n) => count_range(d, n, &r.path_of("measures"))?,
            None => any,
        },
        nominal: match r.get("nominal") {
            Some(n) => count_range(d, n, &r.path_of("nominal"))?,
            None => any,
        },
        temporal: match r.get("temporal") {
            Some(n) => count_range(d, n, &r.path_of("temporal"))?,
            None => any,
        },
        max_categories: r
            .get("max-categories")
            .map(|n| d.u32(n, &r.path_of("max-categories")).map(|v| v as usize))
            .transpose()?,
    };

    let parameters = match m.get("parameters") {
        Some(n) => d.list(n, &m.path_of("parameters"), |d, n, p| {
            let pm = d.map(n, p, &["name", "type", "required"])?;
            Ok(ParamDef {
                name: d.nonempty_string(pm.require(d, "name")?, &pm.path_of("name"))?,
                ty: d.keyword(
                    pm.require(d, "type")?,
                    &pm.path_of("type"),
                    &["number", "number-per-category", "text"],
                    ParamType::parse,
                )?,
                required: match pm.get("required") {
                    Some(b) => d.bool(b, &pm.path_of("required"))?,
                    None => false,
                },
            })
        })?,
        None => Vec::new(),
    };

    let vp = m.path_of("visual-design");
    let v = d.map(m.require(d, "visual-design")?, &vp, &["recipe", "goal", "upper", "lower"])?;
    let opt = |d: &Decoder, key: &str| v.get(key).map(|n| d.string(n, &v.path_of(key))).transpose();
    let recipe_node = v.require(d, "recipe")?;
    let visual = match d.string(recipe_node, &v.path_of("recipe"))?.as_str() {
        "horizontal-bars" => VisualRecipe::HorizontalBars { goal: opt(d, "goal")? },
        "line" => VisualRecipe::Line {
            upper: opt(d, "upper")?,
            lower: opt(d, "lower")?,
        },
        other => {
            return Err(d.error(
                crate::model::ViolationCode::InvalidValue,
                recipe_node.span,
                &v.path_of("recipe"),
                format!("{other:?} is not one of: horizontal-bars, line"),
            ))
        }
    };

    let text_template = match m.get("text-template") {
        Some(n) => d.list(n, &m.path_of("text-template"), |d, n, p| {
            let sm = d.map(n, p, &["each", "text", "when"])?;
            let (repeat, key) = match (sm.has("each"), sm.has("text")) {
                (true, false) => (SectionRepeat::Each, "each"),
                (false, true) => (SectionRepeat::Once, "text"),
                _ => {
                    return Err(d.error(
                        crate::model::ViolationCode::InvalidValue,
                        n.span,
                        p,
                        "a text section needs exactly one of `each` or `text`",
                    ))
                }
            };
            Ok(TextSection {
                repeat,
                text: d.string(sm.require(d, key)?, &sm.path_of(key))?,
                when: sm.get("when").map(|w| d.string(w, &sm.path_of("when"))).transpose()?,
            })
        })?,
        None => Vec::new(),
    };

    Ok(TemplateDesign {
        id,
        intent,
        requirements,
        parameters,
        visual,
        text_template,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_catalog_loads_in_order() {
        let c = Catalog::builtin();
        let ids: Vec<&str> = c.designs().iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["simple-breakdown", "breakdown-with-goal", "time-series-with-threshold"]);
        let goal = c.get(&TemplateId::new("breakdown-with-goal")).unwrap();
        assert_eq!(goal.parameter("goal").unwrap().ty, ParamType::NumberPerCategory);
        assert!(goal.parameter("goal").unwrap().required);
        assert!(!goal.parameter("total-goal").unwrap().required);
        assert_eq!(goal.requirements.max_categories, Some(DEFAULT_CATEGORY_CAP));
    }

    #[test]
    fn undeclared_tokens_are_rejected() {
        let text = BUILTIN.replace("({pct_of_goal} of goal {goal})", "({bogus})");
        let err = Catalog::from_yaml(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");

        // derived tokens need their base parameter
        let text = BUILTIN.replace("{measure} for {category} was {value}.", "{met}");
        assert!(Catalog::from_yaml(&text).is_err());

        let text = BUILTIN.replace("upper: upper-threshold", "upper: nope");
        assert!(Catalog::from_yaml(&text).is_err());
    }

    #[test]
    fn category_cap_is_configurable() {
        let c = Catalog::builtin().with_category_cap(3);
        assert!(c.designs().iter().all(|d| d.requirements.max_categories == Some(3)));
    }
}
