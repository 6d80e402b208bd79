//! Template catalog, applicability, config mediation and rendering.

mod catalog;
mod render;
mod shape;
mod svg;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{ComponentSpec, ParamValue, TemplateConfig, ViolationCode};

pub use catalog::{
    Catalog, CatalogError, ParamDef, ParamType, SectionRepeat, TemplateDesign, TextSection, VisualRecipe,
    DEFAULT_CATEGORY_CAP, DERIVED_TOKENS, TRANSFERRED_TOKENS,
};
pub use render::{
    render_component, render_original, render_template, render_text_expression, BadgeKind, Constraints, RenderNode,
    RenderOptions,
};
pub use shape::{
    applicable_for_component, applicable_for_selection, applicable_templates, Applicable, CountRange,
    ShapeRequirements, ShapeSummary,
};
pub use text::{
    check_text_expression, format_percent, format_value, parse_formatted, parse_text, Segment, TextError,
    CUSTOM_TOKENS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemplateError {
    #[error("no template named {0:?}")]
    UnknownTemplate(String),
    #[error("{template} does not fit this component: {}", reasons.join("; "))]
    NotApplicable { template: String, reasons: Vec<String> },
    #[error("required parameter {0:?} has no value")]
    MissingParameter(String),
    #[error("parameter {name:?} must be {}", expected.as_str())]
    ParameterType { name: String, expected: ParamType },
    #[error("template declares no parameter {0:?}")]
    UnknownParameter(String),
    #[error("parameter {parameter:?} has no value for {}", missing.join(", "))]
    CategoryGap { parameter: String, missing: Vec<String> },
    #[error("parameter {parameter:?} names categories not in the data: {}", extra.join(", "))]
    UnknownCategory { parameter: String, extra: Vec<String> },
    #[error("{0}")]
    Text(#[from] TextError),
    #[error("token {{{0}}} cannot be resolved for this component")]
    UnresolvedToken(String),
}

impl TemplateError {
    pub fn code(&self) -> ViolationCode {
        match self {
            TemplateError::UnknownTemplate(_) => ViolationCode::UnknownTemplate,
            TemplateError::NotApplicable { .. } => ViolationCode::TemplateInapplicable,
            TemplateError::MissingParameter(_) => ViolationCode::ParamMissing,
            TemplateError::ParameterType { .. } => ViolationCode::ParamType,
            TemplateError::UnknownParameter(_) => ViolationCode::ParamUnknown,
            TemplateError::CategoryGap { .. } => ViolationCode::ParamCategoryGap,
            TemplateError::UnknownCategory { .. } => ViolationCode::ParamUnknownCategory,
            TemplateError::Text(_) | TemplateError::UnresolvedToken(_) => ViolationCode::UnknownToken,
        }
    }
}

fn check_params(
    design: &TemplateDesign,
    params: &BTreeMap<String, ParamValue>,
    categories: Option<&[String]>,
) -> Result<(), TemplateError> {
    for name in params.keys() {
        if design.parameter(name).is_none() {
            return Err(TemplateError::UnknownParameter(name.clone()));
        }
    }
    for def in &design.parameters {
        let Some(v) = params.get(&def.name) else {
            if def.required {
                return Err(TemplateError::MissingParameter(def.name.clone()));
            }
            continue;
        };
        if !def.ty.matches(v) {
            return Err(TemplateError::ParameterType {
                name: def.name.clone(),
                expected: def.ty,
            });
        }
        if let (ParamValue::PerCategory(map), Some(cats)) = (v, categories) {
            let cats: BTreeSet<&str> = cats.iter().map(String::as_str).collect();
            let extra: Vec<String> = map.keys().filter(|k| !cats.contains(k.as_str())).cloned().collect();
            if !extra.is_empty() {
                return Err(TemplateError::UnknownCategory {
                    parameter: def.name.clone(),
                    extra,
                });
            }
            let missing: Vec<String> = cats
                .iter()
                .filter(|c| !map.contains_key(**c))
                .map(|c| c.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(TemplateError::CategoryGap {
                    parameter: def.name.clone(),
                    missing,
                });
            }
        }
    }
    Ok(())
}

/// Builds the config that binds `c` to `design`.
///
/// Attributes are copied from the component and scales from its original design.
/// Per-category parameters must cover exactly `categories`.
pub fn mediate_config(
    c: &ComponentSpec,
    design: &TemplateDesign,
    params: &BTreeMap<String, ParamValue>,
    categories: &[String],
) -> Result<TemplateConfig, TemplateError> {
    mediate(c, design, params, Some(categories))
}

/// Like [`mediate_config`]; with `categories: None` the category count and coverage
/// checks are skipped (used for viewer-filtered re-renders).
pub fn mediate(
    c: &ComponentSpec,
    design: &TemplateDesign,
    params: &BTreeMap<String, ParamValue>,
    categories: Option<&[String]>,
) -> Result<TemplateConfig, TemplateError> {
    let reasons = design
        .requirements
        .unmet(&ShapeSummary::of_component(c, categories.map(<[String]>::len)));
    if !reasons.is_empty() {
        return Err(TemplateError::NotApplicable {
            template: design.id.to_string(),
            reasons,
        });
    }
    check_params(design, params, categories)?;
    Ok(TemplateConfig {
        design: design.id.clone(),
        measures: c.measures.clone(),
        dimensions: c.dimensions.clone(),
        time_frame: c.time_frame.clone(),
        data_filters: c.data_filters.clone(),
        scales: c.original_design.scales.clone(),
        parameters: params.clone(),
    })
}
