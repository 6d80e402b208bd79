use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::catalog::Catalog;
use crate::model::{ComponentSpec, DashboardSelection, Dimension, DimensionKind, ParamValue, TemplateId};

/// An inclusive count bound; `max: None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u32,
    pub max: Option<u32>,
}

impl CountRange {
    pub fn exactly(n: u32) -> Self {
        CountRange { min: n, max: Some(n) }
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= self.min as usize && self.max.is_none_or(|m| n <= m as usize)
    }

    fn describe(&self) -> String {
        match self.max {
            Some(max) if max == self.min => format!("exactly {max}"),
            Some(max) => format!("{} to {max}", self.min),
            None => format!("at least {}", self.min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ShapeRequirements {
    pub measures: CountRange,
    pub nominal: CountRange,
    pub temporal: CountRange,
    /// Applies when the component has a nominal dimension.
    pub max_categories: Option<usize>,
}

/// What a component or selection looks like, for applicability checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSummary {
    pub measures: usize,
    pub nominal: usize,
    pub temporal: usize,
    /// Distinct categories of the nominal dimension, when known from data.
    pub categories: Option<usize>,
}

fn count_kind(dims: &[Dimension], kind: DimensionKind) -> usize {
    dims.iter().filter(|d| d.kind == kind).count()
}

impl ShapeSummary {
    pub fn of_component(c: &ComponentSpec, categories: Option<usize>) -> Self {
        ShapeSummary {
            measures: c.measures.len(),
            nominal: count_kind(&c.dimensions, DimensionKind::Nominal),
            temporal: count_kind(&c.dimensions, DimensionKind::Temporal),
            categories,
        }
    }

    pub fn of_selection(s: &DashboardSelection, categories: Option<usize>) -> Self {
        ShapeSummary {
            measures: s.measures.len(),
            nominal: count_kind(&s.dimensions, DimensionKind::Nominal),
            temporal: count_kind(&s.dimensions, DimensionKind::Temporal),
            categories,
        }
    }
}

impl ShapeRequirements {
    /// Human-readable reasons the shape does not fit; empty when it does.
    /// An unknown category count is not held against the shape.
    pub fn unmet(&self, s: &ShapeSummary) -> Vec<String> {
        let mut out = Vec::new();
        for (what, range, n) in [
            ("measures", self.measures, s.measures),
            ("nominal dimensions", self.nominal, s.nominal),
            ("temporal dimensions", self.temporal, s.temporal),
        ] {
            if !range.contains(n) {
                out.push(format!("needs {} {what}, has {n}", range.describe()));
            }
        }
        if let (Some(cap), Some(n)) = (self.max_categories, s.categories) {
            if s.nominal > 0 && n > cap {
                out.push(format!("needs at most {cap} categories, has {n}"));
            }
        }
        out
    }
}

/// A template whose shape requirements are met. `missing` lists required parameters
/// that still need a value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applicable {
    pub template: TemplateId,
    pub missing: Vec<String>,
}

/// Templates that fit `shape`, in catalog order. Parameter gaps never exclude a template.
pub fn applicable_templates(
    catalog: &Catalog,
    shape: &ShapeSummary,
    supplied: &BTreeMap<String, ParamValue>,
) -> Vec<Applicable> {
    catalog
        .designs()
        .iter()
        .filter(|d| d.requirements.unmet(shape).is_empty())
        .map(|d| Applicable {
            template: d.id.clone(),
            missing: d
                .parameters
                .iter()
                .filter(|p| p.required && !supplied.contains_key(&p.name))
                .map(|p| p.name.clone())
                .collect(),
        })
        .collect()
}

/// Applicability for a component, counting its bound parameters as supplied.
pub fn applicable_for_component(catalog: &Catalog, c: &ComponentSpec, categories: Option<usize>) -> Vec<Applicable> {
    let empty = BTreeMap::new();
    let supplied = c.template.as_ref().map_or(&empty, |b| &b.parameters);
    applicable_templates(catalog, &ShapeSummary::of_component(c, categories), supplied)
}

pub fn applicable_for_selection(
    catalog: &Catalog,
    s: &DashboardSelection,
    categories: Option<usize>,
) -> Vec<Applicable> {
    applicable_templates(catalog, &ShapeSummary::of_selection(s, categories), &BTreeMap::new())
}
