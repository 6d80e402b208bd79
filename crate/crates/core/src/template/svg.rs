//! A tiny SVG writer. Coordinates print with one decimal so output is byte-stable.

use std::fmt::Write as _;

use crate::model::Scale;

pub const DEFAULT_PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];
pub const GOAL_FILL: &str = "#d3d3d3";
pub const BREACH_FILL: &str = "#d62728";
pub const INK: &str = "#333333";

pub fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => {}
            c => out.push(c),
        }
    }
    out
}

pub fn n(v: f64) -> String {
    let r = (v * 10.0).round() / 10.0;
    let s = format!("{r:.1}");
    let s = s.strip_suffix(".0").unwrap_or(&s).to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub struct Svg {
    pub width: f64,
    pub height: f64,
    pub font_size: u32,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64, font_size: u32) -> Self {
        Svg {
            width,
            height,
            font_size,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, class: &str, x: f64, y: f64, w: f64, h: f64, fill: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}"{extra}/>"#,
            n(x),
            n(y),
            n(w.max(0.0)),
            n(h.max(0.0))
        );
    }

    pub fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}"{dash}/>"#,
            n(x1),
            n(y1),
            n(x2),
            n(y2)
        );
    }

    pub fn text(&mut self, class: &str, x: f64, y: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{}" y="{}" text-anchor="{anchor}" fill="{INK}">{}</text>"#,
            n(x),
            n(y),
            esc(content)
        );
    }

    pub fn circle(&mut self, class: &str, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle class="{class}" cx="{}" cy="{}" r="{}" fill="{fill}"/>"#,
            n(cx),
            n(cy),
            n(r)
        );
    }

    pub fn polyline(&mut self, class: &str, pts: &[(f64, f64)], stroke: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="2"{extra}/>"#,
            points(pts)
        );
    }

    pub fn polygon(&mut self, class: &str, pts: &[(f64, f64)], fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<polygon class="{class}" points="{}" fill="{fill}" fill-opacity="0.6"/>"#,
            points(pts)
        );
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"{f}\">\n{body}</svg>\n",
            w = n(self.width),
            h = n(self.height),
            f = self.font_size,
            body = self.body
        )
    }
}

fn points(pts: &[(f64, f64)]) -> String {
    pts.iter().map(|(x, y)| format!("{},{}", n(*x), n(*y))).collect::<Vec<_>>().join(" ")
}

/// Colors per category: the scale's explicit domain→range mapping when there is one,
/// otherwise categories in order cycle through the range (or the default palette).
pub struct Palette {
    domain: Vec<String>,
    range: Vec<String>,
}

impl Palette {
    pub fn for_field(scales: &[Scale], field: Option<&str>) -> Self {
        let scale = field.and_then(|f| scales.iter().find(|s| s.field == f && !s.range.is_empty()));
        match scale {
            Some(s) => Palette {
                domain: s.domain.clone(),
                range: s.range.clone(),
            },
            None => Palette {
                domain: Vec::new(),
                range: DEFAULT_PALETTE.iter().map(|c| c.to_string()).collect(),
            },
        }
    }

    pub fn color(&self, category: &str, position: usize) -> &str {
        let i = self.domain.iter().position(|d| d == category).unwrap_or(position);
        &self.range[i % self.range.len()]
    }

    pub fn first(&self) -> &str {
        &self.range[0]
    }
}

/// Linear map from `[lo, hi]` to `[a, b]`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub b: f64,
}

impl Linear {
    /// Domain spanning `values` and zero.
    pub fn including_zero(values: impl IntoIterator<Item = f64>, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi == lo {
            hi = lo + 1.0;
        }
        Linear { lo, hi, a, b }
    }

    pub fn at(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}
