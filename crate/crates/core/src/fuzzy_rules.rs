//! Fuzzy rule-based object classification over region attributes.
//!
//! A rule is a weighted conjunction of membership conditions. A region's
//! confidence for a rule is `weight × min(memberships)`; the region goes to
//! the feature of the most confident rule, earliest rule on ties, and stays
//! unclassified when every confidence is zero.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attributes::{self, RegionAttributes};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::par;

pub const UNCLASSIFIED_FEATURE: &str = "unclassified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    #[default]
    Linear,
    SType,
}

impl Shape {
    fn as_str(self) -> &'static str {
        match self {
            Shape::Linear => "linear",
            Shape::SType => "s_type",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Comparator {
    LessThan(f64),
    GreaterThan(f64),
    /// Inclusive `[low, high]`.
    InRange(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipFunction {
    pub shape: Shape,
    pub comparator: Comparator,
    pub tolerance: f64,
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl MembershipFunction {
    pub fn new(shape: Shape, comparator: Comparator, tolerance: f64) -> Result<Self> {
        let f = Self {
            shape,
            comparator,
            tolerance,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Rules(format!(
                "tolerance must be finite and >= 0, got {}",
                self.tolerance
            )));
        }
        match self.comparator {
            Comparator::LessThan(t) | Comparator::GreaterThan(t) if !t.is_finite() => {
                Err(Error::Rules(format!("threshold {t} is not finite")))
            }
            Comparator::InRange(lo, hi) if !(lo.is_finite() && hi.is_finite() && lo <= hi) => Err(
                Error::Rules(format!("range [{lo}, {hi}] needs finite low <= high")),
            ),
            _ => Ok(()),
        }
    }

    fn ramp(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self.shape {
            Shape::Linear => t,
            Shape::SType => smoothstep(t),
        }
    }

    fn less_than(&self, threshold: f64, v: f64) -> f64 {
        let tau = self.tolerance;
        if tau == 0.0 {
            return if v < threshold { 1.0 } else { 0.0 };
        }
        self.ramp((threshold + tau - v) / (2.0 * tau))
    }

    fn greater_than(&self, threshold: f64, v: f64) -> f64 {
        let tau = self.tolerance;
        if tau == 0.0 {
            return if v > threshold { 1.0 } else { 0.0 };
        }
        self.ramp((v - threshold + tau) / (2.0 * tau))
    }

    /// Degree in `[0, 1]` to which `value` satisfies the condition.
    pub fn eval(&self, value: f64) -> f64 {
        match self.comparator {
            Comparator::LessThan(t) => self.less_than(t, value),
            Comparator::GreaterThan(t) => self.greater_than(t, value),
            Comparator::InRange(lo, hi) if self.tolerance == 0.0 => {
                if lo <= value && value <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            Comparator::InRange(lo, hi) => {
                self.greater_than(lo, value).min(self.less_than(hi, value))
            }
        }
    }
}

pub fn membership(function: &MembershipFunction, value: f64) -> f64 {
    function.eval(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub attribute: String,
    pub function: MembershipFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRule {
    pub feature: String,
    pub weight: f64,
    pub conditions: Vec<Condition>,
}

impl FuzzyRule {
    pub fn validate(&self) -> Result<()> {
        if self.feature.trim().is_empty() {
            return Err(Error::Rules("feature name is empty".into()));
        }
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(Error::Rules(format!(
                "rule for '{}': weight must be in (0, 1], got {}",
                self.feature, self.weight
            )));
        }
        if self.conditions.is_empty() {
            return Err(Error::Rules(format!(
                "rule for '{}' has no conditions",
                self.feature
            )));
        }
        for c in &self.conditions {
            if !attributes::is_attribute_name(&c.attribute) {
                return Err(Error::UnknownAttribute(c.attribute.clone()));
            }
            c.function.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    rules: Vec<FuzzyRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<FuzzyRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Rules("rule set is empty".into()));
        }
        for r in &rules {
            r.validate()?;
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.rules
                .iter()
                .map(|r| FuzzyRule {
                    weight: r.weight * factor,
                    ..r.clone()
                })
                .collect(),
        )
    }
}

pub fn evaluate_rule(rule: &FuzzyRule, attrs: &RegionAttributes) -> Result<f64> {
    let mut m = 1.0f64;
    for c in &rule.conditions {
        let v = attrs
            .get(&c.attribute)
            .ok_or_else(|| Error::UnknownAttribute(c.attribute.clone()))?;
        m = m.min(c.function.eval(v));
    }
    Ok(rule.weight * m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub region_id: u32,
    /// `None` when no rule has positive confidence.
    pub feature: Option<String>,
    pub rule_index: Option<usize>,
    pub confidence: f64,
}

impl Assignment {
    pub fn feature_name(&self) -> &str {
        self.feature.as_deref().unwrap_or(UNCLASSIFIED_FEATURE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectClassification {
    pub assignments: Vec<Assignment>,
    /// `confidence[rule][region]`, regions in input order.
    pub confidence: Vec<Vec<f64>>,
}

pub fn classify_objects(
    ruleset: &RuleSet,
    attrs: &[RegionAttributes],
) -> Result<ObjectClassification> {
    let per_region: Vec<Result<Vec<f64>>> = par::map_range(attrs.len(), |i| {
        ruleset
            .rules
            .iter()
            .map(|r| evaluate_rule(r, &attrs[i]))
            .collect()
    });
    let per_region: Vec<Vec<f64>> = per_region.into_iter().collect::<Result<_>>()?;
    let assignments = attrs
        .iter()
        .zip(&per_region)
        .map(|(a, conf)| {
            let mut best: Option<usize> = None;
            for (k, &c) in conf.iter().enumerate() {
                if c > 0.0 && best.is_none_or(|b| c > conf[b]) {
                    best = Some(k);
                }
            }
            Assignment {
                region_id: a.region_id,
                feature: best.map(|k| ruleset.rules[k].feature.clone()),
                rule_index: best,
                confidence: best.map_or(0.0, |k| conf[k]),
            }
        })
        .collect();
    let confidence = (0..ruleset.len())
        .map(|k| per_region.iter().map(|c| c[k]).collect())
        .collect();
    Ok(ObjectClassification {
        assignments,
        confidence,
    })
}

// ---------------------------------------------------------------------------
// Documents

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Op {
    Lt,
    Gt,
    Range,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionDoc {
    attr: String,
    op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<[f64; 2]>,
    #[serde(default)]
    tolerance: f64,
    #[serde(default)]
    shape: Shape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    feature: String,
    weight: f64,
    conditions: Vec<ConditionDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSetDoc {
    rules: Vec<RuleDoc>,
}

impl ConditionDoc {
    fn into_condition(self) -> Result<Condition> {
        let comparator = match (self.op, self.threshold, self.thresholds) {
            (Op::Lt, Some(t), None) => Comparator::LessThan(t),
            (Op::Gt, Some(t), None) => Comparator::GreaterThan(t),
            (Op::Range, None, Some([lo, hi])) => Comparator::InRange(lo, hi),
            (Op::Range, _, _) => {
                return Err(Error::Rules(format!(
                    "'{}': range needs exactly `thresholds: [lo, hi]`",
                    self.attr
                )));
            }
            _ => {
                return Err(Error::Rules(format!(
                    "'{}': lt/gt need exactly one `threshold`",
                    self.attr
                )))
            }
        };
        Ok(Condition {
            attribute: self.attr,
            function: MembershipFunction::new(self.shape, comparator, self.tolerance)?,
        })
    }

    fn from_condition(c: &Condition) -> Self {
        let (op, threshold, thresholds) = match c.function.comparator {
            Comparator::LessThan(t) => (Op::Lt, Some(t), None),
            Comparator::GreaterThan(t) => (Op::Gt, Some(t), None),
            Comparator::InRange(lo, hi) => (Op::Range, None, Some([lo, hi])),
        };
        Self {
            attr: c.attribute.clone(),
            op,
            threshold,
            thresholds,
            tolerance: c.function.tolerance,
            shape: c.function.shape,
        }
    }
}

impl RuleSet {
    pub fn to_json(&self) -> Result<String> {
        let doc = RuleSetDoc {
            rules: self
                .rules
                .iter()
                .map(|r| RuleDoc {
                    feature: r.feature.clone(),
                    weight: r.weight,
                    conditions: r
                        .conditions
                        .iter()
                        .map(ConditionDoc::from_condition)
                        .collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    fn from_json(text: &str) -> Result<Self> {
        let doc: RuleSetDoc = serde_json::from_str(text)?;
        let rules = doc
            .rules
            .into_iter()
            .map(|r| {
                Ok(FuzzyRule {
                    feature: r.feature,
                    weight: r.weight,
                    conditions: r
                        .conditions
                        .into_iter()
                        .map(ConditionDoc::into_condition)
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(rules)
    }

    /// Numbered listing, one rule per line:
    /// `1. (1.000): If tx_mean [0.7242, 2.8601], then object belongs to "Feature_1".`
    pub fn to_listing(&self) -> String {
        let mut s = String::new();
        for (i, r) in self.rules.iter().enumerate() {
            let _ = writeln!(s, "{}. {}", i + 1, format_rule(r));
        }
        s
    }

    fn from_listing(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line == "Rule Set:" {
                continue;
            }
            rules.push(parse_rule_line(line).map_err(|e| match e {
                Error::Rules(msg) => Error::Rules(format!("line {}: {msg}", ln + 1)),
                other => other,
            })?);
        }
        Self::new(rules)
    }
}

/// `{:.prec$}` when that prints the exact value back, otherwise shortest form.
fn format_number(v: f64, prec: usize) -> String {
    let fixed = format!("{v:.prec$}");
    if fixed.parse::<f64>().ok() == Some(v) {
        fixed
    } else {
        format!("{v}")
    }
}

fn format_condition(c: &Condition) -> String {
    let mut s = c.attribute.clone();
    match c.function.comparator {
        Comparator::LessThan(t) => {
            let _ = write!(s, " < {}", format_number(t, 4));
        }
        Comparator::GreaterThan(t) => {
            let _ = write!(s, " > {}", format_number(t, 4));
        }
        Comparator::InRange(lo, hi) => {
            let _ = write!(s, " [{}, {}]", format_number(lo, 4), format_number(hi, 4));
        }
    }
    if c.function.tolerance > 0.0 {
        let _ = write!(s, " tolerance {}", c.function.tolerance);
    }
    if c.function.shape != Shape::Linear {
        let _ = write!(s, " {}", c.function.shape.as_str());
    }
    s
}

/// Rule text without the leading ordinal.
pub fn format_rule(rule: &FuzzyRule) -> String {
    let conds: Vec<String> = rule.conditions.iter().map(format_condition).collect();
    format!(
        "({}): If {}, then object belongs to \"{}\".",
        format_number(rule.weight, 3),
        conds.join(" and "),
        rule.feature
    )
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Rules(format!("bad number '{}'", s.trim())))
}

fn parse_condition(text: &str) -> Result<Condition> {
    let text = text.trim();
    let (attr, rest) = text
        .split_once(char::is_whitespace)
        .ok_or_else(|| Error::Rules(format!("incomplete condition '{text}'")))?;
    if !attributes::is_attribute_name(attr) {
        return Err(Error::UnknownAttribute(attr.to_string()));
    }
    let rest = rest.trim_start();
    let (comparator, mut rest) = if let Some(r) = rest.strip_prefix('<') {
        let (num, tail) = split_token(r);
        (Comparator::LessThan(parse_number(num)?), tail)
    } else if let Some(r) = rest.strip_prefix('>') {
        let (num, tail) = split_token(r);
        (Comparator::GreaterThan(parse_number(num)?), tail)
    } else if let Some(r) = rest.strip_prefix('[') {
        let (inner, tail) = r
            .split_once(']')
            .ok_or_else(|| Error::Rules(format!("unclosed range in '{text}'")))?;
        let (lo, hi) = inner
            .split_once(',')
            .ok_or_else(|| Error::Rules(format!("range needs 'lo, hi' in '{text}'")))?;
        (
            Comparator::InRange(parse_number(lo)?, parse_number(hi)?),
            tail,
        )
    } else {
        return Err(Error::Rules(format!(
            "expected '<', '>' or '[' in '{text}'"
        )));
    };
    let mut tolerance = 0.0;
    let mut shape = Shape::Linear;
    loop {
        let (tok, tail) = split_token(rest);
        match tok {
            "" => break,
            "tolerance" => {
                let (num, tail) = split_token(tail);
                tolerance = parse_number(num)?;
                rest = tail;
            }
            "linear" => {
                shape = Shape::Linear;
                rest = tail;
            }
            "s_type" => {
                shape = Shape::SType;
                rest = tail;
            }
            other => return Err(Error::Rules(format!("unexpected '{other}' in '{text}'"))),
        }
    }
    Ok(Condition {
        attribute: attr.to_string(),
        function: MembershipFunction::new(shape, comparator, tolerance)?,
    })
}

fn split_token(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    }
}

fn parse_rule_line(line: &str) -> Result<FuzzyRule> {
    let bad = || Error::Rules(format!("cannot parse rule '{line}'"));
    let (ordinal, rest) = line.split_once('.').ok_or_else(bad)?;
    if ordinal.is_empty() || !ordinal.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let rest = rest.trim_start().strip_prefix('(').ok_or_else(bad)?;
    let (weight, rest) = rest.split_once("):").ok_or_else(bad)?;
    let weight = parse_number(weight)?;
    let rest = rest.trim_start().strip_prefix("If ").ok_or_else(bad)?;
    const THEN: &str = ", then object belongs to \"";
    let at = rest.rfind(THEN).ok_or_else(bad)?;
    let conds = &rest[..at];
    let feature = rest[at + THEN.len()..]
        .strip_suffix("\".")
        .or_else(|| rest[at + THEN.len()..].strip_suffix('"'))
        .ok_or_else(bad)?;
    Ok(FuzzyRule {
        feature: feature.to_string(),
        weight,
        conditions: conds
            .split(" and ")
            .map(parse_condition)
            .collect::<Result<_>>()?,
    })
}

/// Parses either a JSON rule document or a numbered rule listing.
pub fn parse_ruleset(text: &str) -> Result<RuleSet> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::Rules("rule document is empty".into()));
    }
    if t.starts_with('{') {
        RuleSet::from_json(t)
    } else {
        RuleSet::from_listing(t)
    }
}

pub fn load_ruleset(path: &Path) -> Result<RuleSet> {
    parse_ruleset(&fsutil::read_to_string(path)?)
}

/// JSON for a `.json` extension, the rule listing otherwise.
pub fn save_ruleset(ruleset: &RuleSet, path: &Path) -> Result<()> {
    let text = if path.extension().is_some_and(|e| e == "json") {
        ruleset.to_json()?
    } else {
        ruleset.to_listing()
    };
    fsutil::write_atomic(path, text.as_bytes())
}

pub fn assignments_to_tsv(result: &ObjectClassification) -> String {
    let mut s = String::from("region_id\tfeature\trule\tconfidence\n");
    for a in &result.assignments {
        let rule = a
            .rule_index
            .map_or(String::from("0"), |k| (k + 1).to_string());
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            a.region_id,
            a.feature_name(),
            rule,
            a.confidence
        );
    }
    s
}

pub fn assignments_from_tsv(text: &str) -> Result<Vec<Assignment>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.starts_with("region_id\tfeature") => {}
        _ => return Err(Error::Parse("assignment table lacks its header".into())),
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            let bad = || Error::Parse(format!("assignment row {}: '{l}'", i + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let rule: usize = f[2].parse().map_err(|_| bad())?;
            Ok(Assignment {
                region_id: f[0].parse().map_err(|_| bad())?,
                feature: (rule != 0).then(|| f[1].to_string()),
                rule_index: rule.checked_sub(1),
                confidence: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Confidence map for one rule as `region_id\tconfidence` rows.
pub fn confidence_to_tsv(result: &ObjectClassification, rule: usize) -> String {
    let mut s = String::from("region_id\tconfidence\n");
    for (a, c) in result.assignments.iter().zip(&result.confidence[rule]) {
        let _ = writeln!(s, "{}\t{}", a.region_id, c);
    }
    s
}
