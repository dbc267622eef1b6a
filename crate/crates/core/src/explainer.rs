//! Turns a contrastive sample into a predicate (the list of feature changes),
//! scores its influence, and renders it as a "why X rather than Y" sentence.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Change {
    pub feature: usize,
    pub name: String,
    pub old: f64,
    pub new: f64,
    /// `new - old`.
    pub delta: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub changes: Vec<Change>,
    /// Label predicted for the original sample.
    pub label_x: String,
    /// Label predicted for the contrastive sample.
    pub label_y: String,
}

impl Predicate {
    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }
}

/// Lists every feature where `x_tilde` differs from `x`. Features in `order`
/// come first, in that order; any other differing feature follows by index.
pub fn extract_predicate(
    x: &[f64],
    x_tilde: &[f64],
    names: &[String],
    order: &[usize],
    label_x: &str,
    label_y: &str,
) -> Result<Predicate> {
    if x.len() != x_tilde.len() || x.len() != names.len() {
        return Err(Error::Shape {
            expected: x.len(),
            actual: x_tilde.len().min(names.len()),
        });
    }
    let mut sequence: Vec<usize> = order.iter().copied().filter(|&j| j < x.len()).collect();
    sequence.dedup();
    for j in 0..x.len() {
        if !sequence.contains(&j) {
            sequence.push(j);
        }
    }
    let changes = sequence
        .into_iter()
        .filter(|&j| x[j] != x_tilde[j])
        .map(|j| {
            let delta = x_tilde[j] - x[j];
            Change {
                feature: j,
                name: names[j].clone(),
                old: x[j],
                new: x_tilde[j],
                delta,
                direction: if delta > 0.0 {
                    Direction::Up
                } else {
                    Direction::Down
                },
            }
        })
        .collect();
    Ok(Predicate {
        changes,
        label_x: label_x.to_string(),
        label_y: label_y.to_string(),
    })
}

/// `1(flipped) / |P|^lambda`.
pub fn influence_score(predicate_size: usize, flipped: bool, lambda: f64) -> Result<f64> {
    if !flipped {
        return Ok(0.0);
    }
    if predicate_size == 0 {
        return Err(Error::Contract(
            "a flipped prediction needs a non-empty predicate".into(),
        ));
    }
    Ok(1.0 / (predicate_size as f64).powf(lambda))
}

/// How precisely a single change is described.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Degree {
    /// The signed amount: "7 point lower".
    Exact,
    /// A ratio word when the values are a clean multiple: "twice as high".
    Magnitude,
    /// Direction only: "lower".
    Relative,
}

impl std::str::FromStr for Degree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "magnitude" => Ok(Self::Magnitude),
            "relative" => Ok(Self::Relative),
            other => Err(Error::Config(format!("unknown obscurity degree '{other}'"))),
        }
    }
}

/// Whether a change reads as a count ("9 more") or a level ("9 point higher").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeStyle {
    Count,
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    /// Sentence with `{changes}`, `{X}`, `{Y}` and optionally `{subject}`.
    pub text: String,
    /// Phrase for one change with `{feature}` and `{delta}`.
    pub change: String,
    pub style: ChangeStyle,
    /// Describe the original sample relative to the contrastive one ("because ... is higher").
    #[serde(default)]
    pub invert: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    #[serde(default = "default_subject")]
    pub subject: String,
    pub templates: BTreeMap<String, Template>,
    /// Plain-language feature names.
    #[serde(default)]
    pub names: BTreeMap<String, String>,
}

fn default_subject() -> String {
    "the sample".to_string()
}

impl Default for TemplateSet {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(
            "because".to_string(),
            Template {
                text: "{subject} is classified as {X} RATHER THAN {Y} because {changes}".into(),
                change: "{feature} is {delta}".into(),
                style: ChangeStyle::Level,
                invert: true,
            },
        );
        templates.insert(
            "had".to_string(),
            Template {
                text: "had {changes}, {subject} would have been classified as {Y} RATHER THAN {X}"
                    .into(),
                change: "{feature} been {delta}".into(),
                style: ChangeStyle::Level,
                invert: false,
            },
        );
        templates.insert(
            "if_there_were".to_string(),
            Template {
                text:
                    "if there were {changes}, {subject} would be classified as {Y} RATHER THAN {X}"
                        .into(),
                change: "{delta} {feature}".into(),
                style: ChangeStyle::Count,
                invert: false,
            },
        );
        Self {
            subject: default_subject(),
            templates,
            names: BTreeMap::new(),
        }
    }
}

impl TemplateSet {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.templates.keys().map(String::as_str).collect()
    }

    /// A template id drawn from `seed` and `row`, reproducibly.
    pub fn choose(&self, seed: u64, row: u64) -> Result<&str> {
        let ids = self.ids();
        if ids.is_empty() {
            return Err(Error::Config("template set is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(row);
        Ok(ids[rng.random_range(0..ids.len())])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationText {
    pub template_id: String,
    pub degrees: Vec<Degree>,
    pub text: String,
}

/// Up to three decimals, trailing zeros trimmed.
pub fn format_amount(v: f64) -> String {
    let s = format!("{:.3}", v.abs());
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".into()
    } else {
        s.into()
    }
}

const RATIO_TOLERANCE: f64 = 0.05;

fn ratio_word(old: f64, new: f64) -> Option<&'static str> {
    if old == 0.0 || new == 0.0 || old.signum() != new.signum() {
        return None;
    }
    let ratio = new / old;
    [(2.0, "twice"), (3.0, "three times"), (0.5, "half")]
        .into_iter()
        .find(|(r, _)| ((ratio - r) / r).abs() <= RATIO_TOLERANCE)
        .map(|(_, w)| w)
}

fn describe(change: &Change, degree: Degree, style: ChangeStyle, invert: bool) -> String {
    let (from, to) = if invert {
        (change.new, change.old)
    } else {
        (change.old, change.new)
    };
    let up = to > from;
    let amount = format_amount(to - from);
    let comparative = match (style, up) {
        (ChangeStyle::Count, true) => "more",
        (ChangeStyle::Count, false) => "fewer",
        (ChangeStyle::Level, true) => "higher",
        (ChangeStyle::Level, false) => "lower",
    };
    let exact = || match style {
        ChangeStyle::Count => format!("{amount} {comparative}"),
        ChangeStyle::Level => format!("{amount} point {comparative}"),
    };
    match degree {
        Degree::Exact => exact(),
        Degree::Relative => comparative.to_string(),
        Degree::Magnitude => match ratio_word(from, to) {
            Some(word) => match style {
                ChangeStyle::Count => format!("{word} as many"),
                ChangeStyle::Level => format!("{word} as high"),
            },
            None => exact(),
        },
    }
}

fn join_clauses(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Renders `predicate` with template `template_id`. `degrees` gives one degree per
/// change, a single degree for all, or none for exact values throughout.
pub fn render_text(
    predicate: &Predicate,
    set: &TemplateSet,
    template_id: &str,
    degrees: &[Degree],
) -> Result<ExplanationText> {
    if predicate.is_empty() {
        return Err(Error::EmptyPredicate);
    }
    let template = set
        .templates
        .get(template_id)
        .ok_or_else(|| Error::UnknownTemplate(template_id.to_string()))?;
    let n = predicate.len();
    let degrees: Vec<Degree> = match degrees.len() {
        0 => vec![Degree::Exact; n],
        1 => vec![degrees[0]; n],
        len if len == n => degrees.to_vec(),
        len => {
            return Err(Error::Shape {
                expected: n,
                actual: len,
            })
        }
    };
    let clauses: Vec<String> = predicate
        .changes
        .iter()
        .zip(&degrees)
        .map(|(change, &degree)| {
            let feature = set.names.get(&change.name).unwrap_or(&change.name);
            template.change.replace("{feature}", feature).replace(
                "{delta}",
                &describe(change, degree, template.style, template.invert),
            )
        })
        .collect();
    let text = template
        .text
        .replace("{subject}", &set.subject)
        .replace("{X}", &predicate.label_x)
        .replace("{Y}", &predicate.label_y)
        .replace("{changes}", &join_clauses(&clauses));
    Ok(ExplanationText {
        template_id: template_id.to_string(),
        degrees,
        text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn spam_row_predicate() {
        let n = names(&["freq_you", "freq_direct", "avg_longest_capital"]);
        let p = extract_predicate(
            &[0.68, 0.34, 158.0],
            &[0.68, 0.34, 1.0],
            &n,
            &[2],
            "Spam",
            "Ham",
        )
        .unwrap();
        assert_eq!(p.len(), 1);
        let c = &p.changes[0];
        assert_eq!(
            (c.name.as_str(), c.old, c.new),
            ("avg_longest_capital", 158.0, 1.0)
        );
        assert_eq!(c.direction, Direction::Down);
        assert_eq!((p.label_x.as_str(), p.label_y.as_str()), ("Spam", "Ham"));
    }

    #[test]
    fn unchanged_sample_gives_empty_predicate() {
        let n = names(&["a", "b"]);
        let p = extract_predicate(&[1.0, 2.0], &[1.0, 2.0], &n, &[], "x", "y").unwrap();
        assert!(p.is_empty());
        assert!(matches!(
            render_text(&p, &TemplateSet::default(), "had", &[]),
            Err(Error::EmptyPredicate)
        ));
    }

    #[test]
    fn changes_follow_ranking_order() {
        let n = names(&["a", "b", "c"]);
        let p =
            extract_predicate(&[1.0, 2.0, 3.0], &[0.0, 2.0, 5.0], &n, &[2, 0], "x", "y").unwrap();
        let order: Vec<usize> = p.changes.iter().map(|c| c.feature).collect();
        assert_eq!(order, vec![2, 0]);
    }

    #[test]
    fn influence() {
        assert_eq!(influence_score(1, true, 1.0).unwrap(), 1.0);
        assert_eq!(influence_score(2, true, 1.0).unwrap(), 0.5);
        assert_eq!(influence_score(3, false, 1.0).unwrap(), 0.0);
        assert_eq!(influence_score(4, true, 0.0).unwrap(), 1.0);
        assert!(influence_score(0, true, 1.0).is_err());
    }

    #[test]
    fn amount_formatting() {
        assert_eq!(format_amount(9.0), "9");
        assert_eq!(format_amount(-0.245), "0.245");
        assert_eq!(format_amount(0.0071), "0.007");
        assert_eq!(format_amount(7.5), "7.5");
    }

    #[test]
    fn relative_degree_on_decrease() {
        let n = names(&["bmi"]);
        let p = extract_predicate(&[30.0], &[24.0], &n, &[0], "sick", "healthy").unwrap();
        let t = render_text(&p, &TemplateSet::default(), "had", &[Degree::Relative]).unwrap();
        assert!(t.text.contains("lower"), "{}", t.text);
        assert!(t.text.contains("sick") && t.text.contains("healthy"));
    }

    #[test]
    fn magnitude_degree() {
        let n = names(&["credit"]);
        let p = extract_predicate(&[0.2], &[0.4], &n, &[0], "ham", "spam").unwrap();
        let t = render_text(&p, &TemplateSet::default(), "had", &[Degree::Magnitude]).unwrap();
        assert_eq!(
            t.text,
            "had credit been twice as high, the sample would have been classified as spam RATHER THAN ham"
        );
        let q = extract_predicate(&[0.2], &[0.7], &n, &[0], "ham", "spam").unwrap();
        let t = render_text(&q, &TemplateSet::default(), "had", &[Degree::Magnitude]).unwrap();
        assert!(t.text.contains("0.5 point higher"));
    }

    #[test]
    fn because_template_inverts_direction() {
        let n = names(&["bare_nuclei", "clump_thickness"]);
        let p =
            extract_predicate(&[10.0, 8.0], &[3.0, 8.0], &n, &[0], "malignant", "benign").unwrap();
        let t = render_text(&p, &TemplateSet::default(), "because", &[]).unwrap();
        assert_eq!(
            t.text,
            "the sample is classified as malignant RATHER THAN benign because bare_nuclei is 7 point higher"
        );
    }

    #[test]
    fn unknown_template_and_degree_count() {
        let n = names(&["a", "b"]);
        let p = extract_predicate(&[1.0, 1.0], &[2.0, 0.0], &n, &[], "x", "y").unwrap();
        let set = TemplateSet::default();
        assert!(matches!(
            render_text(&p, &set, "nope", &[]),
            Err(Error::UnknownTemplate(_))
        ));
        assert!(render_text(&p, &set, "had", &[Degree::Exact; 3]).is_err());
        let t = render_text(&p, &set, "had", &[Degree::Exact, Degree::Relative]).unwrap();
        assert_eq!(
            t.text,
            "had a been 1 point higher and b been lower, the sample would have been classified as y RATHER THAN x"
        );
    }

    #[test]
    fn seeded_choice_is_stable() {
        let set = TemplateSet::default();
        assert_eq!(set.choose(3, 10).unwrap(), set.choose(3, 10).unwrap());
        assert!(set.ids().contains(&set.choose(8, 1).unwrap()));
    }

    #[test]
    fn template_file_parses() {
        let text = r#"
subject = "the patient"
[templates.if_there_were]
text = "if there were {changes}, {subject} would be classified as {Y} RATHER THAN {X}"
change = "{delta} {feature}"
style = "count"
[names]
bare_nuclei = "bare nucleus"
"#;
        let set = TemplateSet::from_toml(text).unwrap();
        assert_eq!(set.subject, "the patient");
        assert_eq!(set.names["bare_nuclei"], "bare nucleus");
        assert!(!set.templates["if_there_were"].invert);
    }
}
