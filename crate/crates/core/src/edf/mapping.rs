use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use wildmatch::WildMatch;

use crate::model::{
    is_rk_collapsed_stage, parse_sleep_stage, Annotation, AnnotationSet, NameType, SleepStageLabel,
};

use super::{EdfError, TalAnnotation};

pub const HYPNOGRAM_SET: &str = "hypnogram";
pub const UNMATCHED_SET: &str = "edf_annotations";

/// Routing of annotation texts into sets. Patterns are case-insensitive
/// globs (`*` any run, `?` one character).
///
/// ```json
/// {"stage_aliases": {"Schlafstadium W": "W"},
///  "event_sets": [{"pattern": "*apnea*", "set_name": "respiratory"}]}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMapping {
    /// Extra stage aliases, pattern to stage. Consulted before the built-in
    /// alias table.
    #[serde(default)]
    pub stage_aliases: IndexMap<String, String>,
    /// First matching rule wins.
    #[serde(default)]
    pub event_sets: Vec<EventSetRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSetRule {
    pub pattern: String,
    pub set_name: String,
}

impl LabelMapping {
    pub fn from_json(text: &str) -> Result<Self, EdfError> {
        let mapping: LabelMapping =
            serde_json::from_str(text).map_err(|e| EdfError::InvalidMapping(e.to_string()))?;
        mapping.check()?;
        Ok(mapping)
    }

    pub fn check(&self) -> Result<(), EdfError> {
        for (pattern, stage) in &self.stage_aliases {
            parse_sleep_stage(stage).map_err(|_| {
                EdfError::InvalidMapping(format!(
                    "stage alias {pattern:?} maps to unknown stage {stage:?}"
                ))
            })?;
        }
        for rule in &self.event_sets {
            let n = &rule.set_name;
            if n.is_empty()
                || n.starts_with('.')
                || n.contains(['/', '\\', '\0'])
                || n == HYPNOGRAM_SET
                || n == UNMATCHED_SET
            {
                return Err(EdfError::InvalidMapping(format!(
                    "event set name {n:?} is empty, reserved or not a valid file name"
                )));
            }
        }
        Ok(())
    }

    fn compiled(&self) -> Compiled<'_> {
        Compiled {
            stages: self
                .stage_aliases
                .iter()
                .filter_map(|(p, s)| {
                    Some((
                        WildMatch::new_case_insensitive(p),
                        parse_sleep_stage(s).ok()?,
                    ))
                })
                .collect(),
            events: self
                .event_sets
                .iter()
                .map(|r| {
                    (
                        WildMatch::new_case_insensitive(&r.pattern),
                        r.set_name.as_str(),
                    )
                })
                .collect(),
        }
    }
}

struct Compiled<'a> {
    stages: Vec<(WildMatch, SleepStageLabel)>,
    events: Vec<(WildMatch, &'a str)>,
}

/// Sorts annotation texts into a sleep-stage set named
/// [`HYPNOGRAM_SET`], the configured event sets, and a free-text set named
/// [`UNMATCHED_SET`]. Empty sets are omitted. Annotations with a negative
/// onset are dropped with a warning; R&K stage 3 and 4 both become N3 with
/// one summary warning.
pub fn map_annotations(
    tals: &[TalAnnotation],
    mapping: &LabelMapping,
) -> (Vec<AnnotationSet>, Vec<String>) {
    let compiled = mapping.compiled();
    let mut warnings = Vec::new();
    let mut hypnogram = AnnotationSet::new(HYPNOGRAM_SET, NameType::aasm_sleep_stage());
    let mut events: IndexMap<&str, AnnotationSet> = mapping
        .event_sets
        .iter()
        .map(|r| {
            (
                r.set_name.as_str(),
                AnnotationSet::new(&r.set_name, NameType::free_text()),
            )
        })
        .collect();
    let mut unmatched = AnnotationSet::new(UNMATCHED_SET, NameType::free_text());
    let mut collapsed = 0usize;

    for tal in tals {
        let duration = tal.duration_sec.unwrap_or(0.0);
        for text in &tal.texts {
            if tal.onset_sec < 0.0 {
                warnings.push(format!(
                    "annotation {text:?} at negative onset {} dropped",
                    tal.onset_sec
                ));
                continue;
            }
            let stage = compiled
                .stages
                .iter()
                .find(|(p, _)| p.matches(text))
                .map(|(_, s)| *s)
                .or_else(|| parse_sleep_stage(text).ok());
            if let Some(stage) = stage {
                if is_rk_collapsed_stage(text) {
                    collapsed += 1;
                }
                hypnogram.annotations.push(Annotation::new(
                    stage.as_str(),
                    tal.onset_sec,
                    duration,
                ));
                continue;
            }
            let ann = Annotation::new(text.as_str(), tal.onset_sec, duration);
            match compiled.events.iter().find(|(p, _)| p.matches(text)) {
                Some((_, set)) => events[set].annotations.push(ann),
                None => unmatched.annotations.push(ann),
            }
        }
    }
    if collapsed > 0 {
        warnings.push(format!(
            "{collapsed} R&K stage 3/4 annotations mapped to N3"
        ));
    }

    let sets = std::iter::once(hypnogram)
        .chain(events.into_values())
        .chain(std::iter::once(unmatched))
        .filter(|s| !s.annotations.is_empty())
        .collect();
    (sets, warnings)
}
