//! Factor extraction: measures how strongly each registered factor is
//! manifest in each response, using three extractor families: deterministic
//! rules, a learned external scorer, and LLM judges (response-level and
//! atomic-fact-level).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{write_atomic, ResponseId, SourceId, TaskKind};

pub mod extract;
pub mod scorer;
pub mod text;

pub use extract::{ExtractionReport, Extractor};
pub use scorer::{ScorerAspect, ScorerClient};

/// The thirteen registered factors.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum FactorName {
    Length,
    NovelWords,
    Fluency,
    Coherence,
    IntentAlignment,
    FormalityAlignment,
    NumberOfFacts,
    SourceCoverage,
    OffFocus,
    Hallucination,
    Helpfulness,
    Misinformation,
    Receptiveness,
}

impl FactorName {
    pub fn all() -> [FactorName; 13] {
        use FactorName::*;
        [
            Length,
            NovelWords,
            Fluency,
            Coherence,
            IntentAlignment,
            FormalityAlignment,
            NumberOfFacts,
            SourceCoverage,
            OffFocus,
            Hallucination,
            Helpfulness,
            Misinformation,
            Receptiveness,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        use FactorName::*;
        match self {
            Length => "length",
            NovelWords => "novel_words",
            Fluency => "fluency",
            Coherence => "coherence",
            IntentAlignment => "intent_alignment",
            FormalityAlignment => "formality_alignment",
            NumberOfFacts => "number_of_facts",
            SourceCoverage => "source_coverage",
            OffFocus => "off_focus",
            Hallucination => "hallucination",
            Helpfulness => "helpfulness",
            Misinformation => "misinformation",
            Receptiveness => "receptiveness",
        }
    }

    pub fn parse(s: &str) -> Option<FactorName> {
        FactorName::all().into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for FactorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which extractor family measures a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    Rule,
    Learned,
    LlmResponse,
    LlmAtomic,
}

/// What shape of value a factor produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Count,
    Ratio,
    UnitScore,
    Ordinal,
}

/// Which relationship the factor examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationCategory {
    InputOutput,
    SourceOutput,
    OutputOnly,
    IntraOutput,
}

/// Registry entry for one factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: FactorName,
    pub level2_group: &'static str,
    pub level3_category: RelationCategory,
    pub method: ExtractionMethod,
    pub value_kind: ValueKind,
}

const REGISTRY: [Factor; 13] = {
    use ExtractionMethod::*;
    use FactorName::*;
    use RelationCategory::*;
    use ValueKind::*;
    [
        Factor { name: Length, level2_group: "linguistic_style", level3_category: OutputOnly, method: Rule, value_kind: Count },
        Factor { name: NovelWords, level2_group: "informativeness", level3_category: SourceOutput, method: Rule, value_kind: Ratio },
        Factor { name: Fluency, level2_group: "linguistic_style", level3_category: OutputOnly, method: Learned, value_kind: UnitScore },
        Factor { name: Coherence, level2_group: "structure", level3_category: IntraOutput, method: Learned, value_kind: UnitScore },
        Factor { name: IntentAlignment, level2_group: "relevance", level3_category: SourceOutput, method: LlmResponse, value_kind: Ordinal },
        Factor { name: FormalityAlignment, level2_group: "style_matching", level3_category: SourceOutput, method: LlmResponse, value_kind: Ordinal },
        Factor { name: NumberOfFacts, level2_group: "informativeness", level3_category: OutputOnly, method: LlmAtomic, value_kind: Count },
        Factor { name: SourceCoverage, level2_group: "content_fidelity", level3_category: SourceOutput, method: LlmAtomic, value_kind: Ratio },
        Factor { name: OffFocus, level2_group: "relevance", level3_category: InputOutput, method: LlmAtomic, value_kind: Ratio },
        Factor { name: Hallucination, level2_group: "content_fidelity", level3_category: SourceOutput, method: LlmAtomic, value_kind: Ratio },
        Factor { name: Helpfulness, level2_group: "informativeness", level3_category: OutputOnly, method: LlmAtomic, value_kind: Ratio },
        Factor { name: Misinformation, level2_group: "content_fidelity", level3_category: OutputOnly, method: LlmAtomic, value_kind: Ratio },
        Factor { name: Receptiveness, level2_group: "relevance", level3_category: InputOutput, method: LlmResponse, value_kind: Ordinal },
    ]
};

/// All registered factors with their classification and extraction method.
pub fn registry() -> &'static [Factor; 13] {
    &REGISTRY
}

pub fn factor(name: FactorName) -> &'static Factor {
    REGISTRY
        .iter()
        .find(|f| f.name == name)
        .expect("every factor name is registered")
}

/// The factor subset applicable to a task.
pub fn task_profile(kind: TaskKind) -> &'static [FactorName] {
    use FactorName::*;
    match kind {
        TaskKind::Summarization => &[
            IntentAlignment,
            FormalityAlignment,
            NumberOfFacts,
            SourceCoverage,
            Length,
            Coherence,
            OffFocus,
            Hallucination,
            Fluency,
            NovelWords,
        ],
        TaskKind::HelpfulResponse => &[
            Receptiveness,
            Helpfulness,
            NumberOfFacts,
            Length,
            Coherence,
            Misinformation,
            Fluency,
            OffFocus,
            Hallucination,
        ],
        TaskKind::DocQa => &[
            Receptiveness,
            Length,
            Helpfulness,
            NumberOfFacts,
            Coherence,
            Fluency,
            Misinformation,
            OffFocus,
            NovelWords,
            Hallucination,
        ],
    }
}

/// A measured factor value. Counts are non-negative, ratios and unit scores
/// lie in [0, 1], ordinals in {0, 1, 2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ManifestationValue {
    Count(u64),
    Ratio(f64),
    UnitScore(f64),
    Ordinal(u8),
}

impl ManifestationValue {
    pub fn numeric(&self) -> f64 {
        match self {
            ManifestationValue::Count(c) => *c as f64,
            ManifestationValue::Ratio(r) => *r,
            ManifestationValue::UnitScore(s) => *s,
            ManifestationValue::Ordinal(o) => *o as f64,
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            ManifestationValue::Count(_) => ValueKind::Count,
            ManifestationValue::Ratio(_) => ValueKind::Ratio,
            ManifestationValue::UnitScore(_) => ValueKind::UnitScore,
            ManifestationValue::Ordinal(_) => ValueKind::Ordinal,
        }
    }

    fn validate(&self) -> Result<(), ExtractError> {
        match self {
            ManifestationValue::Count(_) => Ok(()),
            ManifestationValue::Ratio(v) | ManifestationValue::UnitScore(v) => {
                if (0.0..=1.0).contains(v) {
                    Ok(())
                } else {
                    Err(ExtractError::ValueOutOfRange(*v))
                }
            }
            ManifestationValue::Ordinal(o) => {
                if *o <= 2 {
                    Ok(())
                } else {
                    Err(ExtractError::ValueOutOfRange(*o as f64))
                }
            }
        }
    }
}

/// One factor's measured value on one response, with optional structured
/// evidence (per-fact verdicts, justifications).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorManifestation {
    pub response_id: ResponseId,
    pub factor: FactorName,
    #[serde(flatten)]
    pub value: ManifestationValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl FactorManifestation {
    pub fn new(
        response_id: ResponseId,
        factor_name: FactorName,
        value: ManifestationValue,
        detail: Option<Value>,
    ) -> Result<FactorManifestation, ExtractError> {
        value.validate()?;
        let expected = factor(factor_name).value_kind;
        if value.kind() != expected {
            return Err(ExtractError::KindMismatch {
                factor: factor_name,
                expected,
                got: value.kind(),
            });
        }
        Ok(FactorManifestation {
            response_id,
            factor: factor_name,
            value,
            detail,
        })
    }
}

/// Ordered atomic facts of one response (or of a source post).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicFactSet {
    pub response_id: ResponseId,
    pub facts: Vec<String>,
}

/// A slot in the store: either measured or skipped with a reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Slot {
    Measured(FactorManifestation),
    Skipped {
        response_id: ResponseId,
        factor: FactorName,
        reason: String,
    },
}

impl Slot {
    pub fn manifestation(&self) -> Option<&FactorManifestation> {
        match self {
            Slot::Measured(m) => Some(m),
            Slot::Skipped { .. } => None,
        }
    }
}

pub const EXTRACTOR_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum StoreRow {
    Manifestation {
        #[serde(flatten)]
        slot: Slot,
        extractor_version: String,
    },
    SourceFacts {
        source_id: SourceId,
        facts: Vec<String>,
        extractor_version: String,
    },
}

/// All measured (response, factor) slots for a corpus, plus cached source
/// fact sets. Persisted as JSONL, one object per slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManifestationStore {
    slots: BTreeMap<(ResponseId, FactorName), Slot>,
    source_facts: BTreeMap<SourceId, Vec<String>>,
}

impl ManifestationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, response: &ResponseId, factor: FactorName) -> Option<&Slot> {
        self.slots.get(&(response.clone(), factor))
    }

    pub fn get(&self, response: &ResponseId, factor: FactorName) -> Option<&FactorManifestation> {
        self.slot(response, factor).and_then(Slot::manifestation)
    }

    pub fn insert(&mut self, manifestation: FactorManifestation) {
        self.slots.insert(
            (manifestation.response_id.clone(), manifestation.factor),
            Slot::Measured(manifestation),
        );
    }

    pub fn insert_skip(&mut self, response: &ResponseId, factor: FactorName, reason: &str) {
        self.slots.insert(
            (response.clone(), factor),
            Slot::Skipped {
                response_id: response.clone(),
                factor,
                reason: reason.to_string(),
            },
        );
    }

    pub fn source_facts(&self, source: &SourceId) -> Option<&Vec<String>> {
        self.source_facts.get(source)
    }

    pub fn insert_source_facts(&mut self, source: &SourceId, facts: Vec<String>) {
        self.source_facts.insert(source.clone(), facts);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Slot> {
        self.slots.values()
    }

    pub fn save(&self, path: &Path) -> Result<(), ExtractError> {
        let mut out = Vec::new();
        for slot in self.slots.values() {
            let row = StoreRow::Manifestation {
                slot: slot.clone(),
                extractor_version: EXTRACTOR_VERSION.to_string(),
            };
            out.extend_from_slice(serde_json::to_string(&row).expect("serializable").as_bytes());
            out.push(b'\n');
        }
        for (source_id, facts) in &self.source_facts {
            let row = StoreRow::SourceFacts {
                source_id: source_id.clone(),
                facts: facts.clone(),
                extractor_version: EXTRACTOR_VERSION.to_string(),
            };
            out.extend_from_slice(serde_json::to_string(&row).expect("serializable").as_bytes());
            out.push(b'\n');
        }
        write_atomic(path, &out).map_err(|e| ExtractError::Io(path.display().to_string(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ManifestationStore, ExtractError> {
        let file = fs::File::open(path)
            .map_err(|e| ExtractError::Io(path.display().to_string(), e.to_string()))?;
        let mut store = ManifestationStore::new();
        for line in std::io::BufReader::new(file).lines() {
            let line =
                line.map_err(|e| ExtractError::Io(path.display().to_string(), e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: StoreRow = serde_json::from_str(&line)
                .map_err(|e| ExtractError::Io(path.display().to_string(), e.to_string()))?;
            match row {
                StoreRow::Manifestation { slot, .. } => match &slot {
                    Slot::Measured(m) => {
                        store
                            .slots
                            .insert((m.response_id.clone(), m.factor), slot.clone());
                    }
                    Slot::Skipped {
                        response_id,
                        factor,
                        ..
                    } => {
                        store
                            .slots
                            .insert((response_id.clone(), *factor), slot.clone());
                    }
                },
                StoreRow::SourceFacts {
                    source_id, facts, ..
                } => {
                    store.source_facts.insert(source_id, facts);
                }
            }
        }
        Ok(store)
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("value {0} outside its kind's range")]
    ValueOutOfRange(f64),
    #[error("factor {factor} expects {expected:?} values, got {got:?}")]
    KindMismatch {
        factor: FactorName,
        expected: ValueKind,
        got: ValueKind,
    },
    #[error("learned scorer: {0}")]
    Scorer(String),
    #[error("learned scorer returned {0}, outside [0, 1]")]
    ScorerProtocol(f64),
    #[error("judge: {0}")]
    Judge(#[from] crate::judge::JudgeError),
    #[error("response {0} not in corpus")]
    UnknownResponse(ResponseId),
    #[error("decision {0:?} outside the label set")]
    BadDecision(String),
    #[error("no judge configured but factor {0} needs one")]
    NoJudge(FactorName),
    #[error("no scorer configured but factor {0} needs one")]
    NoScorer(FactorName),
    #[error("{failed} of {attempted} extractions failed, over the {threshold} threshold")]
    TooManyFailures {
        failed: usize,
        attempted: usize,
        threshold: f64,
    },
    #[error("{0}: {1}")]
    Io(String, String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_thirteen_factors_with_the_fixed_method_split() {
        assert_eq!(registry().len(), 13);
        let count = |m: ExtractionMethod| registry().iter().filter(|f| f.method == m).count();
        assert_eq!(count(ExtractionMethod::Rule), 2);
        assert_eq!(count(ExtractionMethod::Learned), 2);
        assert_eq!(count(ExtractionMethod::LlmResponse), 3);
        assert_eq!(count(ExtractionMethod::LlmAtomic), 6);
        assert_eq!(factor(FactorName::Length).method, ExtractionMethod::Rule);
        assert_eq!(factor(FactorName::NovelWords).method, ExtractionMethod::Rule);
        assert_eq!(factor(FactorName::Fluency).method, ExtractionMethod::Learned);
        assert_eq!(factor(FactorName::Coherence).method, ExtractionMethod::Learned);
        assert_eq!(
            factor(FactorName::IntentAlignment).method,
            ExtractionMethod::LlmResponse
        );
        assert_eq!(
            factor(FactorName::FormalityAlignment).method,
            ExtractionMethod::LlmResponse
        );
    }

    #[test]
    fn task_profiles_match_the_published_factor_sets() {
        let sum = task_profile(TaskKind::Summarization);
        let help = task_profile(TaskKind::HelpfulResponse);
        let qa = task_profile(TaskKind::DocQa);
        assert_eq!(sum.len(), 10);
        assert_eq!(help.len(), 9);
        assert_eq!(qa.len(), 10);
        // source-dependent factors appear only where listed
        assert!(!help.contains(&FactorName::NovelWords));
        assert!(!help.contains(&FactorName::SourceCoverage));
        assert!(!qa.contains(&FactorName::SourceCoverage));
        assert!(qa.contains(&FactorName::NovelWords));
        assert!(!help.contains(&FactorName::IntentAlignment));
        assert!(!qa.contains(&FactorName::FormalityAlignment));
        assert!(sum.contains(&FactorName::SourceCoverage));
    }

    #[test]
    fn manifestation_values_are_range_checked() {
        let id = ResponseId("r".into());
        assert!(FactorManifestation::new(
            id.clone(),
            FactorName::OffFocus,
            ManifestationValue::Ratio(1.3),
            None
        )
        .is_err());
        assert!(FactorManifestation::new(
            id.clone(),
            FactorName::FormalityAlignment,
            ManifestationValue::Ordinal(3),
            None
        )
        .is_err());
        assert!(FactorManifestation::new(
            id.clone(),
            FactorName::Length,
            ManifestationValue::Ratio(0.5),
            None
        )
        .is_err());
        assert!(FactorManifestation::new(
            id,
            FactorName::Length,
            ManifestationValue::Count(3),
            None
        )
        .is_ok());
    }

    #[test]
    fn store_round_trips_through_jsonl() {
        let mut store = ManifestationStore::new();
        let id = ResponseId("resp1".into());
        store.insert(
            FactorManifestation::new(
                id.clone(),
                FactorName::Length,
                ManifestationValue::Count(42),
                None,
            )
            .unwrap(),
        );
        store.insert_skip(&id, FactorName::NovelWords, "zero tokens");
        store.insert_source_facts(&SourceId("src1".into()), vec!["a fact".into()]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifestations.jsonl");
        store.save(&path).unwrap();
        let loaded = ManifestationStore::load(&path).unwrap();
        assert_eq!(store, loaded);
    }
}
