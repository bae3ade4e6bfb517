//! Clinical data model: patient profiles, symptom surveys, and the
//! previous-visit → current-visit transitions that form the supervised set.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, FeatureSchema, FeatureSpec};
use crate::error::{Error, Result};

/// Inclusive age range observed in the reference cohort.
pub const AGE_RANGE: (u32, u32) = (18, 93);

/// The date separating training from test transitions in the reference study.
pub fn default_split_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 10, 4).expect("valid date")
}

/// ESAS symptom level, an integer in `0..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct SymptomLevel(u8);

impl SymptomLevel {
    pub const MAX: u8 = 10;

    pub fn new(value: i64) -> Result<Self> {
        if (0..=i64::from(Self::MAX)).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(Error::InvalidLevel(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for SymptomLevel {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SymptomLevel> for u8 {
    fn from(level: SymptomLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for SymptomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Male, Sex::Female];

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            other => Err(format!("unknown sex '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CancerType {
    Breast,
    HeadAndNeck,
    Lymphoma,
    Colorectal,
}

impl CancerType {
    pub const ALL: [CancerType; 4] = [
        CancerType::Breast,
        CancerType::HeadAndNeck,
        CancerType::Lymphoma,
        CancerType::Colorectal,
    ];

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CancerType::Breast => "breast",
            CancerType::HeadAndNeck => "head_and_neck",
            CancerType::Lymphoma => "lymphoma",
            CancerType::Colorectal => "colorectal",
        }
    }
}

impl FromStr for CancerType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        CancerType::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown cancer_type '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub patient_id: String,
    pub sex: Sex,
    /// Age at diagnosis, in years.
    pub age: u32,
    pub cancer_type: CancerType,
    pub diagnosis_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub patient_id: String,
    pub survey_date: NaiveDate,
    pub pain: SymptomLevel,
    pub tiredness: SymptomLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symptom {
    Pain,
    Tiredness,
}

impl Symptom {
    pub fn as_str(self) -> &'static str {
        match self {
            Symptom::Pain => "pain",
            Symptom::Tiredness => "tiredness",
        }
    }

    /// The two model variants predicting this symptom: own-history only, then both histories.
    pub fn variants(self) -> [ModelVariant; 2] {
        match self {
            Symptom::Pain => [ModelVariant::Lp1, ModelVariant::Lp2],
            Symptom::Tiredness => [ModelVariant::Lt1, ModelVariant::Lt2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sex: Sex,
    pub age: u32,
    pub cancer_type: CancerType,
    pub days_since_diagnosis: i64,
    pub days_since_prev_survey: i64,
    pub prev_pain: SymptomLevel,
    pub prev_tiredness: SymptomLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionExample {
    pub patient_id: String,
    /// Date of the target (current) survey.
    pub survey_date: NaiveDate,
    pub features: FeatureVector,
    pub target_pain: SymptomLevel,
    pub target_tiredness: SymptomLevel,
}

impl TransitionExample {
    pub fn target(&self, symptom: Symptom) -> SymptomLevel {
        match symptom {
            Symptom::Pain => self.target_pain,
            Symptom::Tiredness => self.target_tiredness,
        }
    }

    pub fn previous(&self, symptom: Symptom) -> SymptomLevel {
        match symptom {
            Symptom::Pain => self.features.prev_pain,
            Symptom::Tiredness => self.features.prev_tiredness,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<TransitionExample>,
    pub test: Vec<TransitionExample>,
    pub split_date: NaiveDate,
}

/// Target symptom × feature set. `*1` sees only the predicted symptom's history,
/// `*2` sees both symptoms' histories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Lp1,
    Lp2,
    Lt1,
    Lt2,
}

const SEX: &str = "sex";
const AGE: &str = "age";
const CANCER_TYPE: &str = "cancer_type";
const DAYS_SINCE_DIAGNOSIS: &str = "days_since_diagnosis";
const DAYS_SINCE_PREV: &str = "days_since_prev_survey";
const PREV_PAIN: &str = "prev_pain";
const PREV_TIREDNESS: &str = "prev_tiredness";

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Lp1,
        ModelVariant::Lp2,
        ModelVariant::Lt1,
        ModelVariant::Lt2,
    ];

    pub fn target(self) -> Symptom {
        match self {
            ModelVariant::Lp1 | ModelVariant::Lp2 => Symptom::Pain,
            ModelVariant::Lt1 | ModelVariant::Lt2 => Symptom::Tiredness,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Lp1 => "lp1",
            ModelVariant::Lp2 => "lp2",
            ModelVariant::Lt1 => "lt1",
            ModelVariant::Lt2 => "lt2",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelVariant::Lp1 => "LP1",
            ModelVariant::Lp2 => "LP2",
            ModelVariant::Lt1 => "LT1",
            ModelVariant::Lt2 => "LT2",
        }
    }

    pub fn feature_schema(self) -> FeatureSchema {
        let mut features = vec![
            FeatureSpec::categorical(SEX, Sex::ALL.len() as u32),
            FeatureSpec::continuous_int(AGE, 0.0, 130.0),
            FeatureSpec::categorical(CANCER_TYPE, CancerType::ALL.len() as u32),
            FeatureSpec::continuous_int(DAYS_SINCE_DIAGNOSIS, 0.0, f64::INFINITY),
            FeatureSpec::continuous_int(DAYS_SINCE_PREV, 1.0, f64::INFINITY),
        ];
        let level = |name| FeatureSpec::continuous_int(name, 0.0, f64::from(SymptomLevel::MAX));
        match self {
            ModelVariant::Lp1 => features.push(level(PREV_PAIN)),
            ModelVariant::Lt1 => features.push(level(PREV_TIREDNESS)),
            ModelVariant::Lp2 | ModelVariant::Lt2 => {
                features.push(level(PREV_PAIN));
                features.push(level(PREV_TIREDNESS));
            }
        }
        FeatureSchema::new(features)
    }

    /// Name of the feature carrying the predicted symptom's previous level.
    pub fn own_history_feature(self) -> &'static str {
        match self.target() {
            Symptom::Pain => PREV_PAIN,
            Symptom::Tiredness => PREV_TIREDNESS,
        }
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant '{s}' (expected lp1, lp2, lt1 or lt2)"))
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Numeric feature row for `variant`, plus the variant's target level.
pub fn select_features(example: &TransitionExample, variant: ModelVariant) -> (Vec<f64>, SymptomLevel) {
    let f = &example.features;
    let mut row = vec![
        f64::from(f.sex.code()),
        f64::from(f.age),
        f64::from(f.cancer_type.code()),
        f.days_since_diagnosis as f64,
        f.days_since_prev_survey as f64,
    ];
    match variant {
        ModelVariant::Lp1 => row.push(f64::from(f.prev_pain.get())),
        ModelVariant::Lt1 => row.push(f64::from(f.prev_tiredness.get())),
        ModelVariant::Lp2 | ModelVariant::Lt2 => {
            row.push(f64::from(f.prev_pain.get()));
            row.push(f64::from(f.prev_tiredness.get()));
        }
    }
    (row, example.target(variant.target()))
}

/// Feature table for `variant` over `examples`, preserving order.
pub fn variant_dataset(examples: &[TransitionExample], variant: ModelVariant) -> Dataset {
    let (rows, labels) = examples
        .iter()
        .map(|e| {
            let (row, y) = select_features(e, variant);
            (row, y.get())
        })
        .unzip();
    Dataset {
        schema: variant.feature_schema(),
        rows,
        labels,
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

#[derive(Debug, Deserialize)]
struct ProfileRow {
    patient_id: String,
    sex: String,
    age: i64,
    cancer_type: String,
    diagnosis_date: String,
}

#[derive(Debug, Deserialize)]
struct SurveyRow {
    patient_id: String,
    survey_date: String,
    pain: i64,
    tiredness: i64,
}

fn parse_err(path: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_date(path: &str, line: u64, field: &str, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| parse_err(path, line, format!("field {field}: invalid date '{s}': {e}")))
}

fn parse_level(path: &str, line: u64, field: &str, v: i64) -> Result<SymptomLevel> {
    SymptomLevel::new(v).map_err(|_| parse_err(path, line, format!("field {field}: level {v} outside 0..=10")))
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn check_header(path: &str, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header '{}', found '{}'", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

pub const PROFILES_HEADER: [&str; 5] = ["patient_id", "sex", "age", "cancer_type", "diagnosis_date"];
pub const SURVEYS_HEADER: [&str; 4] = ["patient_id", "survey_date", "pain", "tiredness"];
pub const TRANSITIONS_HEADER: [&str; 11] = [
    "patient_id",
    "survey_date",
    "sex",
    "age",
    "cancer_type",
    "days_since_diagnosis",
    "days_since_prev_survey",
    "prev_pain",
    "prev_tiredness",
    "target_pain",
    "target_tiredness",
];

pub fn read_profiles<R: Read>(reader: R, path: &str) -> Result<Vec<PatientProfile>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(path, rdr.headers()?, &PROFILES_HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        let row: ProfileRow = rec
            .deserialize(None)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        let sex = row.sex.parse::<Sex>().map_err(|m| parse_err(path, line, m))?;
        let cancer_type = row
            .cancer_type
            .parse::<CancerType>()
            .map_err(|m| parse_err(path, line, m))?;
        if row.age < 0 {
            return Err(parse_err(path, line, format!("field age: negative value {}", row.age)));
        }
        let age = row.age as u32;
        if !(AGE_RANGE.0..=AGE_RANGE.1).contains(&age) {
            log::warn!("{path}: line {line}: age {age} outside the usual range {AGE_RANGE:?}");
        }
        if !seen.insert(row.patient_id.clone()) {
            return Err(parse_err(path, line, format!("duplicate patient_id '{}'", row.patient_id)));
        }
        out.push(PatientProfile {
            diagnosis_date: parse_date(path, line, "diagnosis_date", &row.diagnosis_date)?,
            patient_id: row.patient_id,
            sex,
            age,
            cancer_type,
        });
    }
    Ok(out)
}

pub fn read_surveys<R: Read>(reader: R, path: &str) -> Result<Vec<SurveyRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(path, rdr.headers()?, &SURVEYS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        let row: SurveyRow = rec
            .deserialize(None)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(SurveyRecord {
            survey_date: parse_date(path, line, "survey_date", &row.survey_date)?,
            pain: parse_level(path, line, "pain", row.pain)?,
            tiredness: parse_level(path, line, "tiredness", row.tiredness)?,
            patient_id: row.patient_id,
        });
    }
    Ok(out)
}

/// Reads both input files. Surveys come back grouped by patient (in profile
/// order) and sorted by date within each patient.
pub fn ingest_csv(
    profiles_path: impl AsRef<Path>,
    surveys_path: impl AsRef<Path>,
) -> Result<(Vec<PatientProfile>, Vec<SurveyRecord>)> {
    let pp = profiles_path.as_ref();
    let sp = surveys_path.as_ref();
    let profiles = read_profiles(std::fs::File::open(pp)?, &pp.display().to_string())?;
    let surveys = read_surveys(std::fs::File::open(sp)?, &sp.display().to_string())?;
    let surveys = organize_surveys(&profiles, surveys)?;
    Ok((profiles, surveys))
}

/// Groups surveys by patient in profile order and sorts each group by date.
/// Rejects unknown patients and duplicate `(patient_id, survey_date)` pairs.
pub fn organize_surveys(profiles: &[PatientProfile], surveys: Vec<SurveyRecord>) -> Result<Vec<SurveyRecord>> {
    let order: HashMap<&str, usize> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| (p.patient_id.as_str(), i))
        .collect();
    let mut keyed = Vec::with_capacity(surveys.len());
    for s in surveys {
        let idx = *order
            .get(s.patient_id.as_str())
            .ok_or_else(|| Error::UnknownPatient(s.patient_id.clone()))?;
        keyed.push((idx, s));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.survey_date.cmp(&b.1.survey_date)));
    for w in keyed.windows(2) {
        if w[0].0 == w[1].0 && w[0].1.survey_date == w[1].1.survey_date {
            return Err(Error::DuplicateSurvey {
                patient_id: w[1].1.patient_id.clone(),
                date: w[1].1.survey_date,
            });
        }
    }
    Ok(keyed.into_iter().map(|(_, s)| s).collect())
}

/// One example per consecutive pair of a patient's surveys. The first survey of
/// each patient has no history and yields no example.
pub fn build_transitions(profiles: &[PatientProfile], surveys: &[SurveyRecord]) -> Result<Vec<TransitionExample>> {
    let by_id: HashMap<&str, &PatientProfile> = profiles.iter().map(|p| (p.patient_id.as_str(), p)).collect();
    let mut grouped: BTreeMap<usize, Vec<&SurveyRecord>> = BTreeMap::new();
    let order: HashMap<&str, usize> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| (p.patient_id.as_str(), i))
        .collect();
    for s in surveys {
        let idx = *order
            .get(s.patient_id.as_str())
            .ok_or_else(|| Error::UnknownPatient(s.patient_id.clone()))?;
        grouped.entry(idx).or_default().push(s);
    }

    let mut out = Vec::new();
    for visits in grouped.values_mut() {
        // stable: already-sorted input is left untouched
        visits.sort_by_key(|s| s.survey_date);
        let profile = by_id[visits[0].patient_id.as_str()];
        for pair in visits.windows(2) {
            let (prev, cur) = (pair[0], pair[1]);
            let gap = (cur.survey_date - prev.survey_date).num_days();
            if gap < 1 {
                return Err(Error::SameDaySurveys {
                    patient_id: cur.patient_id.clone(),
                    date: cur.survey_date,
                });
            }
            out.push(TransitionExample {
                patient_id: cur.patient_id.clone(),
                survey_date: cur.survey_date,
                features: FeatureVector {
                    sex: profile.sex,
                    age: profile.age,
                    cancer_type: profile.cancer_type,
                    days_since_diagnosis: (cur.survey_date - profile.diagnosis_date).num_days(),
                    days_since_prev_survey: gap,
                    prev_pain: prev.pain,
                    prev_tiredness: prev.tiredness,
                },
                target_pain: cur.pain,
                target_tiredness: cur.tiredness,
            });
        }
    }
    Ok(out)
}

/// Train gets every example whose target survey predates `split_date`.
pub fn date_split(examples: &[TransitionExample], split_date: NaiveDate) -> SplitDataset {
    let (train, test) = examples
        .iter()
        .cloned()
        .partition(|e| e.survey_date < split_date);
    SplitDataset {
        train,
        test,
        split_date,
    }
}

// ---------------------------------------------------------------------------
// CSV export

#[derive(Debug, Serialize, Deserialize)]
struct TransitionRow {
    patient_id: String,
    survey_date: NaiveDate,
    sex: Sex,
    age: u32,
    cancer_type: CancerType,
    days_since_diagnosis: i64,
    days_since_prev_survey: i64,
    prev_pain: SymptomLevel,
    prev_tiredness: SymptomLevel,
    target_pain: SymptomLevel,
    target_tiredness: SymptomLevel,
}

impl From<&TransitionExample> for TransitionRow {
    fn from(e: &TransitionExample) -> Self {
        let f = &e.features;
        Self {
            patient_id: e.patient_id.clone(),
            survey_date: e.survey_date,
            sex: f.sex,
            age: f.age,
            cancer_type: f.cancer_type,
            days_since_diagnosis: f.days_since_diagnosis,
            days_since_prev_survey: f.days_since_prev_survey,
            prev_pain: f.prev_pain,
            prev_tiredness: f.prev_tiredness,
            target_pain: e.target_pain,
            target_tiredness: e.target_tiredness,
        }
    }
}

impl From<TransitionRow> for TransitionExample {
    fn from(r: TransitionRow) -> Self {
        Self {
            patient_id: r.patient_id,
            survey_date: r.survey_date,
            features: FeatureVector {
                sex: r.sex,
                age: r.age,
                cancer_type: r.cancer_type,
                days_since_diagnosis: r.days_since_diagnosis,
                days_since_prev_survey: r.days_since_prev_survey,
                prev_pain: r.prev_pain,
                prev_tiredness: r.prev_tiredness,
            },
            target_pain: r.target_pain,
            target_tiredness: r.target_tiredness,
        }
    }
}

pub fn write_transitions<W: Write>(writer: W, examples: &[TransitionExample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    if examples.is_empty() {
        wtr.write_record(TRANSITIONS_HEADER)?;
    }
    for e in examples {
        wtr.serialize(TransitionRow::from(e))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_transitions<R: Read>(reader: R, path: &str) -> Result<Vec<TransitionExample>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(path, rdr.headers()?, &TRANSITIONS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        let row: TransitionRow = rec
            .deserialize(None)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        if row.days_since_prev_survey < 1 {
            return Err(parse_err(path, line, "field days_since_prev_survey: must be at least 1"));
        }
        out.push(row.into());
    }
    Ok(out)
}

pub fn save_transitions(path: impl AsRef<Path>, examples: &[TransitionExample]) -> Result<()> {
    write_transitions(std::io::BufWriter::new(std::fs::File::create(path)?), examples)
}

pub fn load_transitions(path: impl AsRef<Path>) -> Result<Vec<TransitionExample>> {
    let p = path.as_ref();
    read_transitions(std::io::BufReader::new(std::fs::File::open(p)?), &p.display().to_string())
}

pub fn write_profiles<W: Write>(writer: W, profiles: &[PatientProfile]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(PROFILES_HEADER)?;
    for p in profiles {
        wtr.write_record([
            p.patient_id.as_str(),
            p.sex.as_str(),
            &p.age.to_string(),
            p.cancer_type.as_str(),
            &p.diagnosis_date.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_surveys<W: Write>(writer: W, surveys: &[SurveyRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SURVEYS_HEADER)?;
    for s in surveys {
        wtr.write_record([
            s.patient_id.as_str(),
            &s.survey_date.to_string(),
            &s.pain.to_string(),
            &s.tiredness.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// SHA-256 of the canonical CSV serialization, hex encoded.
pub fn content_hash(examples: &[TransitionExample]) -> String {
    let mut buf = Vec::new();
    write_transitions(&mut buf, examples).expect("writing to memory cannot fail");
    hex::encode(Sha256::digest(&buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn profile(id: &str, diagnosis: &str) -> PatientProfile {
        PatientProfile {
            patient_id: id.into(),
            sex: Sex::Female,
            age: 50,
            cancer_type: CancerType::Breast,
            diagnosis_date: date(diagnosis),
        }
    }

    fn survey(id: &str, d: &str, pain: i64, tired: i64) -> SurveyRecord {
        SurveyRecord {
            patient_id: id.into(),
            survey_date: date(d),
            pain: SymptomLevel::new(pain).unwrap(),
            tiredness: SymptomLevel::new(tired).unwrap(),
        }
    }

    #[test]
    fn symptom_level_bounds() {
        assert!(SymptomLevel::new(0).is_ok());
        assert!(SymptomLevel::new(10).is_ok());
        assert!(SymptomLevel::new(11).is_err());
        assert!(SymptomLevel::new(-1).is_err());
    }

    #[test]
    fn empty_surveys_file() {
        let s = read_surveys("patient_id,survey_date,pain,tiredness\n".as_bytes(), "s.csv").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn surveys_sorted_per_patient() {
        let profiles = read_profiles(
            "patient_id,sex,age,cancer_type,diagnosis_date\np1,male,40,head_and_neck,2013-06-01\n".as_bytes(),
            "p.csv",
        )
        .unwrap();
        let surveys = read_surveys(
            "patient_id,survey_date,pain,tiredness\np1,2014-03-01,2,3\np1,2014-01-01,1,1\n".as_bytes(),
            "s.csv",
        )
        .unwrap();
        let s = organize_surveys(&profiles, surveys).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].survey_date, date("2014-01-01"));
        assert_eq!(s[1].survey_date, date("2014-03-01"));
    }

    #[test]
    fn out_of_range_level_names_row_and_field() {
        let err = read_surveys(
            "patient_id,survey_date,pain,tiredness\np1,2014-01-01,1,1\np1,2014-02-01,11,1\n".as_bytes(),
            "s.csv",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("pain"), "{msg}");
    }

    #[test]
    fn unknown_category_rejected() {
        let err = read_profiles(
            "patient_id,sex,age,cancer_type,diagnosis_date\np1,male,40,lung,2013-06-01\n".as_bytes(),
            "p.csv",
        )
        .unwrap_err();
        assert!(err.to_string().contains("lung"));
    }

    #[test]
    fn unknown_patient_and_duplicates_rejected() {
        let profiles = vec![profile("a", "2013-01-01")];
        let err = organize_surveys(&profiles, vec![survey("b", "2014-01-01", 0, 0)]).unwrap_err();
        assert!(matches!(err, Error::UnknownPatient(_)));
        let err = organize_surveys(
            &profiles,
            vec![survey("a", "2014-01-01", 0, 0), survey("a", "2014-01-01", 1, 0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateSurvey { .. }));
    }

    #[test]
    fn transitions_from_three_visits() {
        let profiles = vec![profile("a", "2014-01-01"), profile("b", "2014-01-01")];
        let surveys = vec![
            survey("a", "2014-04-11", 1, 2),
            survey("a", "2014-05-11", 3, 4),
            survey("a", "2014-06-01", 5, 6),
            survey("b", "2014-02-01", 0, 0),
        ];
        let t = build_transitions(&profiles, &surveys).unwrap();
        assert_eq!(t.len(), 2);
        // diagnosis 100 days before the first visit, next visit 30 days later
        assert_eq!(t[0].features.days_since_prev_survey, 30);
        assert_eq!(t[0].features.days_since_diagnosis, 130);
        assert_eq!(t[0].features.prev_pain.get(), 1);
        assert_eq!(t[0].target_pain.get(), 3);
        assert_eq!(t[1].features.prev_tiredness.get(), 4);
        assert_eq!(t[1].target_tiredness.get(), 6);
    }

    #[test]
    fn same_day_surveys_rejected_at_transition_building() {
        let profiles = vec![profile("a", "2014-01-01")];
        let surveys = vec![survey("a", "2014-02-01", 1, 2), survey("a", "2014-02-01", 3, 4)];
        assert!(matches!(
            build_transitions(&profiles, &surveys),
            Err(Error::SameDaySurveys { .. })
        ));
    }

    fn example_on(d: &str) -> TransitionExample {
        let profiles = vec![profile("a", "2014-01-01")];
        let surveys = vec![survey("a", "2014-02-01", 1, 2), survey("a", d, 3, 4)];
        build_transitions(&profiles, &surveys).unwrap().remove(0)
    }

    #[test]
    fn split_boundary_goes_to_test() {
        let ex = vec![example_on("2017-10-03"), example_on("2017-10-04")];
        let s = date_split(&ex, default_split_date());
        assert_eq!(s.train.len(), 1);
        assert_eq!(s.test.len(), 1);
        assert_eq!(s.train[0].survey_date, date("2017-10-03"));
        assert_eq!(s.test[0].survey_date, date("2017-10-04"));

        let s = date_split(&ex, date("2020-01-01"));
        assert!(s.test.is_empty());
        assert_eq!(s.train.len(), 2);
    }

    #[test]
    fn variant_feature_sets() {
        let e = example_on("2015-01-01");
        let (lp1, y) = select_features(&e, ModelVariant::Lp1);
        assert_eq!(lp1.len(), 6);
        assert_eq!(y, e.target_pain);
        let (lt2, y) = select_features(&e, ModelVariant::Lt2);
        assert_eq!(lt2.len(), 7);
        assert_eq!(y, e.target_tiredness);
        let (lp2, _) = select_features(&e, ModelVariant::Lp2);
        assert_eq!(lp2, lt2);
        assert_eq!(ModelVariant::Lp2.feature_schema(), ModelVariant::Lt2.feature_schema());
        let (lt1, _) = select_features(&e, ModelVariant::Lt1);
        assert_eq!(lt1[5], 2.0);
        assert_eq!(lp1[5], 1.0);
    }

    #[test]
    fn transitions_csv_round_trip() {
        let ex = vec![example_on("2015-01-01"), example_on("2016-03-04")];
        let mut buf = Vec::new();
        write_transitions(&mut buf, &ex).unwrap();
        let header = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, TRANSITIONS_HEADER.join(","));
        let back = read_transitions(buf.as_slice(), "t.csv").unwrap();
        assert_eq!(back, ex);
        assert_eq!(content_hash(&back), content_hash(&ex));
    }
}
