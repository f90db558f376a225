//! Seeded generator for census-style demo datasets.
//!
//! Produces a mixed numeric/categorical table with a planted, noisy
//! relationship between features and a binary income label. The label
//! noise is deliberate: few-shot models trained on different seeds should
//! genuinely disagree near the decision boundary, which is what the
//! multiplicity pipeline is built to measure.

use rand::Rng;

use crate::seed::{rng_from_seed, standard_normal};
use crate::tabular::{ColumnKind, Dataset, Schema, Value};

const WORKCLASS: &[&str] = &[
    "Private",
    "Self-emp",
    "Federal-gov",
    "State-gov",
    "Local-gov",
    "Without-pay",
];
const EDUCATION: &[(&str, f64)] = &[
    ("HS-grad", 0.0),
    ("Some-college", 0.35),
    ("Assoc", 0.5),
    ("Bachelors", 1.0),
    ("Masters", 1.5),
    ("Doctorate", 2.0),
];
const MARITAL: &[&str] = &["Married", "Never-married", "Divorced", "Widowed"];
const OCCUPATION: &[(&str, f64)] = &[
    ("Exec-managerial", 0.9),
    ("Prof-specialty", 0.8),
    ("Tech-support", 0.4),
    ("Sales", 0.2),
    ("Craft-repair", 0.0),
    ("Adm-clerical", -0.1),
    ("Other-service", -0.6),
    ("Handlers-cleaners", -0.7),
];
const RELATIONSHIP: &[&str] = &["Husband", "Wife", "Own-child", "Unmarried", "Other-relative"];
const RACE: &[&str] = &["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"];
const SEX: &[&str] = &["Male", "Female"];
const COUNTRY: &[&str] = &["United-States", "Mexico", "Germany", "Philippines", "Canada"];

/// Generated table plus its rendered CSV.
#[derive(Debug, Clone)]
pub struct DemoData {
    pub dataset: Dataset,
    pub csv: String,
}

/// The demo schema: 14 census-style attributes and a binary income label.
pub fn demo_schema() -> Schema {
    Schema::new(
        vec![
            ("age".into(), ColumnKind::Numeric),
            ("workclass".into(), ColumnKind::Categorical),
            ("fnlwgt".into(), ColumnKind::Numeric),
            ("education".into(), ColumnKind::Categorical),
            ("education_num".into(), ColumnKind::Numeric),
            ("marital_status".into(), ColumnKind::Categorical),
            ("occupation".into(), ColumnKind::Categorical),
            ("relationship".into(), ColumnKind::Categorical),
            ("race".into(), ColumnKind::Categorical),
            ("sex".into(), ColumnKind::Categorical),
            ("capital_gain".into(), ColumnKind::Numeric),
            ("capital_loss".into(), ColumnKind::Numeric),
            ("hours_per_week".into(), ColumnKind::Numeric),
            ("native_country".into(), ColumnKind::Categorical),
        ],
        "income",
        ">50K",
    )
    .expect("demo schema is valid")
}

/// Generates `rows` records, deterministic in `seed`.
pub fn generate_demo(rows: usize, seed: u64) -> DemoData {
    let schema = demo_schema();
    let mut rng = rng_from_seed(seed);

    let mut records: Vec<Vec<Value>> = Vec::with_capacity(rows);
    let mut labels: Vec<u8> = Vec::with_capacity(rows);
    let mut csv = String::new();
    let header: Vec<&str> = schema
        .columns()
        .iter()
        .map(|(name, _)| name.as_str())
        .collect();
    csv.push_str(&header.join(","));
    csv.push_str(",income\n");

    for _ in 0..rows {
        // latent affluence drives the correlated attributes
        let latent = standard_normal(&mut rng);

        let age = (38.0 + 12.0 * standard_normal(&mut rng) + 4.0 * latent)
            .clamp(18.0, 90.0)
            .round();
        let workclass = WORKCLASS[rng.random_range(0..WORKCLASS.len())];
        let fnlwgt = (190_000.0 + 90_000.0 * standard_normal(&mut rng)).clamp(20_000.0, 900_000.0)
            .round();
        let edu_idx = ((1.8 + 1.1 * latent + 0.9 * standard_normal(&mut rng))
            .clamp(0.0, (EDUCATION.len() - 1) as f64))
        .round() as usize;
        let (education, edu_score) = EDUCATION[edu_idx];
        let education_num = (edu_idx + 9) as f64;
        let marital = MARITAL[rng.random_range(0..MARITAL.len())];
        let occ_idx = ((3.5 - 1.4 * latent + 1.1 * standard_normal(&mut rng))
            .clamp(0.0, (OCCUPATION.len() - 1) as f64))
        .round() as usize;
        let (occupation, occ_score) = OCCUPATION[occ_idx];
        let relationship = RELATIONSHIP[rng.random_range(0..RELATIONSHIP.len())];
        let race = RACE[rng.random_range(0..RACE.len())];
        let sex = SEX[rng.random_range(0..SEX.len())];
        let capital_gain = if rng.random_range(0.0..1.0) < 0.08 + 0.05 * latent.max(0.0) {
            (1500.0 * (1.0 + latent.max(0.0)) * rng.random_range(1.0..5.0)).round()
        } else {
            0.0
        };
        let capital_loss = if rng.random_range(0.0..1.0) < 0.05 {
            (rng.random_range(200.0..2000.0f64)).round()
        } else {
            0.0
        };
        let hours = (41.0 + 9.0 * standard_normal(&mut rng) + 3.0 * latent)
            .clamp(5.0, 90.0)
            .round();

        // noisy planted decision rule; the logistic noise keeps the
        // boundary genuinely uncertain
        let score = 0.035 * (age - 38.0) + 0.9 * edu_score + 0.8 * occ_score
            + 0.04 * (hours - 41.0)
            + 0.0004 * capital_gain
            + if marital == "Married" { 0.6 } else { 0.0 }
            + 1.3 * standard_normal(&mut rng);
        let label = u8::from(score > 1.75);

        let row = vec![
            Value::Number(age),
            Value::Category(workclass.into()),
            Value::Number(fnlwgt),
            Value::Category(education.into()),
            Value::Number(education_num),
            Value::Category(marital.into()),
            Value::Category(occupation.into()),
            Value::Category(relationship.into()),
            Value::Category(race.into()),
            Value::Category(sex.into()),
            Value::Number(capital_gain),
            Value::Number(capital_loss),
            Value::Number(hours),
            Value::Category(country_pick(&mut rng)),
        ];
        let rendered: Vec<String> = row.iter().map(Value::render).collect();
        csv.push_str(&rendered.join(","));
        csv.push(',');
        csv.push_str(if label == 1 { ">50K" } else { "<=50K" });
        csv.push('\n');

        records.push(row);
        labels.push(label);
    }

    let dataset = Dataset::new(schema, records, labels).expect("generated rows conform");
    DemoData { dataset, csv }
}

fn country_pick(rng: &mut rand_chacha::ChaCha8Rng) -> String {
    // heavily skewed toward the first entry, like the source distribution
    if rng.random_range(0.0..1.0) < 0.85 {
        COUNTRY[0].to_string()
    } else {
        COUNTRY[rng.random_range(1..COUNTRY.len())].to_string()
    }
}
