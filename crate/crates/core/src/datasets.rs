//! Built-in reference networks and data: the credit-card fraud network with
//! its ten-case data set, and the college-plans sufficient statistics.

use crate::data::DataSet;
use crate::network::{NetworkStructure, VariableSpec};
use crate::params::ParameterSet;

pub fn fraud_variables() -> Vec<VariableSpec> {
    vec![
        VariableSpec::new("Fraud", ["yes", "no"]).unwrap(),
        VariableSpec::new("Age", ["<30", "30-50", ">50"]).unwrap(),
        VariableSpec::new("Sex", ["male", "female"]).unwrap(),
        VariableSpec::new("Gas", ["yes", "no"]).unwrap(),
        VariableSpec::new("Jewelry", ["yes", "no"]).unwrap(),
    ]
}

/// Fraud → Gas; Fraud, Age, Sex → Jewelry.
pub fn fraud_structure_s1() -> NetworkStructure {
    NetworkStructure::from_names(
        fraud_variables(),
        &[("Gas", &["Fraud"]), ("Jewelry", &["Fraud", "Age", "Sex"])],
    )
    .unwrap()
}

/// [`fraud_structure_s1`] plus the arc Age → Gas.
pub fn fraud_structure_s2() -> NetworkStructure {
    NetworkStructure::from_names(
        fraud_variables(),
        &[("Gas", &["Fraud", "Age"]), ("Jewelry", &["Fraud", "Age", "Sex"])],
    )
    .unwrap()
}

fn bernoulli(p_first: f64) -> Vec<f64> {
    vec![p_first, 1.0 - p_first]
}

/// The hand-built fraud network with its assessed probability tables.
pub fn fraud_prior_network() -> (NetworkStructure, ParameterSet) {
    let s = fraud_structure_s1();
    // Jewelry rows: configurations over (Fraud, Age, Sex), Sex fastest.
    let mut jewelry = vec![bernoulli(0.05); 6];
    for p in [0.0001, 0.0005, 0.0004, 0.002, 0.0002, 0.001] {
        jewelry.push(bernoulli(p));
    }
    let theta = vec![
        vec![bernoulli(0.00001)],
        vec![vec![0.25, 0.40, 0.35]],
        vec![bernoulli(0.5)],
        vec![bernoulli(0.2), bernoulli(0.01)],
        jewelry,
    ];
    let p = ParameterSet::normalized(&s, theta).unwrap();
    (s, p)
}

/// Column order of [`FRAUD_ROWS`].
pub const FRAUD_COLUMNS: [&str; 5] = ["Fraud", "Gas", "Jewelry", "Age", "Sex"];

pub const FRAUD_ROWS: [[&str; 5]; 10] = [
    ["no", "no", "no", "30-50", "female"],
    ["no", "no", "no", "30-50", "male"],
    ["yes", "yes", "yes", ">50", "male"],
    ["no", "no", "no", "30-50", "male"],
    ["no", "yes", "no", "<30", "female"],
    ["no", "no", "no", "<30", "female"],
    ["no", "no", "no", ">50", "male"],
    ["no", "no", "yes", "30-50", "female"],
    ["no", "yes", "no", "<30", "male"],
    ["no", "no", "no", "<30", "female"],
];

/// The ten imagined fraud cases, in [`fraud_variables`] order.
pub fn fraud_data() -> DataSet {
    let vars = fraud_variables();
    let rows: Vec<Vec<Option<&str>>> = FRAUD_ROWS
        .iter()
        .map(|row| {
            vars.iter()
                .map(|v| {
                    let c = FRAUD_COLUMNS.iter().position(|&n| n == v.name()).unwrap();
                    Some(row[c])
                })
                .collect()
        })
        .collect();
    DataSet::from_labels(vars, &rows).unwrap()
}

/// College-plans variables in table order (SEX, SES, IQ, PE, CP).
pub fn college_plans_variables() -> Vec<VariableSpec> {
    let four = ["low", "lower middle", "upper middle", "high"];
    vec![
        VariableSpec::new("SEX", ["male", "female"]).unwrap(),
        VariableSpec::new("SES", four).unwrap(),
        VariableSpec::new("IQ", four).unwrap(),
        VariableSpec::new("PE", ["low", "high"]).unwrap(),
        VariableSpec::new("CP", ["yes", "no"]).unwrap(),
    ]
}

/// College-plans counts, row-major with CP varying fastest.
pub const COLLEGE_PLANS_COUNTS: [u64; 128] = [
    4, 349, 13, 64, 9, 207, 33, 72, 12, 126, 38, 54, 10, 67, 49, 43, //
    2, 232, 27, 84, 7, 201, 64, 95, 12, 115, 93, 92, 17, 79, 119, 59, //
    8, 166, 47, 91, 6, 120, 74, 110, 17, 92, 148, 100, 6, 42, 198, 73, //
    4, 48, 39, 57, 5, 47, 123, 90, 9, 41, 224, 65, 8, 17, 414, 54, //
    5, 454, 9, 44, 5, 312, 14, 47, 8, 216, 20, 35, 13, 96, 28, 24, //
    11, 285, 29, 61, 19, 236, 47, 88, 12, 164, 62, 85, 15, 113, 72, 50, //
    7, 163, 36, 72, 13, 193, 75, 90, 12, 174, 91, 100, 20, 81, 142, 77, //
    6, 50, 36, 58, 5, 70, 110, 76, 12, 48, 230, 81, 13, 49, 360, 98,
];
