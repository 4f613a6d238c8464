//! Persistence and ingestion: network documents (JSON), CSV data sets,
//! flat counts tables and DOT export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Case, DataSet};
use crate::error::{Error, Result};
use crate::network::{decode_config, NetworkStructure, VariableSpec};
use crate::params::ParameterSet;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MISSING: &str = "?";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// One conditional table; `rows[j]` is p(X | pa^j) for configuration index j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptEntry {
    pub variable: String,
    pub rows: Vec<Vec<f64>>,
}

/// On-disk form of a network. Field order is fixed on save.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub schema_version: u32,
    pub variables: Vec<VariableSpec>,
    /// `(parent, child)` pairs.
    pub arcs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpts: Option<Vec<CptEntry>>,
}

/// A structure with optional parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub structure: NetworkStructure,
    pub params: Option<ParameterSet>,
}

impl Network {
    pub fn to_document(&self) -> NetworkDocument {
        let s = &self.structure;
        NetworkDocument {
            schema_version: SCHEMA_VERSION,
            variables: s.variables().to_vec(),
            arcs: s
                .arcs()
                .into_iter()
                .map(|(p, c)| (s.variable(p).name().to_string(), s.variable(c).name().to_string()))
                .collect(),
            cpts: self.params.as_ref().map(|p| {
                (0..s.len())
                    .map(|i| CptEntry {
                        variable: s.variable(i).name().to_string(),
                        rows: p.family(i).to_vec(),
                    })
                    .collect()
            }),
        }
    }

    /// Builds the network, enforcing every structural and parameter check.
    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        let wrap = |e: Error| Error::InvariantViolation(Box::new(e));
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::ParseError {
                message: format!("unsupported schema version {}", doc.schema_version),
                line: None,
                column: None,
            });
        }
        let n = doc.variables.len();
        let mut names: Vec<Vec<String>> = vec![Vec::new(); n];
        let index = |name: &str| doc.variables.iter().position(|v| v.name() == name);
        for (p, c) in &doc.arcs {
            let ci = index(c).ok_or_else(|| wrap(Error::UnknownVariable(c.clone())))?;
            names[ci].push(p.clone());
        }
        crate::network::validate_dag(&doc.variables, &names).map_err(wrap)?;
        let parents: Vec<Vec<usize>> = names
            .iter()
            .map(|ps| {
                let mut v: Vec<usize> = ps.iter().map(|p| index(p).unwrap()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let structure = NetworkStructure::new(doc.variables.clone(), parents).map_err(wrap)?;
        let params = match &doc.cpts {
            None => None,
            Some(entries) => {
                let mut tables: Vec<Option<Vec<Vec<f64>>>> = vec![None; n];
                for e in entries {
                    let i = structure
                        .index_of(&e.variable)
                        .ok_or_else(|| wrap(Error::UnknownVariable(e.variable.clone())))?;
                    if tables[i].replace(e.rows.clone()).is_some() {
                        return Err(wrap(Error::DuplicateVariable(e.variable.clone())));
                    }
                }
                let tables = tables
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| {
                        t.ok_or_else(|| {
                            wrap(Error::ShapeMismatch(format!(
                                "no table for `{}`",
                                structure.variable(i).name()
                            )))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(ParameterSet::new(&structure, tables).map_err(wrap)?)
            }
        };
        Ok(Self { structure, params })
    }
}

/// Parses a network document from JSON text.
pub fn parse_network(text: &str) -> Result<Network> {
    let doc: NetworkDocument = serde_json::from_str(text).map_err(|e| Error::ParseError {
        message: e.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
    })?;
    Network::from_document(&doc)
}

pub fn network_to_json(network: &Network) -> String {
    let mut s = serde_json::to_string_pretty(&network.to_document()).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    parse_network(&read(path.as_ref())?)
}

pub fn save_network(network: &Network, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &network_to_json(network))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    Error::ParseError { message: e.to_string(), line, column: None }
}

/// Reads comma-separated data with a header of variable names. Columns may
/// appear in any order; cells equal to `missing` become missing values.
pub fn parse_csv(text: &str, variables: &[VariableSpec], missing: &str) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let mut column_of = vec![None; variables.len()];
    for (c, name) in header.iter().enumerate() {
        let i = variables
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("column `{name}` is not a declared variable")))?;
        if column_of[i].replace(c).is_some() {
            return Err(Error::SchemaMismatch(format!("column `{name}` appears twice")));
        }
    }
    if let Some(i) = column_of.iter().position(Option::is_none) {
        return Err(Error::SchemaMismatch(format!("no column for variable `{}`", variables[i].name())));
    }
    let mut cases = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let mut case: Case = Vec::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            let c = column_of[i].unwrap();
            let cell = record.get(c).unwrap_or_default();
            if cell == missing {
                case.push(None);
                continue;
            }
            let k = v.state_index(cell).ok_or_else(|| Error::UnknownState {
                variable: v.name().to_string(),
                state: cell.to_string(),
                row: Some(r + 1),
                column: Some(c + 1),
            })?;
            case.push(Some(k));
        }
        cases.push(case);
    }
    DataSet::new(variables.to_vec(), cases)
}

pub fn load_csv(path: impl AsRef<Path>, variables: &[VariableSpec], missing: &str) -> Result<DataSet> {
    parse_csv(&read(path.as_ref())?, variables, missing)
}

/// Variables read off a CSV file: header names, with each column's states in
/// order of first appearance. Cells equal to `missing` are skipped.
pub fn infer_csv_schema(text: &str, missing: &str) -> Result<Vec<VariableSpec>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let mut states: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        for (c, cell) in record.iter().enumerate().take(header.len()) {
            if cell != missing && !states[c].iter().any(|s| s == cell) {
                states[c].push(cell.to_string());
            }
        }
    }
    header
        .into_iter()
        .zip(states)
        .map(|(name, mut st)| {
            // A column observed in a single state still needs two.
            if st.len() == 1 {
                st.push(format!("not {}", st[0]));
            }
            VariableSpec::new(name, st)
        })
        .collect()
}

/// Writes data with the variables' order as the header.
pub fn dataset_to_csv(data: &DataSet, missing: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(data.variables().iter().map(|v| v.name())).map_err(io)?;
    for case in data.cases() {
        w.write_record(case.iter().zip(data.variables()).map(|(s, v)| match s {
            Some(k) => v.states()[*k].as_str(),
            None => missing,
        }))
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn save_csv(data: &DataSet, path: impl AsRef<Path>, missing: &str) -> Result<()> {
    write(path.as_ref(), &dataset_to_csv(data, missing)?)
}

/// Variable order, ordered states, and a flat count sequence with the last
/// variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTableSpec {
    pub variables: Vec<VariableSpec>,
    pub counts: Vec<u64>,
}

impl CountsTableSpec {
    /// Validates length and sign.
    pub fn new(variables: Vec<VariableSpec>, numbers: &[i64]) -> Result<Self> {
        let expected: usize = variables.iter().map(|v| v.cardinality()).product();
        if numbers.len() != expected {
            return Err(Error::LengthMismatch { expected, found: numbers.len() });
        }
        let counts = numbers
            .iter()
            .enumerate()
            .map(|(index, &value)| u64::try_from(value).map_err(|_| Error::NegativeCount { index, value }))
            .collect::<Result<_>>()?;
        Ok(Self { variables, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn cards(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality()).collect()
    }

    /// Configuration of entry `index`.
    pub fn assignment(&self, index: usize) -> Vec<usize> {
        decode_config(&self.cards(), index)
    }

    /// Expands every count into that many identical cases.
    pub fn to_dataset(&self) -> Result<DataSet> {
        let cards = self.cards();
        let mut cases = Vec::with_capacity(self.total() as usize);
        for (index, &c) in self.counts.iter().enumerate() {
            let a: Case = decode_config(&cards, index).into_iter().map(Some).collect();
            for _ in 0..c {
                cases.push(a.clone());
            }
        }
        DataSet::new(self.variables.clone(), cases)
    }

    /// Text form accepted by [`parse_counts_table`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.variables {
            let _ = writeln!(s, "variable {}: {}", v.name(), v.states().join(", "));
        }
        s.push_str("counts\n");
        let cards = self.cards();
        let width = cards.last().copied().unwrap_or(1).max(1);
        for chunk in self.counts.chunks(width) {
            let line: Vec<String> = chunk.iter().map(u64::to_string).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Expands a flat counts table into a data set.
pub fn load_counts_table(variables: Vec<VariableSpec>, numbers: &[i64]) -> Result<DataSet> {
    CountsTableSpec::new(variables, numbers)?.to_dataset()
}

/// Parses the counts table text format:
///
/// ```text
/// # comment
/// variable SEX: male, female
/// variable CP: yes, no
/// counts
/// 4 349
/// 13 64
/// ```
///
/// Header lines declare variables in table order; every whitespace-separated
/// integer after `counts` is an entry.
pub fn parse_counts_table(text: &str) -> Result<CountsTableSpec> {
    let perr = |message: String, line: usize| Error::ParseError { message, line: Some(line), column: None };
    let mut variables = Vec::new();
    let mut numbers = Vec::new();
    let mut in_counts = false;
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        if in_counts {
            for tok in line.split_whitespace() {
                numbers.push(tok.parse::<i64>().map_err(|_| perr(format!("`{tok}` is not an integer"), ln))?);
            }
        } else if line == "counts" {
            in_counts = true;
        } else if let Some(rest) = line.strip_prefix("variable ") {
            let (name, states) = rest
                .split_once(':')
                .ok_or_else(|| perr("expected `variable NAME: state, state, ...`".into(), ln))?;
            let states: Vec<&str> = states.split(',').map(str::trim).collect();
            variables.push(VariableSpec::new(name.trim(), states)?);
        } else {
            return Err(perr(format!("unexpected header line `{line}`"), ln));
        }
    }
    if !in_counts {
        return Err(Error::ParseError { message: "missing `counts` section".into(), line: None, column: None });
    }
    CountsTableSpec::new(variables, &numbers)
}

pub fn load_counts_file(path: impl AsRef<Path>) -> Result<CountsTableSpec> {
    parse_counts_table(&read(path.as_ref())?)
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT digraph with one node per variable and one edge per arc.
pub fn export_dot(structure: &NetworkStructure) -> String {
    let mut s = String::from("digraph network {\n");
    for v in structure.variables() {
        let _ = writeln!(s, "  {};", dot_quote(v.name()));
    }
    for (p, c) in structure.arcs() {
        let _ = writeln!(
            s,
            "  {} -> {};",
            dot_quote(structure.variable(p).name()),
            dot_quote(structure.variable(c).name())
        );
    }
    s.push_str("}\n");
    s
}
