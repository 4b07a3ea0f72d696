//! CSV datasets: a header row, one column per input dimension and one output column.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, InputFamily, OutputKind};

/// Which CSV columns are inputs and which is the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnRoles {
    /// Input columns in order; all non-output columns when absent.
    #[serde(default)]
    pub inputs: Option<Vec<String>>,
    pub output: String,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        ColumnRoles { inputs: None, output: "y".into() }
    }
}

/// Columns parsed from a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub input_names: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    /// Output values, when the output column is present.
    pub outputs: Option<Vec<f64>>,
}

fn parse(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Data(format!("row {row}, column {col:?}: cannot parse {s:?} as a number")))
}

/// Reads a table; the output column may be missing (e.g. test inputs).
pub fn read_table<R: Read>(r: R, roles: &ColumnRoles) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let out_idx = find(&roles.output);
    let input_names: Vec<String> = match &roles.inputs {
        Some(names) => names.clone(),
        None => header.iter().filter(|h| **h != roles.output).cloned().collect(),
    };
    let in_idx = input_names
        .iter()
        .map(|n| find(n).ok_or_else(|| Error::Data(format!("input column {n:?} not found in the header"))))
        .collect::<Result<Vec<usize>>>()?;
    let mut inputs = Vec::new();
    let mut outputs = out_idx.map(|_| Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        inputs.push(
            in_idx
                .iter()
                .zip(&input_names)
                .map(|(&c, name)| parse(&rec[c], row, name))
                .collect::<Result<Vec<f64>>>()?,
        );
        if let (Some(c), Some(o)) = (out_idx, outputs.as_mut()) {
            o.push(parse(&rec[c], row, &roles.output)?);
        }
    }
    Ok(Table { input_names, inputs, outputs })
}

pub fn read_table_path(path: &Path, roles: &ColumnRoles) -> Result<Table> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    read_table(f, roles)
}

/// Default input models: a normal-inverse-gamma prior centred at each
/// column's sample mean.
pub fn default_input_spec(inputs: &[Vec<f64>], d: usize) -> Vec<InputFamily> {
    let n = inputs.len().max(1) as f64;
    (0..d)
        .map(|k| InputFamily::default_gaussian(inputs.iter().map(|r| r[k]).sum::<f64>() / n))
        .collect()
}

/// Reads a training dataset.
pub fn read_dataset(
    path: &Path,
    roles: &ColumnRoles,
    output_kind: OutputKind,
    input_spec: Option<Vec<InputFamily>>,
) -> Result<Dataset> {
    let t = read_table_path(path, roles)?;
    let outputs = t
        .outputs
        .ok_or_else(|| Error::Data(format!("output column {:?} not found in {}", roles.output, path.display())))?;
    let spec = input_spec.unwrap_or_else(|| default_input_spec(&t.inputs, t.input_names.len()));
    Dataset::new(t.inputs, outputs, output_kind, spec)
}

/// Writes a dataset with input columns `x1..xD` and output column `y`.
pub fn write_dataset<W: Write>(w: W, data: &Dataset) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    out.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.outputs()[i].to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let data = Dataset::new(
            vec![vec![1.5, 2.0], vec![-0.25, 3.0]],
            vec![0.1, 0.2],
            OutputKind::Gaussian,
            vec![InputFamily::default_gaussian(0.0); 2],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        let t = read_table(buf.as_slice(), &ColumnRoles::default()).unwrap();
        assert_eq!(t.input_names, vec!["x1", "x2"]);
        assert_eq!(t.inputs, vec![vec![1.5, 2.0], vec![-0.25, 3.0]]);
        assert_eq!(t.outputs, Some(vec![0.1, 0.2]));
    }

    #[test]
    fn missing_output_column_is_allowed_for_tables() {
        let t = read_table("a,b\n1,2\n".as_bytes(), &ColumnRoles::default()).unwrap();
        assert_eq!(t.outputs, None);
        assert_eq!(t.inputs, vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn bad_number_names_row_and_column() {
        let err = read_table("x,y\n1,oops\n".as_bytes(), &ColumnRoles::default()).unwrap_err();
        assert!(err.to_string().contains("\"y\""));
    }
}
