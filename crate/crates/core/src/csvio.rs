//! CSV ingestion and emission.
//!
//! One schema throughout: a required header whose first column is `id`,
//! an optional `label` column second, and the remaining columns numeric
//! attributes. Floats are written in the shortest form that parses back
//! to the identical bits, so a write/read cycle is lossless.

use std::path::Path;

use crate::classify::{Assignment, ConfusionMatrix};
use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;
use crate::synth::HiddenAssignment;

/// A parsed CSV: ids, optional labels, attribute names, numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub ids: Vec<String>,
    pub labels: Option<Vec<String>>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Interpret the numeric rows as simplex points.
    pub fn to_simplex(&self) -> Result<Vec<SimplexPoint>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                SimplexPoint::new(row.clone()).map_err(|e| {
                    Error::Validation(format!("row {} (id {}): {e}", i + 1, self.ids[i]))
                })
            })
            .collect()
    }
}

fn parse_field(field: &str, row: usize, name: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Validation(format!(
            "row {row}, column {name:?}: {field:?} is not a number"
        ))
    })
}

/// Read a data table. The header is mandatory: `id`, then optionally
/// `label`, then attribute columns (possibly none, for truth files).
pub fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let header = reader.headers()?.clone();
    let mut columns = header.iter();
    if columns.next().map(str::trim) != Some("id") {
        return Err(Error::Validation(format!(
            "{}: first column must be \"id\"",
            path.display()
        )));
    }
    let rest: Vec<String> = columns.map(|c| c.trim().to_string()).collect();
    let has_label = rest.first().map(String::as_str) == Some("label");
    let names: Vec<String> = rest[usize::from(has_label)..].to_vec();

    let mut ids = Vec::new();
    let mut labels = has_label.then(Vec::new);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let mut fields = record.iter();
        let id = fields
            .next()
            .ok_or_else(|| Error::Validation(format!("row {row_no}: empty record")))?;
        ids.push(id.trim().to_string());
        if let Some(labels) = &mut labels {
            let label = fields.next().ok_or_else(|| {
                Error::Validation(format!("row {row_no}: missing label field"))
            })?;
            labels.push(label.trim().to_string());
        }
        let values = fields
            .zip(&names)
            .map(|(f, name)| parse_field(f, row_no, name))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != names.len() {
            return Err(Error::Validation(format!(
                "row {row_no}: {} of {} attribute fields",
                values.len(),
                names.len()
            )));
        }
        rows.push(values);
    }
    Ok(RawTable {
        ids,
        labels,
        names,
        rows,
    })
}

fn write_records<W: std::io::Write>(
    writer: &mut csv::Writer<W>,
    table: &RawTable,
) -> Result<()> {
    let mut header = vec!["id".to_string()];
    if table.labels.is_some() {
        header.push("label".to_string());
    }
    header.extend(table.names.iter().cloned());
    writer.write_record(&header)?;
    for (i, row) in table.rows.iter().enumerate() {
        let mut record = vec![table.ids[i].clone()];
        if let Some(labels) = &table.labels {
            record.push(labels[i].clone());
        }
        record.extend(row.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a data table in the shared schema.
pub fn write_table(path: &Path, table: &RawTable) -> Result<()> {
    if table.rows.len() != table.len()
        || table.labels.as_ref().is_some_and(|l| l.len() != table.len())
    {
        return Err(Error::Validation("table columns differ in length".into()));
    }
    let mut writer = csv::WriterBuilder::new().from_path(path)?;
    write_records(&mut writer, table)
}

/// Convenience: write simplex points under coordinate names `y0..`.
pub fn write_simplex(
    path: &Path,
    ids: &[String],
    labels: Option<&[String]>,
    points: &[SimplexPoint],
) -> Result<()> {
    let dim = points.first().map_or(0, SimplexPoint::dim);
    let table = RawTable {
        ids: ids.to_vec(),
        labels: labels.map(<[String]>::to_vec),
        names: (0..dim).map(|d| format!("y{d}")).collect(),
        rows: points.iter().map(|p| p.coords().to_vec()).collect(),
    };
    write_table(path, &table)
}

/// Per-point assignments: id, novelty flag, predicted label (empty when
/// novel), background posterior, then one posterior column per class.
pub fn write_assignments(
    path: &Path,
    ids: &[String],
    classes: &[String],
    assignments: &[Assignment],
) -> Result<()> {
    if ids.len() != assignments.len() {
        return Err(Error::Validation(format!(
            "{} ids for {} assignments",
            ids.len(),
            assignments.len()
        )));
    }
    let mut writer = csv::WriterBuilder::new().from_path(path)?;
    let mut header = vec![
        "id".to_string(),
        "is_new_class".to_string(),
        "class_label".to_string(),
        "posterior_background".to_string(),
    ];
    header.extend(classes.iter().cloned());
    writer.write_record(&header)?;
    for (id, a) in ids.iter().zip(assignments) {
        let mut record = vec![
            id.clone(),
            a.is_new_class.to_string(),
            a.class_label.clone().unwrap_or_default(),
            a.posterior_background.to_string(),
        ];
        record.extend(a.class_posteriors.iter().map(f64::to_string));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read assignments back: (ids, class labels from the header, rows).
pub fn read_assignments(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Assignment>)> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let header = reader.headers()?.clone();
    let fixed = ["id", "is_new_class", "class_label", "posterior_background"];
    if header.len() < fixed.len() + 1
        || header.iter().take(fixed.len()).map(str::trim).ne(fixed)
    {
        return Err(Error::Validation(format!(
            "{}: not an assignments file",
            path.display()
        )));
    }
    let classes: Vec<String> = header.iter().skip(fixed.len()).map(String::from).collect();
    let mut ids = Vec::new();
    let mut assignments = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let get = |c: usize| record.get(c).unwrap_or("").trim();
        ids.push(get(0).to_string());
        let is_new_class = get(1).parse::<bool>().map_err(|_| {
            Error::Validation(format!("row {row_no}: bad novelty flag {:?}", get(1)))
        })?;
        let label = get(2);
        let class_posteriors = (fixed.len()..fixed.len() + classes.len())
            .map(|c| parse_field(get(c), row_no, &header[c.min(header.len() - 1)]))
            .collect::<Result<Vec<f64>>>()?;
        assignments.push(Assignment {
            point_index: i,
            is_new_class,
            class_label: (!is_new_class).then(|| label.to_string()),
            posterior_background: parse_field(get(3), row_no, "posterior_background")?,
            class_posteriors,
        });
    }
    Ok((ids, classes, assignments))
}

/// Confusion matrix: `truth` column of row labels, one count column per
/// predicted label.
pub fn write_confusion(path: &Path, matrix: &ConfusionMatrix) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_path(path)?;
    let mut header = vec!["truth".to_string()];
    header.extend(matrix.labels().iter().cloned());
    writer.write_record(&header)?;
    for (label, row) in matrix.labels().iter().zip(matrix.counts()) {
        let mut record = vec![label.clone()];
        record.extend(row.iter().map(u64::to_string));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a confusion matrix written by `write_confusion`.
pub fn read_confusion(path: &Path) -> Result<ConfusionMatrix> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let header = reader.headers()?.clone();
    if header.get(0).map(str::trim) != Some("truth") {
        return Err(Error::Validation(format!(
            "{}: not a confusion matrix file",
            path.display()
        )));
    }
    let labels: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut counts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .skip(1)
            .map(|f| {
                f.trim().parse::<u64>().map_err(|_| {
                    Error::Validation(format!("row {}: bad count {f:?}", i + 1))
                })
            })
            .collect::<Result<Vec<u64>>>()?;
        counts.push(row);
    }
    ConfusionMatrix::from_parts(labels, counts)
}

/// One broken-line signature row: where it came from, which component,
/// its mixture weight, and the normalized mean vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureRow {
    pub source: String,
    pub component: usize,
    pub weight: f64,
    pub values: Vec<f64>,
}

/// Signatures in long form, one component per row, coordinates named by
/// `names`.
pub fn write_signatures(path: &Path, names: &[String], rows: &[SignatureRow]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_path(path)?;
    let mut header = vec![
        "source".to_string(),
        "component".to_string(),
        "weight".to_string(),
    ];
    header.extend(names.iter().cloned());
    writer.write_record(&header)?;
    for row in rows {
        if row.values.len() != names.len() {
            return Err(Error::Validation(format!(
                "signature for {} has {} coordinates, expected {}",
                row.source,
                row.values.len(),
                names.len()
            )));
        }
        let mut record = vec![
            row.source.clone(),
            row.component.to_string(),
            row.weight.to_string(),
        ];
        record.extend(row.values.iter().map(f64::to_string));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Record which rows trained the model and which were held out:
/// id, label, role (`train` or `test`).
pub fn write_split(
    path: &Path,
    ids: &[String],
    labels: &[String],
    roles: &[&str],
) -> Result<()> {
    if ids.len() != labels.len() || ids.len() != roles.len() {
        return Err(Error::Validation("split columns differ in length".into()));
    }
    let mut writer = csv::WriterBuilder::new().from_path(path)?;
    writer.write_record(["id", "label", "role"])?;
    for ((id, label), role) in ids.iter().zip(labels).zip(roles) {
        writer.write_record([id.as_str(), label.as_str(), role])?;
    }
    writer.flush()?;
    Ok(())
}

/// Latent generator origins, kept in their own file: id, generating
/// class index (empty for novel points), component index.
pub fn write_hidden(path: &Path, ids: &[String], hidden: &[HiddenAssignment]) -> Result<()> {
    if ids.len() != hidden.len() {
        return Err(Error::Validation(format!(
            "{} ids for {} hidden assignments",
            ids.len(),
            hidden.len()
        )));
    }
    let mut writer = csv::WriterBuilder::new().from_path(path)?;
    writer.write_record(["id", "class_index", "component"])?;
    for (id, h) in ids.iter().zip(hidden) {
        writer.write_record([
            id.as_str(),
            &h.class_index.map(|c| c.to_string()).unwrap_or_default(),
            &h.component.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{evaluate, Metrics};
    use crate::dirichlet::DirichletParams;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn table_round_trip_is_bit_exact() {
        let dir = tmp();
        let path = dir.path().join("data.csv");
        let table = RawTable {
            ids: vec!["p1".into(), "p2".into(), "p3".into()],
            labels: Some(vec!["a".into(), "b".into(), "a".into()]),
            names: vec!["x".into(), "y".into()],
            rows: vec![
                vec![0.1, 1.0 / 3.0],
                vec![2.5e-7, 0.99999999999],
                vec![1.2345678901234567, 7.0],
            ],
        };
        write_table(&path, &table).unwrap();
        let back = read_table(&path).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn header_contract_is_enforced() {
        let dir = tmp();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "name,x\np1,0.5\n").unwrap();
        assert!(read_table(&path).is_err());

        // Non-numeric attribute.
        std::fs::write(&path, "id,x\np1,abc\n").unwrap();
        assert!(read_table(&path).is_err());

        // Label-only truth file parses with zero attributes.
        std::fs::write(&path, "id,label\np1,a\np2,NEW\n").unwrap();
        let t = read_table(&path).unwrap();
        assert_eq!(t.labels.as_deref().unwrap(), ["a", "NEW"]);
        assert!(t.names.is_empty());
        assert_eq!(t.rows, vec![Vec::<f64>::new(); 2]);
    }

    #[test]
    fn simplex_points_survive_the_csv() {
        let dir = tmp();
        let path = dir.path().join("simplex.csv");
        let points = DirichletParams::new(vec![2.0, 3.0, 4.0])
            .unwrap()
            .sample_n(61, 25);
        let ids: Vec<String> = (0..25).map(|i| format!("s{i}")).collect();
        write_simplex(&path, &ids, None, &points).unwrap();
        let back = read_table(&path).unwrap().to_simplex().unwrap();
        for (a, b) in points.iter().zip(&back) {
            assert_eq!(a.coords(), b.coords());
        }
    }

    #[test]
    fn assignments_round_trip() {
        let dir = tmp();
        let path = dir.path().join("assignments.csv");
        let classes = vec!["a".to_string(), "b".to_string()];
        let rows = vec![
            Assignment {
                point_index: 0,
                is_new_class: false,
                class_label: Some("a".into()),
                posterior_background: 0.875,
                class_posteriors: vec![0.75, 0.25],
            },
            Assignment {
                point_index: 1,
                is_new_class: true,
                class_label: None,
                posterior_background: 0.1239847523462,
                class_posteriors: vec![1.0 / 3.0, 2.0 / 3.0],
            },
        ];
        let ids = vec!["u".to_string(), "v".to_string()];
        write_assignments(&path, &ids, &classes, &rows).unwrap();
        let (back_ids, back_classes, back_rows) = read_assignments(&path).unwrap();
        assert_eq!(back_ids, ids);
        assert_eq!(back_classes, classes);
        assert_eq!(back_rows, rows);
    }

    #[test]
    fn confusion_round_trip_preserves_metrics() {
        let classes = vec!["a".to_string(), "b".to_string()];
        let assignments = vec![
            Assignment {
                point_index: 0,
                is_new_class: false,
                class_label: Some("a".into()),
                posterior_background: 1.0,
                class_posteriors: vec![1.0, 0.0],
            };
            6
        ];
        let truth: Vec<String> = ["a", "a", "b", "a", "NEW", "b"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (matrix, metrics) = evaluate(&classes, &assignments, &truth, "NEW").unwrap();
        let dir = tmp();
        let path = dir.path().join("confusion.csv");
        write_confusion(&path, &matrix).unwrap();
        let back = read_confusion(&path).unwrap();
        assert_eq!(back, matrix);
        // Metrics recomputed from the emitted file equal the originals
        // exactly.
        assert_eq!(Metrics::from_matrix(&back), metrics);
    }

    #[test]
    fn signatures_and_hidden_files_are_well_formed() {
        let dir = tmp();
        let sig_path = dir.path().join("signatures.csv");
        let names = vec!["y0".to_string(), "y1".to_string()];
        let rows = vec![SignatureRow {
            source: "a".into(),
            component: 0,
            weight: 1.0,
            values: vec![0.25, 0.75],
        }];
        write_signatures(&sig_path, &names, &rows).unwrap();
        let text = std::fs::read_to_string(&sig_path).unwrap();
        assert_eq!(text, "source,component,weight,y0,y1\na,0,1,0.25,0.75\n");

        let bad = vec![SignatureRow {
            values: vec![1.0],
            ..rows[0].clone()
        }];
        assert!(write_signatures(&sig_path, &names, &bad).is_err());

        let hid_path = dir.path().join("hidden.csv");
        let hidden = vec![
            HiddenAssignment {
                class_index: Some(1),
                component: 0,
            },
            HiddenAssignment {
                class_index: None,
                component: 2,
            },
        ];
        write_hidden(&hid_path, &["p1".into(), "p2".into()], &hidden).unwrap();
        let text = std::fs::read_to_string(&hid_path).unwrap();
        assert_eq!(text, "id,class_index,component\np1,1,0\np2,,2\n");
    }
}
