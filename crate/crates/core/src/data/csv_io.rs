use super::{DataError, Dataset, DyadYearRecord, Outcome, Variable, VariableSchema, NUM_VARIABLES};

/// Identifier and label columns that accompany the schema variables.
pub const CSV_ID_COLUMNS: [&str; 4] = ["state_a", "state_b", "year", "outcome"];

struct ColumnMap {
    state_a: usize,
    state_b: usize,
    year: usize,
    outcome: usize,
    values: [usize; NUM_VARIABLES],
}

fn column_map(headers: &csv::StringRecord, schema: &VariableSchema) -> Result<ColumnMap, DataError> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let mut values = [0usize; NUM_VARIABLES];
    for spec in schema.specs() {
        values[spec.variable.index()] = find(spec.variable.name())?;
    }
    Ok(ColumnMap {
        state_a: find("state_a")?,
        state_b: find("state_b")?,
        year: find("year")?,
        outcome: find("outcome")?,
        values,
    })
}

/// Parses a dyad-year CSV document. Columns are matched by header name and
/// may appear in any order; every row is validated against `schema`.
pub fn parse_dataset(text: &str, schema: &VariableSchema) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DataError::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols = column_map(&headers, schema)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| DataError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let malformed = |message: String| DataError::MalformedRow { line, message };
        let field = |i: usize| row.get(i).unwrap_or("");

        let year = field(cols.year)
            .parse::<i32>()
            .map_err(|_| malformed(format!("year `{}` is not an integer", field(cols.year))))?;
        let outcome = match field(cols.outcome) {
            "0" => Outcome::Peace,
            "1" => Outcome::Dispute,
            other => return Err(malformed(format!("outcome `{other}` must be 0 or 1"))),
        };
        let mut values = [0.0; NUM_VARIABLES];
        for spec in schema.specs() {
            let raw = field(cols.values[spec.variable.index()]);
            let x = raw.parse::<f64>().map_err(|_| {
                malformed(format!("{} `{raw}` is not a number", spec.variable.label()))
            })?;
            if !spec.contains(x) {
                return Err(DataError::OutOfDomain {
                    line,
                    variable: spec.variable,
                    value: x,
                    min: spec.domain_min,
                    max: spec.domain_max,
                });
            }
            values[spec.variable.index()] = x;
        }
        records.push(DyadYearRecord {
            state_a: field(cols.state_a).to_string(),
            state_b: field(cols.state_b).to_string(),
            year,
            values,
            outcome,
        });
    }
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(Dataset {
        schema: schema.clone(),
        records,
        provenance: String::new(),
    })
}

/// Writes the canonical CSV form. Numbers use the shortest representation
/// that parses back to the identical `f64`.
pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let mut out = String::with_capacity(dataset.len() * 64);
    out.push_str("state_a,state_b,year");
    for v in Variable::ALL {
        out.push(',');
        out.push_str(v.name());
    }
    out.push_str(",outcome\n");
    for r in &dataset.records {
        out.push_str(&csv_field(&r.state_a));
        out.push(',');
        out.push_str(&csv_field(&r.state_b));
        out.push(',');
        out.push_str(&r.year.to_string());
        for x in r.values {
            out.push(',');
            out.push_str(&x.to_string());
        }
        out.push(',');
        out.push(if r.outcome.is_dispute() { '1' } else { '0' });
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.trim() != s {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str =
        "state_a,state_b,year,allies,contiguity,major_power,distance,capability,democracy,dependency,outcome";

    #[test]
    fn single_valid_row() {
        let text = format!("{HEADER}\nUSA,CAN,1970,1,1,1,2.86,1.2,10,0.021,0\n");
        let ds = parse_dataset(&text, &VariableSchema::standard()).unwrap();
        assert_eq!(ds.len(), 1);
        let r = &ds.records[0];
        assert_eq!((r.state_a.as_str(), r.year), ("USA", 1970));
        assert_eq!(r.value(Variable::Dependency), 0.021);
        assert_eq!(r.outcome, Outcome::Peace);
    }

    #[test]
    fn column_order_is_free() {
        let text = "outcome,dependency,democracy,capability,distance,major_power,contiguity,allies,year,state_b,state_a\n\
                    1,0.01,-3,0.5,3.1,0,1,0,1980,IRQ,IRN\n";
        let ds = parse_dataset(text, &VariableSchema::standard()).unwrap();
        let r = &ds.records[0];
        assert_eq!(r.state_a, "IRN");
        assert_eq!(r.value(Variable::Democracy), -3.0);
        assert_eq!(r.value(Variable::Contiguity), 1.0);
        assert!(r.outcome.is_dispute());
    }

    #[test]
    fn democracy_out_of_domain_names_variable() {
        let text = format!("{HEADER}\nA,B,1970,1,1,1,2.0,1.0,5,0.01,0\nA,B,1971,1,1,1,2.0,1.0,11,0.01,0\n");
        let err = parse_dataset(&text, &VariableSchema::standard()).unwrap_err();
        match &err {
            DataError::OutOfDomain { line, variable, .. } => {
                assert_eq!(*variable, Variable::Democracy);
                assert_eq!(*line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("Democracy"));
    }

    #[test]
    fn missing_column_reported() {
        let text = "state_a,state_b,year,allies,contiguity,major_power,distance,capability,democracy,outcome\n";
        let err = parse_dataset(text, &VariableSchema::standard()).unwrap_err();
        assert_eq!(err, DataError::MissingColumn("dependency".into()));
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{HEADER}\nA,B,1970,1,1,1,2.0,1.0,5,0.01,0\nA,B,19x1,1,1,1,2.0,1.0,5,0.01,0\n");
        match parse_dataset(&text, &VariableSchema::standard()).unwrap_err() {
            DataError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{HEADER}\nA,B,1970,1,1,1,2.0,1.0,5,0.01,2\n");
        assert!(matches!(
            parse_dataset(&text, &VariableSchema::standard()),
            Err(DataError::MalformedRow { line: 2, .. })
        ));
        let text = format!("{HEADER}\nA,B,1970,1,1\n");
        assert!(matches!(
            parse_dataset(&text, &VariableSchema::standard()),
            Err(DataError::MalformedRow { .. })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(
            parse_dataset(&format!("{HEADER}\n"), &VariableSchema::standard()),
            Err(DataError::Empty)
        );
    }

    fn arb_record() -> impl Strategy<Value = DyadYearRecord> {
        (
            "[A-Z]{3}",
            "[A-Z][A-Z ,\"]{0,4}[A-Z]",
            1816i32..2020,
            prop::array::uniform3(0u8..2),
            0.0f64..5.0,
            0.0f64..10.0,
            -10i32..=10,
            0.0f64..1.0,
            any::<bool>(),
        )
            .prop_map(|(a, b, year, bin, dist, cap, dem, dep, d)| DyadYearRecord {
                state_a: a,
                state_b: b,
                year,
                values: [bin[0] as f64, bin[1] as f64, bin[2] as f64, dist, cap, dem as f64, dep],
                outcome: if d { Outcome::Dispute } else { Outcome::Peace },
            })
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_identity(records in prop::collection::vec(arb_record(), 1..20)) {
            let schema = VariableSchema::standard();
            let ds = Dataset::new(schema.clone(), records, "").unwrap();
            let text = dataset_to_csv(&ds);
            let back = parse_dataset(&text, &schema).unwrap();
            prop_assert_eq!(&back.records, &ds.records);
            prop_assert_eq!(dataset_to_csv(&back), text);
        }
    }
}
