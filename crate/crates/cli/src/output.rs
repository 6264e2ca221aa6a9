//! CSV and JSON rendering. Every CSV starts with a versioned schema line so
//! downstream readers can reject files they do not understand.

use anyhow::Result;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
    schema: String,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(columns).expect("writing to memory cannot fail");
        Self { writer, schema: format!("# schema: {name} v{SCHEMA_VERSION}\n") }
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> Result<String> {
        let body = String::from_utf8(self.writer.into_inner()?)?;
        Ok(self.schema + &body)
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_line_precedes_header() {
        let mut t = CsvTable::new("demo", &["a", "b"]);
        t.row(["1", "x,y"]).unwrap();
        assert_eq!(t.finish().unwrap(), "# schema: demo v1\na,b\n1,\"x,y\"\n");
    }
}
