use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

use hiercontact::SCHEMA_VERSION;

/// JSON-lines writer; every record carries the schema version and its kind.
pub struct Sink {
    out: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self { out })
    }

    pub fn record(&mut self, kind: &str, value: &impl Serialize) -> Result<()> {
        let mut line = Map::new();
        line.insert("schema_version".into(), SCHEMA_VERSION.into());
        line.insert("record".into(), kind.into());
        match serde_json::to_value(value)? {
            Value::Object(fields) => line.extend(fields),
            other => {
                line.insert("data".into(), other);
            }
        }
        serde_json::to_writer(&mut self.out, &line)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
