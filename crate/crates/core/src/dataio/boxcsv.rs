//! `label,score,cx,cy,w,h,theta` detection tables.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, RotatedBox};
use crate::postprocess::Detection;

pub const HEADER: [&str; 7] = ["label", "score", "cx", "cy", "w", "h", "theta"];

/// Interns class labels to dense ids in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassMap {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl ClassMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    label: String,
    score: f64,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match line {
        Some(line) => Error::Parse {
            line,
            msg: e.to_string(),
        },
        None => Error::Format(e.to_string()),
    }
}

/// Reads detections, interning labels into `classes`. Angles outside
/// `(-pi/2, pi/2)` are rewritten into canonical form with a warning.
pub fn read_box_csv<R: Read>(r: R, classes: &mut ClassMap) -> Result<Vec<Detection>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    for col in HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Format(format!("missing column {col:?} in header {headers:?}")));
        }
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(csv_err)?;
        let line = out.len() + 2;
        let err = |e: Error| Error::Parse {
            line,
            msg: e.to_string(),
        };
        let mut rbox = RotatedBox::new(row.cx, row.cy, row.w, row.h, row.theta).map_err(err)?;
        let half = std::f64::consts::FRAC_PI_2;
        if !(row.theta > -half && row.theta < half) {
            log::warn!("line {line}: theta {} outside (-pi/2, pi/2), normalizing", row.theta);
            rbox = normalize_angle(&rbox);
        }
        let id = classes.intern(&row.label);
        out.push(Detection::new(rbox, row.score, id).map_err(err)?);
    }
    Ok(out)
}

pub fn write_box_csv<W: Write>(w: W, dets: &[Detection], classes: &ClassMap) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(HEADER).map_err(csv_err)?;
    for d in dets {
        let label = classes
            .name(d.class_id)
            .map(str::to_string)
            .unwrap_or_else(|| d.class_id.to_string());
        let b = &d.rbox;
        wtr.serialize(Row {
            label,
            score: d.score,
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            theta: b.theta,
        })
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_box_csv_path(path: impl AsRef<Path>, classes: &mut ClassMap) -> Result<Vec<Detection>> {
    read_box_csv(File::open(path)?, classes)
}

pub fn write_box_csv_path(path: impl AsRef<Path>, dets: &[Detection], classes: &ClassMap) -> Result<()> {
    write_box_csv(File::create(path)?, dets, classes)
}
