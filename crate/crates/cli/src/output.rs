use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use annulab::boxdyn::{BoxSet, ReturningWitness};
use annulab::certificate::Certificate;
use serde::Serialize;

use crate::commands::Failure;

pub struct Output {
    dir: PathBuf,
    stem: &'static str,
}

impl Output {
    pub fn new(dir: &Path, stem: &'static str) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Error(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), stem })
    }

    fn write(&self, name: String, body: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Failure::Error(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    pub fn json<T: Serialize>(&self, suffix: &str, value: &T) -> Result<(), Failure> {
        let body = serde_json::to_string_pretty(value).map_err(|e| Failure::Error(e.to_string()))?;
        self.write(format!("{}{suffix}.json", self.stem), &(body + "\n"))
    }

    pub fn certificate(&self, suffix: &str, c: &Certificate) -> Result<(), Failure> {
        self.write(format!("{}{suffix}.json", self.stem), &(c.to_json()? + "\n"))
    }

    pub fn csv(&self, suffix: &str, body: &str) -> Result<(), Failure> {
        self.write(format!("{}{suffix}.csv", self.stem), body)
    }

    pub fn config<T: Serialize>(&self, value: &T) -> Result<(), Failure> {
        let body = serde_json::to_string_pretty(value).map_err(|e| Failure::Error(e.to_string()))?;
        self.write(format!("{}.config.json", self.stem), &(body + "\n"))
    }
}

pub fn boxes_csv(set: &BoxSet) -> String {
    let mut s = String::from("index,row,col,x0,x1,y0,y1\n");
    let Ok(grid) = set.grid() else { return s };
    for &i in &set.indices {
        let (id, r) = (grid.id(i), grid.rect(i));
        let _ = writeln!(s, "{i},{},{},{},{},{},{}", id.row, id.col, r.x0, r.x1, r.y0, r.y1);
    }
    s
}

pub fn witnesses_csv(ws: &[(&str, &ReturningWitness)]) -> String {
    let mut s = String::from("label,sign,n,k,x,y,image_x,image_y,disk_x0,disk_x1,disk_y0,disk_y1\n");
    for (label, w) in ws {
        let d = w.disk;
        let _ = writeln!(
            s,
            "{label},{:?},{},{},{},{},{},{},{},{},{},{}",
            w.sign, w.n, w.k, w.point.x, w.point.y, w.image.x, w.image.y, d.x0, d.x1, d.y0, d.y1
        );
    }
    s
}
