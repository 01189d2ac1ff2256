//! Dataset manifests: `image_path,site,grade[,mask_path]` CSV files.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use log::info;

use crate::error::{Error, Result};
use crate::site::{Grade, Site};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub image_path: PathBuf,
    pub site: Site,
    pub grade: Grade,
    pub mask_path: Option<PathBuf>,
}

impl ManifestRow {
    /// File stem used as the image identifier in feature tables and reports.
    pub fn image_id(&self) -> String {
        self.image_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.image_path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub site: Site,
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    /// Image counts for grades 0, 1 and 2.
    pub fn grade_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for r in &self.rows {
            h[r.grade.index()] += 1;
        }
        h
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads and validates a manifest. Relative paths resolve against the manifest's directory;
/// every row must name the same site.
pub fn parse_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let with_mask = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["image_path", "site", "grade"] => false,
        ["image_path", "site", "grade", "mask_path"] => true,
        _ => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!("header must be image_path,site,grade[,mask_path], got {}", header.join(",")),
            })
        }
    };
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut site: Option<Site> = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::MalformedRow { line, reason };
        if record.len() < 3 || record.len() > header.len() {
            return Err(bad(format!("expected {} fields, found {}", header.len(), record.len())));
        }
        if record[0].is_empty() {
            return Err(bad("empty image_path".into()));
        }
        let row_site: Site = record[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let grade: Grade = record[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        match site {
            None => site = Some(row_site),
            Some(s) if s != row_site => return Err(bad(format!("site {row_site} differs from {s}"))),
            _ => {}
        }
        let image_path = resolve(&base, &record[0]);
        if !seen.insert(image_path.clone()) {
            return Err(Error::DuplicatePath(image_path));
        }
        if !image_path.is_file() {
            return Err(Error::MissingFile(image_path));
        }
        let mask_path = match record.get(3).filter(|m| with_mask && !m.is_empty()) {
            Some(m) => {
                let p = resolve(&base, m);
                if !p.is_file() {
                    return Err(Error::MissingFile(p));
                }
                Some(p)
            }
            None => None,
        };
        rows.push(ManifestRow {
            image_path,
            site: row_site,
            grade,
            mask_path,
        });
    }
    let site = site.ok_or_else(|| Error::MalformedRow {
        line: 2,
        reason: "manifest has no rows".into(),
    })?;
    let manifest = DatasetManifest { site, rows };
    info!(
        "manifest {}: {} {} images, grade histogram {:?}",
        path.display(),
        manifest.len(),
        site,
        manifest.grade_histogram()
    );
    Ok(manifest)
}

/// Writes rows with paths relative to the manifest's directory when they lie inside it.
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
    let with_mask = rows.iter().any(|r| r.mask_path.is_some());
    let mut w = csv::Writer::from_path(path)?;
    if with_mask {
        w.write_record(["image_path", "site", "grade", "mask_path"])?;
    } else {
        w.write_record(["image_path", "site", "grade"])?;
    }
    for r in rows {
        let mut rec = vec![rel(&r.image_path), r.site.to_string(), r.grade.to_string()];
        if with_mask {
            rec.push(r.mask_path.as_deref().map(rel).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn touch(dir: &Path, name: &str) {
        fs::write(dir.join(name), b"x").unwrap();
    }

    fn manifest_with(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("manifest.csv");
        fs::write(&p, body).unwrap();
        p
    }

    fn corpus(dir: &Path, site: &str, counts: [usize; 3]) -> PathBuf {
        let mut body = String::from("image_path,site,grade\n");
        for (g, &n) in counts.iter().enumerate() {
            for i in 0..n {
                let name = format!("g{g}_{i}.png");
                touch(dir, &name);
                body.push_str(&format!("{name},{site},{g}\n"));
            }
        }
        manifest_with(dir, &body)
    }

    #[test]
    fn corpus_histograms() {
        let d = tempfile::tempdir().unwrap();
        let m = parse_manifest(&corpus(d.path(), "eye", [6, 7, 14])).unwrap();
        assert_eq!(m.len(), 27);
        assert_eq!(m.grade_histogram(), [6, 7, 14]);
        assert_eq!(m.site, Site::Eye);
        assert!(m.rows[0].image_path.starts_with(d.path()));

        let d = tempfile::tempdir().unwrap();
        let m = parse_manifest(&corpus(d.path(), "tongue", [18, 3, 35])).unwrap();
        assert_eq!(m.grade_histogram(), [18, 3, 35]);
    }

    #[test]
    fn bad_grade_names_its_line() {
        let d = tempfile::tempdir().unwrap();
        touch(d.path(), "a.png");
        touch(d.path(), "b.png");
        let p = manifest_with(d.path(), "image_path,site,grade\na.png,eye,0\nb.png,eye,5\n");
        match parse_manifest(&p) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let p = manifest_with(d.path(), "image_path,site,grade\na.png,ear,0\n");
        assert!(matches!(parse_manifest(&p), Err(Error::MalformedRow { line: 2, .. })));
        let p = manifest_with(d.path(), "image_path,site,grade\na.png,eye,0\nb.png,tongue,0\n");
        assert!(matches!(parse_manifest(&p), Err(Error::MalformedRow { line: 3, .. })));
        let p = manifest_with(d.path(), "path,site,grade\na.png,eye,0\n");
        assert!(matches!(parse_manifest(&p), Err(Error::MalformedRow { line: 1, .. })));
    }

    #[test]
    fn duplicates_and_missing_files() {
        let d = tempfile::tempdir().unwrap();
        touch(d.path(), "a.png");
        let dup = manifest_with(d.path(), "image_path,site,grade\na.png,eye,0\na.png,eye,1\n");
        assert!(matches!(parse_manifest(&dup), Err(Error::DuplicatePath(_))));
        let missing = manifest_with(d.path(), "image_path,site,grade\nnope.png,eye,0\n");
        assert!(matches!(parse_manifest(&missing), Err(Error::MissingFile(_))));
        let mask = manifest_with(d.path(), "image_path,site,grade,mask_path\na.png,eye,0,m.png\n");
        assert!(matches!(parse_manifest(&mask), Err(Error::MissingFile(_))));
    }

    #[test]
    fn write_then_parse() {
        let d = tempfile::tempdir().unwrap();
        touch(d.path(), "a.png");
        touch(d.path(), "a_mask.png");
        let rows = vec![ManifestRow {
            image_path: d.path().join("a.png"),
            site: Site::Tongue,
            grade: Grade::ABNORMAL,
            mask_path: Some(d.path().join("a_mask.png")),
        }];
        let p = d.path().join("m.csv");
        write_manifest(&p, &rows).unwrap();
        assert!(fs::read_to_string(&p).unwrap().contains("a.png,tongue,2,a_mask.png"));
        assert_eq!(parse_manifest(&p).unwrap().rows, rows);
    }
}
