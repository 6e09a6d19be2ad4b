//! In-process and on-disk caching of enumerated balls.
//!
//! Disk files hold one `word distance` pair per line below a versioned
//! header. Matrices are rebuilt from the words on load. Files are written to
//! a temporary path and renamed into place.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use super::{enumerate_ball, Ball, BallElement, FuchsianSurface, Word};
use crate::error::{Error, Result};

/// Environment variable naming the cache directory. Without it only the
/// in-process cache is used.
pub const BALL_CACHE_ENV: &str = "BIFCURRENT_CACHE";

const HEADER: &str = "# bifcurrent ball cache v1";

type Key = (u64, u64);

fn memo() -> &'static Mutex<HashMap<Key, Arc<Ball>>> {
    static MEMO: OnceLock<Mutex<HashMap<Key, Arc<Ball>>>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cache_path(dir: &Path, surface: &FuchsianSurface, r: f64) -> PathBuf {
    dir.join(format!("ball-{:016x}-{:016x}.txt", surface.hash(), r.to_bits()))
}

/// `B_Γ(r)`, reusing an earlier enumeration of the same or a larger radius.
pub fn ball_cached(surface: &FuchsianSurface, r: f64) -> Result<Arc<Ball>> {
    let key = (surface.hash(), r.to_bits());
    {
        let memo = memo().lock().expect("ball cache poisoned");
        if let Some(b) = memo.get(&key) {
            return Ok(b.clone());
        }
        if let Some(b) = memo.iter().filter(|((h, _), b)| *h == surface.hash() && b.radius >= r).map(|(_, b)| b).next() {
            return Ok(Arc::new(truncate(b, r)));
        }
    }
    let dir = std::env::var_os(BALL_CACHE_ENV).map(PathBuf::from);
    let ball = match dir.as_deref().map(|d| load(&cache_path(d, surface, r), surface, r)) {
        Some(Ok(Some(b))) => b,
        _ => {
            let b = enumerate_ball(surface, r)?;
            if let Some(d) = dir.as_deref() {
                store(d, surface, &b)?;
            }
            b
        }
    };
    let ball = Arc::new(ball);
    memo().lock().expect("ball cache poisoned").insert(key, ball.clone());
    Ok(ball)
}

fn truncate(b: &Ball, r: f64) -> Ball {
    let n = b.count_within(r);
    Ball { radius: r, elements: b.elements[..n].to_vec(), duplicates_removed: 0 }
}

/// Write a ball to `dir` atomically.
pub fn store(dir: &Path, surface: &FuchsianSurface, ball: &Ball) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, surface, ball.radius);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        writeln!(w, "{HEADER}")?;
        writeln!(w, "# surface {:016x}", surface.hash())?;
        writeln!(w, "# radius {:.16e}", ball.radius)?;
        writeln!(w, "# count {}", ball.len())?;
        for e in &ball.elements {
            writeln!(w, "{} {:.16e}", e.word, e.distance)?;
        }
        w.flush()?;
    }
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(path)
}

/// Read a cached ball; `Ok(None)` when the file is absent or stale.
pub fn load(path: &Path, surface: &FuchsianSurface, r: f64) -> Result<Option<Ball>> {
    let Ok(file) = fs::File::open(path) else { return Ok(None) };
    let mut lines = BufReader::new(file).lines();
    let mut header = Vec::new();
    for _ in 0..4 {
        match lines.next() {
            Some(l) => header.push(l?),
            None => return Ok(None),
        }
    }
    if header[0] != HEADER || header[1] != format!("# surface {:016x}", surface.hash()) {
        return Ok(None);
    }
    let count: usize = header[3]
        .strip_prefix("# count ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad cache header in {}", path.display())))?;
    let mut elements = Vec::with_capacity(count);
    for line in lines {
        let line = line?;
        let (w, d) = line.split_once(' ').ok_or_else(|| Error::Parse(format!("bad cache line {line:?}")))?;
        let word = Word::parse(w)?;
        let distance: f64 = d.parse().map_err(|_| Error::Parse(format!("bad distance {d:?}")))?;
        let element = surface.eval(&word);
        elements.push(BallElement { word, element, distance });
    }
    if elements.len() != count {
        return Ok(None);
    }
    Ok(Some(Ball { radius: r, elements, duplicates_removed: 0 }))
}
