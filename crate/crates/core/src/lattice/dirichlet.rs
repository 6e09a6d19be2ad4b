//! Faces of the Dirichlet domain at `i`, computed in the Klein model where
//! every bisector is a straight chord.

use std::f64::consts::PI;

use super::{FuchsianSurface, Letter, Real2, SidePairing, Word};
use crate::error::{Error, Result};

pub(super) struct DirichletDomain {
    pub pairings: Vec<SidePairing>,
    pub area: f64,
}

type P2 = (f64, f64);

/// Half-plane `⟨k, dir⟩ ≤ level` bounding the points closer to `i` than to `g·i`.
#[derive(Debug, Clone)]
struct HalfPlane {
    word: Word,
    dir: P2,
    level: f64,
}

fn half_plane(word: Word, m: Real2) -> HalfPlane {
    let p = m.apply_base();
    let (kx, ky) = p.to_klein();
    let norm = kx.hypot(ky);
    let dist = m.displacement();
    HalfPlane { word, dir: (kx / norm, ky / norm), level: (dist / 2.0).tanh() }
}

fn reduced_words(rank: usize, max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut layer = vec![Word::identity()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for k in 0..2 * rank {
                let l = Letter(k as u8);
                if w.letters().last() != Some(&l.inverse()) {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Convex polygon with a label per edge; edge `k` runs from vertex `k` to `k+1`.
struct Polygon {
    verts: Vec<P2>,
    labels: Vec<Option<usize>>,
}

impl Polygon {
    fn square(half: f64) -> Self {
        Polygon {
            verts: vec![(-half, -half), (half, -half), (half, half), (-half, half)],
            labels: vec![None; 4],
        }
    }

    fn clip(&mut self, hp: &HalfPlane, label: usize) {
        let side = |p: P2| p.0 * hp.dir.0 + p.1 * hp.dir.1 - hp.level;
        let n = self.verts.len();
        let mut verts = Vec::with_capacity(n + 1);
        let mut labels = Vec::with_capacity(n + 1);
        for k in 0..n {
            let p = self.verts[k];
            let q = self.verts[(k + 1) % n];
            let (sp, sq) = (side(p), side(q));
            let cross = || {
                let t = sp / (sp - sq);
                (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
            };
            match (sp <= 0.0, sq <= 0.0) {
                (true, true) => {
                    verts.push(p);
                    labels.push(self.labels[k]);
                }
                (true, false) => {
                    verts.push(p);
                    labels.push(self.labels[k]);
                    verts.push(cross());
                    labels.push(Some(label));
                }
                (false, true) => {
                    verts.push(cross());
                    labels.push(self.labels[k]);
                }
                (false, false) => {}
            }
        }
        self.verts = verts;
        self.labels = labels;
    }
}

/// Euclidean distance from the origin to a segment.
fn segment_distance(p: P2, q: P2) -> f64 {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (-(p.0 * dx + p.1 * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p.0 + t * dx).hypot(p.1 + t * dy)
}

fn line_intersection(a: &HalfPlane, b: &HalfPlane) -> Option<P2> {
    let det = a.dir.0 * b.dir.1 - a.dir.1 * b.dir.0;
    if det.abs() < 1e-14 {
        return None;
    }
    let x = (a.level * b.dir.1 - a.dir.1 * b.level) / det;
    let y = (a.dir.0 * b.level - a.level * b.dir.0) / det;
    Some((x, y))
}

/// Derivative of the Klein-to-Poincaré disk map at `k` applied to `v`.
fn klein_to_poincare_tangent(k: P2, v: P2) -> P2 {
    let q = k.0 * k.0 + k.1 * k.1;
    let root = (1.0 - q).sqrt();
    let s = 1.0 / (1.0 + root);
    let ds = 1.0 / (2.0 * root * (1.0 + root) * (1.0 + root));
    let kv = 2.0 * (k.0 * v.0 + k.1 * v.1);
    (s * v.0 + k.0 * ds * kv, s * v.1 + k.1 * ds * kv)
}

/// Vertices closer than this to the unit circle count as ideal.
const IDEAL_VERTEX_TOL: f64 = 1e-6;

struct Faces {
    /// Face labels in cyclic order.
    order: Vec<usize>,
    area: f64,
}

fn faces_of(planes: &[HalfPlane]) -> Option<Faces> {
    let mut poly = Polygon::square(1.5);
    let mut idx: Vec<usize> = (0..planes.len()).collect();
    idx.sort_by(|&a, &b| planes[a].level.total_cmp(&planes[b].level));
    for &k in &idx {
        poly.clip(&planes[k], k);
    }
    let n = poly.verts.len();
    let mut order = Vec::new();
    for k in 0..n {
        if segment_distance(poly.verts[k], poly.verts[(k + 1) % n]) < 1.0 - 1e-9 {
            // An unclipped square edge inside the disk means the domain is not
            // yet cut down to finite area.
            let label = poly.labels[k]?;
            if order.last() != Some(&label) {
                order.push(label);
            }
        }
    }
    if order.len() > 1 && order.first() == order.last() {
        order.pop();
    }
    let m = order.len();
    if m < 3 {
        return None;
    }
    let mut angle_sum = 0.0;
    for k in 0..m {
        let a = &planes[order[k]];
        let b = &planes[order[(k + 1) % m]];
        let x = line_intersection(a, b)?;
        let r = x.0.hypot(x.1);
        if r > 1.0 + IDEAL_VERTEX_TOL {
            return None;
        }
        if r >= 1.0 - IDEAL_VERTEX_TOL {
            continue;
        }
        // Directions along each face away from the shared vertex, towards the
        // interior of the polygon edge.
        let ta = (-a.dir.1, a.dir.0);
        let tb = (-b.dir.1, b.dir.0);
        let into = |t: P2, other: &HalfPlane| {
            if t.0 * other.dir.0 + t.1 * other.dir.1 > 0.0 {
                (-t.0, -t.1)
            } else {
                t
            }
        };
        let ea = klein_to_poincare_tangent(x, into(ta, b));
        let eb = klein_to_poincare_tangent(x, into(tb, a));
        let cos = (ea.0 * eb.0 + ea.1 * eb.1) / (ea.0.hypot(ea.1) * eb.0.hypot(eb.1));
        angle_sum += cos.clamp(-1.0, 1.0).acos();
    }
    let area = (m as f64 - 2.0) * PI - angle_sum;
    Some(Faces { order, area })
}

/// Largest candidate word length tried before giving up.
const MAX_CANDIDATE_LENGTH: usize = 7;

pub(super) fn dirichlet_faces(surface: &FuchsianSurface) -> Result<DirichletDomain> {
    let mut previous: Option<(Vec<Word>, f64)> = None;
    for len in 1..=MAX_CANDIDATE_LENGTH {
        let planes: Vec<HalfPlane> =
            reduced_words(surface.rank(), len).into_iter().map(|w| half_plane(w.clone(), surface.eval_real(&w))).collect();
        let Some(faces) = faces_of(&planes) else { continue };
        let mut words: Vec<Word> = faces.order.iter().map(|&k| planes[k].word.clone()).collect();
        words.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        if let Some((prev, area)) = &previous {
            if *prev == words {
                return finish(surface, prev.clone(), *area);
            }
        }
        previous = Some((words, faces.area));
    }
    Err(Error::Domain(format!("Dirichlet faces did not stabilise with words up to length {MAX_CANDIDATE_LENGTH}")))
}

fn finish(surface: &FuchsianSurface, words: Vec<Word>, area: f64) -> Result<DirichletDomain> {
    for w in &words {
        if !words.contains(&w.inverse()) {
            return Err(Error::Domain(format!("face {w} has no paired face")));
        }
    }
    let pairings = words
        .iter()
        .map(|w| SidePairing {
            // Crossing the face of `w` is undone by `w⁻¹`.
            word: w.inverse(),
            matrix: surface.eval_real(&w.inverse()),
            inverse_word: w.clone(),
        })
        .collect::<Vec<_>>();
    // Re-sort by the pairing word so the tie-breaking order is X, x, Y, y, ...
    let mut pairings = pairings;
    pairings.sort_by(|a, b| (a.word.len(), &a.word).cmp(&(b.word.len(), &b.word)));
    Ok(DirichletDomain { pairings, area })
}
