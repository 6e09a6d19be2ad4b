use crate::error::{Error, Result};
use crate::lattice::{Letter, Word};
use crate::lyapunov::Representation;
use crate::moebius::MoebiusElement;

pub const MAX_DISCRETENESS_DEPTH: usize = 8;

/// Smallest Jørgensen quantity `|tr² A − 4| + |tr [A, B] − 2|` over words
/// `A` of length at most `depth` and generators `B`. Commuting pairs are
/// skipped since they generate elementary groups. A value below 1 rules out
/// a discrete non-elementary image.
pub fn discreteness_heuristic(rep: &Representation, depth: usize) -> Result<f64> {
    if depth == 0 || depth > MAX_DISCRETENESS_DEPTH {
        return Err(Error::Config(format!("depth {depth} outside 1..={MAX_DISCRETENESS_DEPTH}")));
    }
    let gens: Vec<MoebiusElement> = rep.images().to_vec();
    let letters: Vec<Letter> = (0..2 * rep.rank()).map(|k| Letter(k as u8)).collect();
    let mut best = f64::INFINITY;
    let mut layer: Vec<(Word, MoebiusElement)> = vec![(Word::identity(), MoebiusElement::identity())];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(layer.len() * 3);
        for (w, m) in &layer {
            for &l in &letters {
                if w.letters().last() == Some(&l.inverse()) {
                    continue;
                }
                let mut w2 = w.clone();
                w2.push(l);
                next.push((w2, m * rep.letter(l)));
            }
        }
        for (_, a) in &next {
            let ai = a.inverse();
            for b in &gens {
                let comm = (a * b) * (ai * b.inverse());
                let defect = (comm.trace() - 2.0).norm();
                // The sign ambiguity of PSL(2,ℂ) leaves tr of a commutator fixed.
                if defect < 1e-9 {
                    continue;
                }
                best = best.min((a.trace_sq() - 4.0).norm() + defect);
            }
        }
        layer = next;
    }
    Ok(best)
}
