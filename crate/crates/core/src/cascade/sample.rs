use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Cascade, LetterPath};
use crate::error::{Error, Result};
use crate::fbar::{BlockSampler, JointSampler};
use crate::rng::RngStream;
use crate::symdyn::BernoulliVector;

/// Level-n letter drawn `∝ |ϱₙ(a)| 𝔭ₙ(a)` by acceptance–rejection.
pub(crate) fn length_biased(c: &Cascade, p: &BernoulliVector, n: usize, rng: &mut ChaCha8Rng) -> Result<(LetterPath, u64)> {
    let bound = c.max_roof_bound(n);
    loop {
        let a = c.sample_letter(p, n, rng);
        let len = c.roof_len(n, &a.digits)?;
        if rng.gen_range(0..bound) < len {
            return Ok((a, len));
        }
    }
}

fn nu_symbols(c: &Cascade, p: &BernoulliVector, n: usize, length: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let (a, len) = length_biased(c, p, n, rng)?;
    let s = rng.gen_range(0..len) as usize;
    let mut out = Vec::with_capacity(length + len as usize);
    c.image_into(n, &a.digits, &mut out)?;
    out.drain(..s);
    while out.len() < length {
        let b = c.sample_letter(p, n, rng);
        c.image_into(n, &b.digits, &mut out)?;
    }
    out.truncate(length);
    Ok(out)
}

/// A window of the stationary stream `νₙ(𝔭)`: i.i.d. `𝔭ₙ` letters, images
/// concatenated, started at a stationary phase.
pub fn sample_nu_n(c: &Cascade, p: &BernoulliVector, n: usize, length: usize, rng: RngStream) -> Result<Vec<usize>> {
    if length == 0 {
        return Err(Error::InvalidArgument("length must be >= 1".into()));
    }
    if n > c.depth() {
        return Err(Error::InvalidArgument(format!("level {n} > depth {}", c.depth())));
    }
    if p.alphabet() != c.base().source() {
        return Err(Error::AlphabetMismatch("vector vs base alphabet".into()));
    }
    nu_symbols(c, p, n, length, &mut rng.rng())
}

/// A stationary `νₙ` window preceded by at least `history` symbols of
/// i.i.d. letter images. The returned stream starts at a letter boundary and
/// the stationary window begins at the returned offset.
pub fn sample_nu_n_with_history(
    c: &Cascade,
    p: &BernoulliVector,
    n: usize,
    history: usize,
    length: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, usize)> {
    if n > c.depth() {
        return Err(Error::InvalidArgument(format!("level {n} > depth {}", c.depth())));
    }
    let mut out = Vec::with_capacity(history + length);
    while out.len() < history {
        let b = c.sample_letter(p, n, rng);
        c.image_into(n, &b.digits, &mut out)?;
    }
    let (a, len) = length_biased(c, p, n, rng)?;
    let offset = out.len() + rng.gen_range(0..len) as usize;
    c.image_into(n, &a.digits, &mut out)?;
    while out.len() < offset + length {
        let b = c.sample_letter(p, n, rng);
        c.image_into(n, &b.digits, &mut out)?;
    }
    Ok((out, offset))
}

pub struct NuSampler<'a> {
    pub cascade: &'a Cascade,
    pub p: &'a BernoulliVector,
    pub level: usize,
}

impl BlockSampler for NuSampler<'_> {
    /// Panics if the tail provider fails; synthetic providers never do.
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        nu_symbols(self.cascade, self.p, self.level, n, rng).expect("tail provider")
    }
}

/// Shared-digit joining of the level-k and level-l coded streams (phase 0):
/// both read the same i.i.d. `𝔭` digit sequence, so the level-l stream is the
/// level-k stream with the tails of levels k+1..l inserted.
pub struct LevelCoupling<'a> {
    pub cascade: &'a Cascade,
    pub p: &'a BernoulliVector,
    pub k: usize,
    pub l: usize,
}

impl JointSampler for LevelCoupling<'_> {
    fn sample_pair(&self, n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
        let c = self.cascade;
        let chunk = c.digits_at(self.l);
        let wk = c.digits_at(self.k);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        while a.len() < n || b.len() < n {
            let digits: Vec<usize> = (0..chunk).map(|_| self.p.sample_letter(rng)).collect();
            for piece in digits.chunks(wk) {
                c.image_into(self.k, piece, &mut a).expect("tail provider");
            }
            c.image_into(self.l, &digits, &mut b).expect("tail provider");
        }
        a.truncate(n);
        b.truncate(n);
        (a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::cascade;
    use super::super::TailKind;
    use super::*;
    use crate::fbar::fbar_coupling_upper;
    use crate::symdyn::{block_distribution, Alphabet, Word};

    #[test]
    fn level_zero_identity_is_bernoulli() {
        use crate::substitution::SubstitutionMap;
        let c = Cascade::new(super::super::CascadeConfig {
            base: SubstitutionMap::identity(2),
            m: vec![2],
            k: 0.0,
            tails: TailKind::Zero,
        })
        .unwrap();
        let p = BernoulliVector::new(vec![0.3, 0.7]).unwrap();
        let s = sample_nu_n(&c, &p, 0, 50_000, RngStream::new(1, 0)).unwrap();
        let f = s.iter().filter(|&&x| x == 0).count() as f64 / 5e4;
        assert!((f - 0.3).abs() < 0.01);
    }

    #[test]
    fn degenerate_vector_is_periodic() {
        let c = cascade(TailKind::Constant, 0.2, vec![2, 2], 16);
        let d = BernoulliVector::dirac(2, 1);
        let s = sample_nu_n(&c, &d, 2, 4000, RngStream::new(2, 0)).unwrap();
        let period = c.roof_len(2, &[1, 1, 1, 1]).unwrap() as usize;
        assert!(s.windows(period + 1).all(|w| w[0] == w[period]));
    }

    #[test]
    fn zero_tails_match_level_zero_blocks() {
        let c = cascade(TailKind::Zero, 0.0, vec![2, 3], 3);
        let p = BernoulliVector::new(vec![0.4, 0.6]).unwrap();
        let w0 = Word::new(Alphabet { size: 2 }, sample_nu_n(&c, &p, 0, 200_000, RngStream::new(3, 0)).unwrap()).unwrap();
        let w2 = Word::new(Alphabet { size: 2 }, sample_nu_n(&c, &p, 2, 200_000, RngStream::new(3, 1)).unwrap()).unwrap();
        let b0 = block_distribution(&w0, 3).unwrap();
        let b2 = block_distribution(&w2, 3).unwrap();
        for (k, v) in &b0 {
            assert!((v - b2.get(k).copied().unwrap_or(0.0)).abs() < 0.01, "{k:?}");
        }
    }

    #[test]
    fn coupling_within_level_gap() {
        let c = cascade(TailKind::DigitWeighted { symbol: 0 }, 0.1, vec![2, 3, 2], 32);
        let p = BernoulliVector::new(vec![0.5, 0.5]).unwrap();
        for (k, l) in [(0, 1), (1, 2), (0, 3)] {
            let e = fbar_coupling_upper(&LevelCoupling { cascade: &c, p: &p, k, l }, 4096, 20, RngStream::new(5, k as u64)).unwrap();
            assert!(e.value <= 4.0 * 0.1 * 2f64.powi(-(k as i32)) + 3.0 * e.std_error, "{k}->{l}: {e:?}");
            assert!(e.value > 0.0);
        }
    }
}
