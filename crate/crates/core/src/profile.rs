//! Mixed-radix indexing of the joint profile space.
//!
//! Profiles are ordered lexicographically: agent 0 is the most significant
//! digit and each agent's options follow [`Agent::options`](crate::Agent::options).
//! Parallel scans split the index range into contiguous chunks and merge in
//! chunk order, so results never depend on the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{Choice, Game};
use crate::scalar::Scalar;

/// Default ceiling on the number of profiles an exhaustive scan may visit.
pub const DEFAULT_PROFILE_CAP: u128 = 2_000_000;

const CHUNK: u64 = 4096;

pub struct ProfileSpace {
    options: Vec<Vec<Choice>>,
    total: u64,
}

impl ProfileSpace {
    pub fn new<S: Scalar>(game: &Game<S>, cap: u128) -> Result<Self> {
        let required = game.profile_count();
        if required > cap {
            return Err(Error::CapExceeded { required, cap });
        }
        let options = game.agents().iter().map(|a| a.options().collect()).collect();
        Ok(ProfileSpace {
            options,
            total: required as u64,
        })
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Digits of profile `index`, most significant first.
    fn digits(&self, mut index: u64) -> Vec<usize> {
        let mut digits = vec![0; self.options.len()];
        for (slot, opts) in digits.iter_mut().zip(&self.options).rev() {
            let radix = opts.len() as u64;
            *slot = (index % radix) as usize;
            index /= radix;
        }
        digits
    }

    /// Visits profiles `start..end` in order.
    fn scan_range<T>(
        &self,
        start: u64,
        end: u64,
        mut visit: impl FnMut(&[Choice]) -> Option<T>,
    ) -> Vec<T> {
        let mut out = Vec::new();
        if start >= end {
            return out;
        }
        let mut digits = self.digits(start);
        let mut profile: Vec<Choice> = digits
            .iter()
            .zip(&self.options)
            .map(|(&d, opts)| opts[d])
            .collect();
        for _ in start..end {
            if let Some(t) = visit(&profile) {
                out.push(t);
            }
            for agent in (0..digits.len()).rev() {
                digits[agent] += 1;
                if digits[agent] < self.options[agent].len() {
                    profile[agent] = self.options[agent][digits[agent]];
                    break;
                }
                digits[agent] = 0;
                profile[agent] = self.options[agent][0];
            }
        }
        out
    }

    /// Applies `visit` to every profile (in parallel) and returns the kept
    /// results in profile order.
    pub fn filter_map<T, F>(&self, visit: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[Choice]) -> Option<T> + Sync,
    {
        let chunks = self.total.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(self.total);
                self.scan_range(start, end, &visit)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    /// First profile (in order) maximizing `score`.
    pub fn argmax<S, F>(&self, score: F) -> Option<(Vec<Choice>, S)>
    where
        S: Scalar,
        F: Fn(&[Choice]) -> S + Sync,
    {
        let chunks = self.total.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(self.total);
                let mut best: Option<(Vec<Choice>, S)> = None;
                self.scan_range(start, end, |p| {
                    let s = score(p);
                    if best.as_ref().is_none_or(|(_, b)| s > *b) {
                        best = Some((p.to_vec(), s));
                    }
                    None::<()>
                });
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .reduce(|a, b| if b.1 > a.1 { b } else { a })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::e1;

    #[test]
    fn lexicographic_order() {
        let g = e1();
        let space = ProfileSpace::new(&g, 100).unwrap();
        let all = space.filter_map(|p| Some(p.to_vec()));
        assert_eq!(
            all,
            vec![
                vec![Some(0), Some(0)],
                vec![Some(0), Some(2)],
                vec![Some(1), Some(0)],
                vec![Some(1), Some(2)],
            ]
        );
    }

    #[test]
    fn cap_is_enforced() {
        let g = e1();
        assert!(matches!(
            ProfileSpace::new(&g, 3),
            Err(Error::CapExceeded { required: 4, cap: 3 })
        ));
    }

    #[test]
    fn chunked_scan_matches_sequential() {
        // 5 agents x 6 options = 7776 profiles spans several chunks.
        let g = crate::Game::<f64>::new(
            5,
            (0..6).map(|r| (format!("r{r}"), r as f64)),
            (0..5).map(|i| {
                (
                    format!("a{i}"),
                    (0..5).map(|r| format!("r{r}")).collect(),
                    true,
                )
            }),
        )
        .unwrap();
        let space = ProfileSpace::new(&g, u128::MAX).unwrap();
        assert_eq!(space.len(), 7776);
        let parallel: Vec<Vec<Choice>> = space.filter_map(|p| Some(p.to_vec()));
        let sequential = space.scan_range(0, space.len(), |p| Some(p.to_vec()));
        assert_eq!(parallel, sequential);
        let mut sorted = parallel.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 7776);
    }
}
