//! Data-parallel evaluation over items that own disjoint output slices.
//!
//! With the `parallel` feature the items are spread over the rayon pool;
//! without it (or when `parallel` is false at run time) they run in order.
//! Every item writes only its own slice with a fixed summation order, so
//! both paths produce bit-identical output.

use std::ops::Range;

/// Split `out` into consecutive slices of the given lengths.
pub fn split_by_ranges<'a>(out: &'a mut [f64], ranges: impl Iterator<Item = Range<usize>>) -> Vec<&'a mut [f64]> {
    let mut rest = out;
    let mut offset = 0;
    let mut chunks = Vec::new();
    for r in ranges {
        debug_assert_eq!(r.start, offset, "ranges must be contiguous");
        let (head, tail) = rest.split_at_mut(r.end - r.start);
        chunks.push(head);
        rest = tail;
        offset = r.end;
    }
    chunks
}

/// Run `f(item, slice)` for every item and its output slice.
pub fn for_each_with<T, F>(parallel: bool, items: &[T], chunks: Vec<&mut [f64]>, f: F)
where
    T: Sync,
    F: Fn(&T, &mut [f64]) + Sync + Send,
{
    assert_eq!(items.len(), chunks.len());
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        items.par_iter().zip(chunks.into_par_iter()).for_each(|(item, out)| f(item, out));
        return;
    }
    let _ = parallel;
    for (item, out) in items.iter().zip(chunks) {
        f(item, out);
    }
}

/// `f(i)` for `i in 0..n`, collected in order.
pub fn map_indices<R, F>(parallel: bool, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Whether this build can evaluate in parallel at all.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_agree() {
        let items: Vec<usize> = (0..100).collect();
        let ranges: Vec<Range<usize>> = items.iter().map(|i| i * (i + 1) / 2..(i + 1) * (i + 2) / 2).collect();
        let total = ranges.last().unwrap().end;
        let mut a = vec![0.0; total];
        let mut b = vec![0.0; total];
        let fill = |i: &usize, out: &mut [f64]| {
            for (k, v) in out.iter_mut().enumerate() {
                *v = (*i as f64 + 0.1).ln() * (k as f64 + 1.0).sqrt();
            }
        };
        for_each_with(true, &items, split_by_ranges(&mut a, ranges.iter().cloned()), fill);
        for_each_with(false, &items, split_by_ranges(&mut b, ranges.iter().cloned()), fill);
        assert_eq!(a, b);
        assert_eq!(map_indices(true, 50, |i| i * i), map_indices(false, 50, |i| i * i));
    }
}
