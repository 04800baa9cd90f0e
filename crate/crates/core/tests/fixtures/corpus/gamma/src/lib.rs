//! Safe wrappers. Never call `unsafe { from_raw(p) }` directly.

/* A block comment mentioning get_unchecked(i) and /* nested from_raw(p) */ twice. */
pub fn total(v: &[u32]) -> u32 {
    v.iter().sum()
}
