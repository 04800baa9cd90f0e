mod util;

pub fn first(v: &[u8]) -> u8 {
    unsafe { *v.get_unchecked(0) }
}

pub fn boxed(p: *mut u32) -> Box<u32> {
    // Box::from_raw(p) is the only owner from here on.
    unsafe { Box::from_raw(p) }
}

pub fn pair(p: *mut u32) -> (Box<u32>, Vec<u32>) {
    unsafe { (Box::from_raw(p), Vec::from_raw_parts(p, 1, 1)) }
}

pub const PATTERN: &str = r#"v.get_unchecked(0) with "quotes""#;

pub fn tick<'a>(s: &'a str) -> char {
    let _ = s;
    '('
}

pub type Rebuild = unsafe fn(*mut u32, usize, usize) -> Vec<u32>;

pub const REBUILD: Rebuild = Vec::from_raw_parts;
