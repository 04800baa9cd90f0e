mod ffi;

fn main() {
    let x = std::mem::size_of_val(&1u8);
    let n = from_raw_parts(&[1, 2], x); // local helper with the same name
    println!("{n}");
}

fn from_raw_parts(v: &[u8], n: usize) -> usize {
    v.len() + n
}
