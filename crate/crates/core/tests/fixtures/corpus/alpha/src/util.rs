pub fn text(bytes: Vec<u8>) -> String {
    unsafe { String::from_utf8_unchecked(bytes) }
}

pub const NOTE: &str = "from_raw(ptr) must not be called twice";
