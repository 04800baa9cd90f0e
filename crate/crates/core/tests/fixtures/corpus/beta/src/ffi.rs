use std::ffi::CStr;
use std::os::raw::c_char;

pub unsafe fn name<'a>(p: *const c_char) -> &'a CStr {
    unsafe { CStr::from_ptr(p) }
}

pub fn parse(s: &str) -> Option<u32> {
    let v: Option<u32> = s.parse().ok();
    unsafe { Some(v.unwrap_unchecked()) }
}
