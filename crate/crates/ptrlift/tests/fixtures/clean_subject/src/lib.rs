// Every raw pointer here is outside the lifting rules: a parameter, a
// void pointee, and a pointer-to-pointer.

use std::ffi::c_void;

pub unsafe fn read_through(p: *const i32) -> i32 {
    *p
}

pub fn erased_handle(flag: bool) -> usize {
    let h: *mut c_void = std::ptr::null_mut();
    if flag {
        h as usize
    } else {
        0
    }
}

pub unsafe fn double_indirection(mut inner: *mut i32) -> i32 {
    let outer: *mut *mut i32 = &mut inner;
    **outer
}

#[cfg(test)]
mod tests {
    #[test]
    fn erased_handle_is_null() {
        assert_eq!(super::erased_handle(true), 0);
    }

    #[test]
    fn double_indirection_reads() {
        let mut v = 7;
        assert_eq!(unsafe { super::double_indirection(&mut v) }, 7);
    }

    #[test]
    fn read_through_reads() {
        let v = 3;
        assert_eq!(unsafe { super::read_through(&v) }, 3);
    }
}
