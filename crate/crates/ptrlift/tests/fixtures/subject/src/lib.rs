// Small transpiled-style crate: every function keeps a local raw pointer
// in the shape C2Rust tends to emit.

pub fn boxed_total(seed: i32) -> i32 {
    let b: *mut i32 = Box::into_raw(Box::new(seed));
    let mut total = 0;
    unsafe {
        *b += 1;
        total += *b;
        drop(Box::from_raw(b));
    }
    total
}

pub fn find_byte(data: &[u8], needle: u8) -> i32 {
    let q: *const u8 = data.as_ptr();
    let mut i = 0usize;
    while i < data.len() {
        unsafe {
            if *q.add(i) == needle {
                return i as i32;
            }
        }
        i += 1;
    }
    -1
}

pub fn checked_sum(count: i32) -> i32 {
    let mut values: Vec<i32> = vec![0; count as usize];
    let v: *mut i32 = values.as_mut_ptr();
    let mut total: i32 = 0;
    let mut i: i32 = 0;
    while i < count {
        unsafe {
            *v.offset(i as isize) = i;
            total += *v.offset(i as isize);
        }
        i += 1;
    }
    total
}

#[cfg(test)]
mod tests {
    #[test]
    fn boxed_total_adds_one() {
        assert_eq!(super::boxed_total(4), 5);
    }

    #[test]
    fn find_byte_reports_position_or_minus_one() {
        assert_eq!(super::find_byte(b"abc", b'b'), 1);
        assert_eq!(super::find_byte(b"abc", b'z'), -1);
    }

    #[test]
    fn checked_sum_totals_the_range() {
        assert_eq!(super::checked_sum(4), 6);
    }
}
