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
    fn sums_the_first_count_integers() {
        assert_eq!(super::checked_sum(4), 6);
    }
}
