pub fn double_first(values: &[i32]) -> i32 {
    let p: *const i32 = values.as_ptr();
    if values.is_empty() {
        return 0;
    }
    unsafe { *p * 2 }
}

#[cfg(test)]
mod tests {
    #[test]
    fn doubles_the_first_element() {
        assert_eq!(super::double_first(&[21, 5]), 42);
    }

    #[test]
    fn empty_slice_gives_zero() {
        assert_eq!(super::double_first(&[]), 0);
    }
}
