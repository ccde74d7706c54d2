// A lifted rewrite gone wrong in the classic way: an immutable method call
// on `self` while a mutable borrow of a field is still live.

pub struct Buffer {
    data: Vec<u8>,
}

impl Buffer {
    pub fn new(n: usize) -> Buffer {
        Buffer { data: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn bump_and_len(&mut self) -> usize {
        let first: &mut u8 = &mut self.data[0];
        let n = self.len();
        *first += 1;
        n
    }
}
