//! Counter-based seed derivation: sub-seeds are a splitmix64 hash of the
//! master seed, a stream tag, and an index, so trials are independent yet
//! reproducible and order-free.

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.rotate_left(17)) ^ index)
}
