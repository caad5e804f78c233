use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use drmcost_bench::filler;
use drmcost_core::crypto::{
    aes_cbc_decrypt, aes_cbc_encrypt, builtin_key, hmac_sha1, kdf2, key_unwrap, key_wrap, pss_sign, pss_verify, sha1,
};
use drmcost_core::SymmetricKey;

const SIZES: [usize; 3] = [16, 4096, 1 << 20];

fn symmetric(c: &mut Criterion) {
    let key = SymmetricKey::from_bytes(&[7u8; 16]).unwrap();
    let iv = [3u8; 16];
    let mut group = c.benchmark_group("symmetric");
    for size in SIZES {
        let data = filler(size);
        let ct = aes_cbc_encrypt(&key, &iv, &data);
        group.throughput(Throughput::Bytes(size as u64));
        group.bench_with_input(BenchmarkId::new("sha1", size), &data, |b, d| b.iter(|| sha1(black_box(d))));
        group.bench_with_input(BenchmarkId::new("hmac_sha1", size), &data, |b, d| {
            b.iter(|| hmac_sha1(&[9u8; 16], black_box(d)))
        });
        group.bench_with_input(BenchmarkId::new("aes_cbc_encrypt", size), &data, |b, d| {
            b.iter(|| aes_cbc_encrypt(&key, &iv, black_box(d)))
        });
        group.bench_with_input(BenchmarkId::new("aes_cbc_decrypt", size), &ct, |b, d| {
            b.iter(|| aes_cbc_decrypt(&key, &iv, black_box(d)).unwrap())
        });
    }
    group.finish();

    let payload = filler(32);
    let wrapped = key_wrap(&key, &payload).unwrap();
    c.bench_function("key_wrap/32", |b| b.iter(|| key_wrap(&key, black_box(&payload)).unwrap()));
    c.bench_function("key_unwrap/32", |b| b.iter(|| key_unwrap(&key, black_box(&wrapped)).unwrap()));
    c.bench_function("kdf2/128->16", |b| b.iter(|| kdf2(black_box(&[5u8; 128]), 16)));
}

fn rsa(c: &mut Criterion) {
    let keys = builtin_key("agent");
    let msg = filler(1024);
    let sig = pss_sign(keys, &msg);
    let mut group = c.benchmark_group("rsa1024");
    group.sample_size(20);
    group.bench_function("sign", |b| b.iter(|| pss_sign(keys, black_box(&msg))));
    group.bench_function("verify", |b| b.iter(|| pss_verify(keys.public(), black_box(&msg), sig.as_bytes())));
    group.finish();
}

criterion_group!(benches, symmetric, rsa);
criterion_main!(benches);
