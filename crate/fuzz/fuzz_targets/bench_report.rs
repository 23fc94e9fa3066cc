#![no_main]
use libfuzzer_sys::fuzz_target;
use spectralkit::bench::{compute_speedup, Baseline, BenchReport};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let reports: Vec<BenchReport> = text.lines().filter_map(|l| BenchReport::parse(l).ok()).collect();
    for r in &reports {
        if let Ok(line) = r.to_record() {
            let _ = BenchReport::parse(&line).expect("encoded report parses");
        }
    }
    if let Ok(table) = compute_speedup(&reports, &Baseline::Auto) {
        let _ = table.to_text();
        let _ = table.to_csv();
    }
});
