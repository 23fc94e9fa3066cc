#![no_main]
use libfuzzer_sys::fuzz_target;
use spectralkit::output::{
    encode_record, parse_record, BudgetRecord, IncrementsRecord, SpatialMeansRecord, SpectrumRecord,
};

fn round_trip<T>(line: &str)
where
    T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug,
{
    if let Ok(rec) = parse_record::<T>(line) {
        if let Ok(encoded) = encode_record(&rec) {
            assert!(!encoded.contains('\n'));
            let back: T = parse_record(&encoded).expect("encoded record parses");
            assert_eq!(encode_record(&back).unwrap(), encoded);
        }
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    round_trip::<SpatialMeansRecord>(line);
    round_trip::<SpectrumRecord>(line);
    round_trip::<BudgetRecord>(line);
    round_trip::<IncrementsRecord>(line);
});
