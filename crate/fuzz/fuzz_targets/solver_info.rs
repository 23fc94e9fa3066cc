#![no_main]
use libfuzzer_sys::fuzz_target;
use spectralkit::solver_core::SolverInfo;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(info) = SolverInfo::parse(text) {
        let again = SolverInfo::parse(&info.to_string()).expect("printed info parses");
        assert_eq!(again, info);
    }
});
