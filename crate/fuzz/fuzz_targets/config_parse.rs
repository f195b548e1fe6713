#![no_main]

use biqgt_lab::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = ExperimentConfig::parse(text) else {
        return;
    };
    // building must report errors, never panic
    if let Ok(spec) = config.model.build() {
        if let Some(scan) = &config.scan {
            if scan.points <= 4096 {
                let _ = scan.build(&spec);
            }
        }
    }
    let _ = config.dynamics.build();
    if let Some(point) = &config.point {
        let _ = point.build();
    }
    if let Some(chern) = &config.chern {
        if chern.delta2_points <= 4096 {
            let _ = chern.delta2_values();
        }
    }
});
