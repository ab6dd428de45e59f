#![no_main]

use libfuzzer_sys::fuzz_target;
use nsrl_core::env::{ScheduleFile, TransitionNorm};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = ScheduleFile::from_json(text) else {
        return;
    };
    let Ok(schedule) = file.to_schedule() else { return };
    let budget = schedule.variation_budget_with(TransitionNorm::RowL1);
    assert!(budget.delta_p >= 0.0 && budget.delta_r >= 0.0);
    let last = schedule.horizon() - 1;
    for t in [0, last / 2, last] {
        schedule.env_at(t).unwrap().validate().unwrap();
    }
    let back = ScheduleFile::from_json(&ScheduleFile::from_schedule(&schedule, file.seed, None).to_json())
        .unwrap()
        .to_schedule()
        .unwrap();
    assert_eq!(back, schedule);
});
