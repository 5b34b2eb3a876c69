use backport_pilot_core::schedule::{
    default_calendar, is_lts, next_trigger, parse_calendar, plan_rounds, ReleaseMilestone, ScheduleError,
};
use chrono::{Datelike, Duration, NaiveDate};
use proptest::prelude::*;

fn triggers(target: &str) -> Vec<String> {
    plan_rounds(&default_calendar(), target)
        .unwrap()
        .into_iter()
        .map(|r| r.trigger.version)
        .collect()
}

#[test]
fn rounds_after_14_04() {
    assert_eq!(triggers("14.04"), ["14.10", "15.04", "15.10", "16.04"]);
}

#[test]
fn rounds_after_12_04() {
    assert_eq!(triggers("12.04"), ["12.10", "13.04", "13.10", "14.04"]);
}

#[test]
fn rounds_need_an_lts_target() {
    let cal = default_calendar();
    assert_eq!(plan_rounds(&cal, "13.10"), Err(ScheduleError::NotAnLts("13.10".into())));
    assert_eq!(
        plan_rounds(&cal, "18.04"),
        Err(ScheduleError::UnknownTarget("18.04".into()))
    );
    // nothing after the last LTS on the bundled calendar
    assert!(plan_rounds(&cal, "16.04").unwrap().is_empty());
}

#[test]
fn default_calendar_lts_spacing() {
    let lts: Vec<ReleaseMilestone> = default_calendar().into_iter().filter(|m| m.is_lts).collect();
    let names: Vec<&str> = lts.iter().map(|m| m.version.as_str()).collect();
    assert_eq!(names, ["6.06", "8.04", "10.04", "12.04", "14.04", "16.04"]);
    for pair in lts.windows(2) {
        let months = pair[1].number().months() - pair[0].number().months();
        // 6.06 shipped two months late, so the first gap is short
        let want = if pair[0].version == "6.06" { 22 } else { 24 };
        assert_eq!(months, want, "{} -> {}", pair[0].version, pair[1].version);
    }
    for m in default_calendar() {
        assert_eq!(m.is_lts, is_lts(&m.version).unwrap());
        assert_eq!(m.import_freeze, None);
    }
}

#[test]
fn next_trigger_uses_import_freeze() {
    let cal = parse_calendar(
        "Version: 13.04\nRelease-Date: 2013-04-25\nImport-Freeze: 2013-01-24\n\n\
         Version: 13.10\nRelease-Date: 2013-10-17\nImport-Freeze: 2013-08-22\n\n\
         Version: 14.04\nRelease-Date: 2014-04-17\n",
    )
    .unwrap();
    let day = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
    assert_eq!(next_trigger(&cal, day("2013-01-01")).unwrap().version, "13.04");
    assert_eq!(next_trigger(&cal, day("2013-01-24")).unwrap().version, "13.04");
    assert_eq!(next_trigger(&cal, day("2013-06-03")).unwrap().version, "13.10");
    assert_eq!(next_trigger(&cal, day("2013-08-23")), None);
}

/// Consecutive releases in April and October from `first_year`, each with
/// an optional freeze between 30 and 120 days before release.
fn calendar() -> impl Strategy<Value = Vec<ReleaseMilestone>> {
    (6u32..20, prop::collection::vec(prop::option::of(30i64..120), 1..16)).prop_map(|(first_year, freezes)| {
        freezes
            .into_iter()
            .enumerate()
            .map(|(i, freeze)| {
                let year = first_year + i as u32 / 2;
                let month = if i % 2 == 0 { 4 } else { 10 };
                let release = NaiveDate::from_ymd_opt(2000 + year as i32, month, 20).unwrap();
                let m = ReleaseMilestone::new(&format!("{year}.{month:02}"), None, release).unwrap();
                match freeze {
                    Some(days) => m.with_import_freeze(release - Duration::days(days)),
                    None => m,
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rounds_run_to_the_next_lts(cal in calendar()) {
        for (start, target) in cal.iter().enumerate().filter(|(_, m)| m.is_lts) {
            let rounds = plan_rounds(&cal, &target.version).unwrap();
            let mut expected = Vec::new();
            for m in &cal[start + 1..] {
                expected.push(m.version.clone());
                if m.is_lts {
                    break;
                }
            }
            let got: Vec<String> = rounds.iter().map(|r| r.trigger.version.clone()).collect();
            prop_assert_eq!(&got, &expected);
            for (i, r) in rounds.iter().enumerate() {
                prop_assert_eq!(r.ordinal, i + 1);
                prop_assert_eq!(&r.target_lts, &target.version);
            }
            for pair in rounds.windows(2) {
                prop_assert!(pair[0].trigger.trigger_date() < pair[1].trigger.trigger_date());
            }
            let closes_era = cal[start + 1..].iter().any(|m| m.is_lts);
            if closes_era {
                prop_assert!(rounds.last().unwrap().trigger.is_lts);
            }
        }
    }

    #[test]
    fn next_trigger_is_earliest_upcoming_freeze(cal in calendar(), offset in 0i64..4000) {
        let today = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap() + Duration::days(offset);
        let want = cal
            .iter()
            .filter_map(|m| m.import_freeze.map(|f| (f, m.version.clone())))
            .filter(|(f, _)| *f >= today)
            .min();
        let got = next_trigger(&cal, today).map(|m| (m.import_freeze.unwrap(), m.version.clone()));
        prop_assert_eq!(got, want);
    }

    #[test]
    fn lts_means_april_of_even_years(year in 6u32..99, month in prop::sample::select(vec![4u32, 10])) {
        let v = format!("{year}.{month:02}");
        let release = NaiveDate::from_ymd_opt(2000 + year as i32, month, 1).unwrap();
        let m = ReleaseMilestone::new(&v, None, release).unwrap();
        prop_assert_eq!(m.is_lts, year % 2 == 0 && release.month() == 4);
    }
}
