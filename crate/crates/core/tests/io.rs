mod common;

use common::{constants, koiso_cao};
use krs_core::io::*;
use krs_core::solver::identity_suite;
use krs_core::stability::{default_family, sign_explorer};
use krs_core::GridScheme;

#[test]
fn profile_round_trip_is_exact() {
    let sol = koiso_cao();
    let bytes = profile_csv(&sol.grid).unwrap();
    let first = std::str::from_utf8(&bytes).unwrap().lines().next().unwrap().to_string();
    assert_eq!(first, "t,f,df,ddf,l1,dl1,ddl1,u,du,ddu");
    let back = read_profile_csv(&bytes, GridScheme::Chebyshev).unwrap();
    assert_eq!(back.t, sol.grid.t);
    assert_eq!(back.f, sol.grid.f);
    assert_eq!(back.l, sol.grid.l);
    assert_eq!(back.u, sol.grid.u);
    assert_eq!(profile_csv(&back).unwrap(), bytes);
}

#[test]
fn solution_directory_round_trip() {
    let sol = koiso_cao();
    let dir = tempfile::tempdir().unwrap();
    save_solution(dir.path(), "solution", sol).unwrap();
    let back = load_solution(dir.path(), "solution").unwrap();
    assert_eq!(back.c_slope, sol.c_slope);
    assert_eq!(back.constants, *constants());
    assert_eq!(identity_suite(&back).unwrap(), identity_suite(sol).unwrap());
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains(".tmp-"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn corrupted_profiles_are_rejected() {
    let text = String::from_utf8(profile_csv(&koiso_cao().grid).unwrap()).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[10] = "0.1,abc,1,1,1,1,1,1,1,1";
    assert!(read_profile_csv(lines.join("\n").as_bytes(), GridScheme::Chebyshev).is_err());
    let bad_header = text.replacen("ddu", "ddv", 1);
    assert!(read_profile_csv(bad_header.as_bytes(), GridScheme::Chebyshev).is_err());
    // dropping a row breaks the node layout
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(500);
    assert!(read_profile_csv(lines.join("\n").as_bytes(), GridScheme::Chebyshev).is_err());
    assert!(read_profile_csv(text.as_bytes(), GridScheme::Uniform).is_err());
}

#[test]
fn stability_table_layout() {
    assert_eq!(stability_csv(&[]).unwrap(), b"profile-id,value,sign,C_hg,v_h_norm\n");
    let sol = koiso_cao();
    let rows = sign_explorer(sol, &default_family(sol).unwrap(), 2.0).unwrap();
    let text = String::from_utf8(stability_csv(&rows).unwrap()).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("constant,"));
    assert!(text.lines().nth(1).unwrap().contains(",zero,"));
}

#[test]
fn constants_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("constants.json");
    write_json(&path, constants()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"A\": \"1/4\"") && text.contains("\"B\": \"1/2\""), "{text}");
    assert_eq!(read_constants(&path).unwrap(), *constants());
}
