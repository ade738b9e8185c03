use frv::config::{parse_grid, CNum, RunConfig, SUITES};
use frv::Error;
use qloop::C64;

#[test]
fn defaults() {
    let cfg = RunConfig::default();
    assert_eq!(cfg.qs().unwrap().hbar(), C64::new(-0.35, 0.21));
    assert_eq!(cfg.phi(), C64::new(1.3, 0.4));
    assert_eq!((cfg.s0, cfg.s1, cfg.n_max, cfg.l), (1, 1, 40, 2));
    assert!(!cfg.suites.iter().any(|s| s == "scan"));
    assert_eq!(cfg.suites.len(), SUITES.len() - 1);
    cfg.validate().unwrap();
}

#[test]
fn grids() {
    assert_eq!(parse_grid("0:2:5").unwrap(), vec![CNum::Re(0.0), CNum::Re(0.5), CNum::Re(1.0), CNum::Re(1.5), CNum::Re(2.0)]);
    assert_eq!(parse_grid("0.3:9:1").unwrap(), vec![CNum::Re(0.3)]);
    let g = parse_grid("0:2:41").unwrap();
    assert_eq!(g.len(), 41);
    assert_eq!(g[40], CNum::Re(2.0));
    for bad in ["", "0:1", "0:1:0", "a:1:3", "0:1:2:3", "0:1:-2"] {
        assert!(matches!(parse_grid(bad), Err(Error::Config(_))), "{bad}");
    }
}

#[test]
fn json_round_trip() {
    let text = r#"{"hbar_re": -0.2, "hbar_im": 0.5, "L": 3, "grid": [0.1, [0.2, -0.05]],
                   "inhomogeneities": [0.0, [0.13, 0.05], [-0.21, 0.1]], "suites": ["relations"], "seed": 7}"#;
    let cfg = RunConfig::from_json(text).unwrap();
    assert_eq!(cfg.l, 3);
    assert_eq!(cfg.grid[1].value(), C64::new(0.2, -0.05));
    assert_eq!(cfg.n_max, 40);
    cfg.validate().unwrap();
    assert_eq!(cfg.chain(3).unwrap().site_params[1].u, C64::new(0.13, 0.05));
    let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn invalid_configurations() {
    assert!(RunConfig::from_json(r#"{"colour": 1}"#).is_err());
    assert!(RunConfig::from_json(r#"{"L": "two"}"#).is_err());
    let bad = [
        RunConfig { hbar_re: 0.0, hbar_im: 0.0, ..Default::default() },
        RunConfig { hbar_re: 0.0, hbar_im: std::f64::consts::PI, ..Default::default() },
        RunConfig { s0: 0, ..Default::default() },
        RunConfig { n_max: 1, ..Default::default() },
        RunConfig { tol: 0.0, ..Default::default() },
        RunConfig { l: 0, ..Default::default() },
        RunConfig { l: 7, ..Default::default() },
        RunConfig { grid: vec![], ..Default::default() },
        RunConfig { suites: vec!["everything".into()], ..Default::default() },
        RunConfig { inhomogeneities: Some(vec![CNum::Re(0.0)]), ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
    }
    // chain parameters only matter for suites that build chains
    let ok = RunConfig { inhomogeneities: Some(vec![CNum::Re(0.0)]), suites: vec!["traces".into()], ..Default::default() };
    ok.validate().unwrap();
}
