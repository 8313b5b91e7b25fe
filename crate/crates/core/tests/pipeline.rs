use imitate_core::config::RunConfig;
use imitate_core::mdp::{replay, run_pipeline};
use imitate_core::sim::generate_demo;

const CONFIG: &str = "
# stack demo with a shorter retreat
seed = 4
demo.retreat = 1.5
pipeline.n_eval = 5
";

#[test]
fn learned_options_stack_the_blocks_from_a_config_file() {
    let cfg = RunConfig::parse(CONFIG).unwrap();
    assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let env = cfg.env();
    let demo = generate_demo(&cfg.world, &cfg.demo).unwrap().demo;
    let report = run_pipeline(&demo, &env, &cfg.pipeline).unwrap();
    assert_eq!(report.options.len(), report.segmentation.segments.len());
    assert!(report.options.iter().all(|o| o.success_prob >= cfg.pipeline.alpha));
    assert!(report.options[1].spec.include_gripper_action);

    let start = env.start_from_demo(&demo).unwrap();
    assert_eq!(replay(&env, &start, &report.options).unwrap(), vec![true; report.options.len()]);

    let chain: Vec<_> = report.options.iter().map(|o| (&o.spec, &o.policy)).collect();
    let end = env.run_chain(&start, &chain).unwrap();
    let (blue, green) = (end.blocks["b_blue"].location, end.blocks["b_green"].location);
    assert!(end.attached.is_none());
    assert!((blue[0] - green[0]).hypot(blue[1] - green[1]) < 0.02, "blue {blue:?} green {green:?}");
    assert!((blue[2] - green[2] - 0.05).abs() < 1e-9);
}
