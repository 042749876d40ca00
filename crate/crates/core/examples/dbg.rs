use spike_pca::*;
fn main() {
    let mut config = harness::ExperimentConfig::new(
        SpectrumSpec::multi_spike(1.0, vec![8.0, 4.0, 2.0]),
        ScalingLaw::growing(0.5),
        vec![4, 24],
        1,
    );
    config.replicates = 2;
    let outcome = harness::sweep(&config).unwrap();
    for f in &outcome.failures {
        println!("FAIL d={} rep={} msg={}", f.d, f.replicate, f.message);
    }
    println!("records: {}", outcome.records.len());
}
