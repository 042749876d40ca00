// Dry run of the phase-diagram acceptance grid at the suite's master seed.
use spike_pca::harness::phase_diagram;

fn main() {
    let alphas: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
    let gammas: Vec<f64> = (0..7).map(|i| i as f64 * 0.25).collect();
    let t0 = std::time::Instant::now();
    let diagram = phase_diagram(&alphas, &gammas, 300, 5, 1).unwrap();
    println!("elapsed {:?}", t0.elapsed());
    let mut grey_viol = 0;
    let mut white_viol = 0;
    for (row, &gamma) in diagram.gammas.iter().enumerate() {
        for (col, &alpha) in diagram.alphas.iter().enumerate() {
            let v = diagram.mean_inner_sq[row][col];
            let sum = alpha + gamma;
            if sum >= 1.4 && v < 0.8 {
                grey_viol += 1;
                println!("GREY violation a={alpha} g={gamma}: {v:.4}");
            }
            if sum <= 0.6 && v > 0.1 {
                white_viol += 1;
                println!("WHITE violation a={alpha} g={gamma}: {v:.4}");
            }
        }
    }
    println!("grey violations: {grey_viol}, white violations: {white_viol}");
    for (row, &gamma) in diagram.gammas.iter().enumerate() {
        let cells: Vec<String> = diagram.mean_inner_sq[row].iter().map(|v| format!("{v:.2}")).collect();
        println!("g={gamma:4}: {}", cells.join(" "));
    }
}
