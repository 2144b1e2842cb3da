//! Simulating, saving and reloading a probe data-pattern bank.

use pattern_tomo::bank::{load_bank, save_bank, simulate_probe_bank};
use pattern_tomo::experiment::LatticeSpec;
use pattern_tomo::quantum::coherent_overlap_prob;

fn main() -> pattern_tomo::Result<()> {
    let lattice = LatticeSpec {
        side_count: 5,
        spacing: 0.3,
        ..LatticeSpec::default()
    }
    .build()?;
    let bank = simulate_probe_bank(&lattice.amplitudes, &lattice.amplitudes, 1000, 7)?;

    let dir = std::env::temp_dir().join("pattern-tomo-bank-example");
    std::fs::create_dir_all(&dir).map_err(|e| pattern_tomo::Error::io(&dir, e))?;
    let path = dir.join("bank.json");
    save_bank(&bank, &path)?;
    bank.write_csv(&dir.join("bank.csv"))?;
    assert_eq!(load_bank(&path)?, bank);
    println!("{} settings x {} probes written to {}", bank.settings(), bank.probes(), dir.display());

    let k = 12;
    let beta = bank.setting_amplitudes[k];
    println!("setting {k} at {beta}: measured vs exact");
    for m in [0, 6, 12, 18, 24] {
        let exact = coherent_overlap_prob(bank.probe_amplitudes[m], beta);
        println!("  probe {m:>2}: {:.3} {:.3}", bank.frequency(k, m), exact);
    }
    Ok(())
}
