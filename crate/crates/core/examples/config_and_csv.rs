//! Configuration text in, self-describing CSV out.

use cqed_fcs::config::parse_config;
use cqed_fcs::output::{metadata, protocol_table, Table};
use cqed_fcs::protocols::run_protocol;

const CONFIG: &str = "
preset         = paper-transmon
kappa          = 2pi*3.3333333 MHz   # about kappa = chi / 2
target_nss     = 10
protocol       = continuous
t_count_end    = 2 t_pi
";

fn main() -> cqed_fcs::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let run = run_protocol(&cfg.protocol, &cfg.params)?;
    let table = protocol_table(&run).with_meta(metadata(&cfg));
    let text = table.to_csv_string();
    for line in text.lines().take(34) {
        println!("{line}");
    }
    let back = Table::read_from(text.as_bytes())?;
    assert_eq!(back, table);
    println!("... {} rows, re-read bit-identically", back.rows.len());
    Ok(())
}
