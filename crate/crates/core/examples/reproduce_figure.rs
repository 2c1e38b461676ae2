//! Figure recipes: the dispersive figures as CSV panels in a directory.
//! Usage: reproduce_figure [fig3|fig4] [out_dir]

use std::path::PathBuf;

use cqed_fcs::reproduce::{figure, write_panels, Figure, RecipeOptions};

fn main() -> cqed_fcs::Result<()> {
    let mut args = std::env::args().skip(1);
    let fig = args.next().and_then(|s| Figure::parse(&s)).unwrap_or(Figure::Fig4);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cqed-fcs-figures"));
    let panels = figure(fig, &RecipeOptions::default())?;
    write_panels(&dir, &panels)?;
    for p in &panels {
        println!("{}: {} rows x {} columns -> {}", p.name, p.table.rows.len(), p.table.columns.len(), dir.join(format!("{}.csv", p.name)).display());
    }
    Ok(())
}
