//! Recomputes the load downscale constants stored in `data/layouts/*.txt`.

use std::path::Path;

use windfarm::env::{calibrate_load_scale, SimulatorKind};
use windfarm::wake::{layout_names, registered_layout};

fn main() -> windfarm::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/layouts");
    for name in layout_names() {
        let mut layout = registered_layout(name)?;
        layout.load_scale_static = Some(calibrate_load_scale(&layout, SimulatorKind::Static, 0.06)?);
        layout.load_scale_dynamic = Some(calibrate_load_scale(&layout, SimulatorKind::Dynamic, 0.06)?);
        std::fs::write(dir.join(format!("{name}.txt")), layout.to_text())?;
        println!("{name}: static {:.6e}, dynamic {:.6e}", layout.load_scale_static.unwrap(), layout.load_scale_dynamic.unwrap());
    }
    Ok(())
}
