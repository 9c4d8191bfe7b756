//! Plot data as CSV. Indices are 1-based.

use std::io::{self, Write};

use pava::engine::ClusterModel;
use pava::PointSet;

pub fn mst(w: &mut impl Write, model: &ClusterModel) -> io::Result<()> {
    writeln!(w, "u,v,weight,raw_weight")?;
    let raw = model.raw_tree.edges();
    for (i, e) in model.working_tree().edges().iter().enumerate() {
        writeln!(
            w,
            "{},{},{:?},{:?}",
            e.u + 1,
            e.v + 1,
            e.weight,
            raw[i].weight
        )?;
    }
    Ok(())
}

pub fn kdist(
    w: &mut impl Write,
    model: &ClusterModel,
    points: Option<&PointSet>,
) -> io::Result<()> {
    let dim = points.map_or(0, PointSet::dim);
    let coords: String = (1..=dim).map(|c| format!(",x{c}")).collect();
    writeln!(w, "index,kdist,label{coords}")?;
    for (i, kd) in model.density.kdist.iter().enumerate() {
        write!(w, "{},{:?},{}", i + 1, kd, model.labels[i])?;
        if let Some(p) = points {
            for v in p.row(i) {
                write!(w, ",{v:?}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn histograms(w: &mut impl Write, model: &ClusterModel) -> io::Result<()> {
    writeln!(w, "round,bin,center,raw,shifted,smoothed,radius")?;
    for (r, round) in model.rounds.iter().enumerate() {
        let Some(est) = &round.estimate else { continue };
        let h = &est.histogram;
        for b in 0..h.bins() {
            writeln!(
                w,
                "{},{},{:?},{},{},{:?},{:?}",
                r + 1,
                b + 1,
                h.bin_centers[b],
                h.raw_freq[b],
                h.shifted_freq[b],
                h.smoothed_freq[b],
                round.radius
            )?;
        }
    }
    Ok(())
}
