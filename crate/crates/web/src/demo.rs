use divmix::corpus::GrayImage;
use divmix::diversity::{mds_embed, pairwise_distances, pca_spectrum};
use divmix::gist::{gabor_bank, DescriptorSet, GistExtractor, GistParams};
use divmix::synth::{render_view, sample_viewpoints, ObjectSpec, ViewDistribution, Viewpoint};
use divmix::{Error, Result};
use serde::Serialize;

/// Descriptor resolution used in the browser; small enough to stay interactive.
pub const DEMO_SIDE: usize = 64;

fn object(name: &str) -> Result<ObjectSpec> {
    ObjectSpec::preset(name).ok_or_else(|| Error::Validation(format!("unknown object `{name}`")))
}

fn to_rgba(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.pixels.len() * 4);
    for &v in &img.pixels {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        out.extend_from_slice(&[g, g, g, 255]);
    }
    out
}

pub fn render_rgba(name: &str, azimuth: f64, elevation: f64, scale: f64, side: usize) -> Result<Vec<u8>> {
    if side < 16 {
        return Err(Error::Validation(format!("side {side} is below 16")));
    }
    let view = Viewpoint {
        azimuth,
        elevation: elevation.clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
        scale: scale.clamp(1e-3, 1.0),
    };
    Ok(to_rgba(&render_view(&object(name)?, &view, side)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct SetStats {
    pub mean_distance: f64,
    pub eigen_sum: f64,
    pub mean_size: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub child: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Simulation {
    pub child: SetStats,
    pub parent: SetStats,
    pub points: Vec<Point>,
}

fn describe(obj: &ObjectSpec, views: &[Viewpoint], ex: &GistExtractor, tag: &str) -> Result<DescriptorSet> {
    let mut rows = Vec::with_capacity(views.len());
    for v in views {
        rows.push(ex.describe(&render_view(obj, v, DEMO_SIDE)?)?.values);
    }
    let ids = (0..views.len()).map(|i| format!("{tag}{i}")).collect();
    DescriptorSet::from_rows(ids, &rows, ex.params().params_hash())
}

fn stats(set: &DescriptorSet, views: &[Viewpoint]) -> Result<SetStats> {
    Ok(SetStats {
        mean_distance: pairwise_distances(set)?.mean(),
        eigen_sum: pca_spectrum(set, 10)?.eigenvalues.iter().sum(),
        mean_size: views.iter().map(|v| v.scale).sum::<f64>() / views.len() as f64,
    })
}

pub fn simulate(name: &str, views: usize, seed: u64) -> Result<Simulation> {
    if !(3..=200).contains(&views) {
        return Err(Error::Validation(format!("views {views} outside 3..=200")));
    }
    let obj = object(name)?;
    let ex = GistExtractor::new(&GistParams {
        image_side: DEMO_SIDE,
        ..GistParams::default()
    })?;
    let cv = sample_viewpoints(&ViewDistribution::child_like(), views, seed);
    let pv = sample_viewpoints(&ViewDistribution::parent_like(), views, seed.wrapping_add(1));
    let cs = describe(&obj, &cv, &ex, "c")?;
    let ps = describe(&obj, &pv, &ex, "p")?;
    let all = DescriptorSet::new(
        cs.ids.iter().chain(&ps.ids).cloned().collect(),
        cs.dim,
        cs.data.iter().chain(&ps.data).copied().collect(),
        cs.params_hash,
    )?;
    let emb = mds_embed(&pairwise_distances(&all)?)?;
    let points = emb
        .coords
        .iter()
        .zip(cv.iter().chain(&pv))
        .enumerate()
        .map(|(i, (&[x, y], v))| Point {
            x,
            y,
            size: v.scale,
            child: i < views,
        })
        .collect();
    Ok(Simulation {
        child: stats(&cs, &cv)?,
        parent: stats(&ps, &pv)?,
        points,
    })
}

/// The filter's transfer function with zero frequency moved to the center.
pub fn filter_rgba(scale: usize, orientation: usize, side: usize) -> Result<Vec<u8>> {
    let params = GistParams {
        image_side: side,
        ..GistParams::default()
    };
    params.validate()?;
    let n_orient = params.orientations_per_scale.first().copied().unwrap_or(0);
    if scale >= params.orientations_per_scale.len() || orientation >= n_orient {
        return Err(Error::Validation(format!(
            "no filter at scale {scale}, orientation {orientation}"
        )));
    }
    let bank = gabor_bank(&params);
    let f = bank
        .iter()
        .find(|f| f.scale == scale && f.orientation == orientation)
        .expect("bank covers every (scale, orientation)");
    let half = side / 2;
    let mut pixels = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let (sr, sc) = ((r + half) % side, (c + half) % side);
            pixels[r * side + c] = f.transfer[sr * side + sc];
        }
    }
    Ok(to_rgba(&GrayImage::new(side, side, pixels)?))
}
