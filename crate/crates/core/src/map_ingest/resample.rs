use std::collections::HashMap;

use super::RoadGraph;
use crate::error::IngestError;
use crate::map_model::{angular_difference, DirectedLocation, GeoPoint, LocationId, PointId};

/// Road directions through one sample point closer than this are one axis.
pub const AXIS_MERGE_DEGREES: f64 = 20.0;

/// Road sample points and the directed locations defined on them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampledLocations {
    pub points: Vec<GeoPoint>,
    pub locations: Vec<DirectedLocation>,
}

impl SampledLocations {
    /// Regroups directed locations into points by exact position, in order of
    /// first appearance.
    pub fn from_locations(raw: &[(GeoPoint, f64)]) -> Self {
        let mut index: HashMap<(u64, u64), PointId> = HashMap::new();
        let mut points = Vec::new();
        let mut locations = Vec::with_capacity(raw.len());
        for (i, (p, heading)) in raw.iter().enumerate() {
            let key = (p.x.to_bits(), p.y.to_bits());
            let point = *index.entry(key).or_insert_with(|| {
                points.push(*p);
                PointId(points.len() as u32 - 1)
            });
            locations.push(DirectedLocation::new(
                LocationId(i as u32),
                point,
                *p,
                *heading,
            ));
        }
        Self { points, locations }
    }

    /// Directed locations grouped by point.
    pub fn by_point(&self) -> Vec<Vec<LocationId>> {
        let mut out = vec![Vec::new(); self.points.len()];
        for l in &self.locations {
            out[l.point.index()].push(l.id);
        }
        out
    }
}

fn position_and_tangent(polyline: &[GeoPoint], cumulative: &[f64], arc: f64) -> (GeoPoint, f64) {
    let last = polyline.len() - 2;
    let mut seg = cumulative
        .partition_point(|&c| c <= arc)
        .saturating_sub(1)
        .min(last);
    // skip zero-length pieces
    while seg < last && cumulative[seg + 1] - cumulative[seg] <= 0.0 {
        seg += 1;
    }
    let (a, b) = (polyline[seg], polyline[seg + 1]);
    let len = cumulative[seg + 1] - cumulative[seg];
    let t = if len > 0.0 {
        ((arc - cumulative[seg]) / len).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a.lerp(&b, t), a.bearing_to(&b))
}

fn add_axis(axes: &mut Vec<f64>, heading: f64) {
    let dup = axes.iter().any(|&a| {
        angular_difference(a, heading) <= AXIS_MERGE_DEGREES
            || angular_difference(a + 180.0, heading) <= AXIS_MERGE_DEGREES
    });
    if !dup {
        axes.push(heading);
    }
}

/// Places sample points every `spacing` meters of arc length along each road
/// edge, always including both edge endpoints, and creates two directed
/// locations (one per travel sense) for every road axis through each point.
///
/// Edge endpoints are graph nodes and are shared between edges, so a junction
/// yields one point carrying an axis per distinct incident road direction.
pub fn resample_locations(
    graph: &RoadGraph,
    spacing: f64,
) -> Result<SampledLocations, IngestError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(IngestError::InvalidParams(format!(
            "spacing {spacing} must be positive"
        )));
    }
    let mut points: Vec<GeoPoint> = Vec::new();
    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut node_point: HashMap<usize, usize> = HashMap::new();
    let mut node_pt =
        |points: &mut Vec<GeoPoint>, axes: &mut Vec<Vec<f64>>, node: usize| -> usize {
            *node_point.entry(node).or_insert_with(|| {
                points.push(graph.nodes()[node].position);
                axes.push(Vec::new());
                points.len() - 1
            })
        };

    for edge in graph.edges() {
        let poly = &edge.polyline;
        let n = poly.len();
        let mut cumulative = Vec::with_capacity(poly.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in poly.windows(2) {
            acc += w[0].distance(&w[1]);
            cumulative.push(acc);
        }
        let total = acc;

        let start = node_pt(&mut points, &mut axes, edge.from);
        let (_, t0) = position_and_tangent(poly, &cumulative, 0.0);
        add_axis(&mut axes[start], t0);

        let mut k = 1usize;
        while (k as f64) * spacing < total - 1e-9 {
            let arc = k as f64 * spacing;
            let (p, t) = position_and_tangent(poly, &cumulative, arc);
            let mut point_axes = vec![t];
            // a sample on a bend also runs along the segment that ends there
            if let Some(j) = (1..n - 1).find(|&j| (cumulative[j] - arc).abs() < 1e-9) {
                add_axis(&mut point_axes, poly[j - 1].bearing_to(&poly[j]));
            }
            points.push(p);
            axes.push(point_axes);
            k += 1;
        }

        let end = node_pt(&mut points, &mut axes, edge.to);
        let mut seg = n - 2;
        while seg > 0 && poly[seg] == poly[seg + 1] {
            seg -= 1;
        }
        add_axis(&mut axes[end], poly[seg].bearing_to(&poly[seg + 1]));
    }

    let mut locations = Vec::with_capacity(points.len() * 2);
    for (i, (p, point_axes)) in points.iter().zip(&axes).enumerate() {
        for &a in point_axes {
            for h in [a, a + 180.0] {
                let id = LocationId(locations.len() as u32);
                locations.push(DirectedLocation::new(id, PointId(i as u32), *p, h));
            }
        }
    }
    Ok(SampledLocations { points, locations })
}
