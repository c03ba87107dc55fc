// Builds the jog/lunch distance graph by hand, reads off each time
// point's window, and shows an inconsistent edge being refused.
//
// cargo run -p dayplan --example stn_bounds

use dayplan::stn::{add_edge_checked, compute_bounds, DistanceGraph, Edge, EdgeOrigin};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut g = DistanceGraph::new();
    let jog = g.add_event("jog");
    let lunch = g.add_event("lunch");
    let d = g.datum();
    let (js, je) = (g.event(jog).start, g.event(jog).end);
    let (ls, le) = (g.event(lunch).start, g.event(lunch).end);
    let ext = |id| EdgeOrigin::External { id };

    // Everything inside the day.
    for (i, n) in [js, je, ls, le].into_iter().enumerate() {
        g.add_edge(Edge::new(n, d, 0, ext(2 * i)))?;
        g.add_edge(Edge::new(d, n, 1440, ext(2 * i + 1)))?;
    }
    // jog lasts an hour and starts before 16:00.
    g.add_edge(Edge::new(js, je, 60, ext(10)))?;
    g.add_edge(Edge::new(je, js, -60, ext(11)))?;
    g.add_edge(Edge::new(d, js, 960, ext(12)))?;
    // lunch takes 30 to 60 minutes and comes after jog.
    g.add_edge(Edge::new(ls, le, 60, ext(13)))?;
    g.add_edge(Edge::new(le, ls, -30, ext(14)))?;
    g.add_edge(Edge::new(ls, je, 0, ext(15)))?;

    let mut bounds = compute_bounds(&g)?;
    for (ix, id) in g.nodes().iter().enumerate() {
        let ix = dayplan::stn::NodeIx(ix);
        println!("{id:>8}  [{:?}, {:?}]", bounds.lower(ix), bounds.upper(ix));
    }

    // lunch ending before jog starts would close a negative cycle.
    let bad = Edge::new(js, le, -1, ext(16));
    match add_edge_checked(&mut g, &mut bounds, bad) {
        Ok(_) => println!("accepted"),
        Err(e) => println!("refused: {e}"),
    }
    assert_eq!(bounds, compute_bounds(&g)?);

    println!("\n{}", g.to_dot());
    Ok(())
}
