//! Parse a Newick tree and print the quantities the model is built from.

use zazou::tree::parse_newick;

fn main() -> zazou::Result<()> {
    let tree = parse_newick("(((T1:1,T2:1):1,T3:2):1,(T4:2,T5:2):1);")?;
    println!("{} leaves, {} nodes, height {}", tree.n_leaves(), tree.n_nodes(), tree.height());

    for v in 0..tree.n_nodes() {
        let parent = tree.parent(v).map_or("-".to_string(), |p| tree.node_name(p));
        println!("{:>4}  t = {:<4} parent {parent}", tree.node_name(v), tree.time(v));
    }

    println!("\nincidence (rows = leaves):");
    let u = tree.incidence();
    for (i, label) in tree.leaf_labels().enumerate() {
        let row: Vec<String> = u.row(i).iter().map(|v| format!("{v:.0}")).collect();
        println!("{label:>4}  {}", row.join(" "));
    }

    let geom = tree.geometry();
    println!("\ncophenetic distances:{}", geom.cophenetic());
    println!("shrinkage at alpha = 0.5: {:.4}", tree.shrinkage(0.5).transpose());
    println!("round trip: {}", tree.to_newick());
    Ok(())
}
