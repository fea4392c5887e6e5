//! Per-class average precision and mAP, including the tie rule and
//! skipped classes.
//!
//! cargo run --example evaluate_map

use ndarray::array;
use palm::metrics::{average_precision, evaluate, ranking};

fn main() -> palm::Result<()> {
    let scores = array![0.9, 0.8, 0.1];
    let relevant = array![true, false, true];
    println!("AP = {:.4} (ranking {:?})", average_precision(scores.view(), relevant.view())?, ranking(scores.view()));

    // Tied scores rank by ascending index.
    let tied = array![0.5, 0.5, 0.5];
    println!("tied AP = {:.4}", average_precision(tied.view(), array![false, false, true].view())?);

    let predictions = array![[0.9, 0.2, 0.4], [0.3, 0.8, 0.5], [0.6, 0.1, 0.7]];
    let truth = array![[true, false, false], [false, true, false], [true, false, false]];
    let r = evaluate(&predictions, &truth)?;
    println!("per class {:?}", r.per_class_ap);
    println!("mAP {:.4}, skipped {:?}", r.map, r.skipped_classes);
    println!("{}", serde_json::to_string(&r).unwrap());
    Ok(())
}
