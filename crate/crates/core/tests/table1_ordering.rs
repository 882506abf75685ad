use toxscore_core::evaluation::{compare_cells, read_grid_csv, write_grid_csv};
use toxscore_core::models::ModelKind;

const TABLE1: &str = include_str!("fixtures/table1_reference.csv");

#[test]
fn ridge_has_best_mean() {
    let cells = read_grid_csv(TABLE1).unwrap();
    assert_eq!(cells.len(), 128);
    let summary = compare_cells(&cells);
    let by_mean = summary.models_by_mean();
    assert_eq!(by_mean[0].0, ModelKind::Ridge, "{by_mean:?}");
    let best = &summary.ranked[0];
    assert_eq!(best.accuracy, Some(0.6722));
}

#[test]
fn reference_csv_round_trips() {
    let cells = read_grid_csv(TABLE1).unwrap();
    let again = read_grid_csv(&write_grid_csv(&cells)).unwrap();
    assert_eq!(again, cells);
}
