use std::fs;

use aspect_rerank::data::{leave_one_out, load_dataset, DataError, DatasetConfig};
use aspect_rerank::metrics::{AttributeExtractor, Group};
use aspect_rerank::types::{ItemId, UserId};

fn movielens_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("movies.dat"),
        "1::Toy Story (1995)::Animation|Children's|Comedy\n2::Jumanji (1995)::Adventure|Children's|Fantasy\n\
         3::Heat (1995)::Action|Crime|Thriller\n4::Titanic (1997)::Drama|Romance\n5::Fargo (1996)::Crime|Drama|Thriller\n\
         6::Casino (1995)::Drama|Thriller\n",
    )
    .unwrap();
    fs::write(dir.path().join("users.dat"), "1::F::1::10::48067\n2::M::56::16::70072\n").unwrap();
    let mut ratings = String::new();
    for (i, item) in [1, 2, 3, 4, 5, 6].iter().enumerate() {
        ratings.push_str(&format!("1::{item}::5::{}\n", 1000 + i));
    }
    for (i, item) in [1, 2, 3, 4].iter().enumerate() {
        ratings.push_str(&format!("2::{item}::3::{}\n", 2000 + i));
    }
    fs::write(dir.path().join("ratings.dat"), ratings).unwrap();
    dir
}

#[test]
fn movielens_layout_loads_with_whitelisted_fields() {
    let dir = movielens_dir();
    let data = load_dataset(&DatasetConfig::movielens_1m(dir.path())).unwrap();
    let toy = data.items.get(&ItemId::new("1").unwrap()).unwrap();
    assert_eq!(toy.features.get("genre"), Some("Animation|Children's|Comedy"));
    assert_eq!(toy.features.get("year"), Some("1995"));
    assert_eq!(toy.features.get("item_id"), None);
    // user 2 has four interactions and falls below the floor
    assert_eq!(data.users.len(), 1);
    let user = &data.users[&UserId::new("1").unwrap()];
    assert_eq!(user.features.get("gender"), Some("F"));
    assert!(data.log.records.iter().all(|r| r.user.as_str() == "1"));

    let split = leave_one_out(&data.log).unwrap();
    assert_eq!(split.test[&user.id].item.as_str(), "6");
    assert_eq!(split.validation[&user.id].item.as_str(), "5");

    let extractor = AttributeExtractor::movielens();
    let titanic = data.items.get(&ItemId::new("4").unwrap()).unwrap();
    assert_eq!(extractor.fairness.group(titanic).unwrap(), Group::Group1);
    assert_eq!(extractor.fairness.group(toy).unwrap(), Group::Group0);
}

#[test]
fn missing_column_names_the_column() {
    let dir = movielens_dir();
    let mut config = DatasetConfig::movielens_1m(dir.path());
    config.items.fields.push("director".into());
    let err = load_dataset(&config).unwrap_err();
    assert!(matches!(&err, DataError::MissingColumn { column, .. } if column == "director"), "{err}");
}

#[test]
fn bad_rows_report_their_line() {
    let dir = movielens_dir();
    fs::write(dir.path().join("ratings.dat"), "1::1::5::100\n1::2::5::soon\n").unwrap();
    let err = load_dataset(&DatasetConfig::movielens_1m(dir.path())).unwrap_err();
    assert!(matches!(err, DataError::Row { line: 2, .. }), "{err}");
}

#[test]
fn header_files_with_quoting() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("video_features_basic_1k.csv"),
        "video_id,author_id,video_type,upload_dt,upload_type,visible_status,video_duration,server_width,server_height,music_id,music_type,tag\n\
         1,9,NORMAL,2022-01-01,ShortImport,public,45000.0,720,1280,3,0,\"1,2\"\n\
         2,9,AD,2022-01-01,LongImport,public,90000.0,720,1280,3,0,\n",
    )
    .unwrap();
    let mut log = String::from("user_id,video_id,date,hourmin,time_ms,is_click\n");
    for t in 0..6 {
        log.push_str(&format!("7,{},20220408,1000,{},{}\n", 1 + t % 2, 1000 + t, u8::from(t != 3)));
    }
    fs::write(dir.path().join("log_standard_4_08_to_4_21_1k.csv"), log).unwrap();
    let mut config = DatasetConfig::kuairand(dir.path());
    config.users = None;
    let data = load_dataset(&config).unwrap();
    // the one non-click is dropped
    assert_eq!(data.log.len(), 5);
    let short = data.items.get(&ItemId::new("1").unwrap()).unwrap();
    assert_eq!(config.attributes.fairness.group(short).unwrap(), Group::Group0);
    let long = data.items.get(&ItemId::new("2").unwrap()).unwrap();
    assert_eq!(config.attributes.fairness.group(long).unwrap(), Group::Group1);
}
