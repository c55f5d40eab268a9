#include <doctest.h>

#include "helpers.hpp"
#include "maskcal/dataset.hpp"
#include "maskcal/util.hpp"

using namespace maskcal;

namespace {

TripletDataset make_dataset(const testutil::TempDir& dir) {
    std::filesystem::create_directories(dir.path() / "tensors");
    TripletDataset ds(dir.path());
    std::mt19937_64 gen(3);
    for (int i = 0; i < 4; ++i) {
        const std::string id = "rec" + std::to_string(i);
        TripletRecord rec;
        rec.id = id;
        rec.x = "tensors/" + id + "_x.mskt";
        rec.y_hat = "tensors/" + id + "_yhat.mskt";
        rec.y = "tensors/" + id + "_y.mskt";
        rec.split = i < 2 ? Split::train : (i == 2 ? Split::calibration : Split::test);
        write_tensor(dir.path() / rec.x, testutil::random_tensor(gen, {4, 4, 2}));
        write_tensor(dir.path() / rec.y_hat, testutil::random_tensor(gen, {4, 4}));
        write_tensor(dir.path() / rec.y, testutil::random_tensor(gen, {4, 4}));
        ds.records().push_back(rec);
    }
    return ds;
}

}  // namespace

TEST_CASE("manifest round-trip and split filtering") {
    testutil::TempDir dir;
    TripletDataset ds = make_dataset(dir);
    ds.records()[1].mask = ds.records()[1].y;  // any tensor of y's shape works
    ds.save(dir / "manifest.jsonl");

    const TripletDataset back = TripletDataset::load(dir / "manifest.jsonl");
    REQUIRE(back.records().size() == 4);
    CHECK(back.records()[1].mask.has_value());
    CHECK(!back.records()[0].mask.has_value());
    CHECK(back.records()[2].split == Split::calibration);

    const auto train = back.split_records(Split::train);
    REQUIRE(train.size() == 2);
    CHECK(train[0].id == "rec0");
    CHECK(train[1].id == "rec1");

    const LoadedTriplet t = back.load_triplet(train[0]);
    CHECK(t.x.dims() == std::vector<std::size_t>{4, 4, 2});
    CHECK(t.y.same_dims(t.y_hat));
}

TEST_CASE("manifest with out-of-range values clamps with stats") {
    testutil::TempDir dir;
    TripletDataset ds = make_dataset(dir);
    Tensor hot({4, 4}, 1.5);
    write_tensor(dir.path() / ds.records()[0].y, hot);
    ds.save(dir / "manifest.jsonl");

    const TripletDataset back = TripletDataset::load(dir / "manifest.jsonl");
    ClampStats stats;
    const LoadedTriplet t = back.load_triplet(back.records()[0], &stats);
    CHECK(stats.values == 16);
    CHECK(stats.tensors == 1);
    for (double v : t.y.values()) CHECK(v == 1.0);
}

TEST_CASE("manifest errors") {
    testutil::TempDir dir;
    write_file_atomic(dir / "bad.jsonl", "{\"id\": \"a\"}\n");
    CHECK_THROWS_AS(TripletDataset::load(dir / "bad.jsonl"), FormatError);
    write_file_atomic(dir / "notjson.jsonl", "not json at all\n");
    CHECK_THROWS_AS(TripletDataset::load(dir / "notjson.jsonl"), FormatError);
    write_file_atomic(dir / "badsplit.jsonl",
                      "{\"id\":\"a\",\"x\":\"x\",\"y_hat\":\"p\",\"y\":\"y\","
                      "\"split\":\"dev\"}\n");
    CHECK_THROWS_AS(TripletDataset::load(dir / "badsplit.jsonl"), FormatError);
}
