#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "fineprune/data.hpp"
#include "fineprune/errors.hpp"
#include "fineprune/nnet.hpp"

using fp::data::Dataset;
using fp::data::Splits;

namespace {

std::filesystem::path write_csv(const char* name, const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << body;
    return path;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("synthetic blobs: shape, labels, class structure") {
    Dataset ds = fp::data::generate_synthetic(3, 20, 4, 0.05, 9);
    CHECK(ds.rows == 60);
    CHECK(ds.cols == 4);
    CHECK(ds.classes == 3);
    CHECK(ds.features.size() == 240);
    CHECK(ds.labels.size() == 60);
    CHECK(ds.provenance == fp::data::Provenance::synthetic);
    for (std::size_t i = 0; i < ds.rows; ++i) CHECK(ds.labels[i] == static_cast<int>(i / 20));

    // Class centers sit on the unit circle in the first two dimensions, so
    // with a tight spread each class mean has norm ~1 there and ~0 beyond.
    for (int cls = 0; cls < 3; ++cls) {
        std::vector<double> mean(4, 0.0);
        for (int i = 0; i < 20; ++i) {
            auto row = ds.row(static_cast<std::size_t>(cls * 20 + i));
            for (std::size_t d = 0; d < 4; ++d) mean[d] += row[d] / 20.0;
        }
        CHECK(std::hypot(mean[0], mean[1]) == doctest::Approx(1.0).epsilon(0.1));
        CHECK(std::abs(mean[2]) < 0.1);
        CHECK(std::abs(mean[3]) < 0.1);
    }

    Dataset same = fp::data::generate_synthetic(3, 20, 4, 0.05, 9);
    CHECK(same.features == ds.features);
    Dataset other = fp::data::generate_synthetic(3, 20, 4, 0.05, 10);
    CHECK(other.features != ds.features);

    CHECK_THROWS_AS(fp::data::generate_synthetic(1, 20, 4, 0.05, 0), fp::ArgumentError);
    CHECK_THROWS_AS(fp::data::generate_synthetic(3, 0, 4, 0.05, 0), fp::ArgumentError);
    CHECK_THROWS_AS(fp::data::generate_synthetic(3, 20, 1, 0.05, 0), fp::ArgumentError);
    CHECK_THROWS_AS(fp::data::generate_synthetic(3, 20, 4, -0.1, 0), fp::ArgumentError);
}

TEST_CASE("stratified split covers every row exactly once") {
    Dataset ds = fp::data::generate_synthetic(3, 40, 2, 0.1, 3);
    auto idx = fp::data::split_indices(ds, {0.5, 0.25, 0.25}, 17);
    CHECK(idx.train.size() == 60);
    CHECK(idx.validation.size() == 30);
    CHECK(idx.test.size() == 30);
    std::set<std::size_t> all;
    for (const auto* part : {&idx.train, &idx.validation, &idx.test})
        for (std::size_t i : *part) all.insert(i);
    CHECK(all.size() == ds.rows);

    // Stratification: each split holds the same per-class ratio.
    for (const auto* part : {&idx.train, &idx.validation, &idx.test}) {
        std::vector<int> counts(3, 0);
        for (std::size_t i : *part) ++counts[static_cast<std::size_t>(ds.labels[i])];
        CHECK(counts[0] == counts[1]);
        CHECK(counts[1] == counts[2]);
    }

    Splits sp = fp::data::split(ds, {0.5, 0.25, 0.25}, 17);
    CHECK(sp.train.rows == 60);
    CHECK(sp.validation.rows == 30);
    CHECK(sp.test.rows == 30);
    CHECK(sp.train.classes == 3);
    CHECK(sp.train.cols == 2);

    CHECK_THROWS_AS(fp::data::split_indices(ds, {0.5, 0.25, 0.1}, 17), fp::ArgumentError);
    Dataset tiny = fp::data::generate_synthetic(2, 3, 2, 0.1, 1);
    CHECK_THROWS_AS(fp::data::split_indices(tiny, {0.5, 0.25, 0.25}, 17), fp::ArgumentError);
}

TEST_CASE("csv loader parses a labeled table") {
    auto path = write_csv("fineprune_test_ok.csv",
                          "f1,target,f2\n"
                          "0.5,1,-2.0\n"
                          "1.5,0,3.25\n"
                          "2.5,2,0.125\n");
    Dataset ds = fp::data::load_csv(path.string(), "target");
    CHECK(ds.rows == 3);
    CHECK(ds.cols == 2);
    CHECK(ds.classes == 3);  // max label + 1
    CHECK(ds.provenance == fp::data::Provenance::csv);
    CHECK(ds.labels == std::vector<int>{1, 0, 2});
    CHECK(ds.features == std::vector<double>{0.5, -2.0, 1.5, 3.25, 2.5, 0.125});
    std::filesystem::remove(path);
}

TEST_CASE("csv loader reports precise errors") {
    CHECK_THROWS_AS(fp::data::load_csv("/no/such/file.csv", "label"), fp::IoError);

    auto p1 = write_csv("fineprune_test_e1.csv", "a,b\n");
    CHECK_THROWS_AS(fp::data::load_csv(p1.string(), "a"), fp::ParseError);

    auto p2 = write_csv("fineprune_test_e2.csv", "a,label\n1.0,0\n");
    CHECK_THROWS_AS(fp::data::load_csv(p2.string(), "missing"), fp::ParseError);

    auto p3 = write_csv("fineprune_test_e3.csv", "a,label\n1.0,0,9\n");
    CHECK_THROWS_AS(fp::data::load_csv(p3.string(), "label"), fp::ParseError);

    auto p4 = write_csv("fineprune_test_e4.csv", "a,label\nxyz,0\n");
    CHECK_THROWS_AS(fp::data::load_csv(p4.string(), "label"), fp::ParseError);

    auto p5 = write_csv("fineprune_test_e5.csv", "a,label\n1.0,-3\n");
    CHECK_THROWS_AS(fp::data::load_csv(p5.string(), "label"), fp::ParseError);

    auto p6 = write_csv("fineprune_test_e6.csv", "a,label\n1.0,0.5\n");
    CHECK_THROWS_AS(fp::data::load_csv(p6.string(), "label"), fp::ParseError);

    auto p7 = write_csv("fineprune_test_e7.csv", "label\n0\n");
    CHECK_THROWS_AS(fp::data::load_csv(p7.string(), "label"), fp::ParseError);

    for (auto* p : {&p1, &p2, &p3, &p4, &p5, &p6, &p7}) std::filesystem::remove(*p);
}

TEST_CASE("csv loader tolerates CRLF line endings") {
    auto path = write_csv("fineprune_test_crlf.csv", "x,label\r\n0.5,0\r\n1.5,1\r\n");
    Dataset ds = fp::data::load_csv(path.string(), "label");
    CHECK(ds.rows == 2);
    CHECK(ds.features == std::vector<double>{0.5, 1.5});
    std::filesystem::remove(path);
}

TEST_CASE("standardizer centers and scales using training statistics only") {
    Dataset train;
    train.rows = 4;
    train.cols = 2;
    train.classes = 2;
    train.features = {0.0, 10.0, 2.0, 10.0, 4.0, 10.0, 6.0, 10.0};
    train.labels = {0, 1, 0, 1};

    auto st = fp::data::fit_standardizer(train);
    REQUIRE(st.mean.size() == 2);
    CHECK(st.mean[0] == doctest::Approx(3.0));
    CHECK(st.mean[1] == doctest::Approx(10.0));
    // Population stddev of {0,2,4,6} is sqrt(5); a constant column falls
    // back to scale 1 instead of dividing by zero.
    CHECK(st.stddev[0] == doctest::Approx(std::sqrt(5.0)));
    CHECK(st.stddev[1] == 1.0);

    Dataset val = train;
    val.features = {3.0, 11.0, 8.0, 9.0};
    val.rows = 2;
    fp::data::apply_standardizer(st, val);
    CHECK(val.features[0] == doctest::Approx(0.0));
    CHECK(val.features[1] == doctest::Approx(1.0));
    CHECK(val.features[2] == doctest::Approx(5.0 / std::sqrt(5.0)));

    Dataset bad = train;
    bad.cols = 3;
    CHECK_THROWS_AS(fp::data::apply_standardizer(st, bad), fp::ShapeError);

    Splits sp;
    sp.train = train;
    sp.validation = val;
    sp.test = train;
    fp::data::standardize(sp);
    double mean0 = 0;
    for (std::size_t i = 0; i < sp.train.rows; ++i) mean0 += sp.train.row(i)[0];
    CHECK(mean0 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("as_batch mirrors the dataset") {
    Dataset ds = fp::data::generate_synthetic(2, 5, 3, 0.1, 2);
    fp::nnet::Batch b = fp::data::as_batch(ds);
    CHECK(b.rows == ds.rows);
    CHECK(b.cols == ds.cols);
    CHECK(b.inputs == ds.features);
    CHECK(b.labels == ds.labels);
}

TEST_CASE("pretraining learns the source task, retargeting swaps only the head") {
    Dataset source = fp::data::generate_synthetic(4, 30, 2, 0.08, 21);
    std::vector<fp::nnet::LayerSpec> spec{
        fp::nnet::LayerSpec::dense(2, 16),
        fp::nnet::LayerSpec::dense(16, 4, fp::nnet::Activation::identity)};
    fp::nnet::MaskedNetwork src = fp::data::pretrain_source(spec, source, 120, 0.05, 16, 77);
    CHECK(fp::nnet::top1_error(src, fp::data::as_batch(source)) <= 0.1);

    fp::nnet::MaskedNetwork moved = fp::data::retarget(src, 3, 123);
    CHECK(moved.class_count() == 3);
    CHECK(moved.layers.size() == 2);
    CHECK(moved.layers[0].weights == src.layers[0].weights);  // body untouched
    CHECK(moved.layers[1].spec.out_dim == 3);
    for (double b : moved.layers[1].bias) CHECK(b == 0.0);  // fresh head

    // The composed helper reproduces the same body.
    fp::nnet::MaskedNetwork combo = fp::data::pretrain(spec, source, 3, 120, 0.05, 16, 77);
    CHECK(combo.layers[0].weights == src.layers[0].weights);
    CHECK(combo.class_count() == 3);

    std::vector<fp::nnet::LayerSpec> mismatched{
        fp::nnet::LayerSpec::dense(2, 16),
        fp::nnet::LayerSpec::dense(16, 5, fp::nnet::Activation::identity)};
    CHECK_THROWS_AS(fp::data::pretrain_source(mismatched, source, 10, 0.05, 16, 0),
                    fp::ArgumentError);
    CHECK_THROWS_AS(fp::data::retarget(src, 1, 0), fp::ArgumentError);
}

}  // TEST_SUITE
