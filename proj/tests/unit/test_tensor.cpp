#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "maskcal/tensor.hpp"
#include "maskcal/util.hpp"

using namespace maskcal;

TEST_CASE("hadamard basics") {
    Tensor a({3}, {1.0 / 3, 2.0 / 3, 1.0});
    Tensor ones({3}, 1.0);
    Tensor zeros({3}, 0.0);

    const Tensor id = hadamard(a, ones);
    for (std::size_t i = 0; i < 3; ++i) CHECK(id[i] == doctest::Approx(a[i]));

    const Tensor ann = hadamard(a, zeros);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ann[i] == 0.0);

    Tensor u({2}, {0.5, 0.4});
    Tensor v({2}, {0.2, 0.5});
    const Tensor prod = hadamard(u, v);
    CHECK(prod[0] == doctest::Approx(0.10));
    CHECK(prod[1] == doctest::Approx(0.20));

    Tensor wrong({4}, 0.5);
    CHECK_THROWS_AS(hadamard(a, wrong), ShapeError);
}

TEST_CASE("hadamard algebra properties") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = testutil::random_tensor(gen, {4, 5});
        const auto b = testutil::random_tensor(gen, {4, 5});
        const auto c = testutil::random_tensor(gen, {4, 5});
        const auto ab = hadamard(a, b);
        const auto ba = hadamard(b, a);
        const auto abc1 = hadamard(ab, c);
        const auto abc2 = hadamard(a, hadamard(b, c));
        for (std::size_t i = 0; i < ab.size(); ++i) {
            CHECK(ab[i] == doctest::Approx(ba[i]));
            CHECK(abc1[i] == doctest::Approx(abc2[i]).epsilon(1e-12));
            CHECK(ab[i] >= 0.0);
            CHECK(ab[i] <= 1.0);
        }
        // squaring a mask can only mask more
        const auto m = testutil::random_tensor(gen, {16});
        CHECK(mask_size(hadamard(m, m)) >= mask_size(m) - 1e-12);
    }
}

TEST_CASE("mask_size") {
    CHECK(mask_size(Tensor({4}, 1.0)) == 0.0);
    CHECK(mask_size(Tensor({4}, 0.0)) == 1.0);
    CHECK(mask_size(Tensor({4}, {1.0, 0.5, 0.5, 0.0})) == doctest::Approx(0.5));
}

TEST_CASE("clamp_unit counts out-of-range entries") {
    Tensor t({4}, {-0.5, 0.2, 1.7, 1.0});
    CHECK(clamp_unit(t) == 2);
    CHECK(t[0] == 0.0);
    CHECK(t[2] == 1.0);
    CHECK(clamp_unit(t) == 0);
}

TEST_CASE("mskt round-trip identity") {
    testutil::TempDir dir;
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<std::size_t> dim_count(1, 4);
    std::uniform_int_distribution<std::size_t> dim_size(1, 7);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::size_t> dims(dim_count(gen));
        for (auto& d : dims) d = dim_size(gen);
        const auto t = testutil::random_tensor(gen, dims, -100.0, 100.0);
        const auto path = dir / ("t" + std::to_string(trial) + ".mskt");
        write_tensor(path, t);
        const Tensor back = read_tensor(path);
        REQUIRE(back.dims() == t.dims());
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
    }
}

TEST_CASE("mskt scalar and f32 variant") {
    testutil::TempDir dir;
    Tensor t({1, 1, 1}, {0.25});
    write_tensor(dir / "a.mskt", t);
    CHECK(read_tensor(dir / "a.mskt")[0] == 0.25);

    Tensor v({3}, {0.1, 0.2, 0.3});
    write_tensor(dir / "b.mskt", v, Dtype::f32);
    const Tensor back = read_tensor(dir / "b.mskt");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i] == static_cast<double>(static_cast<float>(v[i])));
    }
}

TEST_CASE("mskt malformed files") {
    testutil::TempDir dir;
    write_file_atomic(dir / "bad_magic.mskt", "XXXXrest-of-file");
    CHECK_THROWS_AS(read_tensor(dir / "bad_magic.mskt"), FormatError);

    Tensor t({4}, {1.0, 2.0, 3.0, 4.0});
    write_tensor(dir / "ok.mskt", t);
    std::string bytes = read_file(dir / "ok.mskt");

    std::string truncated = bytes.substr(0, bytes.size() - 5);
    write_file_atomic(dir / "trunc.mskt", truncated);
    CHECK_THROWS_AS(read_tensor(dir / "trunc.mskt"), FormatError);

    std::string wrong_version = bytes;
    wrong_version[4] = 9;
    write_file_atomic(dir / "ver.mskt", wrong_version);
    CHECK_THROWS_AS(read_tensor(dir / "ver.mskt"), FormatError);

    // NaN payload must be rejected on read, and on write too.
    std::string with_nan = bytes;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(with_nan.data() + with_nan.size() - 8, &nan, 8);
    write_file_atomic(dir / "nan.mskt", with_nan);
    CHECK_THROWS_AS(read_tensor(dir / "nan.mskt"), FormatError);
    Tensor bad({1}, {nan});
    CHECK_THROWS_AS(write_tensor(dir / "w.mskt", bad), DomainError);
}

TEST_CASE("pnm read and write") {
    testutil::TempDir dir;

    // P5 with extreme bytes.
    std::string p5 = "P5\n2 1\n255\n";
    p5.push_back(static_cast<char>(255));
    p5.push_back(static_cast<char>(0));
    write_file_atomic(dir / "g.pgm", p5);
    const Image g = read_pnm(dir / "g.pgm");
    CHECK(g.dims() == std::vector<std::size_t>{1, 2});
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 0.0);

    // 0.5 quantizes to byte 128 (round-half-to-even), reads back 128/255.
    Image half = Tensor::image(1, 1, 1, 0.5);
    write_pnm(dir / "h.pgm", half);
    const std::string bytes = read_file(dir / "h.pgm");
    CHECK(static_cast<unsigned char>(bytes.back()) == 128);
    CHECK(read_pnm(dir / "h.pgm")[0] == doctest::Approx(128.0 / 255.0));

    // P6 round-trip through 16-bit.
    Image rgb = Tensor::image(2, 2, 3);
    for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = (i % 7) / 7.0;
    write_pnm(dir / "c.ppm", rgb, 65535);
    const Image back = read_pnm(dir / "c.ppm");
    REQUIRE(back.dims() == rgb.dims());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        CHECK(back[i] == doctest::Approx(rgb[i]).epsilon(1e-4));
    }

    write_file_atomic(dir / "bad.pnm", "P3\n1 1\n255\n0 0 0\n");
    CHECK_THROWS_AS(read_pnm(dir / "bad.pnm"), FormatError);
    write_file_atomic(dir / "badmax.pgm", "P5\n1 1\n100\nx");
    CHECK_THROWS_AS(read_pnm(dir / "badmax.pgm"), FormatError);
}

TEST_CASE("resample and channel helpers") {
    Image src = Tensor::image(2, 2, 1);
    src.at(0, 0) = 0.1;
    src.at(0, 1) = 0.2;
    src.at(1, 0) = 0.3;
    src.at(1, 1) = 0.4;
    const Image up = resample_nearest(src, 4, 4);
    CHECK(up.at(0, 0) == 0.1);
    CHECK(up.at(0, 3) == 0.2);
    CHECK(up.at(3, 0) == 0.3);
    CHECK(up.at(3, 3) == 0.4);

    Image stacked = Tensor::image(1, 2, 2);
    stacked.at(0, 0, 0) = 0.2;
    stacked.at(0, 0, 1) = 0.4;
    stacked.at(0, 1, 0) = 1.0;
    stacked.at(0, 1, 1) = 0.0;
    const Image mean = channel_mean(stacked);
    CHECK(mean.at(0, 0) == doctest::Approx(0.3));
    CHECK(mean.at(0, 1) == doctest::Approx(0.5));

    const Tensor wide = broadcast_plane(mean, 3);
    CHECK(wide.channels() == 3);
    CHECK(wide.at(0, 1, 2) == doctest::Approx(0.5));
}
