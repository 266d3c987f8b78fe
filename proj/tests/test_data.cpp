#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tstcc/dataset.hpp"
#include "tstcc/errors.hpp"
#include "tstcc/rng.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

using namespace tstcc;

namespace {

std::string temp_path(const char* name) {
    return std::string("/tmp/tstcc_test_") + name + "_" + std::to_string(::getpid());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dataset random_dataset(int64_t n, int64_t c, int64_t t, int64_t k, uint64_t seed) {
    RngStream rng(seed);
    Tensor<float> xs({n, c, t});
    for (int64_t i = 0; i < xs.numel(); ++i) xs[i] = static_cast<float>(rng.normal());
    std::vector<int64_t> ys(static_cast<size_t>(n));
    for (auto& y : ys) y = static_cast<int64_t>(rng.below(static_cast<uint64_t>(k + 1))) - 1;
    return Dataset(std::move(xs), std::move(ys), k, "random");
}

// Classifies by distance to per-class mean sample; the synthetic generator
// must be separable under this.
double nearest_centroid_accuracy(const Dataset& d) {
    const int64_t k = d.num_classes(), span = d.channels() * d.timesteps();
    std::vector<std::vector<double>> centroid(static_cast<size_t>(k),
                                              std::vector<double>(static_cast<size_t>(span), 0));
    std::vector<int64_t> count(static_cast<size_t>(k), 0);
    for (int64_t i = 0; i < d.n(); ++i) {
        const int64_t y = d.label(i);
        ++count[static_cast<size_t>(y)];
        for (int64_t j = 0; j < span; ++j)
            centroid[static_cast<size_t>(y)][static_cast<size_t>(j)] +=
                d.samples()[i * span + j];
    }
    for (int64_t c = 0; c < k; ++c)
        for (int64_t j = 0; j < span; ++j)
            centroid[static_cast<size_t>(c)][static_cast<size_t>(j)] /=
                static_cast<double>(count[static_cast<size_t>(c)]);
    int64_t correct = 0;
    for (int64_t i = 0; i < d.n(); ++i) {
        int64_t best = 0;
        double best_dist = 1e300;
        for (int64_t c = 0; c < k; ++c) {
            double dist = 0;
            for (int64_t j = 0; j < span; ++j) {
                const double diff =
                    d.samples()[i * span + j] - centroid[static_cast<size_t>(c)][static_cast<size_t>(j)];
                dist += diff * diff;
            }
            if (dist < best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        if (best == d.label(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(d.n());
}

}  // namespace

TEST_CASE("TSD1 minimal file round-trips the stated values") {
    Tensor<float> xs({1, 1, 4}, {0, 1, 2, 3});
    Dataset d(std::move(xs), {0}, 1, "mini");
    const std::string path = temp_path("mini");
    save_dataset(d, path);
    Dataset back = load_dataset(path);
    CHECK(back.n() == 1);
    CHECK(back.channels() == 1);
    CHECK(back.timesteps() == 4);
    for (int i = 0; i < 4; ++i) CHECK(back.samples()[i] == static_cast<float>(i));
    CHECK(back.label(0) == 0);
    std::remove(path.c_str());
}

TEST_CASE("TSD1 save(load(f)) is byte-identical for random datasets") {
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u}) {
        Dataset d = random_dataset(5 + static_cast<int64_t>(seed), 2, 9, 3, seed);
        const std::string p1 = temp_path("rt1"), p2 = temp_path("rt2");
        save_dataset(d, p1);
        save_dataset(load_dataset(p1), p2);
        CHECK(slurp(p1) == slurp(p2));
        std::remove(p1.c_str());
        std::remove(p2.c_str());
    }
}

TEST_CASE("TSD1 rejects bad files") {
    const std::string path = temp_path("bad");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("magic mismatch"), DataError);

    Dataset d = random_dataset(3, 1, 5, 2, 9);
    save_dataset(d, path);
    std::string bytes = slurp(path);
    {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 6));
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("truncated"), DataError);

    // label 7 with K=3
    Tensor<float> xs({1, 1, 2}, {0, 0});
    Dataset ok(std::move(xs), {2}, 3);
    save_dataset(ok, path);
    bytes = slurp(path);
    bytes[bytes.size() - 8] = 7;  // little-endian int64 label at the tail
    {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("label out of range"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("normalize_minmax maps channels to [0,1]") {
    Tensor<float> xs({3, 1, 1}, {2, 4, 6});
    Dataset d(std::move(xs), {0, 0, 0}, 1);
    Dataset n = normalize_minmax(d);
    CHECK(n.samples()[0] == doctest::Approx(0.0));
    CHECK(n.samples()[1] == doctest::Approx(0.5));
    CHECK(n.samples()[2] == doctest::Approx(1.0));
}

TEST_CASE("normalize_minmax maps constant channels to zero") {
    Tensor<float> xs({3, 1, 1}, {5, 5, 5});
    Dataset d(std::move(xs), {0, 0, 0}, 1);
    Dataset n = normalize_minmax(d);
    for (int i = 0; i < 3; ++i) CHECK(n.samples()[i] == 0.0f);
}

TEST_CASE("normalize_minmax hits 0 and 1 per channel and is idempotent") {
    Dataset d = random_dataset(20, 3, 7, 2, 21);
    Dataset n = normalize_minmax(d);
    for (int64_t ch = 0; ch < 3; ++ch) {
        float lo = 1e9f, hi = -1e9f;
        for (int64_t i = 0; i < n.n(); ++i)
            for (int64_t t = 0; t < n.timesteps(); ++t) {
                lo = std::min(lo, n.samples().at3(i, ch, t));
                hi = std::max(hi, n.samples().at3(i, ch, t));
            }
        CHECK(lo == doctest::Approx(0.0));
        CHECK(hi == doctest::Approx(1.0));
    }
    Dataset twice = normalize_minmax(n);
    for (int64_t i = 0; i < n.samples().numel(); ++i)
        CHECK(twice.samples()[i] == doctest::Approx(n.samples()[i]).epsilon(1e-6));
}

TEST_CASE("split: fraction 1 keeps everything labeled") {
    Dataset d = make_synthetic(10, 1, 16, 2, 0.1, 3);
    LabeledSplit s = split_labeled_subset(d, 1.0, 7);
    CHECK(s.labeled.n() == d.n());
    CHECK(s.unlabeled.n() == 0);
}

TEST_CASE("split: stratified counts and class coverage") {
    Dataset d = make_synthetic(50, 1, 16, 2, 0.1, 3);  // N=100, two classes
    LabeledSplit s = split_labeled_subset(d, 0.05, 7);
    CHECK(s.labeled.n() == 5);
    CHECK(s.unlabeled.n() == 95);
    std::set<int64_t> classes(s.labeled.labels().begin(), s.labeled.labels().end());
    CHECK(classes.size() == 2);
    for (int64_t y : s.unlabeled.labels()) CHECK(y == -1);
}

TEST_CASE("split: deterministic for a fixed seed, different across seeds") {
    Dataset d = make_synthetic(40, 2, 12, 3, 0.2, 5);
    LabeledSplit a = split_labeled_subset(d, 0.25, 11);
    LabeledSplit b = split_labeled_subset(d, 0.25, 11);
    REQUIRE(a.labeled.n() == b.labeled.n());
    for (int64_t i = 0; i < a.labeled.samples().numel(); ++i)
        CHECK(a.labeled.samples()[i] == b.labeled.samples()[i]);

    LabeledSplit c = split_labeled_subset(d, 0.25, 12);
    bool any_diff = false;
    for (int64_t i = 0; i < a.labeled.samples().numel() && !any_diff; ++i)
        any_diff = a.labeled.samples()[i] != c.labeled.samples()[i];
    CHECK(any_diff);
}

TEST_CASE("split: coverage and disjointness across fractions") {
    Dataset d = make_synthetic(30, 1, 8, 3, 0.1, 4);
    for (double f : {0.1, 0.34, 0.5, 0.9}) {
        LabeledSplit s = split_labeled_subset(d, f, 2);
        CHECK(s.labeled.n() + s.unlabeled.n() == d.n());
        CHECK(s.labeled.n() == std::llround(f * static_cast<double>(d.n())));
    }
    CHECK_THROWS_WITH_AS(split_labeled_subset(d, 0.01, 2), doctest::Contains("fraction too small"),
                         DataError);
}

TEST_CASE("make_synthetic: noise-free samples are pure class-frequency sinusoids") {
    const int64_t t_len = 64;
    Dataset d = make_synthetic(5, 1, t_len, 2, 0.0, 9);
    constexpr double two_pi = 6.283185307179586;
    // each sample must be sin(2 pi f_k t + phase) for its class frequency;
    // recover the phase by projection and reconstruct
    for (int64_t i = 0; i < d.n(); ++i) {
        const double freq = static_cast<double>(d.label(i) + 1) / static_cast<double>(t_len) * 2.0;
        double a = 0, b = 0;
        for (int64_t t = 0; t < t_len; ++t) {
            const double arg = two_pi * freq * static_cast<double>(t);
            a += d.samples().at3(i, 0, t) * std::sin(arg);
            b += d.samples().at3(i, 0, t) * std::cos(arg);
        }
        a *= 2.0 / t_len;
        b *= 2.0 / t_len;
        CHECK(a * a + b * b == doctest::Approx(1.0).epsilon(1e-4));  // unit amplitude
        for (int64_t t = 0; t < t_len; ++t) {
            const double arg = two_pi * freq * static_cast<double>(t);
            CHECK(d.samples().at3(i, 0, t) ==
                  doctest::Approx(a * std::sin(arg) + b * std::cos(arg)).epsilon(1e-4));
        }
    }
    // within a class samples differ only by their phase draw; across classes
    // the dominant frequency differs
    CHECK(d.label(0) == d.label(2));
    bool same_class_varies = false;
    for (int64_t j = 0; j < t_len && !same_class_varies; ++j)
        same_class_varies = d.samples().at3(0, 0, j) != d.samples().at3(2, 0, j);
    CHECK(same_class_varies);
}

TEST_CASE("make_synthetic: nearest-centroid oracle separates noise-free classes") {
    Dataset d = make_synthetic(20, 1, 64, 3, 0.0, 17);
    CHECK(nearest_centroid_accuracy(d) == doctest::Approx(1.0));
}

TEST_CASE("make_synthetic: bit-identical under seed repeat") {
    Dataset a = make_synthetic(4, 2, 16, 3, 0.4, 33);
    Dataset b = make_synthetic(4, 2, 16, 3, 0.4, 33);
    for (int64_t i = 0; i < a.samples().numel(); ++i) CHECK(a.samples()[i] == b.samples()[i]);
}

TEST_CASE("batch_iterator: sizes, identity order, permutation partition") {
    Dataset d = random_dataset(5, 1, 3, 2, 41);
    BatchIterator it(d, 2, std::nullopt);
    Batch b;
    std::vector<int64_t> sizes;
    while (it.next(b)) sizes.push_back(b.x.dim(0));
    CHECK(sizes == std::vector<int64_t>{2, 2, 1});

    // identity order without a seed
    BatchIterator it2(d, 5, std::nullopt);
    it2.next(b);
    for (int64_t i = 0; i < 5; ++i)
        CHECK(b.x.at3(i, 0, 0) == d.samples().at3(i, 0, 0));

    // shuffled epochs still cover every sample exactly once
    for (uint64_t seed : {1u, 9u, 77u}) {
        Dataset big = random_dataset(23, 1, 2, 2, seed + 100);
        // make first values unique markers
        for (int64_t i = 0; i < big.n(); ++i) big.samples().at3(i, 0, 0) = static_cast<float>(i);
        BatchIterator its(big, 4, seed);
        std::multiset<int64_t> seen;
        while (its.next(b))
            for (int64_t i = 0; i < b.x.dim(0); ++i)
                seen.insert(static_cast<int64_t>(b.x.at3(i, 0, 0)));
        CHECK(seen.size() == 23);
        std::set<int64_t> unique(seen.begin(), seen.end());
        CHECK(unique.size() == 23);
    }
}

TEST_CASE("label trap blocks label reads but not sample reads") {
    Dataset d = random_dataset(4, 1, 3, 2, 50);
    d.trap_labels(true);
    CHECK_THROWS_AS((void)d.labels(), std::logic_error);
    CHECK_THROWS_AS((void)d.label(0), std::logic_error);
    CHECK(d.samples().numel() == 12);
    BatchIterator unlabeled(d, 2, std::nullopt, /*include_labels=*/false);
    Batch b;
    while (unlabeled.next(b))
        for (int64_t y : b.y) CHECK(y == -1);
    BatchIterator labeled(d, 2, std::nullopt, /*include_labels=*/true);
    CHECK_THROWS_AS(labeled.next(b), std::logic_error);
}

TEST_CASE("csv conversion errors cite the line") {
    const std::string path = temp_path("csv");
    {
        std::ofstream out(path);
        out << "0.0,1.0,2.0,3.0,0\n";
        out << "1.0,2.0,3.0,4.0,1\n";
        out << "1.0,2.0,3.0,4.0\n";  // ragged
    }
    CHECK_THROWS_WITH_AS(dataset_from_csv(path, 1, 4, 2), doctest::Contains("line 3"), DataError);
    {
        std::ofstream out(path);
        out << "0.0,oops,2.0,3.0,0\n";
    }
    CHECK_THROWS_WITH_AS(dataset_from_csv(path, 1, 4, 2), doctest::Contains("line 1"), DataError);
    {
        std::ofstream out(path);
        out << "0.0,1.0,2.0,3.0,0\n0.5,1.5,2.5,3.5,1\n";
    }
    Dataset d = dataset_from_csv(path, 1, 4, 2);
    CHECK(d.n() == 2);
    CHECK(d.label(1) == 1);
    std::remove(path.c_str());
}
