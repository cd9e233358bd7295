#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "compactml/error.hpp"
#include "compactml/log.hpp"
#include "compactml/metrics.hpp"
#include "compactml/models.hpp"
#include "compactml/tree.hpp"
#include "test_helpers.hpp"

using namespace compactml;

namespace {

Hyperparams small(Family f) {
    if (f == Family::mlp_a || f == Family::mlp_b) return {{"epochs", 200}};
    if (f == Family::knn_uniform || f == Family::knn_distance) return {};
    return {{"n_trees", 25}};
}

TabularDataset linear_set(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMatrix x(n, 3);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.uniform(0, 10);
        y[i] = 3 * x(i, 0) + rng.normal();
    }
    return {{"a", "b", "c"}, std::move(x), "y", std::move(y)};
}

// Ordinary least squares with intercept via normal equations (Gauss-Jordan).
std::vector<double> ols_predict(const TabularDataset& train, const FeatureMatrix& q) {
    const std::size_t p = train.cols() + 1;
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < train.rows(); ++i) {
        std::vector<double> z{1.0};
        for (double v : train.features().row(i)) z.push_back(v);
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a[r][c] += z[r] * z[c];
            a[r][p] += z[r] * train.targets()[i];
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c; r < p; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<double> out(q.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double s = a[0][p] / a[0][0];
        for (std::size_t j = 0; j < q.cols(); ++j) s += q(i, j) * a[j + 1][p] / a[j + 1][j + 1];
        out[i] = s;
    }
    return out;
}

}  // namespace

TEST_CASE("family ids round trip") {
    CHECK(all_families().size() == 11);
    for (auto f : all_families()) CHECK(parse_family(family_id(f)) == f);
    CHECK_THROWS_AS(parse_family("lightgbm"), ConfigError);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(ModelSpec::make(Family::gbt_default, {{"n_trees", 0}}), ConfigError);
    CHECK_THROWS_AS(ModelSpec::make(Family::gbt_default, {{"learning_rate", 0}}), ConfigError);
    CHECK_THROWS_AS(ModelSpec::make(Family::gbt_default, {{"learning_rate", 1.5}}), ConfigError);
    CHECK_THROWS_AS(ModelSpec::make(Family::knn_uniform, {{"k", 0}}), ConfigError);
    CHECK_THROWS_AS(ModelSpec::make(Family::knn_uniform, {{"k", 2.5}}), ConfigError);
    CHECK_THROWS_AS(ModelSpec::make(Family::random_forest, {{"max_depth", 0}}), ConfigError);
    CHECK_THROWS_AS(ModelSpec::make(Family::random_forest, {{"bogus", 1}}), ConfigError);
    CHECK_NOTHROW(ModelSpec::make(Family::gbt_default, {{"learning_rate", 1.0}}));
    for (auto f : all_families()) CHECK_NOTHROW(ModelSpec::make(f).validate());
}

TEST_CASE("1-NN memorises distinct training rows") {
    const auto d = linear_set(60, 1);
    const auto m = fit(ModelSpec::make(Family::knn_uniform, {{"k", 1}}), d);
    const auto p = m.predict(d.features());
    for (std::size_t i = 0; i < d.rows(); ++i) CHECK(p[i] == d.targets()[i]);
    CHECK(r_squared(d.targets(), p).value == 1.0);
}

TEST_CASE("distance-weighted knn worked example") {
    TabularDataset d({"x"}, FeatureMatrix(2, 1, {0.0, 1.0}), "y", {0.0, 10.0});
    const auto m = fit(ModelSpec::make(Family::knn_distance, {{"k", 2}}), d);
    const auto p = m.predict(FeatureMatrix(1, 1, {0.25}));
    CHECK(p[0] == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("knn k is clamped to the training size with a warning") {
    TabularDataset d({"x"}, FeatureMatrix(3, 1, {0.0, 1.0, 2.0}), "y", {1.0, 2.0, 6.0});
    std::vector<std::string> seen;
    auto old = set_log_sink([&](LogLevel, const std::string& m) { seen.push_back(m); });
    const auto m = fit(ModelSpec::make(Family::knn_uniform, {{"k", 5}}), d);
    set_log_sink(old);
    CHECK(m.warnings.size() == 1);
    CHECK(seen.size() == 1);
    CHECK(m.predict(FeatureMatrix(1, 1, {0.0}))[0] == doctest::Approx(3.0));
}

TEST_CASE("random forest on 3x + noise reaches the least-squares benchmark") {
    const auto train = linear_set(200, 2);
    const auto test = linear_set(200, 3);
    const auto m = fit(ModelSpec::make(Family::random_forest, {}, 7), train);
    const double rf = r_squared(test.targets(), m.predict(test.features())).value;
    const double ols = r_squared(test.targets(), ols_predict(train, test.features())).value;
    CHECK(ols > 0.95);
    CHECK(rf >= 0.8);
    CHECK(rf <= ols + 0.01);
}

TEST_CASE("predict contract") {
    const auto d = linear_set(30, 4);
    for (auto f : all_families()) {
        CAPTURE(family_id(f));
        const auto m = fit(ModelSpec::make(f, small(f), 3), d);
        CHECK(m.predict(FeatureMatrix(0, 3)).empty());
        CHECK_THROWS_AS(m.predict(FeatureMatrix(2, 4)), ShapeError);
        for (double v : m.predict(d.features())) CHECK(std::isfinite(v));
        CHECK(m.train_time_s >= 0);
    }
}

TEST_CASE("constant targets fit the constant") {
    TabularDataset d({"a"}, FeatureMatrix(4, 1, {1, 2, 3, 4}), "y", {2.5, 2.5, 2.5, 2.5});
    for (auto f : all_families()) {
        const auto m = fit(ModelSpec::make(f, small(f)), d);
        for (double v : m.predict(FeatureMatrix(2, 1, {-7, 100}))) CHECK(v == 2.5);
    }
}

TEST_CASE("fitting is deterministic and blobs round trip bit for bit") {
    const auto d = testing::friedman(80, 1.0, 5);
    const auto q = testing::friedman(40, 1.0, 6).features();
    for (auto f : all_families()) {
        CAPTURE(family_id(f));
        const auto spec = ModelSpec::make(f, small(f), 99);
        const auto a = fit(spec, d);
        const auto b = fit(spec, d);
        CHECK(a.predict(q) == b.predict(q));
        CHECK(a.training_rmse == b.training_rmse);

        std::stringstream ss;
        a.save(ss);
        const auto back = FittedModel::load(ss);
        CHECK(back.spec() == a.spec());
        CHECK(back.predict(q) == a.predict(q));
    }
    std::stringstream bad("CMLMODEL");
    CHECK_THROWS_AS(FittedModel::load(bad), FormatError);
    std::stringstream junk("not a model at all");
    CHECK_THROWS_AS(FittedModel::load(junk), FormatError);
}

TEST_CASE("forest predictions stay within the training target range") {
    const auto d = testing::friedman(100, 1.0, 8);
    const auto [lo, hi] = std::minmax_element(d.targets().begin(), d.targets().end());
    Rng rng(2);
    FeatureMatrix q(300, 5);
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t j = 0; j < 5; ++j) q(i, j) = rng.uniform(-1, 2);
    for (auto f : {Family::random_forest, Family::extra_trees}) {
        const auto m = fit(ModelSpec::make(f, {{"n_trees", 30}}, 1), d);
        for (double v : m.predict(q)) {
            CHECK(v >= *lo);
            CHECK(v <= *hi);
        }
    }
}

TEST_CASE("extra trees: same seed reproduces, different seed differs") {
    const auto d = testing::friedman(60, 1.0, 9);
    const auto a = fit(ModelSpec::make(Family::extra_trees, {{"n_trees", 10}}, 1), d);
    const auto b = fit(ModelSpec::make(Family::extra_trees, {{"n_trees", 10}}, 1), d);
    const auto c = fit(ModelSpec::make(Family::extra_trees, {{"n_trees", 10}}, 2), d);
    const auto q = testing::friedman(30, 0.0, 12).features();
    CHECK(a.predict(q) == b.predict(q));
    CHECK(a.predict(q) != c.predict(q));
}

TEST_CASE("boosting training RMSE is non-increasing per round") {
    const auto d = testing::friedman(120, 1.0, 10);
    for (auto f : all_families()) {
        if (!is_boosted(f)) continue;
        CAPTURE(family_id(f));
        const auto m = fit(ModelSpec::make(f, {{"n_trees", 60}}, 4), d);
        REQUIRE(m.training_rmse.size() == 61);
        for (std::size_t i = 1; i < m.training_rmse.size(); ++i)
            CHECK(m.training_rmse[i] <= m.training_rmse[i - 1]);
        CHECK(m.training_rmse.back() < 0.5 * m.training_rmse.front());
    }
}

TEST_CASE("oblivious boosting uses one test per level in every tree") {
    const auto d = testing::friedman(100, 1.0, 11);
    const auto m = fit(ModelSpec::make(Family::gbt_oblivious, {{"n_trees", 5}, {"max_depth", 3}}), d);
    CHECK(m.training_rmse.size() == 6);
    const auto borders = oblivious_borders(d.features(), 64);
    ObliviousOptions opt;
    opt.depth = 3;
    const auto t = ObliviousTree::grow(d.features(), d.targets(), borders, opt);
    std::vector<std::set<std::pair<std::size_t, double>>> tests(t.levels().size());
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const auto idx = t.leaf_index(d.features().row(i));
        for (std::size_t lvl = 0; lvl < t.levels().size(); ++lvl) {
            const auto& l = t.levels()[lvl];
            tests[lvl].insert({l.feature, l.threshold});
            CHECK(((idx >> lvl) & 1) == (d.features()(i, l.feature) > l.threshold ? 1u : 0u));
        }
    }
    for (const auto& s : tests) CHECK(s.size() == 1);
}
