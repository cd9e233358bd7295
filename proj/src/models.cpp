#include "compactml/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "compactml/error.hpp"
#include "compactml/log.hpp"
#include "compactml/metrics.hpp"
#include "compactml/mlp.hpp"
#include "compactml/rng.hpp"
#include "compactml/tree.hpp"

namespace compactml {
namespace {

constexpr char kMagic[] = "CMLMODEL";
constexpr std::uint64_t kFormatVersion = 1;

enum Kind : std::uint8_t {
    kConstant = 0,
    kKnn = 1,
    kForest = 2,
    kBoostedCart = 3,
    kBoostedOblivious = 4,
    kMlp = 5,
};

struct ParamRule {
    const char* key;
    double lo;
    double hi;
    bool lo_open;
    bool integer;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ParamRule> rules_for(Family f) {
    switch (f) {
        case Family::knn_uniform:
        case Family::knn_distance:
            return {{"k", 1, 1e6, false, true}, {"standardize", 0, 1, false, true}};
        case Family::random_forest:
        case Family::extra_trees:
            return {{"n_trees", 1, 1e5, false, true},
                    {"max_depth", 1, 512, false, true},
                    {"min_samples_leaf", 1, 1e6, false, true},
                    {"max_features", 0, 1, true, false},
                    {"bootstrap", 0, 1, false, true}};
        case Family::gbt_default:
        case Family::gbt_xt:
        case Family::gbt_large:
        case Family::gbt_xgb:
            return {{"n_trees", 1, 1e5, false, true},
                    {"learning_rate", 0, 1, true, false},
                    {"max_depth", 1, 64, false, true},
                    {"min_samples_leaf", 1, 1e6, false, true},
                    {"l2", 0, kInf, false, false},
                    {"colsample", 0, 1, true, false}};
        case Family::gbt_oblivious:
            return {{"n_trees", 1, 1e5, false, true},
                    {"learning_rate", 0, 1, true, false},
                    {"max_depth", 1, 16, false, true},
                    {"l2", 0, kInf, false, false},
                    {"max_borders", 1, 65536, false, true}};
        case Family::mlp_a:
        case Family::mlp_b:
            return {{"hidden", 1, 4096, false, true},
                    {"epochs", 1, 1e7, false, true},
                    {"learning_rate", 0, 10, true, false},
                    {"momentum", 0, 0.999, false, false},
                    {"weight_decay", 0, kInf, false, false},
                    {"cosine_schedule", 0, 1, false, true}};
    }
    return {};
}

// ---------------------------------------------------------------------------

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const FeatureMatrix& x) {
        Standardizer s;
        s.mean.assign(x.cols(), 0.0);
        s.scale.assign(x.cols(), 1.0);
        const double n = static_cast<double>(x.rows());
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double m = 0;
            for (std::size_t r = 0; r < x.rows(); ++r) m += x(r, c);
            m /= n;
            double v = 0;
            for (std::size_t r = 0; r < x.rows(); ++r) v += (x(r, c) - m) * (x(r, c) - m);
            v /= n;
            s.mean[c] = m;
            s.scale[c] = v > 0 ? std::sqrt(v) : 1.0;
        }
        return s;
    }

    static Standardizer identity(std::size_t cols) {
        return {std::vector<double>(cols, 0.0), std::vector<double>(cols, 1.0)};
    }

    void apply(std::span<const double> in, std::span<double> out) const {
        for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) / scale[c];
    }

    FeatureMatrix apply(const FeatureMatrix& x) const {
        FeatureMatrix out(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r) apply(x.row(r), out.row(r));
        return out;
    }

    void save(BinaryWriter& w) const {
        w.f64s(mean);
        w.f64s(scale);
    }

    static Standardizer load(BinaryReader& r) {
        Standardizer s;
        s.mean = r.f64s();
        s.scale = r.f64s();
        if (s.mean.size() != s.scale.size()) throw FormatError("corrupt standardizer");
        return s;
    }
};

class ConstantRegressor final : public Regressor {
public:
    explicit ConstantRegressor(double value) : value_(value) {}
    double predict_row(std::span<const double>) const override { return value_; }
    std::uint8_t kind() const override { return kConstant; }
    void save(BinaryWriter& w) const override { w.f64(value_); }
    static std::shared_ptr<const Regressor> load(BinaryReader& r) {
        return std::make_shared<ConstantRegressor>(r.f64());
    }

private:
    double value_;
};

class KnnRegressor final : public Regressor {
public:
    KnnRegressor(Standardizer scaler, FeatureMatrix x, std::vector<double> y, std::size_t k,
                 bool weighted)
        : scaler_(std::move(scaler)), x_(std::move(x)), y_(std::move(y)), k_(k), weighted_(weighted) {}

    double predict_row(std::span<const double> row) const override {
        std::vector<double> q(row.size());
        scaler_.apply(row, q);
        std::vector<std::pair<double, std::size_t>> dist(x_.rows());
        for (std::size_t i = 0; i < x_.rows(); ++i) {
            double s = 0;
            const auto r = x_.row(i);
            for (std::size_t c = 0; c < q.size(); ++c) s += (r[c] - q[c]) * (r[c] - q[c]);
            dist[i] = {std::sqrt(s), i};
        }
        const std::size_t k = std::min(k_, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        double num = 0, den = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const double w = weighted_ ? 1.0 / (dist[j].first + 1e-12) : 1.0;
            num += w * y_[dist[j].second];
            den += w;
        }
        return num / den;
    }

    std::uint8_t kind() const override { return kKnn; }

    void save(BinaryWriter& w) const override {
        scaler_.save(w);
        w.u64(x_.rows());
        w.u64(x_.cols());
        w.f64s(x_.data());
        w.f64s(y_);
        w.u64(k_);
        w.u8(weighted_ ? 1 : 0);
    }

    static std::shared_ptr<const Regressor> load(BinaryReader& r) {
        auto scaler = Standardizer::load(r);
        const auto rows = r.size();
        const auto cols = r.size();
        FeatureMatrix x(rows, cols, r.f64s());
        auto y = r.f64s();
        const auto k = r.size();
        const bool weighted = r.u8() != 0;
        if (y.size() != rows || k == 0) throw FormatError("corrupt knn model");
        return std::make_shared<KnnRegressor>(std::move(scaler), std::move(x), std::move(y), k,
                                              weighted);
    }

private:
    Standardizer scaler_;
    FeatureMatrix x_;
    std::vector<double> y_;
    std::size_t k_;
    bool weighted_;
};

class ForestRegressor final : public Regressor {
public:
    explicit ForestRegressor(std::vector<RegressionTree> trees) : trees_(std::move(trees)) {}

    double predict_row(std::span<const double> row) const override {
        double s = 0;
        for (const auto& t : trees_) s += t.predict(row);
        return s / static_cast<double>(trees_.size());
    }

    std::uint8_t kind() const override { return kForest; }

    void save(BinaryWriter& w) const override {
        w.u64(trees_.size());
        for (const auto& t : trees_) t.save(w);
    }

    static std::shared_ptr<const Regressor> load(BinaryReader& r) {
        std::vector<RegressionTree> trees(r.size());
        if (trees.empty()) throw FormatError("forest without trees");
        for (auto& t : trees) t = RegressionTree::load(r);
        return std::make_shared<ForestRegressor>(std::move(trees));
    }

private:
    std::vector<RegressionTree> trees_;
};

template <typename Tree, std::uint8_t K>
class BoostedRegressor final : public Regressor {
public:
    BoostedRegressor(double base, double learning_rate, std::vector<Tree> trees)
        : base_(base), lr_(learning_rate), trees_(std::move(trees)) {}

    // Accumulates in the same order as training so the final training-set
    // prediction matches the last recorded training loss.
    double predict_row(std::span<const double> row) const override {
        double f = base_;
        for (const auto& t : trees_) f += lr_ * t.predict(row);
        return f;
    }

    std::uint8_t kind() const override { return K; }

    void save(BinaryWriter& w) const override {
        w.f64(base_);
        w.f64(lr_);
        w.u64(trees_.size());
        for (const auto& t : trees_) t.save(w);
    }

    static std::shared_ptr<const Regressor> load(BinaryReader& r) {
        const double base = r.f64();
        const double lr = r.f64();
        std::vector<Tree> trees(r.size());
        for (auto& t : trees) t = Tree::load(r);
        return std::make_shared<BoostedRegressor>(base, lr, std::move(trees));
    }

    const std::vector<Tree>& trees() const { return trees_; }

private:
    double base_;
    double lr_;
    std::vector<Tree> trees_;
};

using BoostedCart = BoostedRegressor<RegressionTree, kBoostedCart>;
using BoostedOblivious = BoostedRegressor<ObliviousTree, kBoostedOblivious>;

class MlpRegressor final : public Regressor {
public:
    MlpRegressor(MlpShape shape, std::vector<double> params, Standardizer scaler, double y_mean,
                 double y_scale)
        : shape_(shape),
          params_(std::move(params)),
          scaler_(std::move(scaler)),
          y_mean_(y_mean),
          y_scale_(y_scale) {}

    double predict_row(std::span<const double> row) const override {
        std::vector<double> q(row.size());
        scaler_.apply(row, q);
        return y_mean_ + y_scale_ * mlp_forward(params_, shape_, q);
    }

    std::uint8_t kind() const override { return kMlp; }

    void save(BinaryWriter& w) const override {
        w.u64(shape_.inputs);
        w.u64(shape_.hidden);
        w.f64s(params_);
        scaler_.save(w);
        w.f64(y_mean_);
        w.f64(y_scale_);
    }

    static std::shared_ptr<const Regressor> load(BinaryReader& r) {
        MlpShape shape;
        shape.inputs = r.size();
        shape.hidden = r.size();
        auto params = r.f64s();
        if (params.size() != shape.parameter_count()) throw FormatError("corrupt mlp model");
        auto scaler = Standardizer::load(r);
        const double m = r.f64();
        const double s = r.f64();
        return std::make_shared<MlpRegressor>(shape, std::move(params), std::move(scaler), m, s);
    }

private:
    MlpShape shape_;
    std::vector<double> params_;
    Standardizer scaler_;
    double y_mean_;
    double y_scale_;
};

// ---------------------------------------------------------------------------

std::size_t as_count(const ModelSpec& spec, const char* key) {
    return static_cast<std::size_t>(spec.param(key));
}

std::shared_ptr<const Regressor> fit_knn(const ModelSpec& spec, const TabularDataset& d,
                                         std::vector<std::string>& warnings) {
    std::size_t k = as_count(spec, "k");
    if (k > d.rows()) {
        warnings.push_back("k=" + std::to_string(k) + " exceeds " + std::to_string(d.rows()) +
                           " training rows; clamped");
        log_warning(family_id(spec.family) + ": " + warnings.back());
        k = d.rows();
    }
    auto scaler = spec.param("standardize") != 0 ? Standardizer::fit(d.features())
                                                 : Standardizer::identity(d.cols());
    return std::make_shared<KnnRegressor>(scaler, scaler.apply(d.features()), d.targets(), k,
                                          spec.family == Family::knn_distance);
}

std::shared_ptr<const Regressor> fit_forest(const ModelSpec& spec, const TabularDataset& d) {
    TreeOptions opt;
    opt.max_depth = as_count(spec, "max_depth");
    opt.min_samples_leaf = as_count(spec, "min_samples_leaf");
    opt.max_features = spec.param("max_features");
    opt.random_thresholds = spec.family == Family::extra_trees;
    const bool bootstrap = spec.param("bootstrap") != 0;
    const std::size_t n = d.rows();

    std::vector<RegressionTree> trees;
    const auto n_trees = as_count(spec, "n_trees");
    trees.reserve(n_trees);
    std::vector<std::size_t> rows(n);
    for (std::size_t t = 0; t < n_trees; ++t) {
        Rng rng(derive_seed(spec.seed, {t}));
        if (bootstrap) {
            for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        trees.push_back(RegressionTree::grow(d.features(), d.targets(), rows, opt, rng));
    }
    return std::make_shared<ForestRegressor>(std::move(trees));
}

double rmse_of(std::span<const double> y, std::span<const double> f) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

std::shared_ptr<const Regressor> fit_boosted(const ModelSpec& spec, const TabularDataset& d,
                                             std::vector<double>& history) {
    const auto& x = d.features();
    const auto& y = d.targets();
    const std::size_t n = d.rows();
    const double lr = spec.param("learning_rate");
    const auto n_trees = as_count(spec, "n_trees");

    double base = 0;
    for (double v : y) base += v;
    base /= static_cast<double>(n);

    std::vector<double> f(n, base), residual(n);
    history.assign(1, rmse_of(y, f));

    auto boost = [&](auto&& grow_tree) {
        using TreeT = decltype(grow_tree(std::size_t{0}));
        std::vector<TreeT> trees;
        trees.reserve(n_trees);
        for (std::size_t t = 0; t < n_trees; ++t) {
            for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - f[i];
            trees.push_back(grow_tree(t));
            for (std::size_t i = 0; i < n; ++i) f[i] += lr * trees.back().predict(x.row(i));
            history.push_back(rmse_of(y, f));
        }
        return trees;
    };

    if (spec.family == Family::gbt_oblivious) {
        ObliviousOptions opt;
        opt.depth = as_count(spec, "max_depth");
        opt.l2 = spec.param("l2");
        opt.max_borders = as_count(spec, "max_borders");
        const auto borders = oblivious_borders(x, opt.max_borders);
        auto trees = boost([&](std::size_t) { return ObliviousTree::grow(x, residual, borders, opt); });
        return std::make_shared<BoostedOblivious>(base, lr, std::move(trees));
    }

    TreeOptions opt;
    opt.max_depth = as_count(spec, "max_depth");
    opt.min_samples_leaf = as_count(spec, "min_samples_leaf");
    opt.l2 = spec.param("l2");
    opt.random_thresholds = spec.family == Family::gbt_xt;
    const double colsample = spec.param("colsample");
    const std::size_t p = d.cols();
    const std::size_t m =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(colsample * static_cast<double>(p))), 1, p);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});

    auto trees = boost([&](std::size_t t) {
        Rng rng(derive_seed(spec.seed, {t}));
        std::vector<std::size_t> feats(p);
        std::iota(feats.begin(), feats.end(), std::size_t{0});
        if (m < p) {
            rng.shuffle(std::span<std::size_t>(feats));
            feats.resize(m);
        }
        return RegressionTree::grow(x, residual, all, opt, rng, feats);
    });
    return std::make_shared<BoostedCart>(base, lr, std::move(trees));
}

std::shared_ptr<const Regressor> fit_mlp(const ModelSpec& spec, const TabularDataset& d) {
    const auto scaler = Standardizer::fit(d.features());
    const auto xs = scaler.apply(d.features());
    const std::size_t n = d.rows();

    double y_mean = 0;
    for (double v : d.targets()) y_mean += v;
    y_mean /= static_cast<double>(n);
    double y_var = 0;
    for (double v : d.targets()) y_var += (v - y_mean) * (v - y_mean);
    const double y_scale = y_var > 0 ? std::sqrt(y_var / static_cast<double>(n)) : 1.0;
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = (d.targets()[i] - y_mean) / y_scale;

    MlpShape shape{d.cols(), as_count(spec, "hidden")};
    std::vector<double> params(shape.parameter_count(), 0.0);
    Rng rng(derive_seed(spec.seed, {0x31}));
    const double a1 = std::sqrt(6.0 / static_cast<double>(shape.inputs));
    for (std::size_t i = 0; i < shape.hidden * shape.inputs; ++i)
        params[shape.w1_offset() + i] = rng.uniform(-a1, a1);
    for (std::size_t h = 0; h < shape.hidden; ++h) params[shape.b1_offset() + h] = 0.01;
    const double a2 = std::sqrt(6.0 / static_cast<double>(shape.hidden + 1));
    for (std::size_t h = 0; h < shape.hidden; ++h) params[shape.w2_offset() + h] = rng.uniform(-a2, a2);

    const auto epochs = as_count(spec, "epochs");
    const double lr0 = spec.param("learning_rate");
    const double momentum = spec.param("momentum");
    const double decay = spec.param("weight_decay");
    const bool cosine = spec.param("cosine_schedule") != 0;
    const std::size_t n_weights_1 = shape.hidden * shape.inputs;

    std::vector<double> velocity(params.size(), 0.0);
    for (std::size_t e = 0; e < epochs; ++e) {
        auto lg = mlp_loss_gradient(params, shape, xs, ys);
        const double lr =
            cosine ? lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(e) /
                                                 static_cast<double>(epochs)))
                   : lr0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const bool is_weight = i < n_weights_1 || (i >= shape.w2_offset() && i < shape.b2_offset());
            const double g = lg.gradient[i] + (is_weight ? decay * params[i] : 0.0);
            velocity[i] = momentum * velocity[i] - lr * g;
            params[i] += velocity[i];
        }
    }
    for (double v : params)
        if (!std::isfinite(v)) throw NumericError("mlp training diverged in output layer");
    return std::make_shared<MlpRegressor>(shape, std::move(params), scaler, y_mean, y_scale);
}

std::shared_ptr<const Regressor> load_regressor(std::uint8_t kind, BinaryReader& r) {
    switch (kind) {
        case kConstant: return ConstantRegressor::load(r);
        case kKnn: return KnnRegressor::load(r);
        case kForest: return ForestRegressor::load(r);
        case kBoostedCart: return BoostedCart::load(r);
        case kBoostedOblivious: return BoostedOblivious::load(r);
        case kMlp: return MlpRegressor::load(r);
        default: throw FormatError("unknown regressor kind " + std::to_string(kind));
    }
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<Family>& all_families() {
    static const std::vector<Family> f{
        Family::knn_uniform, Family::knn_distance, Family::random_forest, Family::extra_trees,
        Family::gbt_default, Family::gbt_xt,       Family::gbt_large,     Family::gbt_xgb,
        Family::gbt_oblivious, Family::mlp_a,      Family::mlp_b};
    return f;
}

std::string family_id(Family f) {
    switch (f) {
        case Family::knn_uniform: return "knn_uniform";
        case Family::knn_distance: return "knn_distance";
        case Family::random_forest: return "random_forest";
        case Family::extra_trees: return "extra_trees";
        case Family::gbt_default: return "gbt_default";
        case Family::gbt_xt: return "gbt_xt";
        case Family::gbt_large: return "gbt_large";
        case Family::gbt_xgb: return "gbt_xgb";
        case Family::gbt_oblivious: return "gbt_oblivious";
        case Family::mlp_a: return "mlp_a";
        case Family::mlp_b: return "mlp_b";
    }
    return "unknown";
}

Family parse_family(const std::string& id) {
    for (auto f : all_families())
        if (family_id(f) == id) return f;
    throw ConfigError("unknown model family '" + id + "'");
}

bool is_boosted(Family f) {
    return f == Family::gbt_default || f == Family::gbt_xt || f == Family::gbt_large ||
           f == Family::gbt_xgb || f == Family::gbt_oblivious;
}

bool is_forest(Family f) { return f == Family::random_forest || f == Family::extra_trees; }

Hyperparams default_hyperparams(Family f) {
    switch (f) {
        case Family::knn_uniform:
        case Family::knn_distance:
            return {{"k", 5}, {"standardize", 1}};
        case Family::random_forest:
            return {{"n_trees", 300}, {"max_depth", 64}, {"min_samples_leaf", 1},
                    {"max_features", 1.0}, {"bootstrap", 1}};
        case Family::extra_trees:
            return {{"n_trees", 300}, {"max_depth", 64}, {"min_samples_leaf", 1},
                    {"max_features", 1.0}, {"bootstrap", 0}};
        case Family::gbt_default:
            return {{"n_trees", 300}, {"learning_rate", 0.05}, {"max_depth", 4},
                    {"min_samples_leaf", 3}, {"l2", 0.0}, {"colsample", 1.0}};
        case Family::gbt_xt:
            return {{"n_trees", 300}, {"learning_rate", 0.05}, {"max_depth", 4},
                    {"min_samples_leaf", 3}, {"l2", 0.0}, {"colsample", 1.0}};
        case Family::gbt_large:
            return {{"n_trees", 600}, {"learning_rate", 0.03}, {"max_depth", 8},
                    {"min_samples_leaf", 2}, {"l2", 0.0}, {"colsample", 0.9}};
        case Family::gbt_xgb:
            return {{"n_trees", 300}, {"learning_rate", 0.1}, {"max_depth", 6},
                    {"min_samples_leaf", 1}, {"l2", 1.0}, {"colsample", 0.8}};
        case Family::gbt_oblivious:
            return {{"n_trees", 500}, {"learning_rate", 0.05}, {"max_depth", 6},
                    {"l2", 3.0}, {"max_borders", 64}};
        case Family::mlp_a:
            return {{"hidden", 32}, {"epochs", 1500}, {"learning_rate", 0.01},
                    {"momentum", 0.9}, {"weight_decay", 1e-4}, {"cosine_schedule", 0}};
        case Family::mlp_b:
            return {{"hidden", 64}, {"epochs", 1500}, {"learning_rate", 0.03},
                    {"momentum", 0.9}, {"weight_decay", 1e-4}, {"cosine_schedule", 1}};
    }
    return {};
}

ModelSpec ModelSpec::make(Family family, const Hyperparams& overrides, std::uint64_t seed) {
    ModelSpec s;
    s.family = family;
    s.hyperparams = default_hyperparams(family);
    for (const auto& [k, v] : overrides) s.hyperparams[k] = v;
    s.seed = seed;
    s.validate();
    return s;
}

void ModelSpec::validate() const {
    const auto rules = rules_for(family);
    for (const auto& [key, value] : hyperparams) {
        auto it = std::find_if(rules.begin(), rules.end(),
                               [&](const ParamRule& r) { return key == r.key; });
        if (it == rules.end())
            throw ConfigError(family_id(family) + ": unknown hyperparameter '" + key + "'");
        const bool below = it->lo_open ? !(value > it->lo) : !(value >= it->lo);
        if (!std::isfinite(value) || below || value > it->hi)
            throw ConfigError(family_id(family) + ": hyperparameter " + key + "=" +
                              std::to_string(value) + " out of range");
        if (it->integer && value != std::floor(value))
            throw ConfigError(family_id(family) + ": hyperparameter " + key + " must be an integer");
    }
    for (const auto& r : rules)
        if (!hyperparams.count(r.key))
            throw ConfigError(family_id(family) + ": missing hyperparameter '" + r.key + "'");
}

double ModelSpec::param(const std::string& key) const {
    auto it = hyperparams.find(key);
    if (it == hyperparams.end())
        throw ConfigError(family_id(family) + ": missing hyperparameter '" + key + "'");
    return it->second;
}

FittedModel::FittedModel(ModelSpec spec, std::shared_ptr<const Regressor> impl,
                         std::size_t n_features)
    : spec_(std::move(spec)), impl_(std::move(impl)), n_features_(n_features) {}

std::vector<double> FittedModel::predict(const FeatureMatrix& rows) const {
    if (!impl_) throw ContractError("predict on an unfitted model");
    if (rows.rows() > 0 && rows.cols() != n_features_)
        throw ShapeError("model expects " + std::to_string(n_features_) + " columns, got " +
                         std::to_string(rows.cols()));
    std::vector<double> out(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = impl_->predict_row(rows.row(i));
    return out;
}

void FittedModel::save(BinaryWriter& w) const {
    w.str(kMagic);
    w.u64(kFormatVersion);
    w.str(family_id(spec_.family));
    w.u64(spec_.hyperparams.size());
    for (const auto& [k, v] : spec_.hyperparams) {
        w.str(k);
        w.f64(v);
    }
    w.u64(spec_.seed);
    w.u64(n_features_);
    w.f64(train_time_s);
    w.f64s(training_rmse);
    w.u8(impl_->kind());
    impl_->save(w);
}

FittedModel FittedModel::load(BinaryReader& r) {
    if (r.str() != kMagic) throw FormatError("not a model blob");
    const auto version = r.u64();
    if (version != kFormatVersion)
        throw FormatError("unsupported model format version " + std::to_string(version));
    ModelSpec spec;
    spec.family = parse_family(r.str());
    const auto n_params = r.size(1024);
    for (std::size_t i = 0; i < n_params; ++i) {
        auto key = r.str();
        spec.hyperparams[key] = r.f64();
    }
    spec.seed = r.u64();
    const auto n_features = r.size();
    const double t = r.f64();
    auto history = r.f64s();
    const auto kind = r.u8();
    FittedModel m(std::move(spec), load_regressor(kind, r), n_features);
    m.train_time_s = t;
    m.training_rmse = std::move(history);
    return m;
}

void FittedModel::save(std::ostream& os) const {
    BinaryWriter w(os);
    save(w);
}

FittedModel FittedModel::load(std::istream& is) {
    BinaryReader r(is);
    return load(r);
}

FittedModel fit(const ModelSpec& spec, const TabularDataset& train) {
    spec.validate();
    if (train.empty()) throw ShapeError("cannot fit on an empty training set");
    const auto start = std::chrono::steady_clock::now();

    const auto& y = train.targets();
    const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });

    std::vector<std::string> warnings;
    std::vector<double> history;
    std::shared_ptr<const Regressor> impl;
    if (constant) {
        impl = std::make_shared<ConstantRegressor>(y.front());
    } else {
        switch (spec.family) {
            case Family::knn_uniform:
            case Family::knn_distance: impl = fit_knn(spec, train, warnings); break;
            case Family::random_forest:
            case Family::extra_trees: impl = fit_forest(spec, train); break;
            case Family::gbt_default:
            case Family::gbt_xt:
            case Family::gbt_large:
            case Family::gbt_xgb:
            case Family::gbt_oblivious: impl = fit_boosted(spec, train, history); break;
            case Family::mlp_a:
            case Family::mlp_b: impl = fit_mlp(spec, train); break;
        }
    }

    FittedModel m(spec, std::move(impl), train.cols());
    m.training_rmse = std::move(history);
    m.warnings = std::move(warnings);
    m.train_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
}

std::vector<double> predict(const FittedModel& model, const FeatureMatrix& rows) {
    return model.predict(rows);
}

}  // namespace compactml
