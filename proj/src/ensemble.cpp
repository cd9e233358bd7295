#include "compactml/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "compactml/binary_io.hpp"
#include "compactml/error.hpp"
#include "compactml/metrics.hpp"
#include "compactml/rng.hpp"

namespace compactml {
namespace {

constexpr char kBagMagic[] = "CMLBAG";
constexpr char kEnsembleMagic[] = "CMLENS";
constexpr std::uint64_t kVersion = 1;

void write_indices(BinaryWriter& w, const std::vector<std::size_t>& v) {
    w.u64(v.size());
    for (auto i : v) w.u64(i);
}

std::vector<std::size_t> read_indices(BinaryReader& r) {
    std::vector<std::size_t> v(r.size());
    for (auto& i : v) i = r.size();
    return v;
}

}  // namespace

PredictFn predictor_of(FittedModel model) {
    return [m = std::move(model)](const FeatureMatrix& x) { return m.predict(x); };
}

BaggedModel bag_fit(const ModelSpec& spec, const TabularDataset& train, std::size_t k,
                    std::uint64_t seed) {
    BaggedModel b;
    b.spec = spec;
    b.folds = kfold_plan(train.rows(), k, seed);
    b.oof_predictions.assign(train.rows(), 0.0);
    for (std::size_t f = 0; f < b.folds.size(); ++f) {
        const auto& fold = b.folds[f];
        ModelSpec fold_spec = spec;
        fold_spec.seed = derive_seed(spec.seed, {0xba9, f});
        auto model = fit(fold_spec, train.subset(fold.train));
        const auto pred = model.predict(train.features().select_rows(fold.holdout));
        for (std::size_t i = 0; i < fold.holdout.size(); ++i)
            b.oof_predictions[fold.holdout[i]] = pred[i];
        b.train_time_s += model.train_time_s;
        b.fold_models.push_back(std::move(model));
    }
    b.val_score = r_squared(train.targets(), b.oof_predictions).value;
    return b;
}

std::vector<double> BaggedModel::predict(const FeatureMatrix& rows) const {
    if (fold_models.empty()) throw ContractError("bagged model has no fold models");
    std::vector<double> out(rows.rows(), 0.0);
    for (const auto& m : fold_models) {
        const auto p = m.predict(rows);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
    }
    for (auto& v : out) v /= static_cast<double>(fold_models.size());
    return out;
}

std::vector<double> bag_predict(const BaggedModel& b, const FeatureMatrix& rows) {
    return b.predict(rows);
}

void BaggedModel::save(std::ostream& os) const {
    BinaryWriter w(os);
    w.str(kBagMagic);
    w.u64(kVersion);
    w.u64(fold_models.size());
    for (std::size_t f = 0; f < fold_models.size(); ++f) {
        write_indices(w, folds[f].train);
        write_indices(w, folds[f].holdout);
        fold_models[f].save(w);
    }
    w.f64s(oof_predictions);
    w.f64(val_score);
    w.f64(train_time_s);
}

BaggedModel BaggedModel::load(std::istream& is) {
    BinaryReader r(is);
    if (r.str() != kBagMagic) throw FormatError("not a bagged-model blob");
    if (r.u64() != kVersion) throw FormatError("unsupported bagged-model version");
    BaggedModel b;
    const auto k = r.size(1 << 20);
    for (std::size_t f = 0; f < k; ++f) {
        Fold fold;
        fold.train = read_indices(r);
        fold.holdout = read_indices(r);
        b.folds.push_back(std::move(fold));
        b.fold_models.push_back(FittedModel::load(r));
    }
    if (b.fold_models.empty()) throw FormatError("bagged model without folds");
    b.spec = b.fold_models.front().spec();
    b.oof_predictions = r.f64s();
    b.val_score = r.f64();
    b.train_time_s = r.f64();
    return b;
}

RefitFullModel refit_full(const BaggedModel& b, const TabularDataset& train,
                          const std::string& source_name) {
    RefitFullModel out;
    out.source_name = source_name;
    out.model = fit(b.spec, train);
    out.inherited_val_score = b.val_score;
    return out;
}

std::vector<double> WeightedEnsemble::blend(
    const std::vector<std::vector<double>>& member_preds) const {
    if (member_preds.size() != weights.size())
        throw ShapeError("ensemble blend: member count does not match weights");
    const std::size_t n = member_preds.empty() ? 0 : member_preds.front().size();
    std::vector<double> out(n, 0.0);
    for (std::size_t m = 0; m < weights.size(); ++m) {
        if (weights[m] == 0.0) continue;
        if (member_preds[m].size() != n) throw ShapeError("ensemble blend: ragged predictions");
        for (std::size_t i = 0; i < n; ++i) out[i] += weights[m] * member_preds[m][i];
    }
    return out;
}

WeightedEnsemble greedy_weighted_ensemble(const std::vector<std::vector<double>>& member_preds,
                                          std::span<const double> y_val, std::size_t max_rounds,
                                          std::vector<std::string> member_names) {
    if (member_preds.empty()) throw ConfigError("ensemble needs at least one member");
    if (max_rounds < 1) throw ConfigError("ensemble max_rounds must be >= 1");
    const std::size_t m = member_preds.size();
    const std::size_t n = y_val.size();
    for (const auto& p : member_preds)
        if (p.size() != n) throw ShapeError("member prediction length does not match targets");
    if (!member_names.empty() && member_names.size() != m)
        throw ShapeError("member name count does not match member count");

    std::vector<double> running(n, 0.0);
    std::vector<double> trial(n);
    std::vector<std::size_t> counts(m, 0);
    WeightedEnsemble e;
    double current = -std::numeric_limits<double>::infinity();
    for (std::size_t round = 0; round < max_rounds; ++round) {
        const double size = static_cast<double>(e.selection_order.size() + 1);
        std::size_t best = m;
        double best_score = current;
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = (running[i] + member_preds[j][i]) / size;
            const double s = r2_value(y_val, trial);
            if (s > best_score) {
                best_score = s;
                best = j;
            }
        }
        if (best == m) break;
        for (std::size_t i = 0; i < n; ++i) running[i] += member_preds[best][i];
        ++counts[best];
        e.selection_order.push_back(best);
        current = best_score;
    }
    // Round one always selects: any finite score beats -inf.
    const double total = static_cast<double>(e.selection_order.size());
    e.weights.resize(m);
    for (std::size_t j = 0; j < m; ++j) e.weights[j] = static_cast<double>(counts[j]) / total;
    e.member_names = std::move(member_names);
    e.val_score = r2_value(y_val, e.blend(member_preds));
    return e;
}

void WeightedEnsemble::save(std::ostream& os) const {
    BinaryWriter w(os);
    w.str(kEnsembleMagic);
    w.u64(kVersion);
    w.u64(member_names.size());
    for (const auto& s : member_names) w.str(s);
    w.f64s(weights);
    write_indices(w, selection_order);
    w.f64(val_score);
}

WeightedEnsemble WeightedEnsemble::load(std::istream& is) {
    BinaryReader r(is);
    if (r.str() != kEnsembleMagic) throw FormatError("not an ensemble blob");
    if (r.u64() != kVersion) throw FormatError("unsupported ensemble version");
    WeightedEnsemble e;
    e.member_names.resize(r.size(1 << 16));
    for (auto& s : e.member_names) s = r.str();
    e.weights = r.f64s();
    e.selection_order = read_indices(r);
    e.val_score = r.f64();
    if (e.weights.size() != e.member_names.size()) throw FormatError("corrupt ensemble blob");
    return e;
}

}  // namespace compactml
