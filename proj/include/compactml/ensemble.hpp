#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "compactml/dataset.hpp"
#include "compactml/models.hpp"

namespace compactml {

// Anything that maps a feature matrix to one prediction per row.
using PredictFn = std::function<std::vector<double>(const FeatureMatrix&)>;

PredictFn predictor_of(FittedModel model);

// k fold models plus the out-of-fold predictions that score them.
struct BaggedModel {
    ModelSpec spec;
    std::vector<Fold> folds;
    std::vector<FittedModel> fold_models;
    std::vector<double> oof_predictions;  // aligned with training rows
    double val_score = 0;                 // R^2 of oof_predictions
    double train_time_s = 0;              // sum over fold fits

    std::vector<double> predict(const FeatureMatrix& rows) const;

    void save(std::ostream& os) const;
    static BaggedModel load(std::istream& is);
};

// Fold f trains on every row outside holdout f and predicts holdout f.
// The fold assignment depends only on (rows, k, seed).
BaggedModel bag_fit(const ModelSpec& spec, const TabularDataset& train, std::size_t k,
                    std::uint64_t seed);

// Mean of the fold models' predictions.
std::vector<double> bag_predict(const BaggedModel& b, const FeatureMatrix& rows);

struct RefitFullModel {
    std::string source_name;
    FittedModel model;
    double inherited_val_score = 0;
};

// Single refit on all training rows; the validation score is copied from the
// bagged source, never recomputed.
RefitFullModel refit_full(const BaggedModel& b, const TabularDataset& train,
                          const std::string& source_name = {});

struct WeightedEnsemble {
    std::vector<std::string> member_names;
    std::vector<double> weights;              // one per member, on the simplex
    std::vector<std::size_t> selection_order; // member index chosen each round
    double val_score = 0;

    std::vector<double> blend(const std::vector<std::vector<double>>& member_preds) const;

    void save(std::ostream& os) const;
    static WeightedEnsemble load(std::istream& is);
};

// Forward selection with replacement: each round adds the member whose
// inclusion maximises blended R^2; stops when nothing strictly improves or
// after max_rounds. Weights are selection counts over total selections.
// member_preds is member-major: member_preds[m][i].
WeightedEnsemble greedy_weighted_ensemble(const std::vector<std::vector<double>>& member_preds,
                                          std::span<const double> y_val, std::size_t max_rounds,
                                          std::vector<std::string> member_names = {});

}  // namespace compactml
