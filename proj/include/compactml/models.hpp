#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "compactml/binary_io.hpp"
#include "compactml/dataset.hpp"
#include "compactml/matrix.hpp"

namespace compactml {

enum class Family {
    knn_uniform,
    knn_distance,
    random_forest,
    extra_trees,
    gbt_default,
    gbt_xt,
    gbt_large,
    gbt_xgb,
    gbt_oblivious,
    mlp_a,
    mlp_b,
};

const std::vector<Family>& all_families();
std::string family_id(Family f);  // "gbt_xgb"
Family parse_family(const std::string& id);
bool is_boosted(Family f);
bool is_forest(Family f);

using Hyperparams = std::map<std::string, double>;

// Versioned defaults; see docs/model_defaults.md.
inline constexpr int kDefaultsVersion = 1;
Hyperparams default_hyperparams(Family f);

struct ModelSpec {
    Family family = Family::knn_uniform;
    Hyperparams hyperparams;
    std::uint64_t seed = 0;

    // Defaults for the family with overrides applied, validated.
    static ModelSpec make(Family family, const Hyperparams& overrides = {},
                          std::uint64_t seed = 0);

    // Throws ConfigError on unknown keys or out-of-range values.
    void validate() const;

    double param(const std::string& key) const;

    bool operator==(const ModelSpec&) const = default;
};

// Learned state behind FittedModel.
class Regressor {
public:
    virtual ~Regressor() = default;
    virtual double predict_row(std::span<const double> row) const = 0;
    virtual std::uint8_t kind() const = 0;
    virtual void save(BinaryWriter& w) const = 0;
};

class FittedModel {
public:
    FittedModel() = default;
    FittedModel(ModelSpec spec, std::shared_ptr<const Regressor> impl, std::size_t n_features);

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t n_features() const noexcept { return n_features_; }
    const Regressor& regressor() const { return *impl_; }

    // Throws ShapeError on column mismatch.
    std::vector<double> predict(const FeatureMatrix& rows) const;

    double train_time_s = 0;
    // Per-round training RMSE for boosted families (index 0 = initial constant).
    std::vector<double> training_rmse;
    std::vector<std::string> warnings;

    void save(BinaryWriter& w) const;
    static FittedModel load(BinaryReader& r);
    void save(std::ostream& os) const;
    static FittedModel load(std::istream& is);

private:
    ModelSpec spec_;
    std::shared_ptr<const Regressor> impl_;
    std::size_t n_features_ = 0;
};

FittedModel fit(const ModelSpec& spec, const TabularDataset& train);
std::vector<double> predict(const FittedModel& model, const FeatureMatrix& rows);

}  // namespace compactml
