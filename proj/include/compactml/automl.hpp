#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "compactml/dataset.hpp"
#include "compactml/ensemble.hpp"
#include "compactml/models.hpp"

namespace compactml {

enum class Preset { regular, best_quality };
enum class Profile { default_profile, multimodal };

std::string to_string(Preset p);
std::string to_string(Profile p);

// One of the four run configurations:
//   1 = (regular, default)        2 = (best_quality, default)
//   3 = (regular, multimodal)     4 = (best_quality, multimodal)
struct RunConfig {
    int config_no = 1;
    Preset preset = Preset::regular;
    Profile profile = Profile::default_profile;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    std::size_t n_folds = 5;
    std::optional<double> time_budget_s;

    // Fraction of the training partition held out for validation in regular
    // (non-bagged) runs.
    double val_fraction = 0.2;
    std::size_t ensemble_rounds = 25;

    static RunConfig for_number(int config_no, std::uint64_t seed);
    bool bagged() const noexcept { return preset == Preset::best_quality; }
    bool refit() const noexcept { return config_no == 4; }
    void validate() const;
    nlohmann::json to_json() const;
};

std::vector<ModelSpec> model_zoo_for(const RunConfig& config);

inline constexpr char kEnsembleName[] = "WeightedEnsemble_L2";

std::string display_name(Family f);  // "GBTXGB"
std::string name_for(Family f, bool bagged, bool refit);
std::string ensemble_name(bool refit);

struct ParsedName {
    std::optional<Family> family;  // empty for the weighted ensemble
    bool bagged = false;
    bool refit = false;
};

ParsedName parse_model_name(const std::string& name);

struct LeaderboardRow {
    std::string model_name;
    double test_score = 0;
    double val_score = 0;
    double train_time_s = 0;
};

using Leaderboard = std::vector<LeaderboardRow>;

// test_score descending, ties by name ascending.
void sort_leaderboard(Leaderboard& board);

// Read-only view of the test partition that counts row reads. The only way
// in is score(), which predicts every row once.
class SealedTestSet {
public:
    explicit SealedTestSet(TabularDataset data)
        : data_(std::move(data)), reads_(data_.rows(), 0) {}

    double score(const PredictFn& predict);
    const std::vector<std::size_t>& reads() const noexcept { return reads_; }
    std::size_t rows() const noexcept { return data_.rows(); }

private:
    TabularDataset data_;
    std::vector<std::size_t> reads_;
};

// How a persisted model is stored in the run directory.
enum class ArtifactKind { single, bagged, ensemble };

struct ModelArtifact {
    std::string name;
    ArtifactKind kind = ArtifactKind::single;
    std::optional<FittedModel> single;
    std::optional<BaggedModel> bagged;
    std::optional<WeightedEnsemble> ensemble;
    std::optional<std::vector<double>> oof;  // bagged runs only
};

struct ModelRecord {
    std::string name;
    std::string family;  // empty for the ensemble
    std::string status;  // "ok", "failed", "skipped"
    std::string error;
    double val_score = 0;
    double test_score = 0;
    double train_time_s = 0;
    std::vector<std::string> warnings;
    bool on_leaderboard = false;
};

struct RunManifest {
    nlohmann::json config;
    std::size_t source_rows = 0;
    std::size_t removed_duplicates = 0;
    std::size_t rows = 0;
    std::vector<std::string> columns;
    std::string target;
    std::uint64_t content_hash = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::vector<std::size_t> val_indices;  // into the training partition; regular runs only
    std::string validation_regime;          // "holdout" or "oof"
    std::vector<ModelRecord> models;
    std::vector<std::string> ensemble_members;
    std::vector<double> ensemble_weights;
    double ensemble_selection_time_s = 0;
    double ensemble_member_time_s = 0;
    std::vector<std::size_t> test_row_reads;
    std::string started_at;
    std::string finished_at;

    nlohmann::json to_json() const;
};

struct RunResult {
    Leaderboard leaderboard;
    RunManifest manifest;
    TabularDataset train;
    TabularDataset test;
    std::vector<ModelArtifact> artifacts;
    std::map<std::string, PredictFn> predictors;  // keyed by model name

    std::size_t successful_models() const;
};

// Deduplicates, splits, trains the zoo for the configuration, fits the
// weighted ensemble on validation predictions, and scores everything once on
// the held-out test partition. Model failures are recorded, not thrown.
RunResult run(const RunConfig& config, const TabularDataset& ds);

}  // namespace compactml
