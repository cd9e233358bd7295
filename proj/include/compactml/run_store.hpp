#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "compactml/automl.hpp"
#include "compactml/importance.hpp"

namespace compactml {

// Run directory layout:
//   manifest.json          config echo, dataset fingerprint, split, records
//   leaderboard.tsv        model, test_score, val_score
//   timings.tsv            model, train_time_s (wall clock, not reproducible)
//   models/<name>.bin      one blob per trained model
//   oof/<name>.csv         out-of-fold predictions (bagged runs)
//   data/partitions.json   exact train/test partitions
namespace run_files {
inline constexpr char kManifest[] = "manifest.json";
inline constexpr char kLeaderboard[] = "leaderboard.tsv";
inline constexpr char kTimings[] = "timings.tsv";
inline constexpr char kPartitions[] = "data/partitions.json";
inline constexpr char kImportance[] = "importance.tsv";
inline constexpr char kImportanceDrops[] = "importance_drops.json";
inline constexpr char kReportTrain[] = "report_train.csv";
inline constexpr char kReportTest[] = "report_test.csv";
}  // namespace run_files

// Writes text to path via a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Populates dir (which must not exist yet) with the artifacts of a run.
void write_run_contents(const RunResult& result, const nlohmann::json& manifest,
                        const std::filesystem::path& dir);

// Builds the whole run under a temporary sibling and renames it into place,
// replacing any previous run at out.
void commit_directory(const std::filesystem::path& staging, const std::filesystem::path& out);

nlohmann::json importance_drops_json(const std::string& model, std::uint64_t seed,
                                     const std::vector<ImportanceRow>& rows);

class RunDirectory {
public:
    explicit RunDirectory(std::filesystem::path dir);

    const std::filesystem::path& path() const noexcept { return dir_; }
    const nlohmann::json& manifest() const noexcept { return manifest_; }
    std::uint64_t seed() const;

    std::vector<std::string> model_names() const;
    bool has_model(const std::string& name) const;

    // Ensembles resolve their members from the same directory.
    PredictFn load_predictor(const std::string& name) const;

    TabularDataset train() const { return partition("train"); }
    TabularDataset test() const { return partition("test"); }

private:
    TabularDataset partition(const std::string& which) const;

    std::filesystem::path dir_;
    nlohmann::json manifest_;
};

}  // namespace compactml
