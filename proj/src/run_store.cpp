#include "compactml/run_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "compactml/binary_io.hpp"
#include "compactml/error.hpp"
#include "compactml/report.hpp"

namespace fs = std::filesystem;

namespace compactml {
namespace {

void write_binary(const fs::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("cannot write " + path.string());
}

nlohmann::json partition_json(const TabularDataset& d, const std::vector<std::size_t>& source_rows) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        auto r = d.features().row(i);
        rows.emplace_back(r.begin(), r.end());
    }
    return {{"source_rows", source_rows}, {"features", rows}, {"targets", d.targets()}};
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp-" + std::to_string(::getpid());
    write_binary(tmp, content);
    fs::rename(tmp, path);
}

void write_run_contents(const RunResult& result, const nlohmann::json& manifest, const fs::path& dir) {
    fs::create_directories(dir / "models");
    fs::create_directories(dir / "data");
    for (const auto& art : result.artifacts) {
        std::ostringstream os(std::ios::binary);
        switch (art.kind) {
            case ArtifactKind::single: art.single->save(os); break;
            case ArtifactKind::bagged: art.bagged->save(os); break;
            case ArtifactKind::ensemble: art.ensemble->save(os); break;
        }
        write_binary(dir / "models" / (art.name + ".bin"), os.str());
        if (art.oof) {
            fs::create_directories(dir / "oof");
            std::string csv = "row,target,oof_prediction\n";
            for (std::size_t i = 0; i < art.oof->size(); ++i)
                csv += std::to_string(i) + ',' + format_number(result.train.targets()[i]) + ',' +
                       format_number((*art.oof)[i]) + '\n';
            write_binary(dir / "oof" / (art.name + ".csv"), csv);
        }
    }
    const auto& m = result.manifest;
    nlohmann::json parts{{"columns", result.train.column_names()},
                         {"target", result.train.target_name()},
                         {"train", partition_json(result.train, m.train_indices)},
                         {"test", partition_json(result.test, m.test_indices)}};
    write_binary(dir / run_files::kPartitions, parts.dump(1) + "\n");
    write_binary(dir / run_files::kLeaderboard, leaderboard_tsv(result.leaderboard));
    write_binary(dir / run_files::kTimings, timings_tsv(result.leaderboard));
    write_binary(dir / run_files::kManifest, manifest.dump(2) + "\n");
}

void commit_directory(const fs::path& staging, const fs::path& out) {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    if (fs::exists(out)) {
        const fs::path old = out.string() + ".old-" + std::to_string(::getpid());
        fs::rename(out, old);
        fs::rename(staging, out);
        fs::remove_all(old);
    } else {
        fs::rename(staging, out);
    }
}

nlohmann::json importance_drops_json(const std::string& model, std::uint64_t seed,
                                     const std::vector<ImportanceRow>& rows) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& r : rows) features.push_back({{"feature", r.feature}, {"drops", r.drops}});
    return {{"model", model}, {"eval_split", "test"}, {"seed", seed}, {"features", features}};
}

RunDirectory::RunDirectory(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::is_directory(dir_)) throw InputError("run directory " + dir_.string() + " not found");
    try {
        manifest_ = nlohmann::json::parse(read_text(dir_ / run_files::kManifest));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("unreadable manifest: " + std::string(e.what()));
    }
}

std::uint64_t RunDirectory::seed() const { return manifest_.at("config").at("seed").get<std::uint64_t>(); }

std::vector<std::string> RunDirectory::model_names() const {
    std::vector<std::string> names;
    if (!fs::is_directory(dir_ / "models")) return names;
    for (const auto& e : fs::directory_iterator(dir_ / "models"))
        if (e.path().extension() == ".bin") names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

bool RunDirectory::has_model(const std::string& name) const {
    const auto names = model_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

PredictFn RunDirectory::load_predictor(const std::string& name) const {
    if (!has_model(name)) throw ConfigError("unknown model '" + name + "'");
    const auto bytes = read_text(dir_ / "models" / (name + ".bin"));
    std::string magic;
    {
        std::istringstream peek(bytes);
        BinaryReader r(peek);
        magic = r.str();
    }
    std::istringstream is(bytes);
    if (magic == "CMLMODEL") return predictor_of(FittedModel::load(is));
    if (magic == "CMLBAG") {
        auto b = BaggedModel::load(is);
        return [b = std::move(b)](const FeatureMatrix& x) { return b.predict(x); };
    }
    if (magic == "CMLENS") {
        auto e = WeightedEnsemble::load(is);
        std::vector<PredictFn> members;
        for (std::size_t i = 0; i < e.member_names.size(); ++i)
            members.push_back(e.weights[i] > 0 ? load_predictor(e.member_names[i]) : PredictFn{});
        return [e = std::move(e), members](const FeatureMatrix& x) {
            std::vector<std::vector<double>> p(members.size());
            for (std::size_t i = 0; i < members.size(); ++i)
                p[i] = members[i] ? members[i](x) : std::vector<double>(x.rows(), 0.0);
            return e.blend(p);
        };
    }
    throw FormatError("model file for '" + name + "' has an unknown format");
}

TabularDataset RunDirectory::partition(const std::string& which) const {
    try {
        const auto j = nlohmann::json::parse(read_text(dir_ / run_files::kPartitions));
        const auto columns = j.at("columns").get<std::vector<std::string>>();
        const auto rows = j.at(which).at("features").get<std::vector<std::vector<double>>>();
        auto targets = j.at(which).at("targets").get<std::vector<double>>();
        return TabularDataset(columns, FeatureMatrix::from_rows(rows, columns.size()),
                              j.at("target").get<std::string>(), std::move(targets));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("unreadable partitions file: " + std::string(e.what()));
    }
}

}  // namespace compactml
