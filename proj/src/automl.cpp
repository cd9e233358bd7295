#include "compactml/automl.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "compactml/error.hpp"
#include "compactml/log.hpp"
#include "compactml/metrics.hpp"
#include "compactml/rng.hpp"

namespace compactml {
namespace {

constexpr char kBagSuffix[] = "_BAG_L1";
constexpr char kFullSuffix[] = "_FULL";

bool strip_suffix(std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size() || s.compare(s.size() - suffix.size(), suffix.size(), suffix) != 0)
        return false;
    s.erase(s.size() - suffix.size());
    return true;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// One trained base model, however it was wrapped.
struct Member {
    std::string name;
    PredictFn predict;
    std::vector<double> val_predictions;
    double train_time_s = 0;
};

}  // namespace

std::string to_string(Preset p) { return p == Preset::regular ? "regular" : "best_quality"; }

std::string to_string(Profile p) {
    return p == Profile::default_profile ? "default" : "multimodal";
}

RunConfig RunConfig::for_number(int config_no, std::uint64_t seed) {
    RunConfig c;
    c.config_no = config_no;
    c.seed = seed;
    switch (config_no) {
        case 1: c.preset = Preset::regular; c.profile = Profile::default_profile; break;
        case 2: c.preset = Preset::best_quality; c.profile = Profile::default_profile; break;
        case 3: c.preset = Preset::regular; c.profile = Profile::multimodal; break;
        case 4: c.preset = Preset::best_quality; c.profile = Profile::multimodal; break;
        default: throw ConfigError("config number must be 1..4, got " + std::to_string(config_no));
    }
    return c;
}

void RunConfig::validate() const {
    const auto expected = for_number(config_no, seed);
    if (expected.preset != preset || expected.profile != profile)
        throw ConfigError("config " + std::to_string(config_no) +
                          " does not match its preset/profile pair");
    if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test_fraction must lie in (0, 1)");
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must lie in (0, 1)");
    if (n_folds < 2) throw ConfigError("n_folds must be >= 2");
    if (ensemble_rounds < 1) throw ConfigError("ensemble_rounds must be >= 1");
    if (time_budget_s && !(*time_budget_s > 0)) throw ConfigError("time budget must be positive");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j{{"config_no", config_no},
                     {"preset", to_string(preset)},
                     {"profile", to_string(profile)},
                     {"seed", seed},
                     {"test_fraction", test_fraction},
                     {"n_folds", n_folds},
                     {"val_fraction", val_fraction},
                     {"ensemble_rounds", ensemble_rounds},
                     {"model_defaults_version", kDefaultsVersion}};
    j["time_budget_s"] = time_budget_s ? nlohmann::json(*time_budget_s) : nlohmann::json(nullptr);
    return j;
}

std::vector<ModelSpec> model_zoo_for(const RunConfig& config) {
    std::vector<Family> families;
    if (config.profile == Profile::default_profile) {
        families = all_families();
    } else {
        families = {Family::gbt_default, Family::gbt_xt,        Family::gbt_large,
                    Family::gbt_xgb,     Family::gbt_oblivious, Family::mlp_a};
    }
    std::vector<ModelSpec> zoo;
    for (auto f : families)
        zoo.push_back(ModelSpec::make(f, {}, derive_seed(config.seed, {0x200, static_cast<std::uint64_t>(f)})));
    return zoo;
}

std::string display_name(Family f) {
    switch (f) {
        case Family::knn_uniform: return "KNNUnif";
        case Family::knn_distance: return "KNNDist";
        case Family::random_forest: return "RandomForestMSE";
        case Family::extra_trees: return "ExtraTreesMSE";
        case Family::gbt_default: return "GBT";
        case Family::gbt_xt: return "GBTXT";
        case Family::gbt_large: return "GBTLarge";
        case Family::gbt_xgb: return "GBTXGB";
        case Family::gbt_oblivious: return "GBTOblivious";
        case Family::mlp_a: return "NeuralNetA";
        case Family::mlp_b: return "NeuralNetB";
    }
    return "Unknown";
}

std::string name_for(Family f, bool bagged, bool refit) {
    if (refit && !bagged) throw ContractError("a refit-full model must come from a bagged model");
    std::string name = display_name(f);
    if (bagged) name += kBagSuffix;
    if (refit) name += kFullSuffix;
    return name;
}

std::string ensemble_name(bool refit) {
    return refit ? std::string(kEnsembleName) + kFullSuffix : std::string(kEnsembleName);
}

ParsedName parse_model_name(const std::string& name) {
    ParsedName p;
    std::string base = name;
    p.refit = strip_suffix(base, kFullSuffix);
    if (base == kEnsembleName) return p;
    p.bagged = strip_suffix(base, kBagSuffix);
    if (p.refit && !p.bagged) throw ConfigError("model name '" + name + "' has _FULL without _BAG_L1");
    for (auto f : all_families())
        if (display_name(f) == base) {
            p.family = f;
            return p;
        }
    throw ConfigError("unrecognised model name '" + name + "'");
}

void sort_leaderboard(Leaderboard& board) {
    std::sort(board.begin(), board.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.test_score != b.test_score) return a.test_score > b.test_score;
        return a.model_name < b.model_name;
    });
}

double SealedTestSet::score(const PredictFn& predict) {
    for (auto& r : reads_) ++r;
    const auto pred = predict(data_.features());
    return r_squared(data_.targets(), pred).value;
}

std::size_t RunResult::successful_models() const {
    return static_cast<std::size_t>(std::count_if(
        manifest.models.begin(), manifest.models.end(),
        [](const ModelRecord& m) { return m.status == "ok"; }));
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json models_json = nlohmann::json::array();
    for (const auto& m : models) {
        nlohmann::json j{{"name", m.name},
                         {"family", m.family},
                         {"status", m.status},
                         {"on_leaderboard", m.on_leaderboard},
                         {"warnings", m.warnings}};
        if (m.status == "ok") {
            j["val_score"] = m.val_score;
            if (m.on_leaderboard) j["test_score"] = m.test_score;
            j["train_time_s"] = m.train_time_s;
        } else {
            j["error"] = m.error;
        }
        models_json.push_back(std::move(j));
    }
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << content_hash;
    return {{"format", "compactml-run"},
            {"format_version", 1},
            {"config", config},
            {"dataset",
             {{"source_rows", source_rows},
              {"removed_duplicates", removed_duplicates},
              {"rows", rows},
              {"columns", columns},
              {"target", target},
              {"content_hash", hash.str()}}},
            {"split",
             {{"train_indices", train_indices},
              {"test_indices", test_indices},
              {"validation_regime", validation_regime},
              {"val_indices", val_indices}}},
            {"models", models_json},
            {"ensemble",
             {{"members", ensemble_members},
              {"weights", ensemble_weights},
              {"selection_time_s", ensemble_selection_time_s},
              {"member_time_s", ensemble_member_time_s}}},
            {"test_row_reads", test_row_reads},
            {"timestamps", {{"started", started_at}, {"finished", finished_at}}}};
}

RunResult run(const RunConfig& config, const TabularDataset& input) {
    config.validate();
    RunResult result;
    auto& man = result.manifest;
    man.started_at = utc_now();
    man.config = config.to_json();
    const auto run_start = std::chrono::steady_clock::now();

    auto dedup = deduplicate(input);
    if (dedup.removed > 0)
        log_info("removed " + std::to_string(dedup.removed) + " duplicate rows");
    const TabularDataset& ds = dedup.dataset;
    man.source_rows = input.rows();
    man.removed_duplicates = dedup.removed;
    man.rows = ds.rows();
    man.columns = ds.column_names();
    man.target = ds.target_name();
    man.content_hash = ds.content_hash();

    SplitPlan plan{config.seed, config.test_fraction, config.n_folds};
    const auto split = split_indices(ds.rows(), plan);
    man.train_indices = split.train;
    man.test_indices = split.test;
    result.train = ds.subset(split.train);
    result.test = ds.subset(split.test);
    SealedTestSet sealed(result.test);
    const TabularDataset& train = result.train;

    const auto zoo = model_zoo_for(config);
    const bool bagged = config.bagged();
    const bool refit = config.refit();

    // Validation targets seen by the ensemble: a holdout slice of the
    // training partition, or every training row via out-of-fold predictions.
    TabularDataset fit_part, val_part;
    if (bagged) {
        man.validation_regime = "oof";
    } else {
        man.validation_regime = "holdout";
        const auto n_val = test_rows_for(train.rows(), config.val_fraction);
        if (n_val < 2 || n_val >= train.rows())
            throw ConfigError("training partition too small for a validation slice");
        Rng rng(derive_seed(config.seed, {0x7a1}));
        auto perm = rng.permutation(train.rows());
        std::vector<std::size_t> fit_idx(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_val));
        std::vector<std::size_t> val_idx(perm.end() - static_cast<std::ptrdiff_t>(n_val), perm.end());
        std::sort(fit_idx.begin(), fit_idx.end());
        std::sort(val_idx.begin(), val_idx.end());
        man.val_indices = val_idx;
        fit_part = train.subset(fit_idx);
        val_part = train.subset(val_idx);
    }
    const std::vector<double>& y_val = bagged ? train.targets() : val_part.targets();
    const std::uint64_t fold_seed = derive_seed(config.seed, {0xf0});

    std::vector<Member> members;
    bool out_of_time = false;
    for (const auto& spec : zoo) {
        ModelRecord rec;
        rec.family = family_id(spec.family);
        rec.name = name_for(spec.family, bagged, refit);
        if (!out_of_time && !members.empty() && config.time_budget_s &&
            seconds_since(run_start) > *config.time_budget_s)
            out_of_time = true;
        if (out_of_time) {
            rec.status = "skipped";
            rec.error = "time budget exhausted";
            man.models.push_back(rec);
            continue;
        }
        try {
            Member member;
            member.name = rec.name;
            if (!bagged) {
                auto model = fit(spec, fit_part);
                member.val_predictions = model.predict(val_part.features());
                rec.val_score = r_squared(y_val, member.val_predictions).value;
                rec.train_time_s = model.train_time_s;
                rec.warnings = model.warnings;
                member.predict = predictor_of(model);
                ModelArtifact art{rec.name, ArtifactKind::single, model, {}, {}, {}};
                result.artifacts.push_back(std::move(art));
            } else {
                auto bag = bag_fit(spec, train, config.n_folds, fold_seed);
                member.val_predictions = bag.oof_predictions;
                rec.val_score = bag.val_score;
                rec.train_time_s = bag.train_time_s;
                for (const auto& fm : bag.fold_models)
                    rec.warnings.insert(rec.warnings.end(), fm.warnings.begin(), fm.warnings.end());
                const auto bag_name = name_for(spec.family, true, false);
                if (refit) {
                    auto full = refit_full(bag, train, bag_name);
                    rec.val_score = full.inherited_val_score;
                    rec.train_time_s = full.model.train_time_s;
                    member.predict = predictor_of(full.model);
                    result.artifacts.push_back({rec.name, ArtifactKind::single, full.model, {}, {}, {}});
                    // The bagged source is kept alongside but is not a leaderboard row.
                    ModelRecord src;
                    src.name = bag_name;
                    src.family = rec.family;
                    src.status = "ok";
                    src.val_score = bag.val_score;
                    src.train_time_s = bag.train_time_s;
                    src.test_score = 0;
                    result.predictors[bag_name] = [b = bag](const FeatureMatrix& x) { return b.predict(x); };
                    result.artifacts.push_back(
                        {bag_name, ArtifactKind::bagged, {}, bag, {}, bag.oof_predictions});
                    man.models.push_back(src);
                } else {
                    member.predict = [b = bag](const FeatureMatrix& x) { return b.predict(x); };
                    result.artifacts.push_back(
                        {rec.name, ArtifactKind::bagged, {}, bag, {}, bag.oof_predictions});
                }
            }
            member.train_time_s = rec.train_time_s;
            rec.test_score = sealed.score(member.predict);
            rec.status = "ok";
            rec.on_leaderboard = true;
            result.predictors[rec.name] = member.predict;
            members.push_back(std::move(member));
        } catch (const Error& e) {
            rec.status = "failed";
            rec.error = e.what();
            log_warning(rec.name + " failed: " + e.what());
        }
        man.models.push_back(std::move(rec));
    }

    if (!members.empty()) {
        ModelRecord rec;
        rec.name = ensemble_name(refit);
        try {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<std::vector<double>> preds;
            std::vector<std::string> names;
            for (const auto& m : members) {
                preds.push_back(m.val_predictions);
                names.push_back(m.name);
            }
            auto ens = greedy_weighted_ensemble(preds, y_val, config.ensemble_rounds, names);
            man.ensemble_selection_time_s = seconds_since(t0);
            for (std::size_t i = 0; i < members.size(); ++i)
                if (ens.weights[i] > 0) man.ensemble_member_time_s += members[i].train_time_s;
            man.ensemble_members = ens.member_names;
            man.ensemble_weights = ens.weights;

            std::vector<PredictFn> fns;
            for (const auto& m : members) fns.push_back(m.predict);
            PredictFn blend = [ens, fns](const FeatureMatrix& x) {
                std::vector<std::vector<double>> p(fns.size());
                for (std::size_t i = 0; i < fns.size(); ++i)
                    if (ens.weights[i] > 0) p[i] = fns[i](x);
                    else p[i].assign(x.rows(), 0.0);
                return ens.blend(p);
            };
            rec.val_score = ens.val_score;
            rec.train_time_s = man.ensemble_selection_time_s + man.ensemble_member_time_s;
            rec.test_score = sealed.score(blend);
            rec.status = "ok";
            rec.on_leaderboard = true;
            result.predictors[rec.name] = blend;
            result.artifacts.push_back({rec.name, ArtifactKind::ensemble, {}, {}, ens, {}});
        } catch (const Error& e) {
            rec.status = "failed";
            rec.error = e.what();
            log_warning(rec.name + " failed: " + e.what());
        }
        man.models.push_back(std::move(rec));
    }

    for (const auto& m : man.models)
        if (m.on_leaderboard)
            result.leaderboard.push_back({m.name, m.test_score, m.val_score, m.train_time_s});
    sort_leaderboard(result.leaderboard);
    man.test_row_reads = sealed.reads();
    man.finished_at = utc_now();
    return result;
}

}  // namespace compactml
