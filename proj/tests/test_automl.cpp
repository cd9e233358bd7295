#include <doctest.h>

#include <algorithm>
#include <set>

#include "compactml/automl.hpp"
#include "compactml/error.hpp"
#include "compactml/metrics.hpp"
#include "test_helpers.hpp"

using namespace compactml;

namespace {

const TabularDataset& soils() {
    static const TabularDataset ds = to_dataset(testing::synthetic_soils(115, 21), Target::omc);
    return ds;
}

const RunResult& run_for(int config_no) {
    static std::map<int, RunResult> cache;
    auto it = cache.find(config_no);
    if (it == cache.end()) it = cache.emplace(config_no, run(RunConfig::for_number(config_no, 7), soils())).first;
    return it->second;
}

std::set<std::string> names(const Leaderboard& b) {
    std::set<std::string> s;
    for (const auto& r : b) s.insert(r.model_name);
    return s;
}

}  // namespace

TEST_CASE("configuration table") {
    const int nos[] = {1, 2, 3, 4};
    const Preset presets[] = {Preset::regular, Preset::best_quality, Preset::regular,
                              Preset::best_quality};
    const Profile profiles[] = {Profile::default_profile, Profile::default_profile,
                                Profile::multimodal, Profile::multimodal};
    for (int i = 0; i < 4; ++i) {
        const auto c = RunConfig::for_number(nos[i], 1);
        CHECK(c.preset == presets[i]);
        CHECK(c.profile == profiles[i]);
    }
    CHECK_THROWS_AS(RunConfig::for_number(5, 1), ConfigError);
    CHECK(model_zoo_for(RunConfig::for_number(1, 1)).size() == 11);
    CHECK(model_zoo_for(RunConfig::for_number(3, 1)).size() == 6);
}

TEST_CASE("model names round trip") {
    for (auto f : all_families())
        for (bool bag : {false, true})
            for (bool refit : {false, true}) {
                if (refit && !bag) {
                    CHECK_THROWS_AS(name_for(f, bag, refit), ContractError);
                    continue;
                }
                const auto p = parse_model_name(name_for(f, bag, refit));
                CHECK(p.family == f);
                CHECK(p.bagged == bag);
                CHECK(p.refit == refit);
            }
    CHECK(name_for(Family::random_forest, true, false) == "RandomForestMSE_BAG_L1");
    CHECK(name_for(Family::gbt_xgb, true, true) == "GBTXGB_BAG_L1_FULL");
    CHECK(ensemble_name(true) == "WeightedEnsemble_L2_FULL");
    CHECK_FALSE(parse_model_name("WeightedEnsemble_L2").family.has_value());
    CHECK_THROWS_AS(parse_model_name("XGBoost"), ConfigError);
}

TEST_CASE("sealed test set counts reads") {
    SealedTestSet sealed(soils().subset(std::vector<std::size_t>{0, 1, 2, 3}));
    const PredictFn f = [](const FeatureMatrix& x) { return x.column(0); };
    sealed.score(f);
    sealed.score(f);
    CHECK(sealed.reads() == std::vector<std::size_t>{2, 2, 2, 2});
}

TEST_CASE("leaderboard structure per configuration") {
    SUBCASE("config 1: 11 base rows plus the ensemble") {
        const auto& r = run_for(1);
        CHECK(r.leaderboard.size() == 12);
        CHECK(names(r.leaderboard).count("WeightedEnsemble_L2") == 1);
        for (const auto& row : r.leaderboard) CHECK(row.model_name.find("_BAG") == std::string::npos);
        CHECK(r.manifest.validation_regime == "holdout");
    }
    SUBCASE("config 2: bagged names") {
        const auto& r = run_for(2);
        CHECK(r.leaderboard.size() == 12);
        for (const auto& row : r.leaderboard)
            if (row.model_name != "WeightedEnsemble_L2")
                CHECK(row.model_name.ends_with("_BAG_L1"));
        CHECK(r.manifest.validation_regime == "oof");
    }
    SUBCASE("config 3: multimodal zoo") {
        const auto& r = run_for(3);
        CHECK(r.leaderboard.size() == 7);
        CHECK(names(r.leaderboard).count("KNNUnif") == 0);
    }
    SUBCASE("config 4: refit-full names") {
        const auto& r = run_for(4);
        CHECK(r.leaderboard.size() == 7);
        for (const auto& row : r.leaderboard) CHECK(row.model_name.ends_with("_FULL"));
        CHECK(names(r.leaderboard).count("WeightedEnsemble_L2_FULL") == 1);
    }
}

TEST_CASE("run invariants") {
    for (int c : {1, 2, 3, 4}) {
        CAPTURE(c);
        const auto& r = run_for(c);
        CHECK(r.train.rows() == 92);
        CHECK(r.test.rows() == 23);
        CHECK(std::is_sorted(r.leaderboard.begin(), r.leaderboard.end(),
                             [](const LeaderboardRow& a, const LeaderboardRow& b) {
                                 return a.test_score > b.test_score;
                             }));
        // Every leaderboard model reads each test row exactly once.
        for (auto reads : r.manifest.test_row_reads) CHECK(reads == r.leaderboard.size());

        double best_member = -1e300, ens = 0;
        for (const auto& row : r.leaderboard) {
            if (row.model_name.starts_with("WeightedEnsemble")) ens = row.val_score;
            else best_member = std::max(best_member, row.val_score);
            // Test scores recompute from the stored predictor.
            const auto p = r.predictors.at(row.model_name)(r.test.features());
            CHECK(r2_value(r.test.targets(), p) == row.test_score);
        }
        CHECK(ens >= best_member - 1e-12);
    }
}

TEST_CASE("bagged validation scores recompute from stored oof predictions") {
    const auto& r = run_for(2);
    std::size_t checked = 0;
    for (const auto& a : r.artifacts) {
        if (a.kind != ArtifactKind::bagged) continue;
        const double v = r2_value(r.train.targets(), a.bagged->oof_predictions);
        CHECK(v == a.bagged->val_score);
        const auto row = std::find_if(r.leaderboard.begin(), r.leaderboard.end(),
                                      [&](const LeaderboardRow& l) { return l.model_name == a.name; });
        REQUIRE(row != r.leaderboard.end());
        CHECK(row->val_score == v);
        ++checked;
    }
    CHECK(checked == 11);

    const auto& r4 = run_for(4);
    for (const auto& row : r4.leaderboard) {
        if (row.model_name.starts_with("WeightedEnsemble")) continue;
        const auto src = row.model_name.substr(0, row.model_name.size() - 5);
        const auto rec = std::find_if(r4.manifest.models.begin(), r4.manifest.models.end(),
                                      [&](const ModelRecord& m) { return m.name == src; });
        REQUIRE(rec != r4.manifest.models.end());
        CHECK_FALSE(rec->on_leaderboard);
        CHECK(rec->val_score == row.val_score);
    }
}

TEST_CASE("runs are deterministic") {
    const auto again = run(RunConfig::for_number(3, 7), soils());
    const auto& first = run_for(3);
    REQUIRE(again.leaderboard.size() == first.leaderboard.size());
    for (std::size_t i = 0; i < first.leaderboard.size(); ++i) {
        CHECK(again.leaderboard[i].model_name == first.leaderboard[i].model_name);
        CHECK(again.leaderboard[i].test_score == first.leaderboard[i].test_score);
        CHECK(again.leaderboard[i].val_score == first.leaderboard[i].val_score);
    }
    CHECK(again.manifest.ensemble_weights == first.manifest.ensemble_weights);
}

TEST_CASE("time budget skips remaining models") {
    auto cfg = RunConfig::for_number(1, 7);
    cfg.time_budget_s = 1e-9;
    const auto r = run(cfg, soils());
    std::size_t skipped = 0;
    for (const auto& m : r.manifest.models) skipped += m.status == "skipped";
    CHECK(skipped >= 10);
    CHECK(r.successful_models() >= 1);
    CHECK(r.manifest.models.front().status == "ok");
}

TEST_CASE("duplicates are removed before splitting") {
    auto rows = testing::synthetic_soils(115, 21);
    for (std::size_t i = 0; i < 11; ++i) rows.push_back(rows[i]);
    auto cfg = RunConfig::for_number(3, 7);
    const auto r = run(cfg, to_dataset(rows, Target::omc));
    CHECK(r.manifest.source_rows == 126);
    CHECK(r.manifest.removed_duplicates == 11);
    CHECK(r.manifest.rows == 115);
    CHECK(r.train.rows() + r.test.rows() == 115);
}
